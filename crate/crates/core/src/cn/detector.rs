use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::BoundingBox;
use crate::error::{Error, Result};
use crate::pn::ThermalFrame;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorDecision {
    pub frame_id: String,
    pub elephant_present: bool,
    pub confidence: f64,
    #[serde(default)]
    pub boxes: Vec<BoundingBox>,
}

impl DetectorDecision {
    pub fn absent(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            elephant_present: false,
            confidence: 0.0,
            boxes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid_input(format!(
                "decision confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if self.elephant_present && self.confidence <= 0.0 {
            return Err(Error::invalid_input(
                "positive decision with zero confidence",
            ));
        }
        self.boxes.iter().try_for_each(BoundingBox::validate)
    }
}

/// Image detector plug-in. Only [`OracleDetector`] and the simulation
/// stand-in [`StochasticDetector`] look at a frame's `sim_*` fields.
pub trait Detector {
    fn detect(&self, frame: &ThermalFrame) -> Result<DetectorDecision>;

    /// Whether decisions carry boxes, which AP evaluation needs.
    fn emits_boxes(&self) -> bool {
        true
    }
}

pub fn detect_frame(frame: &ThermalFrame, detector: &dyn Detector) -> Result<DetectorDecision> {
    let d = detector.detect(frame)?;
    d.validate()?;
    Ok(d)
}

fn ground_truth(frame: &ThermalFrame) -> Result<bool> {
    frame.sim_ground_truth.ok_or_else(|| {
        Error::invalid_input(format!("frame {} carries no ground truth", frame.frame_id))
    })
}

/// Reports exactly the scenario ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDetector;

impl Detector for OracleDetector {
    fn detect(&self, frame: &ThermalFrame) -> Result<DetectorDecision> {
        let present = ground_truth(frame)?;
        let boxes = if present {
            frame.sim_boxes.clone().unwrap_or_default()
        } else {
            Vec::new()
        };
        Ok(DetectorDecision {
            frame_id: frame.frame_id.clone(),
            elephant_present: present,
            confidence: if present { 1.0 } else { 0.0 },
            boxes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StochasticDetectorParams {
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
    pub seed: u64,
}

impl Default for StochasticDetectorParams {
    fn default() -> Self {
        Self {
            true_positive_rate: 0.9,
            false_positive_rate: 0.05,
            seed: 0,
        }
    }
}

/// Bernoulli stand-in for an image model, deterministic per
/// `(seed, frame_id)`.
#[derive(Debug, Clone)]
pub struct StochasticDetector {
    params: StochasticDetectorParams,
}

impl StochasticDetector {
    pub fn new(params: StochasticDetectorParams) -> Result<Self> {
        for r in [params.true_positive_rate, params.false_positive_rate] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid_config(format!(
                    "detector rate {r} outside [0, 1]"
                )));
            }
        }
        Ok(Self { params })
    }
}

impl Detector for StochasticDetector {
    fn detect(&self, frame: &ThermalFrame) -> Result<DetectorDecision> {
        let truth = ground_truth(frame)?;
        let mut rng = rng_from_seed(derive_seed(self.params.seed, &frame.frame_id));
        let rate = if truth {
            self.params.true_positive_rate
        } else {
            self.params.false_positive_rate
        };
        // always draw both numbers so the stream does not depend on the rate
        let u: f64 = rng.random();
        let confidence = rng.random_range(0.5..=1.0);
        if u >= rate {
            return Ok(DetectorDecision::absent(&frame.frame_id));
        }
        let boxes = match (&frame.sim_boxes, truth) {
            (Some(b), true) if !b.is_empty() => {
                b.iter().map(|t| BoundingBox { confidence, ..*t }).collect()
            }
            _ => {
                let (w, h) = (frame.width.max(2) as f64, frame.height.max(2) as f64);
                let x = rng.random_range(0.0..w / 2.0);
                let y = rng.random_range(0.0..h / 2.0);
                vec![BoundingBox {
                    x_min: x,
                    y_min: y,
                    x_max: x + w / 4.0,
                    y_max: y + h / 4.0,
                    confidence,
                }]
            }
        };
        Ok(DetectorDecision {
            frame_id: frame.frame_id.clone(),
            elephant_present: true,
            confidence,
            boxes,
        })
    }
}

/// Replays fixed decisions by frame id; frames not listed are negative.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDetector {
    pub decisions: BTreeMap<String, DetectorDecision>,
}

impl ScriptedDetector {
    pub fn new(decisions: impl IntoIterator<Item = DetectorDecision>) -> Self {
        Self {
            decisions: decisions
                .into_iter()
                .map(|d| (d.frame_id.clone(), d))
                .collect(),
        }
    }
}

impl Detector for ScriptedDetector {
    fn detect(&self, frame: &ThermalFrame) -> Result<DetectorDecision> {
        Ok(self
            .decisions
            .get(&frame.frame_id)
            .cloned()
            .unwrap_or_else(|| DetectorDecision::absent(&frame.frame_id)))
    }
}

/// Which built-in detector a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    Oracle,
    Stochastic,
}

impl DetectorKind {
    pub fn build(self, params: StochasticDetectorParams) -> Result<Box<dyn Detector>> {
        Ok(match self {
            DetectorKind::Oracle => Box::new(OracleDetector),
            DetectorKind::Stochastic => Box::new(StochasticDetector::new(params)?),
        })
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(DetectorKind::Oracle),
            "stochastic" => Ok(DetectorKind::Stochastic),
            other => Err(Error::invalid_input(format!("unknown detector {other:?}"))),
        }
    }
}
