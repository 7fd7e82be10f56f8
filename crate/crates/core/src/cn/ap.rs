use serde::{Deserialize, Serialize};

use super::detector::{detect_frame, Detector};
use super::geometry::{iou, BoundingBox};
use crate::error::{Error, Result};
use crate::pn::ThermalFrame;

pub const AP_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrame {
    pub frame: ThermalFrame,
    pub truth: Vec<BoundingBox>,
    #[serde(default)]
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrameSet {
    pub frames: Vec<LabeledFrame>,
}

impl LabeledFrameSet {
    pub fn validate(&self) -> Result<()> {
        for lf in &self.frames {
            lf.frame.validate()?;
            lf.truth.iter().try_for_each(BoundingBox::validate)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let set: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        set.validate()?;
        Ok(set)
    }

    /// Frames as detectors see them: ground truth copied into the `sim_*`
    /// fields for the oracle.
    fn prepared(&self) -> impl Iterator<Item = (ThermalFrame, &[BoundingBox])> {
        self.frames.iter().map(|lf| {
            let mut f = lf.frame.clone();
            f.sim_boxes = Some(lf.truth.clone());
            f.sim_ground_truth.get_or_insert(!lf.truth.is_empty());
            (f, lf.truth.as_slice())
        })
    }
}

/// Precision-recall points after each prediction, in descending confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

/// Greedy matching at IoU >= 0.5: predictions in descending confidence
/// each claim the best-overlapping unmatched truth box of their frame.
pub fn pr_curve(detector: &dyn Detector, set: &LabeledFrameSet) -> Result<PrCurve> {
    if !detector.emits_boxes() {
        return Err(Error::invalid_input(
            "AP evaluation needs a detector that outputs boxes",
        ));
    }
    set.validate()?;
    let n_truth: usize = set.frames.iter().map(|f| f.truth.len()).sum();
    if n_truth == 0 {
        return Err(Error::invalid_input("labeled set has no truth boxes"));
    }

    let mut preds: Vec<(usize, BoundingBox)> = Vec::new();
    let mut truths: Vec<&[BoundingBox]> = Vec::new();
    for (i, (frame, truth)) in set.prepared().enumerate() {
        let d = detect_frame(&frame, detector)?;
        preds.extend(d.boxes.into_iter().map(|b| (i, b)));
        truths.push(truth);
    }
    // stable: equal confidences keep detector order
    preds.sort_by(|a, b| b.1.confidence.total_cmp(&a.1.confidence));

    let mut matched: Vec<Vec<bool>> = truths.iter().map(|t| vec![false; t.len()]).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = PrCurve {
        recall: Vec::with_capacity(preds.len()),
        precision: Vec::with_capacity(preds.len()),
    };
    for (frame, b) in &preds {
        let best = truths[*frame]
            .iter()
            .enumerate()
            .filter(|(j, _)| !matched[*frame][*j])
            .map(|(j, t)| (j, iou(b, t)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        match best {
            Some((j, o)) if o >= AP_IOU_THRESHOLD => {
                matched[*frame][j] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        curve.recall.push(tp as f64 / n_truth as f64);
        curve.precision.push(tp as f64 / (tp + fp) as f64);
    }
    Ok(curve)
}

/// Area under the all-point interpolated precision-recall curve.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let n = curve.recall.len();
    let mut envelope = curve.precision.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (&r, &p) in curve.recall.iter().zip(&envelope) {
        ap += (r - prev_r) * p;
        prev_r = r;
    }
    ap
}

pub fn evaluate_ap50(detector: &dyn Detector, set: &LabeledFrameSet) -> Result<f64> {
    Ok(average_precision(&pr_curve(detector, set)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cn::{DetectorDecision, OracleDetector, ScriptedDetector};

    fn set(n: usize) -> LabeledFrameSet {
        LabeledFrameSet {
            frames: (0..n)
                .map(|i| LabeledFrame {
                    frame: ThermalFrame::new(format!("f{i}"), "pn0", i as f64),
                    truth: vec![BoundingBox::truth(10.0, 10.0, 50.0, 40.0).unwrap()],
                    split: "test".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn oracle_is_perfect_and_silence_is_zero() {
        let s = set(5);
        assert_eq!(evaluate_ap50(&OracleDetector, &s).unwrap(), 1.0);
        assert_eq!(
            evaluate_ap50(&ScriptedDetector::default(), &s).unwrap(),
            0.0
        );
    }

    #[test]
    fn false_positive_first_halves_precision() {
        let s = set(2);
        let hit = |f: &str, c: f64, x: f64| DetectorDecision {
            frame_id: f.into(),
            elephant_present: true,
            confidence: c,
            boxes: vec![BoundingBox::new(x, 10.0, x + 40.0, 40.0, c).unwrap()],
        };
        // miss at 0.9, hit at 0.8, hit at 0.7: P = 0, 1/2, 2/3 at R = 0, 1/2, 1
        let det = ScriptedDetector::new([
            DetectorDecision {
                boxes: vec![
                    BoundingBox::new(100.0, 100.0, 120.0, 120.0, 0.9).unwrap(),
                    BoundingBox::new(10.0, 10.0, 50.0, 40.0, 0.8).unwrap(),
                ],
                ..hit("f0", 0.9, 0.0)
            },
            hit("f1", 0.7, 10.0),
        ]);
        let ap = evaluate_ap50(&det, &s).unwrap();
        assert!((ap - 2.0 / 3.0).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn needs_truth() {
        let mut s = set(1);
        s.frames[0].truth.clear();
        assert!(evaluate_ap50(&OracleDetector, &s).is_err());
    }
}
