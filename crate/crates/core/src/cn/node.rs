use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::detector::{DetectorDecision, StochasticDetector, StochasticDetectorParams};
use super::warning::WarningKind;
use crate::deterrent::{pick_modification, DEFAULT_ALPHA_RANGE};
use crate::error::{Error, Result};
use crate::pn::{NegativeDecision, RepelCommand, ThermalFrame};
use crate::seed::labeled_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnConfig {
    pub node_id: String,
    /// Used when the run picks the stochastic detector.
    pub detector_params: StochasticDetectorParams,
    pub repel_duration_s: f64,
    pub flash_freq_hz: f64,
    pub alpha_range: (f64, f64),
    /// Seeds the per-frame deterrent choice.
    pub seed: u64,
}

impl Default for CnConfig {
    fn default() -> Self {
        Self {
            node_id: "cn0".into(),
            detector_params: StochasticDetectorParams::default(),
            repel_duration_s: 30.0,
            flash_freq_hz: 2.0,
            alpha_range: DEFAULT_ALPHA_RANGE,
            seed: 0,
        }
    }
}

impl CnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.repel_duration_s > 0.0 && self.flash_freq_hz > 0.0) {
            return Err(Error::invalid_config(
                "repel_duration_s and flash_freq_hz must be positive",
            ));
        }
        let (lo, hi) = self.alpha_range;
        if !(0.0 <= lo && lo < hi) {
            return Err(Error::invalid_config(format!(
                "alpha range [{lo}, {hi}] is degenerate"
            )));
        }
        StochasticDetector::new(self.detector_params).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CnEvent {
    FrameReceived(ThermalFrame),
    DetectorResult(DetectorDecision),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CnAction {
    RunDetector {
        frame: ThermalFrame,
    },
    PublishRepelCommand {
        command: RepelCommand,
    },
    PublishNegativeDecision {
        decision: NegativeDecision,
    },
    EmitWarning {
        kind: WarningKind,
        pn_id: String,
        decision: DetectorDecision,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CnStep {
    pub actions: Vec<CnAction>,
    pub anomaly: Option<String>,
}

/// Frames waiting for a detector verdict, and the ids already decided.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CnState {
    pub pending: BTreeMap<String, PendingFrame>,
    pub decided: BTreeSet<String>,
    pub positive_decisions: usize,
    pub negative_decisions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingFrame {
    pub pn_id: String,
    pub received_at_s: f64,
}

impl CnState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every frame id gets at most one decision; repeats of a frame or of a
    /// verdict are dropped silently, verdicts for frames never received are
    /// reported as anomalies.
    pub fn cn_step(&mut self, event: &CnEvent, config: &CnConfig, now_s: f64) -> CnStep {
        match event {
            CnEvent::FrameReceived(frame) => {
                let id = &frame.frame_id;
                if self.decided.contains(id) || self.pending.contains_key(id) {
                    return CnStep::default();
                }
                self.pending.insert(
                    id.clone(),
                    PendingFrame {
                        pn_id: frame.pn_id.clone(),
                        received_at_s: now_s,
                    },
                );
                CnStep {
                    actions: vec![CnAction::RunDetector {
                        frame: frame.clone(),
                    }],
                    anomaly: None,
                }
            }
            CnEvent::DetectorResult(decision) => {
                let id = &decision.frame_id;
                let Some(pending) = self.pending.remove(id) else {
                    if self.decided.contains(id) {
                        return CnStep::default();
                    }
                    let why = format!("decision for unknown frame {id}");
                    log::warn!("{why}");
                    return CnStep {
                        actions: Vec::new(),
                        anomaly: Some(why),
                    };
                };
                self.decided.insert(id.clone());
                if !decision.elephant_present {
                    self.negative_decisions += 1;
                    return CnStep {
                        actions: vec![CnAction::PublishNegativeDecision {
                            decision: NegativeDecision {
                                pn_id: pending.pn_id,
                                frame_id: id.clone(),
                                issued_at_s: now_s,
                            },
                        }],
                        anomaly: None,
                    };
                }
                self.positive_decisions += 1;
                let deterrent = pick_modification(
                    &mut labeled_rng(config.seed, &format!("deterrent/{id}")),
                    config.alpha_range,
                )
                .expect("alpha range checked by CnConfig::validate");
                let command = RepelCommand {
                    pn_id: pending.pn_id.clone(),
                    frame_id: id.clone(),
                    issued_at_s: now_s,
                    deterrent,
                    flash_freq_hz: config.flash_freq_hz,
                    duration_s: config.repel_duration_s,
                };
                let mut actions = vec![CnAction::PublishRepelCommand { command }];
                actions.extend(WarningKind::ALL.map(|kind| CnAction::EmitWarning {
                    kind,
                    pn_id: pending.pn_id.clone(),
                    decision: decision.clone(),
                }));
                CnStep {
                    actions,
                    anomaly: None,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(id: &str, pn: &str) -> CnEvent {
        CnEvent::FrameReceived(ThermalFrame::new(id, pn, 0.0))
    }

    fn verdict(id: &str, present: bool) -> CnEvent {
        CnEvent::DetectorResult(DetectorDecision {
            frame_id: id.into(),
            elephant_present: present,
            confidence: if present { 0.8 } else { 0.0 },
            boxes: vec![],
        })
    }

    #[test]
    fn positive_gives_one_command_and_two_warnings() {
        let cfg = CnConfig::default();
        let mut cn = CnState::new();
        let s = cn.cn_step(&frame("f1", "pn2"), &cfg, 1.0);
        assert!(matches!(s.actions[..], [CnAction::RunDetector { .. }]));
        let s = cn.cn_step(&verdict("f1", true), &cfg, 1.2);
        let cmds: Vec<_> = s
            .actions
            .iter()
            .filter_map(|a| match a {
                CnAction::PublishRepelCommand { command } => Some(command),
                _ => None,
            })
            .collect();
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].pn_id, "pn2");
        assert_eq!(cmds[0].issued_at_s, 1.2);
        let kinds: Vec<_> = s
            .actions
            .iter()
            .filter_map(|a| match a {
                CnAction::EmitWarning { kind, .. } => Some(*kind),
                _ => None,
            })
            .collect();
        assert_eq!(kinds, WarningKind::ALL);

        // duplicate verdict and duplicate frame are both no-ops
        assert_eq!(
            cn.cn_step(&verdict("f1", true), &cfg, 1.3),
            CnStep::default()
        );
        assert_eq!(
            cn.cn_step(&frame("f1", "pn2"), &cfg, 1.4),
            CnStep::default()
        );
    }

    #[test]
    fn negative_and_unknown() {
        let cfg = CnConfig::default();
        let mut cn = CnState::new();
        cn.cn_step(&frame("f1", "pn0"), &cfg, 0.0);
        let s = cn.cn_step(&verdict("f1", false), &cfg, 0.5);
        assert!(matches!(
            s.actions[..],
            [CnAction::PublishNegativeDecision { .. }]
        ));
        let s = cn.cn_step(&verdict("nope", true), &cfg, 0.6);
        assert!(s.actions.is_empty());
        assert!(s.anomaly.is_some());
    }

    #[test]
    fn deterrent_depends_on_frame_and_seed_only() {
        let cfg = CnConfig::default();
        let run = |t: f64| {
            let mut cn = CnState::new();
            cn.cn_step(&frame("f9", "pn0"), &cfg, t);
            match &cn.cn_step(&verdict("f9", true), &cfg, t).actions[0] {
                CnAction::PublishRepelCommand { command } => command.deterrent,
                _ => unreachable!(),
            }
        };
        assert_eq!(run(1.0), run(50.0));
    }
}
