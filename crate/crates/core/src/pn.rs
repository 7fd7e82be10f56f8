//! Peripheral node: seismic gating of the infrared camera, frame upload and
//! on-site repelling.
//!
//! [`pn_step`] is a pure transition function. The caller owns the clock,
//! performs the returned actions and schedules [`PnEvent::TimerExpired`] at
//! the deadline the new state reports.

use std::io::Write;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::cn::BoundingBox;
use crate::deterrent::{
    apply_modification, pick_modification, ModificationParams, DEFAULT_ALPHA_RANGE,
};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::seismic::{Algorithm1Params, WindowDetection};
use crate::signal::AudioClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PnConfig {
    pub node_id: String,
    /// Minimum ds that powers the camera; 1 or 2.
    pub ds_threshold: u8,
    pub alg1: Algorithm1Params,
    pub repel_cooldown_s: f64,
    pub flash_freq_hz: f64,
    /// Frames captured per trigger before waiting for a decision.
    pub ir_capture_count: u32,
    pub decision_timeout_s: f64,
    /// Start repelling on ds=2 alone, without waiting for the central node.
    pub prearm_on_ds2: bool,
    /// Repel duration used by pre-armed activations.
    pub prearm_repel_s: f64,
    pub broker_priority: Vec<String>,
}

impl Default for PnConfig {
    fn default() -> Self {
        Self {
            node_id: "pn0".into(),
            ds_threshold: 1,
            alg1: Algorithm1Params::default(),
            repel_cooldown_s: 60.0,
            flash_freq_hz: 2.0,
            ir_capture_count: 1,
            decision_timeout_s: 10.0,
            prearm_on_ds2: false,
            prearm_repel_s: 10.0,
            broker_priority: vec!["cn0".into()],
        }
    }
}

impl PnConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.ds_threshold, 1 | 2) {
            return Err(Error::invalid_config(format!(
                "ds_threshold must be 1 or 2, got {}",
                self.ds_threshold
            )));
        }
        if !(self.repel_cooldown_s >= 0.0) {
            return Err(Error::invalid_config("repel_cooldown_s must be >= 0"));
        }
        if !(self.flash_freq_hz > 0.0) || !(self.decision_timeout_s > 0.0) {
            return Err(Error::invalid_config(
                "flash_freq_hz and decision_timeout_s must be positive",
            ));
        }
        if self.ir_capture_count == 0 {
            return Err(Error::invalid_config("ir_capture_count must be at least 1"));
        }
        if self.node_id.is_empty() || self.node_id.contains('/') {
            return Err(Error::invalid_config(format!(
                "node id {:?} must be non-empty and free of '/'",
                self.node_id
            )));
        }
        self.alg1.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum PnState {
    Idle,
    IrActive {
        /// Score that triggered the camera, forwarded with the frames.
        ds: u8,
        pending: Vec<String>,
    },
    AwaitingDecision {
        deadline_s: f64,
        pending: Vec<String>,
    },
    Repelling {
        until_s: f64,
    },
    Cooldown {
        until_s: f64,
    },
}

impl PnState {
    pub fn name(&self) -> &'static str {
        match self {
            PnState::Idle => "idle",
            PnState::IrActive { .. } => "ir_active",
            PnState::AwaitingDecision { .. } => "awaiting_decision",
            PnState::Repelling { .. } => "repelling",
            PnState::Cooldown { .. } => "cooldown",
        }
    }

    /// Time at which this state expects a [`PnEvent::TimerExpired`].
    pub fn deadline(&self) -> Option<f64> {
        match *self {
            PnState::AwaitingDecision { deadline_s, .. } => Some(deadline_s),
            PnState::Repelling { until_s } | PnState::Cooldown { until_s } => Some(until_s),
            _ => None,
        }
    }

    /// Camera powered.
    pub fn ir_powered(&self) -> bool {
        matches!(
            self,
            PnState::IrActive { .. } | PnState::AwaitingDecision { .. }
        )
    }
}

/// Abstract infrared capture. `pixels` is row-major, `width * height`
/// values in [0, 1]. The `sim_*` fields are scenario ground truth and only
/// the oracle detector may read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFrame {
    pub frame_id: String,
    pub pn_id: String,
    pub timestamp_s: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<u8>,
    #[serde(
        default,
        rename = "pixels_b64",
        with = "pixel_block",
        skip_serializing_if = "Option::is_none"
    )]
    pub pixels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_ground_truth: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_boxes: Option<Vec<BoundingBox>>,
}

impl ThermalFrame {
    /// Metadata-only frame.
    pub fn new(frame_id: impl Into<String>, pn_id: impl Into<String>, timestamp_s: f64) -> Self {
        Self {
            frame_id: frame_id.into(),
            pn_id: pn_id.into(),
            timestamp_s,
            width: 160,
            height: 120,
            ds: None,
            pixels: None,
            sim_ground_truth: None,
            sim_boxes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(px) = &self.pixels {
            let want = self.width as usize * self.height as usize;
            if px.len() != want {
                return Err(Error::invalid_input(format!(
                    "frame {} has {} pixels, expected {}x{}",
                    self.frame_id,
                    px.len(),
                    self.width,
                    self.height
                )));
            }
            if px.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid_input(format!(
                    "frame {} has pixels outside [0, 1]",
                    self.frame_id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let f: Self = serde_json::from_slice(bytes)?;
        f.validate()?;
        Ok(f)
    }
}

/// Pixels travel as little-endian f64 bytes in one base-64 string.
mod pixel_block {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(px: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match px {
            None => s.serialize_none(),
            Some(v) => {
                let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
                s.serialize_some(&B64.encode(bytes))
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let Some(text) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        let bytes = B64.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom(
                "pixel block is not a whole number of f64",
            ));
        }
        Ok(Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepelCommand {
    pub pn_id: String,
    /// Frame the decision was made on.
    pub frame_id: String,
    pub issued_at_s: f64,
    pub deterrent: ModificationParams,
    pub flash_freq_hz: f64,
    pub duration_s: f64,
}

impl RepelCommand {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.flash_freq_hz > 0.0) {
            return Err(Error::invalid_input(
                "repel command needs positive duration and flash frequency",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeDecision {
    pub pn_id: String,
    pub frame_id: String,
    pub issued_at_s: f64,
}

/// What the central node sends back for a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum PnCommand {
    Repel(RepelCommand),
    Negative(NegativeDecision),
}

impl PnCommand {
    pub fn frame_id(&self) -> &str {
        match self {
            PnCommand::Repel(c) => &c.frame_id,
            PnCommand::Negative(n) => &n.frame_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PnEvent {
    SeismicWindowReady(WindowDetection),
    FrameCaptured(ThermalFrame),
    CommandReceived(PnCommand),
    TimerExpired,
}

impl PnEvent {
    pub fn name(&self) -> &'static str {
        match self {
            PnEvent::SeismicWindowReady(_) => "seismic_window",
            PnEvent::FrameCaptured(_) => "frame_captured",
            PnEvent::CommandReceived(_) => "command",
            PnEvent::TimerExpired => "timer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PnAction {
    CaptureFrame {
        ds: u8,
    },
    PublishFrame {
        frame: ThermalFrame,
    },
    PlayDeterrent {
        command: RepelCommand,
    },
    Flash {
        freq_hz: f64,
        duration_s: f64,
    },
    /// A ds observed while repelling or cooling down.
    RecordDs {
        ds: u8,
    },
    ScheduleTimer {
        at_s: f64,
    },
}

impl PnAction {
    pub fn name(&self) -> &'static str {
        match self {
            PnAction::CaptureFrame { .. } => "capture_frame",
            PnAction::PublishFrame { .. } => "publish_frame",
            PnAction::PlayDeterrent { .. } => "play_deterrent",
            PnAction::Flash { .. } => "flash",
            PnAction::RecordDs { .. } => "record_ds",
            PnAction::ScheduleTimer { .. } => "schedule_timer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnStep {
    pub state: PnState,
    pub actions: Vec<PnAction>,
    /// Set when the event was not valid in the current state; the state is
    /// then unchanged.
    pub rejected: Option<String>,
}

fn reject(state: &PnState, why: String) -> PnStep {
    log::debug!("pn transition rejected: {why}");
    PnStep {
        state: state.clone(),
        actions: Vec::new(),
        rejected: Some(why),
    }
}

fn moved(state: PnState, mut actions: Vec<PnAction>) -> PnStep {
    if let Some(at_s) = state.deadline() {
        actions.push(PnAction::ScheduleTimer { at_s });
    }
    PnStep {
        state,
        actions,
        rejected: None,
    }
}

/// Seed for a pre-armed activation: a function of the node and the window
/// that triggered it, so the step stays pure.
fn prearm_seed(node_id: &str, window: &WindowDetection) -> u64 {
    crate::seed::derive_seed(
        window.window_index as u64,
        &format!("prearm/{node_id}/{}", window.window_start_s.to_bits()),
    )
}

pub fn pn_step(state: &PnState, event: &PnEvent, config: &PnConfig, now_s: f64) -> PnStep {
    use PnEvent as E;
    use PnState as S;

    match (state, event) {
        (S::Idle, E::SeismicWindowReady(w)) => {
            let ds = w.ds.value();
            if ds < config.ds_threshold {
                return moved(S::Idle, Vec::new());
            }
            if config.prearm_on_ds2 && ds == 2 {
                let params = pick_modification(
                    &mut rng_from_seed(prearm_seed(&config.node_id, w)),
                    DEFAULT_ALPHA_RANGE,
                )
                .expect("default alpha range is valid");
                let command = RepelCommand {
                    pn_id: config.node_id.clone(),
                    frame_id: format!("prearm-{}", w.window_index),
                    issued_at_s: now_s,
                    deterrent: params,
                    flash_freq_hz: config.flash_freq_hz,
                    duration_s: config.prearm_repel_s,
                };
                return repel(command, now_s);
            }
            moved(
                S::IrActive {
                    ds,
                    pending: Vec::new(),
                },
                vec![PnAction::CaptureFrame { ds }],
            )
        }
        (S::IrActive { .. } | S::AwaitingDecision { .. }, E::SeismicWindowReady(_)) => PnStep {
            state: state.clone(),
            actions: Vec::new(),
            rejected: None,
        },
        (S::Repelling { .. } | S::Cooldown { .. }, E::SeismicWindowReady(w)) => PnStep {
            state: state.clone(),
            actions: vec![PnAction::RecordDs { ds: w.ds.value() }],
            rejected: None,
        },

        (S::IrActive { ds, pending }, E::FrameCaptured(frame)) => {
            if frame.pn_id != config.node_id {
                return reject(
                    state,
                    format!("frame {} belongs to {}", frame.frame_id, frame.pn_id),
                );
            }
            let mut frame = frame.clone();
            frame.ds = Some(*ds);
            let mut pending = pending.clone();
            pending.push(frame.frame_id.clone());
            let mut actions = vec![PnAction::PublishFrame { frame }];
            if pending.len() >= config.ir_capture_count as usize {
                moved(
                    S::AwaitingDecision {
                        deadline_s: now_s + config.decision_timeout_s,
                        pending,
                    },
                    actions,
                )
            } else {
                actions.push(PnAction::CaptureFrame { ds: *ds });
                moved(S::IrActive { ds: *ds, pending }, actions)
            }
        }

        (
            S::AwaitingDecision {
                deadline_s,
                pending,
            },
            E::CommandReceived(cmd),
        ) => {
            if !pending.iter().any(|f| f == cmd.frame_id()) {
                return reject(
                    state,
                    format!("decision for unexpected frame {}", cmd.frame_id()),
                );
            }
            match cmd {
                PnCommand::Repel(c) => {
                    if let Err(e) = c.validate() {
                        return reject(state, e.to_string());
                    }
                    repel(c.clone(), now_s)
                }
                PnCommand::Negative(n) => {
                    let rest: Vec<String> = pending
                        .iter()
                        .filter(|f| **f != n.frame_id)
                        .cloned()
                        .collect();
                    if rest.is_empty() {
                        moved(S::Idle, Vec::new())
                    } else {
                        moved(
                            S::AwaitingDecision {
                                deadline_s: *deadline_s,
                                pending: rest,
                            },
                            Vec::new(),
                        )
                    }
                }
            }
        }

        (S::AwaitingDecision { deadline_s, .. }, E::TimerExpired) if now_s >= *deadline_s => {
            moved(S::Idle, Vec::new())
        }
        (S::Repelling { until_s }, E::TimerExpired) if now_s >= *until_s => {
            let until_s = until_s + config.repel_cooldown_s;
            if config.repel_cooldown_s > 0.0 {
                moved(S::Cooldown { until_s }, Vec::new())
            } else {
                moved(S::Idle, Vec::new())
            }
        }
        (S::Cooldown { until_s }, E::TimerExpired) if now_s >= *until_s => {
            moved(S::Idle, Vec::new())
        }

        (s, e) => reject(
            s,
            format!("{} not accepted in state {}", e.name(), s.name()),
        ),
    }
}

fn repel(command: RepelCommand, now_s: f64) -> PnStep {
    let flash = PnAction::Flash {
        freq_hz: command.flash_freq_hz,
        duration_s: command.duration_s,
    };
    let until_s = now_s + command.duration_s;
    moved(
        PnState::Repelling { until_s },
        vec![PnAction::PlayDeterrent { command }, flash],
    )
}

/// Square-wave flashlight pattern: on for the first half of each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashSchedule {
    pub freq_hz: f64,
    pub duration_s: f64,
    /// `(on_s, off_s)` offsets from activation.
    pub pulses: Vec<(f64, f64)>,
}

impl FlashSchedule {
    pub fn square(freq_hz: f64, duration_s: f64) -> Result<Self> {
        if !(freq_hz > 0.0 && duration_s > 0.0) {
            return Err(Error::invalid_input(
                "flash needs positive frequency and duration",
            ));
        }
        let period = 1.0 / freq_hz;
        // tolerate 10 * 0.1 style rounding in the cycle count
        let cycles = (duration_s * freq_hz + 1e-9).floor() as usize;
        let pulses = (0..cycles)
            .map(|k| {
                let on = k as f64 * period;
                (on, on + period / 2.0)
            })
            .collect();
        Ok(Self {
            freq_hz,
            duration_s,
            pulses,
        })
    }

    pub fn cycles(&self) -> usize {
        self.pulses.len()
    }
}

/// Applies the commanded modification to the node's bee recording and
/// builds the matching flash pattern.
pub fn execute_repel(
    cmd: &RepelCommand,
    bee_clip: &AudioClip,
) -> Result<(AudioClip, FlashSchedule)> {
    cmd.validate()?;
    let audio = apply_modification(bee_clip, &cmd.deterrent)?;
    let flash = FlashSchedule::square(cmd.flash_freq_hz, cmd.duration_s)?;
    Ok((audio, flash))
}

/// Fraction of `[log[0].0, end_s]` spent with the camera powered. `log` holds
/// `(time entered, state)` in time order.
pub fn ir_duty_cycle(log: &[(f64, PnState)], end_s: f64) -> Result<f64> {
    let Some((start, _)) = log.first() else {
        return Err(Error::invalid_input("empty state log"));
    };
    let total = end_s - start;
    if !(total > 0.0) {
        return Err(Error::invalid_input(format!(
            "log end {end_s} is not after its start {start}"
        )));
    }
    let mut on = 0.0;
    for (i, (t, state)) in log.iter().enumerate() {
        let next = log.get(i + 1).map_or(end_s, |(n, _)| *n).min(end_s);
        if next < *t {
            return Err(Error::invalid_input("state log is not in time order"));
        }
        if state.ir_powered() {
            on += next - t;
        }
    }
    Ok(on / total)
}

/// One line of a node's action log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t: f64,
    pub node: String,
    pub state_from: String,
    pub state_to: String,
    pub action: String,
}

impl ActionRecord {
    /// Records for one step: one per action, or a single line with an
    /// empty action when the state changed without any.
    pub fn from_step(t: f64, node: &str, from: &PnState, step: &PnStep) -> Vec<ActionRecord> {
        let rec = |action: &str| ActionRecord {
            t,
            node: node.to_string(),
            state_from: from.name().to_string(),
            state_to: step.state.name().to_string(),
            action: action.to_string(),
        };
        let mut out: Vec<ActionRecord> = step
            .actions
            .iter()
            .filter(|a| !matches!(a, PnAction::ScheduleTimer { .. }))
            .map(|a| rec(a.name()))
            .collect();
        if out.is_empty() && from.name() != step.state.name() {
            out.push(rec(""));
        }
        if let Some(why) = &step.rejected {
            out.push(rec(&format!("rejected: {why}")));
        }
        out
    }
}

pub fn write_action_log<W: Write>(records: &[ActionRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
