use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    compute_metrics, sort_warnings, MetricsReport, RunLogs, ACTIONS_FILE, DETECTIONS_FILE,
    DETERRENTS_FILE, METRICS_FILE, TRACE_FILE,
};
use super::scenario::{Scenario, SimConfig, CN_CLIENT};
use crate::cn::{
    detect_frame, warning_record, write_to_sinks, BoundingBox, CnAction, CnConfig, CnEvent,
    CnState, CommandSink, Detector, DetectorDecision, JsonlSink, WarningKind, WarningRecord,
    WarningSink,
};
use crate::deterrent::ModificationParams;
use crate::error::{Error, Result};
use crate::mesh::{
    command_topic, frame_topic, BrokerTransition, Delivery, Mesh, MeshConfig, Qos, ALL_FRAMES,
    WARNING_TOPIC,
};
use crate::pn::{
    execute_repel, pn_step, ActionRecord, PnAction, PnCommand, PnConfig, PnEvent, PnState,
    ThermalFrame,
};
use crate::seed::derive_seed;
use crate::seismic::{detect_stream, WindowDetection};
use crate::signal::{
    background_noise, rms, rumble_waveform, samples_for, synth_bee_buzz, AudioClip, SeismicTrace,
};

/// One executed repel activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterrentRecord {
    pub t: f64,
    pub pn_id: String,
    pub frame_id: String,
    pub deterrent: ModificationParams,
    pub audio_samples: usize,
    pub audio_frame_rate_hz: f64,
    pub flash_pulses: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub logs: RunLogs,
    /// `(time entered, state)` per node, starting with `(0, Idle)`.
    pub state_logs: BTreeMap<String, Vec<(f64, PnState)>>,
    pub detections: BTreeMap<String, Vec<WindowDetection>>,
    /// `(time, frame)` for every frame a node published.
    pub frames_published: Vec<(f64, ThermalFrame)>,
    /// Distinct frame ids the central node received, with first arrival.
    pub frames_received: BTreeMap<String, f64>,
    pub decisions: Vec<DetectorDecision>,
    pub deterrents: Vec<DeterrentRecord>,
    pub transitions: Vec<BrokerTransition>,
    pub anomalies: Vec<String>,
}

/// The seismic trace node `pn` records: white ground noise plus every
/// rumble of an event that affects it. A rumble's SNR is taken relative to
/// the noise level; a rumble without one is added at its own amplitude.
pub fn node_trace(scenario: &Scenario, config: &SimConfig, pn: &str) -> Result<SeismicTrace> {
    let fs = config.sample_rate_hz;
    let n = samples_for(scenario.duration_s, fs);
    let mut samples = background_noise(
        n,
        config.noise_std,
        derive_seed(scenario.seed, &format!("seismic/{pn}")),
    );
    for ev in scenario
        .events
        .iter()
        .filter(|e| e.affected.iter().any(|a| a == pn))
    {
        let mut wave = rumble_waveform(&ev.rumble, fs)?;
        if let Some(snr) = ev.rumble.snr_db {
            let r = rms(&wave);
            if r > 0.0 {
                let k = config.noise_std * 10f64.powf(snr / 20.0) / r;
                wave.iter_mut().for_each(|s| *s *= k);
            }
        }
        let start = samples_for(ev.t_onset_s, fs);
        for (dst, w) in samples.iter_mut().skip(start).zip(&wave) {
            *dst += w;
        }
    }
    SeismicTrace::new(samples, fs, 0.0)
}

enum Kind {
    Window(usize, WindowDetection),
    PnTimer(usize, f64),
    FrameReady(usize, ThermalFrame),
    DetectorDone(DetectorDecision),
    BrokerKill(String),
    BrokerRevive(String),
}

struct Pending {
    t: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// reversed: BinaryHeap pops the earliest (t, seq)
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.seq.cmp(&self.seq))
    }
}

struct Node {
    id: String,
    config: PnConfig,
    state: PnState,
    state_log: Vec<(f64, PnState)>,
    seen_msgs: BTreeSet<u64>,
    frames_taken: usize,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    config: &'a SimConfig,
    cn_config: CnConfig,
    mesh: Mesh,
    queue: BinaryHeap<Pending>,
    seq: u64,
    nodes: Vec<Node>,
    cn: CnState,
    cn_seen: BTreeSet<u64>,
    detector: Box<dyn Detector>,
    sinks: Vec<Box<dyn WarningSink>>,
    bee: AudioClip,
    actions: Vec<ActionRecord>,
    warnings: Vec<WarningRecord>,
    frames_published: Vec<(f64, ThermalFrame)>,
    frames_received: BTreeMap<String, f64>,
    decisions: Vec<DetectorDecision>,
    deterrents: Vec<DeterrentRecord>,
    anomalies: Vec<String>,
}

/// Box the simulated camera reports around a visible animal.
const TRUTH_BOX: (f64, f64, f64, f64) = (40.0, 30.0, 120.0, 90.0);

impl Sim<'_> {
    fn push(&mut self, t: f64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Pending {
            t,
            seq: self.seq,
            kind,
        });
    }

    fn drive_pn(&mut self, idx: usize, event: PnEvent, t: f64) -> Result<()> {
        let node = &mut self.nodes[idx];
        let step = pn_step(&node.state, &event, &node.config, t);
        self.actions
            .extend(ActionRecord::from_step(t, &node.id, &node.state, &step));
        if step.state != node.state {
            node.state_log.push((t, step.state.clone()));
        }
        node.state = step.state;
        let id = node.id.clone();
        for action in step.actions {
            match action {
                PnAction::CaptureFrame { .. } => {
                    let node = &mut self.nodes[idx];
                    node.frames_taken += 1;
                    let at = t + self.config.capture_delay_s;
                    let mut frame =
                        ThermalFrame::new(format!("{id}-f{}", node.frames_taken), &id, at);
                    let visible = self.scenario.thermal_truth(&id, at);
                    frame.sim_ground_truth = Some(visible);
                    frame.sim_boxes = Some(if visible {
                        let (x0, y0, x1, y1) = TRUTH_BOX;
                        vec![BoundingBox::truth(x0, y0, x1, y1)?]
                    } else {
                        Vec::new()
                    });
                    self.push(at, Kind::FrameReady(idx, frame));
                }
                PnAction::PublishFrame { frame } => {
                    self.mesh.publish(
                        &id,
                        &frame_topic(&id),
                        frame.to_json()?,
                        Qos::AtLeastOnce,
                    )?;
                    self.frames_published.push((t, frame));
                }
                PnAction::PlayDeterrent { command } => {
                    let (audio, flash) = execute_repel(&command, &self.bee)?;
                    self.deterrents.push(DeterrentRecord {
                        t,
                        pn_id: id.clone(),
                        frame_id: command.frame_id.clone(),
                        deterrent: command.deterrent,
                        audio_samples: audio.len(),
                        audio_frame_rate_hz: audio.frame_rate_hz,
                        flash_pulses: flash.cycles(),
                    });
                }
                PnAction::ScheduleTimer { at_s } => self.push(at_s, Kind::PnTimer(idx, at_s)),
                PnAction::Flash { .. } | PnAction::RecordDs { .. } => {}
            }
        }
        Ok(())
    }

    fn drive_cn(&mut self, event: CnEvent, t: f64) -> Result<()> {
        let step = self.cn.cn_step(&event, &self.cn_config, t);
        self.anomalies.extend(step.anomaly);
        for action in step.actions {
            match action {
                CnAction::RunDetector { frame } => {
                    let decision = detect_frame(&frame, self.detector.as_ref())?;
                    self.push(
                        t + self.config.detector_delay_s,
                        Kind::DetectorDone(decision),
                    );
                }
                CnAction::PublishRepelCommand { command } => {
                    let topic = command_topic(&command.pn_id);
                    let payload = serde_json::to_vec(&PnCommand::Repel(command))?;
                    self.mesh
                        .publish(CN_CLIENT, &topic, payload, Qos::AtLeastOnce)?;
                }
                CnAction::PublishNegativeDecision { decision } => {
                    let topic = command_topic(&decision.pn_id);
                    let payload = serde_json::to_vec(&PnCommand::Negative(decision))?;
                    self.mesh
                        .publish(CN_CLIENT, &topic, payload, Qos::AtLeastOnce)?;
                }
                CnAction::EmitWarning {
                    kind,
                    pn_id,
                    decision,
                } => {
                    let record = warning_record(kind, &decision, &pn_id, t);
                    let mut sinks: Vec<&mut dyn WarningSink> = self
                        .sinks
                        .iter_mut()
                        .map(|s| s.as_mut() as &mut dyn WarningSink)
                        .collect();
                    for (i, e) in write_to_sinks(&record, &mut sinks) {
                        self.anomalies.push(format!("warning sink {i}: {e}"));
                    }
                    self.mesh.publish(
                        CN_CLIENT,
                        WARNING_TOPIC,
                        serde_json::to_vec(&record)?,
                        Qos::AtLeastOnce,
                    )?;
                    self.warnings.push(record);
                }
            }
        }
        Ok(())
    }

    fn deliver(&mut self, d: Delivery) -> Result<()> {
        if d.to == CN_CLIENT {
            if !self.cn_seen.insert(d.msg.msg_id) {
                return Ok(());
            }
            if d.msg.topic == WARNING_TOPIC {
                return Ok(());
            }
            let frame = ThermalFrame::from_json(&d.msg.payload)?;
            self.frames_received
                .entry(frame.frame_id.clone())
                .or_insert(d.t);
            return self.drive_cn(CnEvent::FrameReceived(frame), d.t);
        }
        let Some(idx) = self.nodes.iter().position(|n| n.id == d.to) else {
            return Ok(());
        };
        if !self.nodes[idx].seen_msgs.insert(d.msg.msg_id) {
            return Ok(());
        }
        let cmd: PnCommand = serde_json::from_slice(&d.msg.payload)?;
        self.drive_pn(idx, PnEvent::CommandReceived(cmd), d.t)
    }

    fn handle(&mut self, p: Pending) -> Result<()> {
        let t = p.t;
        match p.kind {
            Kind::Window(idx, w) => self.drive_pn(idx, PnEvent::SeismicWindowReady(w), t),
            Kind::PnTimer(idx, at) => {
                // a timer whose state has since been left is stale
                if self.nodes[idx].state.deadline() == Some(at) {
                    self.drive_pn(idx, PnEvent::TimerExpired, t)
                } else {
                    Ok(())
                }
            }
            Kind::FrameReady(idx, frame) => self.drive_pn(idx, PnEvent::FrameCaptured(frame), t),
            Kind::DetectorDone(decision) => {
                self.decisions.push(decision.clone());
                self.drive_cn(CnEvent::DetectorResult(decision), t)
            }
            Kind::BrokerKill(b) => self.mesh.kill_broker(&b),
            Kind::BrokerRevive(b) => self.mesh.revive_broker(&b),
        }
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DetectionLine<'a> {
    pn_id: &'a str,
    #[serde(flatten)]
    window: &'a WindowDetection,
}

/// Runs `scenario` end to end. Every random choice derives from the
/// scenario seed, so the same inputs give the same logs and report. When
/// the config names an output directory the logs and `metrics.json` are
/// written there.
pub fn run_scenario(scenario: &Scenario, config: &SimConfig) -> Result<RunOutcome> {
    scenario.validate()?;
    config.validate()?;
    let mesh_config: MeshConfig = scenario
        .network_config
        .clone()
        .unwrap_or_else(|| config.mesh.clone());
    mesh_config.validate()?;
    if mesh_config.failover.brokers.iter().any(|b| b == CN_CLIENT)
        || scenario
            .pns
            .iter()
            .any(|p| mesh_config.failover.brokers.contains(&p.id))
    {
        return Err(Error::invalid_config("node ids and broker names overlap"));
    }
    let seed = scenario.seed;

    let mut params = config.cn.detector_params;
    params.seed = derive_seed(seed, &format!("detector/{}", params.seed));
    let detector = scenario.detector.build(params)?;
    let mut cn_config = config.cn.clone();
    cn_config.seed = derive_seed(seed, &format!("deterrent/{}", config.cn.seed));

    let mut sinks: Vec<Box<dyn WarningSink>> = Vec::new();
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
        let mut sink = JsonlSink::new(dir)?;
        for kind in WarningKind::ALL {
            let p = sink.path(kind);
            if p.exists() {
                std::fs::remove_file(p)?;
            }
        }
        sink.touch_all()?;
        sinks.push(Box::new(sink));
    }
    if let Some(cmd) = &config.warning_command {
        sinks.push(Box::new(CommandSink {
            program: cmd[0].clone().into(),
            args: cmd[1..].to_vec(),
        }));
    }

    let mut mesh = Mesh::new(mesh_config.clone(), derive_seed(seed, "mesh"))?;
    for pn in &scenario.pns {
        mesh.add_client(&pn.id)?;
        mesh.subscribe(&pn.id, &command_topic(&pn.id))?;
    }
    mesh.add_client(CN_CLIENT)?;
    mesh.subscribe(CN_CLIENT, ALL_FRAMES)?;

    let nodes = scenario
        .pns
        .iter()
        .map(|pn| {
            let mut c = config.pn.clone();
            c.node_id = pn.id.clone();
            c.alg1 = config.alg1.clone();
            c.broker_priority = mesh_config.failover.brokers.clone();
            Node {
                id: pn.id.clone(),
                config: c,
                state: PnState::Idle,
                state_log: vec![(0.0, PnState::Idle)],
                seen_msgs: BTreeSet::new(),
                frames_taken: 0,
            }
        })
        .collect();

    let mut sim = Sim {
        scenario,
        config,
        cn_config,
        mesh,
        queue: BinaryHeap::new(),
        seq: 0,
        nodes,
        cn: CnState::new(),
        cn_seen: BTreeSet::new(),
        detector,
        sinks,
        bee: synth_bee_buzz(&config.bee, derive_seed(seed, "bee"))?,
        actions: Vec::new(),
        warnings: Vec::new(),
        frames_published: Vec::new(),
        frames_received: BTreeMap::new(),
        decisions: Vec::new(),
        deterrents: Vec::new(),
        anomalies: Vec::new(),
    };

    let mut detections = BTreeMap::new();
    for (idx, pn) in scenario.pns.iter().enumerate() {
        let windows = detect_stream(&node_trace(scenario, config, &pn.id)?, &config.alg1)?;
        for w in &windows {
            sim.push(
                w.window_start_s + config.window_s,
                Kind::Window(idx, w.clone()),
            );
        }
        detections.insert(pn.id.clone(), windows);
    }
    for f in &mesh_config.broker_failures {
        sim.push(f.kill_at_s, Kind::BrokerKill(f.broker.clone()));
        if let Some(r) = f.revive_at_s {
            sim.push(r, Kind::BrokerRevive(f.broker.clone()));
        }
    }

    let end = scenario.duration_s;
    loop {
        let th = sim.queue.peek().map(|p| p.t);
        let tm = sim.mesh.next_event_time();
        let mesh_first = match (tm, th) {
            (Some(m), Some(h)) => m <= h,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if mesh_first {
            let tm = tm.expect("mesh has a pending event");
            if tm > end {
                break;
            }
            for d in sim.mesh.step(tm) {
                sim.deliver(d)?;
            }
        } else {
            let p = sim.queue.pop().expect("queue is not empty");
            if p.t > end {
                break;
            }
            for d in sim.mesh.advance_until(p.t) {
                sim.deliver(d)?;
            }
            sim.handle(p)?;
        }
    }
    sim.mesh.advance_until(end);
    sort_warnings(&mut sim.warnings);

    let logs = RunLogs {
        actions: sim.actions,
        warnings: sim.warnings,
        trace: sim.mesh.trace().to_vec(),
    };
    let report = compute_metrics(&logs, scenario, config.match_horizon_s)?;

    if let Some(dir) = &config.output_dir {
        sim.mesh
            .write_trace(std::io::BufWriter::new(std::fs::File::create(
                dir.join(TRACE_FILE),
            )?))?;
        write_jsonl(&dir.join(ACTIONS_FILE), &logs.actions)?;
        write_jsonl(
            &dir.join(DETECTIONS_FILE),
            detections
                .iter()
                .flat_map(|(pn, ws): (&String, &Vec<WindowDetection>)| {
                    ws.iter().map(move |w| DetectionLine {
                        pn_id: pn,
                        window: w,
                    })
                }),
        )?;
        write_jsonl(&dir.join(DETERRENTS_FILE), &sim.deterrents)?;
        std::fs::write(dir.join(METRICS_FILE), report.to_json()?)?;
    }

    Ok(RunOutcome {
        report,
        logs,
        state_logs: sim.nodes.into_iter().map(|n| (n.id, n.state_log)).collect(),
        detections,
        frames_published: sim.frames_published,
        frames_received: sim.frames_received,
        decisions: sim.decisions,
        deterrents: sim.deterrents,
        transitions: sim.mesh.transitions().to_vec(),
        anomalies: sim.anomalies,
    })
}
