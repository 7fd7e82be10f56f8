use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::cn::{WarningKind, WarningRecord};
use crate::error::{Error, Result};
use crate::mesh::{TraceEvent, TraceRecord};
use crate::pn::ActionRecord;

pub const TRACE_FILE: &str = "delivery_trace.jsonl";
pub const ACTIONS_FILE: &str = "actions.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const DETERRENTS_FILE: &str = "deterrents.jsonl";
pub const METRICS_FILE: &str = "metrics.json";

/// Everything one run logs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLogs {
    pub actions: Vec<ActionRecord>,
    pub warnings: Vec<WarningRecord>,
    pub trace: Vec<TraceRecord>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::invalid_input(format!("missing log {}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::parse(offset, e.to_string()))?);
        }
        offset += line.len() + 1;
    }
    Ok(out)
}

/// Time order, officer messages before sirens at equal times.
pub fn sort_warnings(warnings: &mut [WarningRecord]) {
    warnings.sort_by(|a, b| {
        a.timestamp_s
            .total_cmp(&b.timestamp_s)
            .then((a.kind == WarningKind::Siren).cmp(&(b.kind == WarningKind::Siren)))
    });
}

impl RunLogs {
    /// Reads the logs a run wrote to `dir`; every stream must be present.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut warnings = Vec::new();
        for kind in WarningKind::ALL {
            warnings.extend(read_jsonl::<WarningRecord>(&dir.join(kind.file_name()))?);
        }
        sort_warnings(&mut warnings);
        Ok(Self {
            actions: read_jsonl(&dir.join(ACTIONS_FILE))?,
            warnings,
            trace: read_jsonl(&dir.join(TRACE_FILE))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub t_onset_s: f64,
    pub detected: bool,
    /// Onset to first matching officer message.
    pub latency_s: Option<f64>,
    pub warned_pn: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub duration_s: f64,
    pub events: Vec<EventOutcome>,
    /// Detected events over all events; absent when there are none.
    pub recall: Option<f64>,
    /// Officer messages matched to no event.
    pub false_warning_count: usize,
    pub officer_message_count: usize,
    pub siren_count: usize,
    pub ir_duty_cycle: BTreeMap<String, f64>,
    pub deterrent_activations: BTreeMap<String, usize>,
    /// Publishes per topic.
    pub message_counts: BTreeMap<String, usize>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Per-node fraction of `[0, duration_s]` with the camera powered, from
/// the state changes in the action log.
pub fn duty_from_actions(
    actions: &[ActionRecord],
    nodes: &[String],
    duration_s: f64,
) -> BTreeMap<String, f64> {
    let powered = |s: &str| s == "ir_active" || s == "awaiting_decision";
    nodes
        .iter()
        .map(|node| {
            let (mut state, mut since, mut on) = ("idle".to_string(), 0.0, 0.0);
            for r in actions.iter().filter(|r| &r.node == node) {
                if r.state_to != state {
                    let t = r.t.min(duration_s);
                    if powered(&state) {
                        on += t - since;
                    }
                    state = r.state_to.clone();
                    since = t;
                }
            }
            if powered(&state) {
                on += duration_s - since;
            }
            (node.clone(), on / duration_s)
        })
        .collect()
}

/// An event counts as detected when an officer message for one of its
/// nodes arrives within `horizon_s` after onset.
pub fn compute_metrics(
    logs: &RunLogs,
    scenario: &Scenario,
    horizon_s: f64,
) -> Result<MetricsReport> {
    if !(horizon_s > 0.0) {
        return Err(Error::invalid_input("match horizon must be positive"));
    }
    let officer: Vec<&WarningRecord> = logs
        .warnings
        .iter()
        .filter(|w| w.kind == WarningKind::OfficerMessage)
        .collect();
    let in_window = |w: &WarningRecord, i: usize| {
        let e = &scenario.events[i];
        e.affected.contains(&w.pn_id)
            && e.t_onset_s <= w.timestamp_s
            && w.timestamp_s <= e.t_onset_s + horizon_s
    };

    let events: Vec<EventOutcome> = (0..scenario.events.len())
        .map(|i| {
            let first = officer
                .iter()
                .filter(|w| in_window(w, i))
                .min_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
            let onset = scenario.events[i].t_onset_s;
            EventOutcome {
                t_onset_s: onset,
                detected: first.is_some(),
                latency_s: first.map(|w| w.timestamp_s - onset),
                warned_pn: first.map(|w| w.pn_id.clone()),
            }
        })
        .collect();
    let false_warning_count = officer
        .iter()
        .filter(|w| !(0..scenario.events.len()).any(|i| in_window(w, i)))
        .count();
    let recall = (!events.is_empty())
        .then(|| events.iter().filter(|e| e.detected).count() as f64 / events.len() as f64);

    let nodes: Vec<String> = scenario.pns.iter().map(|p| p.id.clone()).collect();
    let mut deterrent_activations: BTreeMap<String, usize> =
        nodes.iter().map(|n| (n.clone(), 0)).collect();
    for r in logs.actions.iter().filter(|r| r.action == "play_deterrent") {
        *deterrent_activations.entry(r.node.clone()).or_default() += 1;
    }
    let mut message_counts = BTreeMap::new();
    for r in logs.trace.iter().filter(|r| r.event == TraceEvent::Publish) {
        *message_counts.entry(r.topic.clone()).or_default() += 1;
    }

    Ok(MetricsReport {
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        events,
        recall,
        false_warning_count,
        officer_message_count: officer.len(),
        siren_count: logs.warnings.len() - officer.len(),
        ir_duty_cycle: duty_from_actions(&logs.actions, &nodes, scenario.duration_s),
        deterrent_activations,
        message_counts,
    })
}
