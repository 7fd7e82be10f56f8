//! Scenarios, end-to-end simulation runs and their metrics.
//!
//! A run synthesizes one seismic trace per peripheral node, scores it window
//! by window, and drives every node state machine and the central node over
//! the simulated mesh in one discrete-event loop.

mod metrics;
mod run;
mod scenario;

pub use metrics::{
    compute_metrics, duty_from_actions, sort_warnings, EventOutcome, MetricsReport, RunLogs,
    ACTIONS_FILE, DETECTIONS_FILE, DETERRENTS_FILE, METRICS_FILE, TRACE_FILE,
};
pub use run::{node_trace, run_scenario, DeterrentRecord, RunOutcome};
pub use scenario::{ElephantEvent, PnSpec, Scenario, SimConfig, CN_CLIENT};
