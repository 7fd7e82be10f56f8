use std::collections::BTreeSet;
use std::path::Path;

use elemantra::cn::{DetectorKind, WarningKind};
use elemantra::harness::*;
use elemantra::mesh::{BrokerFailure, LinkModel, MeshConfig};
use elemantra::pn::ir_duty_cycle;
use elemantra::signal::RumbleSpec;

fn bundled() -> (Scenario, SimConfig) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    (
        Scenario::load(dir.join("example.json")).unwrap(),
        SimConfig::load(dir.join("sim.json")).unwrap(),
    )
}

fn pns(n: usize) -> Vec<PnSpec> {
    (0..n)
        .map(|i| PnSpec {
            id: format!("pn{i}"),
            position: String::new(),
        })
        .collect()
}

fn event(t: f64, affected: &[&str]) -> ElephantEvent {
    ElephantEvent {
        t_onset_s: t,
        affected: affected.iter().map(|s| s.to_string()).collect(),
        rumble: RumbleSpec::default(),
        thermal_visible: true,
        visible_s: 60.0,
    }
}

fn scenario(duration_s: f64, n: usize, events: Vec<ElephantEvent>, seed: u64) -> Scenario {
    Scenario {
        duration_s,
        pns: pns(n),
        events,
        network: None,
        detector: DetectorKind::Oracle,
        seed,
        network_config: None,
    }
}

#[test]
fn bundled_example_is_deterministic_and_timely() {
    let (sc, mut cfg) = bundled();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cfg.output_dir = Some(a.path().into());
    let run = run_scenario(&sc, &cfg).unwrap();
    cfg.output_dir = Some(b.path().into());
    run_scenario(&sc, &cfg).unwrap();
    for f in [
        METRICS_FILE,
        TRACE_FILE,
        ACTIONS_FILE,
        DETECTIONS_FILE,
        DETERRENTS_FILE,
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }

    let r = &run.report;
    assert_eq!(r.recall, Some(1.0));
    assert_eq!(r.false_warning_count, 0);
    let link = sc.network_config.as_ref().unwrap().max_latency_s();
    for e in &r.events {
        let lat = e.latency_s.unwrap();
        assert!(
            (0.0..=4.0 + 2.0 * link + 0.5).contains(&lat),
            "latency {lat}"
        );
    }
    for (pn, d) in &r.ir_duty_cycle {
        assert!(*d < 0.1, "{pn}: {d}");
    }
    assert!(run.anomalies.is_empty(), "{:?}", run.anomalies);
}

#[test]
fn metrics_agree_with_written_logs_and_state_logs() {
    let (sc, mut cfg) = bundled();
    let dir = tempfile::tempdir().unwrap();
    cfg.output_dir = Some(dir.path().into());
    let run = run_scenario(&sc, &cfg).unwrap();

    let logs = RunLogs::load(dir.path()).unwrap();
    assert_eq!(logs, run.logs);
    assert_eq!(
        compute_metrics(&logs, &sc, cfg.match_horizon_s).unwrap(),
        run.report
    );

    let written: usize = WarningKind::ALL
        .iter()
        .map(|k| {
            std::fs::read_to_string(dir.path().join(k.file_name()))
                .unwrap()
                .lines()
                .count()
        })
        .sum();
    assert_eq!(
        written,
        run.report.officer_message_count + run.report.siren_count
    );

    for (pn, log) in &run.state_logs {
        let direct = ir_duty_cycle(log, sc.duration_s).unwrap();
        assert!(
            (direct - run.report.ir_duty_cycle[pn]).abs() < 1e-12,
            "{pn}"
        );
    }
}

#[test]
fn every_repel_follows_a_frame_and_a_trigger() {
    let (sc, cfg) = bundled();
    let run = run_scenario(&sc, &cfg).unwrap();
    assert!(!run.deterrents.is_empty());
    for d in &run.deterrents {
        let (t_pub, frame) = run
            .frames_published
            .iter()
            .find(|(_, f)| f.frame_id == d.frame_id)
            .expect("repel for a published frame");
        assert_eq!(frame.pn_id, d.pn_id);
        assert!(*t_pub < d.t);
        assert!(run.frames_received[&d.frame_id] < d.t);
        let triggered = run.detections[&d.pn_id].iter().any(|w| {
            w.ds.value() >= cfg.pn.ds_threshold && w.window_start_s + cfg.window_s <= *t_pub
        });
        assert!(triggered);
    }
}

#[test]
fn five_nodes_lossless_one_decision_per_frame() {
    let events = vec![
        event(10.0, &["pn0", "pn1"]),
        event(30.0, &["pn2"]),
        event(50.0, &["pn3", "pn4"]),
    ];
    let sc = scenario(120.0, 5, events, 7);
    let run = run_scenario(&sc, &SimConfig::default()).unwrap();
    assert!(run.frames_published.len() >= 5);
    for (_, f) in &run.frames_published {
        assert!(
            run.frames_received.contains_key(&f.frame_id),
            "{} lost",
            f.frame_id
        );
    }
    let ids: BTreeSet<&str> = run.decisions.iter().map(|d| d.frame_id.as_str()).collect();
    assert_eq!(ids.len(), run.decisions.len());
    assert_eq!(ids.len(), run.frames_published.len());
    let executed: BTreeSet<&str> = run.deterrents.iter().map(|d| d.frame_id.as_str()).collect();
    assert_eq!(executed.len(), run.deterrents.len());
    assert_eq!(run.report.recall, Some(1.0));
}

#[test]
fn noise_only_run_raises_no_warnings() {
    let mut sc = scenario(600.0, 2, Vec::new(), 3);
    sc.detector = DetectorKind::Stochastic;
    let mut cfg = SimConfig::default();
    cfg.cn.detector_params.false_positive_rate = 0.0;
    let run = run_scenario(&sc, &cfg).unwrap();
    assert_eq!(run.report.false_warning_count, 0);
    assert_eq!(run.report.recall, None);
}

#[test]
fn invisible_animals_get_negative_decisions() {
    let mut ev = event(20.0, &["pn0"]);
    ev.thermal_visible = false;
    let sc = scenario(60.0, 1, vec![ev], 5);
    let run = run_scenario(&sc, &SimConfig::default()).unwrap();
    assert!(!run.decisions.is_empty());
    assert!(run.decisions.iter().all(|d| !d.elephant_present));
    assert!(run.deterrents.is_empty());
    assert_eq!(run.report.recall, Some(0.0));
    assert!(matches!(
        run.state_logs["pn0"].last(),
        Some((_, elemantra::pn::PnState::Idle))
    ));
}

#[test]
fn warning_survives_broker_failover() {
    let mut sc = scenario(60.0, 3, vec![event(8.5, &["pn0"])], 11);
    let mut mesh = MeshConfig {
        default_link: LinkModel::fixed(0.05, 0.0),
        ..MeshConfig::default()
    };
    mesh.broker_failures.push(BrokerFailure {
        broker: "broker0".into(),
        kill_at_s: 10.0,
        revive_at_s: None,
    });
    sc.network_config = Some(mesh);
    let run = run_scenario(&sc, &SimConfig::default()).unwrap();

    let moved: Vec<_> = run
        .transitions
        .iter()
        .filter(|t| t.from.is_some())
        .collect();
    assert_eq!(moved.len(), 4);
    assert!(moved.iter().all(|t| t.to == "broker1" && t.t <= 14.05));
    let failover_done = moved.iter().map(|t| t.t).fold(0.0, f64::max);
    let e = &run.report.events[0];
    assert!(e.detected);
    assert!(8.5 + e.latency_s.unwrap() > failover_done);
}

#[test]
fn detector_seed_only_moves_detector_outcomes() {
    let mut sc = scenario(
        200.0,
        2,
        (0..6)
            .map(|i| event(10.0 + 30.0 * i as f64, &["pn0", "pn1"]))
            .collect(),
        9,
    );
    sc.detector = DetectorKind::Stochastic;
    let mut cfg = SimConfig::default();
    let a = run_scenario(&sc, &cfg).unwrap();
    cfg.cn.detector_params.seed += 1;
    let b = run_scenario(&sc, &cfg).unwrap();
    assert_eq!(a.detections, b.detections);
    assert_eq!(
        node_trace(&sc, &cfg, "pn0").unwrap(),
        node_trace(&sc, &SimConfig::default(), "pn0").unwrap()
    );
    let conf = |r: &RunOutcome| r.decisions.iter().map(|d| d.confidence).collect::<Vec<_>>();
    assert_ne!(conf(&a), conf(&b));
}

#[test]
fn inconsistent_config_is_refused() {
    let sc = scenario(60.0, 1, Vec::new(), 1);
    let cfg = SimConfig {
        window_s: 5.0,
        ..SimConfig::default()
    };
    assert!(run_scenario(&sc, &cfg).is_err());
    let mut bad = sc.clone();
    bad.events.push(event(70.0, &["pn0"]));
    assert!(run_scenario(&bad, &SimConfig::default()).is_err());
    let mut bad = sc;
    bad.events.push(event(10.0, &["pn9"]));
    assert!(run_scenario(&bad, &SimConfig::default()).is_err());
}
