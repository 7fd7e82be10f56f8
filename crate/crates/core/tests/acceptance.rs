//! The project's acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p elemantra --test acceptance -- --nocapture` to see
//! the report.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use elemantra::cn::{
    evaluate_ap50, iou, BoundingBox, DetectorDecision, LabeledFrame, LabeledFrameSet,
    OracleDetector, ScriptedDetector,
};
use elemantra::deterrent::{
    apply_modification, generate_pink_noise, pick_modification, relative_l2_delta, stft_similarity,
    ModificationKind, SimilarityParams, DEFAULT_ALPHA_RANGE,
};
use elemantra::harness::{run_scenario, ElephantEvent, PnSpec, Scenario, SimConfig, METRICS_FILE};
use elemantra::mesh::{frame_topic, BrokerFailure, LinkModel, Mesh, MeshConfig, Qos, ALL_FRAMES};
use elemantra::pn::ThermalFrame;
use elemantra::seed::{labeled_rng, rng_from_seed};
use elemantra::seismic::{
    detect_stream, detect_window, match_and_recall, stft_oracle_detect, Algorithm1Params,
    DetectionScore, OracleParams,
};
use elemantra::signal::{
    background_noise, synth_bee_buzz, synth_rumble, BeeBuzzSpec, RumbleSpec, SeismicTrace,
};
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(
        elapsed <= Duration::from_secs(limit_s),
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

// criterion 1

fn truth_table() -> Check {
    let p = Algorithm1Params::default();
    let table = [(0, 0), (6, 0), (7, 1), (23, 1), (24, 2), (32, 2)];
    for (run, ds) in table {
        let got = p.score_for_run(run).value();
        ensure(got == ds, format!("max_run {run} gave ds {got}, want {ds}"))?;
    }
    Ok("6/6 rows".into())
}

// criterion 2

/// Longest run of sub-segments whose peak, found with a direct DFT over the
/// zero-padded segment, lies strictly inside (20, 40) Hz.
fn hand_traced_max_run(samples: &[f64], fs: f64) -> usize {
    let seg = (0.125 * fs).round() as usize;
    let pad = (4 * seg).next_power_of_two();
    let (mut run, mut best) = (0, 0);
    for chunk in samples.chunks_exact(seg) {
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        let mut peak = (0usize, -1.0f64);
        for k in 0..=pad / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in chunk.iter().enumerate() {
                let ph = -2.0 * PI * (k * n) as f64 / pad as f64;
                re += (x - mean) * ph.cos();
                im += (x - mean) * ph.sin();
            }
            let mag = re * re + im * im;
            if mag > peak.1 * (1.0 + 1e-9) {
                peak = (k, mag);
            }
        }
        let f = peak.0 as f64 * fs / pad as f64;
        if f > 20.0 && f < 40.0 {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

fn synthetic_rumble_window() -> Check {
    let t0 = Instant::now();
    let p = Algorithm1Params::default();
    let spec = RumbleSpec {
        duration_s: 3.5,
        snr_db: Some(20.0),
        ..RumbleSpec::default()
    };
    let rumble = synth_rumble(&spec, 1000.0, 4.0, 0.25, 2).map_err(|e| e.to_string())?;
    let d = detect_window(&rumble, &p, 0).map_err(|e| e.to_string())?;
    ensure(
        d.ds == DetectionScore::Strong,
        format!("rumble ds {:?}", d.ds),
    )?;
    let traced = hand_traced_max_run(&rumble.samples, 1000.0);
    ensure(
        traced == d.max_run,
        format!("max_run {} vs hand trace {traced}", d.max_run),
    )?;

    let tone: Vec<f64> = (0..4000)
        .map(|i| (2.0 * PI * 10.0 * i as f64 / 1000.0).sin())
        .collect();
    for (name, samples) in [("10 Hz tone", tone), ("silence", vec![0.0; 4000])] {
        let w = SeismicTrace::new(samples, 1000.0, 0.0).map_err(|e| e.to_string())?;
        let d = detect_window(&w, &p, 0).map_err(|e| e.to_string())?;
        ensure(
            d.ds == DetectionScore::None,
            format!("{name} ds {:?}", d.ds),
        )?;
    }
    within(t0.elapsed(), 5)?;
    Ok(format!("rumble max_run {} (hand trace agrees)", d.max_run))
}

// criterion 3

fn noise_false_alarms() -> Check {
    let p = Algorithm1Params::default();
    let mut alarms = 0;
    for seed in 0..1000 {
        let w = SeismicTrace::new(background_noise(4000, 1.0, seed), 1000.0, 0.0)
            .map_err(|e| e.to_string())?;
        if detect_window(&w, &p, 0).map_err(|e| e.to_string())?.ds >= DetectionScore::Weak {
            alarms += 1;
        }
    }
    let frac = alarms as f64 / 1000.0;
    ensure(frac < 0.01, format!("false-alarm fraction {frac}"))?;
    Ok(format!("{alarms}/1000 windows with ds >= 1"))
}

// criterion 4

fn recall_vs_oracle() -> Check {
    let t0 = Instant::now();
    let p = Algorithm1Params::default();
    let mut rng = labeled_rng(4, "acceptance/recall");
    let (mut found, mut total) = (0, 0);
    for i in 0..50u64 {
        let spec = RumbleSpec {
            duration_s: rng.random_range(3.0..=5.0),
            snr_db: Some(rng.random_range(5.0..=20.0)),
            ..RumbleSpec::default()
        };
        let total_s = 20.0;
        let onset = rng.random_range(0.0..=total_s - spec.duration_s);
        let trace = synth_rumble(&spec, 1000.0, total_s, onset, i).map_err(|e| e.to_string())?;
        let windows = detect_stream(&trace, &p).map_err(|e| e.to_string())?;
        let events =
            stft_oracle_detect(&trace, &OracleParams::default()).map_err(|e| e.to_string())?;
        let r = match_and_recall(&windows, &events, p.window_s, DetectionScore::Weak);
        found += r.matched_count;
        total += r.oracle_count;
    }
    ensure(total > 0, "oracle found no events")?;
    let recall = found as f64 / total as f64;
    ensure(
        recall >= 0.80,
        format!("recall {recall:.3} ({found}/{total})"),
    )?;
    within(t0.elapsed(), 60)?;
    Ok(format!(
        "recall {recall:.3} ({found}/{total} oracle events)"
    ))
}

// criterion 5

fn deterrent_similarity() -> Check {
    let t0 = Instant::now();
    let bee = synth_bee_buzz(&BeeBuzzSpec::default(), 7).map_err(|e| e.to_string())?;
    let sp = SimilarityParams::default();
    let mut digests = BTreeSet::new();
    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        let params = pick_modification(&mut rng_from_seed(seed), DEFAULT_ALPHA_RANGE)
            .map_err(|e| e.to_string())?;
        let out = apply_modification(&bee, &params).map_err(|e| e.to_string())?;
        let sim = stft_similarity(&bee, &out, &sp).map_err(|e| e.to_string())?;
        worst = worst.min(sim.max_xcorr);
        ensure(
            sim.max_xcorr >= 0.5,
            format!("seed {seed} {:?}: xcorr {}", params.kind, sim.max_xcorr),
        )?;
        let identity = params.kind == ModificationKind::FrameRateScale && params.alpha == 1.0;
        if !identity {
            let d = relative_l2_delta(&bee, &out);
            ensure(d >= 1e-3, format!("seed {seed} {:?}: l2 {d}", params.kind))?;
        }
        let mut h = Sha256::new();
        h.update(out.frame_rate_hz.to_le_bytes());
        out.samples.iter().for_each(|s| h.update(s.to_le_bytes()));
        digests.insert(h.finalize().to_vec());
    }
    ensure(
        digests.len() == 100,
        format!("{} distinct outputs", digests.len()),
    )?;
    within(t0.elapsed(), 60)?;
    Ok(format!("min max_xcorr {worst:.3}, 100 distinct outputs"))
}

// criterion 6

fn pink_slope() -> Check {
    let t0 = Instant::now();
    let (n, fs) = (4096, 1000.0);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut psd = vec![0.0; n / 2 + 1];
    for seed in 0..100 {
        let x = generate_pink_noise(n, fs, seed).map_err(|e| e.to_string())?;
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr() / 100.0;
        }
    }
    let df = fs / n as f64;
    let pts: Vec<(f64, f64)> = (1..psd.len())
        .map(|k| (k as f64 * df, psd[k]))
        .filter(|(f, _)| (20.0..=400.0).contains(f))
        .map(|(f, p)| (f.log10(), p.log10()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = num / den;
    ensure((slope + 1.0).abs() <= 0.3, format!("slope {slope:.3}"))?;
    within(t0.elapsed(), 30)?;
    Ok(format!("slope {slope:.3}"))
}

// criterion 7

fn bx(x0: f64, y0: f64, x1: f64, y1: f64, conf: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1, conf).unwrap()
}

/// Precision and recall recomputed from scratch at every confidence cutoff,
/// then the all-point interpolated area.
fn brute_force_ap(set: &LabeledFrameSet, preds: &[(usize, BoundingBox)]) -> f64 {
    let n_truth: usize = set.frames.iter().map(|f| f.truth.len()).sum();
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].1.confidence.total_cmp(&preds[a].1.confidence));
    let mut points = Vec::new();
    for k in 1..=order.len() {
        let mut used: Vec<Vec<bool>> = set
            .frames
            .iter()
            .map(|f| vec![false; f.truth.len()])
            .collect();
        let mut tp = 0;
        for &i in &order[..k] {
            let (f, b) = &preds[i];
            let mut best: Option<(usize, f64)> = None;
            for (j, t) in set.frames[*f].truth.iter().enumerate() {
                let o = iou(b, t);
                if !used[*f][j] && best.is_none_or(|(_, bo)| o > bo) {
                    best = Some((j, o));
                }
            }
            if let Some((j, o)) = best {
                if o >= 0.5 {
                    used[*f][j] = true;
                    tp += 1;
                }
            }
        }
        points.push((tp as f64 / n_truth as f64, tp as f64 / k as f64));
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for k in 0..points.len() {
        let p_interp = points[k..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[k].0 - prev_r) * p_interp;
        prev_r = points[k].0;
    }
    ap
}

fn iou_and_ap50() -> Check {
    // (a, b, exact IoU worked out by hand)
    let pairs = [
        (bx(0., 0., 10., 10., 1.), bx(0., 0., 10., 10., 1.), 1.0),
        (
            bx(0., 0., 10., 10., 1.),
            bx(5., 0., 15., 10., 1.),
            50.0 / 150.0,
        ),
        (
            bx(0., 0., 10., 10., 1.),
            bx(5., 5., 15., 15., 1.),
            25.0 / 175.0,
        ),
        (bx(0., 0., 10., 10., 1.), bx(10., 0., 20., 10., 1.), 0.0),
        (bx(0., 0., 10., 10., 1.), bx(20., 20., 30., 30., 1.), 0.0),
        (
            bx(0., 0., 10., 10., 1.),
            bx(2., 2., 8., 8., 1.),
            36.0 / 100.0,
        ),
        (bx(0., 0., 4., 2., 1.), bx(1., 0., 3., 6., 1.), 4.0 / 16.0),
        (
            bx(0., 0., 1., 1., 1.),
            bx(0.5, 0.5, 1.5, 1.5, 1.),
            0.25 / 1.75,
        ),
        (
            bx(10., 10., 30., 20., 1.),
            bx(20., 15., 40., 25., 1.),
            50.0 / 350.0,
        ),
        (bx(0., 0., 3., 3., 1.), bx(1., 1., 2., 2., 1.), 1.0 / 9.0),
    ];
    for (i, (a, b, want)) in pairs.iter().enumerate() {
        let got = iou(a, b);
        ensure(
            (got - want).abs() <= 1e-12,
            format!("pair {i}: {got} vs {want}"),
        )?;
        ensure(
            (iou(b, a) - want).abs() <= 1e-12,
            format!("pair {i} not symmetric"),
        )?;
    }

    let truth = [
        vec![bx(10., 10., 50., 50., 1.)],
        vec![bx(0., 0., 20., 20., 1.), bx(60., 60., 100., 100., 1.)],
        vec![],
        vec![bx(30., 30., 70., 90., 1.)],
        vec![bx(5., 5., 25., 45., 1.)],
    ];
    let set = LabeledFrameSet {
        frames: truth
            .iter()
            .enumerate()
            .map(|(i, t)| LabeledFrame {
                frame: ThermalFrame::new(format!("f{i}"), "pn0", i as f64),
                truth: t.clone(),
                split: "test".into(),
            })
            .collect(),
    };
    let perfect = evaluate_ap50(&OracleDetector, &set).map_err(|e| e.to_string())?;
    ensure(perfect == 1.0, format!("perfect detector AP {perfect}"))?;
    let empty = evaluate_ap50(&ScriptedDetector::default(), &set).map_err(|e| e.to_string())?;
    ensure(empty == 0.0, format!("empty detector AP {empty}"))?;

    // a mixed detector: hits, a near miss, a false positive and a duplicate
    let preds = vec![
        (0, bx(12., 12., 50., 50., 0.95)),
        (1, bx(0., 0., 18., 20., 0.9)),
        (2, bx(10., 10., 40., 40., 0.85)),
        (1, bx(62., 60., 100., 100., 0.8)),
        (3, bx(30., 30., 50., 50., 0.7)),
        (0, bx(10., 10., 50., 48., 0.6)),
        (4, bx(5., 5., 25., 40., 0.5)),
    ];
    let scripted = ScriptedDetector::new((0..5).map(|i| {
        let boxes: Vec<BoundingBox> = preds
            .iter()
            .filter(|(f, _)| *f == i)
            .map(|(_, b)| *b)
            .collect();
        DetectorDecision {
            frame_id: format!("f{i}"),
            elephant_present: !boxes.is_empty(),
            confidence: boxes.iter().map(|b| b.confidence).fold(0.0, f64::max),
            boxes,
        }
    }));
    let ap = evaluate_ap50(&scripted, &set).map_err(|e| e.to_string())?;
    let oracle = brute_force_ap(&set, &preds);
    ensure(ap == oracle, format!("AP {ap} vs brute force {oracle}"))?;
    Ok(format!(
        "10 IoU pairs exact; AP50 perfect 1, empty 0, mixed {ap:.4}"
    ))
}

// criteria 8 to 10

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

fn mesh_delivery() -> Check {
    let t0 = Instant::now();
    let sc = Scenario {
        duration_s: 200.0,
        pns: pns(5),
        events: vec![
            event(10.0, &["pn0", "pn1", "pn2"]),
            event(50.0, &["pn3"]),
            event(90.0, &["pn4", "pn0"]),
            event(130.0, &["pn1", "pn2", "pn3", "pn4"]),
        ],
        network: None,
        detector: Default::default(),
        seed: 8,
        network_config: None,
    };
    let run = run_scenario(&sc, &SimConfig::default()).map_err(|e| e.to_string())?;
    let published: BTreeSet<&str> = run
        .frames_published
        .iter()
        .map(|(_, f)| f.frame_id.as_str())
        .collect();
    ensure(!published.is_empty(), "no frames published")?;
    let missing = published
        .iter()
        .filter(|id| !run.frames_received.contains_key(**id))
        .count();
    ensure(missing == 0, format!("{missing} frames not delivered"))?;
    let decided: Vec<&str> = run.decisions.iter().map(|d| d.frame_id.as_str()).collect();
    let unique: BTreeSet<&str> = decided.iter().copied().collect();
    ensure(
        unique.len() == decided.len() && unique == published,
        format!("{} decisions for {} frames", decided.len(), published.len()),
    )?;
    let executed: BTreeSet<(&str, &str)> = run
        .deterrents
        .iter()
        .map(|d| (d.pn_id.as_str(), d.frame_id.as_str()))
        .collect();
    ensure(
        executed.len() == run.deterrents.len(),
        "a repel command ran twice",
    )?;

    let mut m = Mesh::new(
        MeshConfig {
            default_link: LinkModel::fixed(0.01, 0.0),
            ..MeshConfig::default()
        },
        20240,
    )
    .map_err(|e| e.to_string())?;
    for c in ["pub", "sub"] {
        m.add_client(c).map_err(|e| e.to_string())?;
    }
    m.subscribe("sub", "t/+").map_err(|e| e.to_string())?;
    m.advance_until(0.5);
    m.set_link("pub", "broker0", LinkModel::fixed(0.01, 0.5))
        .map_err(|e| e.to_string())?;
    for i in 0..1000 {
        m.publish("pub", &format!("t/{i}"), vec![], Qos::AtLeastOnce)
            .map_err(|e| e.to_string())?;
    }
    let got: BTreeSet<u64> = m.advance_until(60.0).iter().map(|d| d.msg.msg_id).collect();
    let p_miss = 0.5f64.powi(11);
    let sigma = (1000.0 * p_miss * (1.0 - p_miss)).sqrt();
    let missing = 1000 - got.len();
    ensure(got.len() >= 999, format!("{} of 1000 delivered", got.len()))?;
    ensure(
        (missing as f64 - 1000.0 * p_miss).abs() <= 3.0 * sigma,
        format!(
            "{missing} lost, expected {:.2} +/- {:.2}",
            1000.0 * p_miss,
            3.0 * sigma
        ),
    )?;
    within(t0.elapsed(), 30)?;
    Ok(format!(
        "{} frames, one decision each; lossy link delivered {}/1000",
        published.len(),
        got.len()
    ))
}

fn failover() -> Check {
    let cfg = MeshConfig {
        default_link: LinkModel::fixed(0.05, 0.0),
        ..MeshConfig::default()
    };
    let deadline = 14.0 + cfg.max_latency_s();
    let mut m = Mesh::new(cfg.clone(), 9).map_err(|e| e.to_string())?;
    let clients = ["pn0", "pn1", "pn2", "cn"];
    for c in clients {
        m.add_client(c).map_err(|e| e.to_string())?;
    }
    m.subscribe("cn", ALL_FRAMES).map_err(|e| e.to_string())?;
    m.advance_until(10.0);
    m.kill_broker("broker0").map_err(|e| e.to_string())?;
    m.advance_until(11.0);
    m.publish(
        "pn0",
        &frame_topic("pn0"),
        b"outage".to_vec(),
        Qos::AtLeastOnce,
    )
    .map_err(|e| e.to_string())?;
    let got = m.advance_until(30.0);
    let moved: Vec<_> = m
        .transitions()
        .iter()
        .filter(|t| t.from.is_some())
        .collect();
    ensure(
        moved.len() == clients.len(),
        format!("{} clients moved", moved.len()),
    )?;
    let last = moved.iter().map(|t| t.t).fold(0.0, f64::max);
    ensure(
        moved.iter().all(|t| t.to == "broker1") && last <= deadline,
        format!("last reconnect at {last:.3}"),
    )?;
    ensure(
        got.len() == 1 && got[0].t > last,
        "outage publish was not replayed after failover",
    )?;

    // end to end: a detection raised during the outage still warns
    let mut net = cfg;
    net.broker_failures.push(BrokerFailure {
        broker: "broker0".into(),
        kill_at_s: 10.0,
        revive_at_s: None,
    });
    let sc = Scenario {
        duration_s: 60.0,
        pns: pns(3),
        events: vec![event(8.5, &["pn0"])],
        network: None,
        detector: Default::default(),
        seed: 9,
        network_config: Some(net),
    };
    let run = run_scenario(&sc, &SimConfig::default()).map_err(|e| e.to_string())?;
    let switched = run
        .transitions
        .iter()
        .filter(|t| t.from.is_some())
        .map(|t| t.t)
        .fold(0.0, f64::max);
    let warned = run.report.events[0].latency_s.map(|l| 8.5 + l);
    ensure(
        warned.is_some_and(|w| w > switched) && switched <= deadline,
        format!("warning at {warned:?}, failover done {switched:.3}"),
    )?;
    Ok(format!(
        "all reconnected by {last:.2} s; warning at {:.2} s",
        warned.unwrap()
    ))
}

fn end_to_end() -> Check {
    let t0 = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let sc = Scenario::load(dir.join("example.json")).map_err(|e| e.to_string())?;
    let mut cfg = SimConfig::load(dir.join("sim.json")).map_err(|e| e.to_string())?;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cfg.output_dir = Some(a.path().into());
    let run = run_scenario(&sc, &cfg).map_err(|e| e.to_string())?;
    cfg.output_dir = Some(b.path().into());
    run_scenario(&sc, &cfg).map_err(|e| e.to_string())?;
    let ma = std::fs::read(a.path().join(METRICS_FILE)).map_err(|e| e.to_string())?;
    let mb = std::fs::read(b.path().join(METRICS_FILE)).map_err(|e| e.to_string())?;
    ensure(ma == mb, "metrics differ between identical runs")?;

    ensure(
        sc.pns.len() == 3 && sc.events.len() == 2,
        "example is not 3 nodes / 2 events",
    )?;
    let link = sc
        .network_config
        .as_ref()
        .map_or(cfg.mesh.max_latency_s(), |n| n.max_latency_s());
    let bound = cfg.window_s + 2.0 * link + 0.5;
    let r = &run.report;
    ensure(
        r.events.iter().all(|e| e.detected),
        "an event went undetected",
    )?;
    let worst = r
        .events
        .iter()
        .filter_map(|e| e.latency_s)
        .fold(0.0, f64::max);
    ensure(worst <= bound, format!("latency {worst:.3} > {bound:.3}"))?;
    let duty = r.ir_duty_cycle.values().copied().fold(0.0, f64::max);
    ensure(duty < 0.10, format!("ir duty cycle {duty:.4}"))?;
    within(t0.elapsed(), 60)?;
    Ok(format!(
        "identical metrics; worst latency {worst:.2} s (bound {bound:.2}); max duty {:.2}%",
        duty * 100.0
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("detection-score truth table", truth_table),
        ("synthetic rumble window", synthetic_rumble_window),
        ("white-noise false alarms", noise_false_alarms),
        ("recall against the STFT oracle", recall_vs_oracle),
        (
            "deterrent similarity and anti-repetition",
            deterrent_similarity,
        ),
        ("pink-noise spectral slope", pink_slope),
        ("IoU and AP50 oracles", iou_and_ap50),
        ("mesh delivery", mesh_delivery),
        ("broker failover", failover),
        ("end-to-end determinism and latency", end_to_end),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = check();
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why} [{secs:.2} s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
