use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elemantra::cn::{evaluate_ap50, DetectorKind, LabeledFrameSet, StochasticDetectorParams};
use elemantra::deterrent::{
    apply_modification, generate_pink_noise, modification_report, pick_modification,
    ModificationKind, ModificationParams, DEFAULT_ALPHA_RANGE,
};
use elemantra::harness::{run_scenario, Scenario, SimConfig, METRICS_FILE};
use elemantra::seed::labeled_rng;
use elemantra::seismic::{
    detect_stream, match_and_recall, stft_oracle_detect, Algorithm1Params, DetectionScore,
    OracleParams,
};
use elemantra::signal::{
    compute_stft, default_pad, load_trace_csv, load_wav, samples_for, save_trace_csv, save_wav,
    stft_frames, synth_bee_buzz, synth_rumble, AudioClip, BeeBuzzSpec, RumbleSpec, Spectrogram,
    WindowFn,
};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "elemantra",
    version,
    about = "Elephant detection and deterrence toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a seismic trace window by window.
    Detect {
        #[arg(long)]
        input: PathBuf,
        /// One JSON record per window instead of a table.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 4.0)]
        window_s: f64,
    },
    /// Find rumbles with the STFT reference detector.
    Oracle {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run both detectors and report the windowed detector's recall.
    EvalRecall {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        window_s: f64,
        /// Lowest score that counts as a detection (1 or 2).
        #[arg(long, default_value_t = 1)]
        ds_min: u8,
    },
    /// Apply a randomized deterrent modification to a bee recording.
    ModifySound {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        /// frame-rate, pink-noise or silence-gaps; drawn from the seed if absent.
        #[arg(long)]
        method: Option<ModificationKind>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Where to write the modified clip.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate test signals.
    Synth {
        #[command(subcommand)]
        what: Synth,
    },
    /// Run a scenario end to end and write its logs and metrics.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average precision at IoU 0.5 over a labeled frame set.
    EvalAp50 {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "oracle")]
        detector: DetectorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export an STFT magnitude grid as CSV.
    Spectrogram {
        /// A .wav clip or a .csv seismic trace.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        frame_s: f64,
        #[arg(long, default_value_t = 0.125)]
        hop_s: f64,
    },
}

#[derive(Subcommand)]
enum Synth {
    /// A rumble in white noise, as a trace CSV.
    Rumble {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8.0)]
        total_s: f64,
        #[arg(long, default_value_t = 2.0)]
        onset_s: f64,
        #[arg(long, default_value_t = 4.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 1000.0)]
        rate_hz: f64,
    },
    /// A synthetic bee swarm buzz, as WAV.
    Bee {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        duration_s: f64,
    },
    /// Pink noise, as WAV.
    Pinknoise {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 8000.0)]
        rate_hz: f64,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<elemantra::Error> for Failure {
    fn from(e: elemantra::Error) -> Self {
        match &e {
            elemantra::Error::Io(io) if io.kind() == io::ErrorKind::NotFound => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        elemantra::Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn require(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file: {}", path.display())))
    }
}

fn print_jsonl<T: serde::Serialize>(items: &[T]) -> CliResult {
    let mut out = BufWriter::new(io::stdout().lock());
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn alg1(window_s: f64) -> Algorithm1Params {
    Algorithm1Params {
        window_s,
        ..Algorithm1Params::default()
    }
}

fn detect(input: &Path, json: bool, window_s: f64) -> CliResult {
    require(input)?;
    let trace = load_trace_csv(input)?;
    let windows = detect_stream(&trace, &alg1(window_s))?;
    if json {
        return print_jsonl(&windows);
    }
    println!(
        "{:>6} {:>10} {:>3} {:>8}",
        "window", "start_s", "ds", "max_run"
    );
    for w in &windows {
        println!(
            "{:>6} {:>10.3} {:>3} {:>8}",
            w.window_index,
            w.window_start_s,
            w.ds.value(),
            w.max_run
        );
    }
    Ok(())
}

fn modify_sound(
    input: &Path,
    seed: u64,
    method: Option<ModificationKind>,
    alpha: Option<f64>,
    out: Option<&Path>,
) -> CliResult {
    require(input)?;
    let clip = load_wav(input)?;
    let drawn = pick_modification(&mut labeled_rng(seed, "modify-sound"), DEFAULT_ALPHA_RANGE)?;
    let params = ModificationParams {
        kind: method.unwrap_or(drawn.kind),
        alpha: alpha.unwrap_or(drawn.alpha),
        seed: drawn.seed,
    };
    let modified = apply_modification(&clip, &params)?;
    if let Some(out) = out {
        save_wav(&modified, out)?;
    }
    let report = modification_report(&clip, &modified, &params)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn synth(what: Synth) -> CliResult {
    match what {
        Synth::Rumble {
            out,
            seed,
            total_s,
            onset_s,
            duration_s,
            snr_db,
            rate_hz,
        } => {
            let spec = RumbleSpec {
                duration_s,
                snr_db: Some(snr_db),
                ..RumbleSpec::default()
            };
            save_trace_csv(&synth_rumble(&spec, rate_hz, total_s, onset_s, seed)?, &out)?;
            eprintln!("wrote {} (seed {seed})", out.display());
        }
        Synth::Bee {
            out,
            seed,
            duration_s,
        } => {
            let spec = BeeBuzzSpec {
                duration_s,
                ..BeeBuzzSpec::default()
            };
            save_wav(&synth_bee_buzz(&spec, seed)?, &out)?;
            eprintln!("wrote {} (seed {seed})", out.display());
        }
        Synth::Pinknoise {
            out,
            seed,
            duration_s,
            rate_hz,
        } => {
            let mut noise = generate_pink_noise(samples_for(duration_s, rate_hz), rate_hz, seed)?;
            // scale into the PCM range with a little headroom
            let peak = noise.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if peak > 0.0 {
                noise.iter_mut().for_each(|x| *x *= 0.9 / peak);
            }
            save_wav(&AudioClip::new(noise, rate_hz)?, &out)?;
            eprintln!("wrote {} (seed {seed})", out.display());
        }
    }
    Ok(())
}

fn simulate(scenario: &Path, config: &Path, out: &Path) -> CliResult {
    require(scenario)?;
    require(config)?;
    let scenario = Scenario::load(scenario)?;
    let mut config = SimConfig::load(config)?;
    config.output_dir = Some(out.to_path_buf());
    let run = run_scenario(&scenario, &config)?;
    let r = &run.report;
    eprintln!(
        "seed {}: recall {}, {} false warnings; metrics in {}",
        r.seed,
        r.recall.map_or("n/a".to_string(), |x| format!("{x:.3}")),
        r.false_warning_count,
        out.join(METRICS_FILE).display()
    );
    Ok(())
}

fn spectrogram(input: &Path, out: &Path, frame_s: f64, hop_s: f64) -> CliResult {
    require(input)?;
    let is_wav = input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let spec: Spectrogram = if is_wav {
        let clip = load_wav(input)?;
        let frame_len = samples_for(frame_s, clip.frame_rate_hz);
        let hop = samples_for(hop_s, clip.frame_rate_hz);
        if frame_len == 0 || hop == 0 || frame_len > clip.len() {
            return Err(Failure::Runtime(
                "frame and hop must span at least one sample and fit in the clip".into(),
            ));
        }
        stft_frames(
            &clip.samples,
            clip.frame_rate_hz,
            0.0,
            frame_len,
            hop,
            WindowFn::Hann,
            default_pad(frame_len),
        )?
    } else {
        compute_stft(&load_trace_csv(input)?, frame_s, hop_s, WindowFn::Hann)?
    };
    let mut w = BufWriter::new(File::create(out)?);
    write!(w, "time_s")?;
    for f in &spec.freqs_hz {
        write!(w, ",{f}")?;
    }
    writeln!(w)?;
    for (t, row) in spec.frame_times_s.iter().zip(&spec.magnitudes) {
        write!(w, "{t}")?;
        for m in row {
            write!(w, ",{m}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Detect {
            input,
            json,
            window_s,
        } => detect(&input, json, window_s),
        Command::Oracle { input } => {
            require(&input)?;
            let events = stft_oracle_detect(&load_trace_csv(&input)?, &OracleParams::default())?;
            print_jsonl(&events)
        }
        Command::EvalRecall {
            input,
            window_s,
            ds_min,
        } => {
            require(&input)?;
            let ds_min = match ds_min {
                1 => DetectionScore::Weak,
                2 => DetectionScore::Strong,
                other => {
                    return Err(Failure::Usage(format!(
                        "--ds-min must be 1 or 2, got {other}"
                    )))
                }
            };
            let trace = load_trace_csv(&input)?;
            let windows = detect_stream(&trace, &alg1(window_s))?;
            let events = stft_oracle_detect(&trace, &OracleParams::default())?;
            let report = match_and_recall(&windows, &events, window_s, ds_min);
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::ModifySound {
            input,
            seed,
            method,
            alpha,
            out,
        } => modify_sound(&input, seed, method, alpha, out.as_deref()),
        Command::Synth { what } => synth(what),
        Command::Simulate {
            scenario,
            config,
            out,
        } => simulate(&scenario, &config, &out),
        Command::EvalAp50 {
            labels,
            detector,
            seed,
        } => {
            require(&labels)?;
            let set = LabeledFrameSet::load(&labels)?;
            let params = StochasticDetectorParams {
                seed,
                ..StochasticDetectorParams::default()
            };
            let ap = evaluate_ap50(detector.build(params)?.as_ref(), &set)?;
            println!(
                "{}",
                serde_json::json!({ "ap50": ap, "detector": detector, "seed": seed })
            );
            Ok(())
        }
        Command::Spectrogram {
            input,
            out,
            frame_s,
            hop_s,
        } => spectrogram(&input, &out, frame_s, hop_s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("elemantra: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("elemantra: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
