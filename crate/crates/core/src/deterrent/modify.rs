use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pink::generate_pink_noise;
use super::similarity::{stft_similarity, SimilarityParams};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::signal::{rms, samples_for, AudioClip};

/// Range the uniform factor α is drawn from, shared by all three methods.
pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModificationKind {
    FrameRateScale,
    PinkNoiseOverlay,
    SilenceGaps,
}

impl ModificationKind {
    pub const ALL: [ModificationKind; 3] = [
        ModificationKind::FrameRateScale,
        ModificationKind::PinkNoiseOverlay,
        ModificationKind::SilenceGaps,
    ];
}

impl std::str::FromStr for ModificationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame_rate_scale" | "frame-rate" | "frame_rate" => {
                Ok(ModificationKind::FrameRateScale)
            }
            "pink_noise_overlay" | "pink-noise" | "pink_noise" => {
                Ok(ModificationKind::PinkNoiseOverlay)
            }
            "silence_gaps" | "silence-gaps" | "gaps" => Ok(ModificationKind::SilenceGaps),
            other => Err(Error::invalid_input(format!(
                "unknown modification {other:?}"
            ))),
        }
    }
}

/// One activation's choice: method, factor and the seed for any noise or
/// gap placement it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModificationParams {
    pub kind: ModificationKind,
    pub alpha: f64,
    pub seed: u64,
}

pub fn pick_modification<R: Rng + ?Sized>(
    rng: &mut R,
    alpha_range: (f64, f64),
) -> Result<ModificationParams> {
    let (lo, hi) = alpha_range;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || lo < 0.0 {
        return Err(Error::invalid_config(format!(
            "alpha range [{lo}, {hi}] is degenerate"
        )));
    }
    let kind = ModificationKind::ALL[rng.random_range(0..3)];
    let alpha = rng.random_range(lo..hi);
    let seed = rng.random::<u64>();
    Ok(ModificationParams { kind, alpha, seed })
}

/// Reinterprets the samples at `alpha` times the frame rate.
pub fn modify_frame_rate(clip: &AudioClip, alpha: f64) -> Result<AudioClip> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid_input(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    Ok(AudioClip {
        samples: clip.samples.clone(),
        frame_rate_hz: clip.frame_rate_hz * alpha,
    })
}

/// The noise [`overlay_pink_noise`] adds before peak renormalization: pink
/// noise at RMS `0.1 * alpha * rms(clip)`.
pub fn pink_overlay_noise(clip: &AudioClip, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    if clip.is_empty() {
        return Err(Error::invalid_input(
            "cannot overlay noise on an empty clip",
        ));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid_input(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    let scale = 0.1 * alpha * clip.rms();
    if scale == 0.0 {
        return Ok(vec![0.0; clip.len()]);
    }
    let mut noise = generate_pink_noise(clip.len(), clip.frame_rate_hz, seed)?;
    for v in &mut noise {
        *v *= scale;
    }
    Ok(noise)
}

pub fn overlay_pink_noise(clip: &AudioClip, alpha: f64, seed: u64) -> Result<AudioClip> {
    let noise = pink_overlay_noise(clip, alpha, seed)?;
    let mut out = clip.clone();
    for (s, n) in out.samples.iter_mut().zip(&noise) {
        *s += n;
    }
    out.normalize_peak();
    Ok(out)
}

/// Gap placement. Frames of `frame_s` are picked independently with
/// probability `gap_prob` and get one zeroed span each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapParams {
    pub frame_s: f64,
    pub gap_prob: f64,
}

impl Default for GapParams {
    fn default() -> Self {
        Self {
            frame_s: 1.0,
            gap_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapOutcome {
    pub clip: AudioClip,
    /// `(start sample, length)` of every zeroed span.
    pub gaps: Vec<(usize, usize)>,
    /// The requested gap was longer than a frame and got clamped.
    pub clamped: bool,
}

/// Zeroes spans of `alpha * 100 ms` inside randomly selected frames.
///
/// When `gap_prob > 0` at least one frame is always selected.
pub fn insert_silence_gaps(
    clip: &AudioClip,
    alpha: f64,
    seed: u64,
    params: GapParams,
) -> Result<GapOutcome> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid_input(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    if !(0.0..=1.0).contains(&params.gap_prob) || !(params.frame_s > 0.0) {
        return Err(Error::invalid_config(
            "gap_prob must be in [0, 1] and frame_s > 0",
        ));
    }
    let frame_len = samples_for(params.frame_s, clip.frame_rate_hz);
    if frame_len == 0 || clip.len() < frame_len {
        return Err(Error::invalid_input(format!(
            "clip ({} s) shorter than one gap frame ({} s)",
            clip.duration_s(),
            params.frame_s
        )));
    }
    let mut gap_len = samples_for(alpha * 0.1, clip.frame_rate_hz);
    let clamped = gap_len > frame_len;
    if clamped {
        log::warn!(
            "gap of {} s exceeds the {} s frame; clamped",
            alpha * 0.1,
            params.frame_s
        );
        gap_len = frame_len;
    }

    let mut rng = rng_from_seed(seed);
    let n_frames = clip.len() / frame_len;
    let mut selected: Vec<usize> = (0..n_frames)
        .filter(|_| rng.random::<f64>() < params.gap_prob)
        .collect();
    // a draw that selects nothing would replay the original clip verbatim
    if selected.is_empty() && params.gap_prob > 0.0 && gap_len > 0 {
        selected.push(rng.random_range(0..n_frames));
    }

    let mut out = clip.clone();
    let mut gaps = Vec::with_capacity(selected.len());
    for frame in selected {
        let offset = rng.random_range(0..=frame_len - gap_len);
        let start = frame * frame_len + offset;
        out.samples[start..start + gap_len].fill(0.0);
        gaps.push((start, gap_len));
    }
    Ok(GapOutcome {
        clip: out,
        gaps,
        clamped,
    })
}

pub fn apply_modification(clip: &AudioClip, params: &ModificationParams) -> Result<AudioClip> {
    match params.kind {
        ModificationKind::FrameRateScale => modify_frame_rate(clip, params.alpha),
        ModificationKind::PinkNoiseOverlay => overlay_pink_noise(clip, params.alpha, params.seed),
        ModificationKind::SilenceGaps => {
            insert_silence_gaps(clip, params.alpha, params.seed, GapParams::default())
                .map(|g| g.clip)
        }
    }
}

/// Relative L2 distance between two clips as heard: both are treated as
/// piecewise-linear functions of playback time (zero outside their span)
/// and compared on `a`'s sample grid over the longer of the two durations.
pub fn relative_l2_delta(a: &AudioClip, b: &AudioClip) -> f64 {
    let norm_a = rms(&a.samples) * (a.len() as f64).sqrt();
    if norm_a == 0.0 {
        return f64::INFINITY;
    }
    if a.frame_rate_hz == b.frame_rate_hz && a.len() == b.len() {
        let d: f64 = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        return d.sqrt() / norm_a;
    }
    let n = samples_for(a.duration_s().max(b.duration_s()), a.frame_rate_hz);
    let sample_at = |clip: &AudioClip, t: f64| -> f64 {
        let pos = t * clip.frame_rate_hz;
        let i = pos.floor();
        if i < 0.0 || i as usize >= clip.len() {
            return 0.0;
        }
        let i = i as usize;
        let frac = pos - i as f64;
        let next = clip.samples.get(i + 1).copied().unwrap_or(0.0);
        clip.samples[i] * (1.0 - frac) + next * frac
    };
    let d: f64 = (0..n)
        .map(|i| {
            let t = i as f64 / a.frame_rate_hz;
            let x = a.samples.get(i).copied().unwrap_or(0.0);
            let y = sample_at(b, t);
            (x - y) * (x - y)
        })
        .sum();
    d.sqrt() / norm_a
}

/// `{kind, alpha, seed, max_xcorr, l2_delta}` for one modification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationReport {
    pub kind: ModificationKind,
    pub alpha: f64,
    pub seed: u64,
    pub max_xcorr: f64,
    pub l2_delta: f64,
}

pub fn modification_report(
    original: &AudioClip,
    modified: &AudioClip,
    params: &ModificationParams,
) -> Result<ModificationReport> {
    let sim = stft_similarity(original, modified, &SimilarityParams::default())?;
    Ok(ModificationReport {
        kind: params.kind,
        alpha: params.alpha,
        seed: params.seed,
        max_xcorr: sim.max_xcorr,
        l2_delta: relative_l2_delta(original, modified),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn clip(n: usize, fr: f64) -> AudioClip {
        // offset keeps every sample away from zero so gap masks are exact
        AudioClip::new(
            (0..n)
                .map(|i| 0.3 + 0.2 * (i as f64 * 0.37).sin())
                .collect(),
            fr,
        )
        .unwrap()
    }

    #[test]
    fn pick_is_seeded() {
        let a = pick_modification(&mut rng_from_seed(3), DEFAULT_ALPHA_RANGE).unwrap();
        let b = pick_modification(&mut rng_from_seed(3), DEFAULT_ALPHA_RANGE).unwrap();
        assert_eq!(a, b);
        assert!((0.5..1.5).contains(&a.alpha));
    }

    #[test]
    fn degenerate_alpha_range_is_rejected() {
        let mut rng = rng_from_seed(0);
        assert!(matches!(
            pick_modification(&mut rng, (1.0, 1.0)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(pick_modification(&mut rng, (2.0, 1.0)).is_err());
    }

    #[test]
    fn kinds_are_uniform() {
        let mut rng = rng_from_seed(12345);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            let p = pick_modification(&mut rng, DEFAULT_ALPHA_RANGE).unwrap();
            counts[ModificationKind::ALL
                .iter()
                .position(|k| *k == p.kind)
                .unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 30_000.0;
            assert!((0.32..=0.35).contains(&f), "{counts:?}");
        }
    }

    #[test]
    fn frame_rate_formula() {
        let c = clip(800, 8000.0);
        assert_eq!(modify_frame_rate(&c, 1.0).unwrap(), c);
        assert_eq!(modify_frame_rate(&c, 1.5).unwrap().frame_rate_hz, 12_000.0);
        let slow = modify_frame_rate(&c, 0.5).unwrap();
        assert!((slow.duration_s() - 2.0 * c.duration_s()).abs() < 1e-12);
        assert_eq!(slow.samples, c.samples);
        assert!(modify_frame_rate(&c, 0.0).is_err());
        assert!(modify_frame_rate(&c, -1.0).is_err());
    }

    #[test]
    fn overlay_scale_contract() {
        let c = clip(8000, 8000.0);
        assert_eq!(overlay_pink_noise(&c, 0.0, 1).unwrap(), c);
        let scaled = AudioClip::new(
            c.samples.iter().map(|s| s * 0.2 / c.rms()).collect(),
            8000.0,
        )
        .unwrap();
        let noise = pink_overlay_noise(&scaled, 1.0, 9).unwrap();
        assert!((rms(&noise) - 0.02).abs() < 1e-6);
        let out = overlay_pink_noise(&scaled, 1.0, 9).unwrap();
        assert!(relative_l2_delta(&scaled, &out) > 1e-3);
        assert_eq!(out.frame_rate_hz, 8000.0);
    }

    #[test]
    fn overlay_on_silence_is_identity() {
        let silent = AudioClip::new(vec![0.0; 1000], 8000.0).unwrap();
        assert_eq!(overlay_pink_noise(&silent, 1.2, 4).unwrap(), silent);
    }

    #[test]
    fn overlay_stays_in_range() {
        let loud = AudioClip::new([1.0, -1.0].repeat(2000), 8000.0).unwrap();
        let out = overlay_pink_noise(&loud, 1.5, 2).unwrap();
        assert!(out.peak() <= 1.0 + 1e-12);
    }

    #[test]
    fn gap_length_follows_alpha() {
        let c = clip(40_000, 8000.0);
        let g = insert_silence_gaps(
            &c,
            1.0,
            7,
            GapParams {
                gap_prob: 1.0,
                ..GapParams::default()
            },
        )
        .unwrap();
        assert_eq!(g.gaps.len(), 5);
        assert!(g.gaps.iter().all(|&(_, len)| len == 800)); // 100 ms at 8 kHz
    }

    #[test]
    fn zero_gap_probability_is_identity() {
        let c = clip(16_000, 8000.0);
        let g = insert_silence_gaps(
            &c,
            1.3,
            7,
            GapParams {
                gap_prob: 0.0,
                ..GapParams::default()
            },
        )
        .unwrap();
        assert_eq!(g.clip, c);
        assert!(g.gaps.is_empty());
    }

    #[test]
    fn zeroed_count_matches_selected_frames() {
        let c = clip(80_000, 8000.0);
        for seed in 0..20 {
            let alpha = 0.5 + seed as f64 * 0.05;
            let g = insert_silence_gaps(&c, alpha, seed, GapParams::default()).unwrap();
            let zeroed = c
                .samples
                .iter()
                .zip(&g.clip.samples)
                .filter(|(a, b)| **a != 0.0 && **b == 0.0)
                .count();
            let per_gap = (alpha * 0.1 * 8000.0).round() as usize;
            assert_eq!(zeroed, g.gaps.len() * per_gap);
            assert_eq!(g.clip.len(), c.len());
        }
    }

    #[test]
    fn some_gap_is_always_inserted() {
        let c = clip(32_000, 8000.0);
        for seed in 0..200 {
            let g = insert_silence_gaps(&c, 1.0, seed, GapParams::default()).unwrap();
            assert!(!g.gaps.is_empty());
            assert_ne!(g.clip, c);
        }
    }

    #[test]
    fn oversized_gap_is_clamped() {
        let c = clip(16_000, 8000.0);
        let g = insert_silence_gaps(
            &c,
            20.0,
            1,
            GapParams {
                gap_prob: 1.0,
                ..GapParams::default()
            },
        )
        .unwrap();
        assert!(g.clamped);
        assert!(g.clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn short_clip_is_rejected() {
        let c = clip(4000, 8000.0);
        assert!(insert_silence_gaps(&c, 1.0, 1, GapParams::default()).is_err());
    }

    #[test]
    fn l2_delta_sees_rate_changes() {
        let c = AudioClip::new(
            (0..8000).map(|i| (i as f64 * 0.05).sin() * 0.5).collect(),
            8000.0,
        )
        .unwrap();
        assert_eq!(relative_l2_delta(&c, &c), 0.0);
        let fast = modify_frame_rate(&c, 1.2).unwrap();
        assert!(relative_l2_delta(&c, &fast) > 0.1);
        let same = modify_frame_rate(&c, 1.0).unwrap();
        assert_eq!(relative_l2_delta(&c, &same), 0.0);
    }
}
