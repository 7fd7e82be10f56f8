use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{samples_for, stft_frames, AudioClip, Spectrogram, WindowFn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityParams {
    pub frame_s: f64,
    pub hop_s: f64,
    /// Log magnitudes are floored this many dB below each clip's maximum.
    pub floor_db: f64,
    /// Lags must leave at least this fraction of the shorter spectrogram
    /// overlapping.
    pub min_overlap: f64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            frame_s: 0.064,
            hop_s: 0.032,
            floor_db: 80.0,
            min_overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub max_xcorr: f64,
    /// Frame offset of `b` relative to `a` at the best match: frame `i` of
    /// `a` lines up with frame `i + best_lag_frames` of `b`.
    pub best_lag_frames: i64,
}

/// Hann-windowed STFT of a clip at its own frame rate, in dB with a floor.
pub fn log_spectrogram(clip: &AudioClip, params: &SimilarityParams) -> Result<Spectrogram> {
    let frame_len = samples_for(params.frame_s, clip.frame_rate_hz);
    let hop = samples_for(params.hop_s, clip.frame_rate_hz).max(1);
    if frame_len < 2 || clip.len() < frame_len {
        return Err(Error::invalid_input(format!(
            "clip of {} s is shorter than one {} s analysis frame",
            clip.duration_s(),
            params.frame_s
        )));
    }
    let mut spec = stft_frames(
        &clip.samples,
        clip.frame_rate_hz,
        0.0,
        frame_len,
        hop.min(frame_len),
        WindowFn::Hann,
        frame_len.next_power_of_two(),
    )?;
    let mut top = f64::NEG_INFINITY;
    for row in &mut spec.magnitudes {
        for m in row.iter_mut() {
            *m = 20.0 * m.max(1e-300).log10();
            top = top.max(*m);
        }
    }
    let floor = top - params.floor_db;
    for row in &mut spec.magnitudes {
        for m in row.iter_mut() {
            *m = m.max(floor);
        }
    }
    Ok(spec)
}

/// Linear interpolation of one spectrogram row onto `grid`.
fn resample_row(freqs: &[f64], row: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut j = 0;
    grid.iter()
        .map(|&f| {
            while j + 1 < freqs.len() && freqs[j + 1] < f {
                j += 1;
            }
            if f <= freqs[0] {
                return row[0];
            }
            if j + 1 >= freqs.len() {
                return row[freqs.len() - 1];
            }
            let t = (f - freqs[j]) / (freqs[j + 1] - freqs[j]);
            row[j] * (1.0 - t) + row[j + 1] * t
        })
        .collect()
}

/// Puts both spectrograms on the coarser of the two frequency grids,
/// restricted to the band both cover.
fn shared_grid(a: &Spectrogram, b: &Spectrogram) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let step = |s: &Spectrogram| s.freqs_hz[1] - s.freqs_hz[0];
    let (coarse, fine, a_is_coarse) = if step(a) >= step(b) {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let top = coarse
        .freqs_hz
        .last()
        .copied()
        .unwrap_or(0.0)
        .min(fine.freqs_hz.last().copied().unwrap_or(0.0));
    let n = coarse
        .freqs_hz
        .iter()
        .take_while(|&&f| f <= top + 1e-9)
        .count();
    let grid = &coarse.freqs_hz[..n];
    let coarse_rows: Vec<Vec<f64>> = coarse.magnitudes.iter().map(|r| r[..n].to_vec()).collect();
    let fine_rows: Vec<Vec<f64>> = fine
        .magnitudes
        .iter()
        .map(|r| resample_row(&fine.freqs_hz, r, grid))
        .collect();
    if a_is_coarse {
        (coarse_rows, fine_rows)
    } else {
        (fine_rows, coarse_rows)
    }
}

fn normalize(rows: &mut [Vec<f64>]) {
    let count = rows.iter().map(|r| r.len()).sum::<usize>() as f64;
    if count == 0.0 {
        return;
    }
    let mean = rows.iter().flatten().sum::<f64>() / count;
    let norm = rows
        .iter()
        .flatten()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        .sqrt();
    for v in rows.iter_mut().flatten() {
        *v = if norm > 0.0 { (*v - mean) / norm } else { 0.0 };
    }
}

/// Normalized correlation of two equally shaped blocks of rows.
fn block_correlation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.iter().map(|r| r.len()).sum::<usize>() as f64;
    let ma = a.iter().flatten().sum::<f64>() / n;
    let mb = b.iter().flatten().sum::<f64>() / n;
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        let (dx, dy) = (x - ma, y - mb);
        num += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    num / (va * vb).sqrt()
}

/// Maximum normalized cross-correlation between the log spectrograms of two
/// clips over integer time-frame lags.
///
/// Each clip is analysed at its own frame rate, so a clip replayed at a
/// different rate is compared as it would be heard.
pub fn stft_similarity(
    a: &AudioClip,
    b: &AudioClip,
    params: &SimilarityParams,
) -> Result<SimilarityScore> {
    let sa = log_spectrogram(a, params)?;
    let sb = log_spectrogram(b, params)?;
    let (mut ra, mut rb) = shared_grid(&sa, &sb);
    normalize(&mut ra);
    normalize(&mut rb);

    let (na, nb) = (ra.len() as i64, rb.len() as i64);
    let min_overlap = ((na.min(nb) as f64 * params.min_overlap).ceil() as i64).max(1);
    let mut best: Option<SimilarityScore> = None;
    for lag in -(na - 1)..nb {
        // a[i] pairs with b[i + lag]
        let lo = 0.max(-lag);
        let hi = na.min(nb - lag);
        if hi - lo < min_overlap {
            continue;
        }
        let xa = &ra[lo as usize..hi as usize];
        let xb = &rb[(lo + lag) as usize..(hi + lag) as usize];
        let c = block_correlation(xa, xb);
        let better = match best {
            None => true,
            Some(s) => c > s.max_xcorr || (c == s.max_xcorr && lag.abs() < s.best_lag_frames.abs()),
        };
        if better {
            best = Some(SimilarityScore {
                max_xcorr: c.clamp(-1.0, 1.0),
                best_lag_frames: lag,
            });
        }
    }
    best.ok_or_else(|| Error::invalid_input("spectrograms never overlap enough to compare"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{background_noise, synth_bee_buzz, BeeBuzzSpec};

    fn bee() -> AudioClip {
        synth_bee_buzz(&BeeBuzzSpec::default(), 7).unwrap()
    }

    #[test]
    fn self_similarity_is_one() {
        let x = bee();
        let s = stft_similarity(&x, &x, &SimilarityParams::default()).unwrap();
        assert!((s.max_xcorr - 1.0).abs() < 1e-6);
        assert_eq!(s.best_lag_frames, 0);
    }

    #[test]
    fn shifted_copy_peaks_at_the_shift() {
        let x = bee();
        let hop = 256; // 32 ms at 8 kHz
        for k in [3usize, 10] {
            let mut shifted = vec![0.0; k * hop];
            shifted.extend_from_slice(&x.samples);
            let y = AudioClip::new(shifted, 8000.0).unwrap();
            let s = stft_similarity(&x, &y, &SimilarityParams::default()).unwrap();
            assert_eq!(s.best_lag_frames, k as i64);
            assert!(s.max_xcorr > 0.999, "{}", s.max_xcorr);
        }
    }

    #[test]
    fn unrelated_noise_scores_low() {
        let x = bee();
        let mut high = 0;
        for seed in 0..100 {
            let n = AudioClip::new(background_noise(x.len(), 0.3, seed), 8000.0).unwrap();
            let s = stft_similarity(&x, &n, &SimilarityParams::default()).unwrap();
            if s.max_xcorr >= 0.3 {
                high += 1;
            }
        }
        assert!(high <= 1, "{high} of 100 noise clips scored >= 0.3");
    }

    #[test]
    fn too_short_is_rejected() {
        let x = AudioClip::new(vec![0.1; 100], 8000.0).unwrap();
        assert!(stft_similarity(&x, &bee(), &SimilarityParams::default()).is_err());
    }

    #[test]
    fn bounded() {
        let x = bee();
        let y = AudioClip::new(x.samples.iter().rev().copied().collect(), 11_025.0).unwrap();
        let s = stft_similarity(&x, &y, &SimilarityParams::default()).unwrap();
        assert!(s.max_xcorr.abs() <= 1.0);
    }
}
