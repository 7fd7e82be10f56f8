use serde::{Deserialize, Serialize};

use super::spectrum::{compute_spectrum_windowed, default_pad, WindowFn};
use super::{samples_for, SeismicTrace};
use crate::error::{Error, Result};

/// Magnitudes laid out `[frame][frequency]`.
///
/// `frame_times_s` holds the centre of each analysis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub frame_times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_s: f64,
    pub hop_s: f64,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frame_times_s.len()
    }

    /// Peak frequency of every frame, ties broken low.
    pub fn peak_track(&self) -> Vec<f64> {
        self.magnitudes
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, &m) in row.iter().enumerate() {
                    if m > row[best] {
                        best = i;
                    }
                }
                self.freqs_hz.get(best).copied().unwrap_or(0.0)
            })
            .collect()
    }
}

/// STFT of a seismic trace with the default peak-picking zero padding.
pub fn compute_stft(
    trace: &SeismicTrace,
    frame_s: f64,
    hop_s: f64,
    window: WindowFn,
) -> Result<Spectrogram> {
    if !(hop_s > 0.0 && hop_s <= frame_s) {
        return Err(Error::invalid_input(format!(
            "need 0 < hop ({hop_s}) <= frame ({frame_s})"
        )));
    }
    if frame_s > trace.duration_s() + 0.5 / trace.sample_rate_hz {
        return Err(Error::invalid_input(format!(
            "frame ({frame_s} s) longer than trace ({} s)",
            trace.duration_s()
        )));
    }
    let frame_len = samples_for(frame_s, trace.sample_rate_hz);
    let hop = samples_for(hop_s, trace.sample_rate_hz);
    stft_frames(
        &trace.samples,
        trace.sample_rate_hz,
        trace.start_time_s,
        frame_len,
        hop,
        window,
        default_pad(frame_len),
    )
}

/// Sample-domain STFT: frames of `frame_len` samples every `hop` samples,
/// each transformed with the [`compute_spectrum_windowed`] semantics.
pub fn stft_frames(
    samples: &[f64],
    rate_hz: f64,
    start_time_s: f64,
    frame_len: usize,
    hop: usize,
    window: WindowFn,
    pad_to: usize,
) -> Result<Spectrogram> {
    if frame_len == 0 || hop == 0 || hop > frame_len {
        return Err(Error::invalid_input(format!(
            "need 0 < hop ({hop}) <= frame ({frame_len}) in samples"
        )));
    }
    if samples.len() < frame_len {
        return Err(Error::invalid_input("signal shorter than one STFT frame"));
    }
    let n_frames = (samples.len() - frame_len) / hop + 1;
    let mut frame_times_s = Vec::with_capacity(n_frames);
    let mut magnitudes = Vec::with_capacity(n_frames);
    let mut freqs_hz = Vec::new();
    for f in 0..n_frames {
        let start = f * hop;
        let spec =
            compute_spectrum_windowed(&samples[start..start + frame_len], rate_hz, pad_to, window)?;
        if f == 0 {
            freqs_hz = spec.freqs_hz;
        }
        magnitudes.push(spec.magnitudes);
        frame_times_s.push(start_time_s + (start as f64 + frame_len as f64 / 2.0) / rate_hz);
    }
    Ok(Spectrogram {
        frame_times_s,
        freqs_hz,
        magnitudes,
        frame_s: frame_len as f64 / rate_hz,
        hop_s: hop as f64 / rate_hz,
    })
}
