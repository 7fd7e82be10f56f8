//! Sampled signals, spectra and the test-signal synthesizers shared by the
//! detection and deterrent code.

mod io;
mod spectrum;
mod stft;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_trace_csv, load_trace_jsonl, load_wav, read_trace_csv, read_trace_jsonl, read_wav,
    save_trace_csv, save_trace_jsonl, save_wav, write_trace_csv, write_trace_jsonl, write_wav,
};
pub use spectrum::{
    compute_spectrum, compute_spectrum_windowed, default_pad, peak_frequency, Spectrum, WindowFn,
};
pub use stft::{compute_stft, stft_frames, Spectrogram};
pub use synth::{
    background_noise, rumble_waveform, synth_bee_buzz, synth_rumble, BeeBuzzSpec, Envelope,
    RumbleSpec,
};

/// Default seismic sampling rate. Nyquist at 500 Hz leaves ample room above
/// the 20-40 Hz rumble band.
pub const DEFAULT_SEISMIC_RATE_HZ: f64 = 1000.0;

/// Ground-velocity samples from one geophone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeismicTrace {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub start_time_s: f64,
}

impl SeismicTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, start_time_s: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid_input(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            start_time_s,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.duration_s()
    }
}

/// Mono audio with samples in [-1, 1] and a nominal playback rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub frame_rate_hz: f64,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, frame_rate_hz: f64) -> Result<Self> {
        if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
            return Err(Error::invalid_input(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            frame_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.frame_rate_hz
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    /// Scales the clip down so that every sample fits in [-1, 1]. Clips that
    /// already fit are left untouched.
    pub fn normalize_peak(&mut self) {
        let peak = self.peak();
        if peak > 1.0 {
            for s in &mut self.samples {
                *s /= peak;
            }
        }
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Splits a trace into contiguous, non-overlapping windows of exactly
/// `window_s` seconds. A trailing remainder shorter than a window is dropped.
pub fn window_trace(trace: &SeismicTrace, window_s: f64) -> Result<Vec<SeismicTrace>> {
    if trace.is_empty() {
        return Err(Error::invalid_input("cannot window an empty trace"));
    }
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::invalid_input(format!(
            "window length must be positive, got {window_s}"
        )));
    }
    let window_len = samples_for(window_s, trace.sample_rate_hz);
    if window_len == 0 {
        return Err(Error::invalid_input(
            "window shorter than one sample at this sample rate",
        ));
    }
    Ok(trace
        .samples
        .chunks_exact(window_len)
        .enumerate()
        .map(|(i, chunk)| SeismicTrace {
            samples: chunk.to_vec(),
            sample_rate_hz: trace.sample_rate_hz,
            start_time_s: trace.start_time_s + (i * window_len) as f64 / trace.sample_rate_hz,
        })
        .collect())
}

/// Number of whole samples spanning `seconds` at `rate_hz`.
pub fn samples_for(seconds: f64, rate_hz: f64) -> usize {
    (seconds * rate_hz).round().max(0.0) as usize
}
