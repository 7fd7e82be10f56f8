use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Taper applied to a segment before transforming it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Rectangular,
    Hann,
}

impl WindowFn {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; len],
            WindowFn::Hann => {
                if len <= 1 {
                    return vec![1.0; len];
                }
                // periodic Hann, the usual choice for spectral analysis
                (0..len)
                    .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
                    .collect()
            }
        }
    }
}

/// One-sided magnitude spectrum with the DC bin removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn resolution_hz(&self) -> Option<f64> {
        match self.freqs_hz.as_slice() {
            [a, b, ..] => Some(b - a),
            [a] => Some(*a),
            [] => None,
        }
    }
}

/// Zero-padded length used for peak picking: the next power of two at least
/// four times the segment length.
pub fn default_pad(len: usize) -> usize {
    (len.max(1) * 4).next_power_of_two()
}

/// Magnitude spectrum of a mean-removed, zero-padded segment (rectangular
/// window).
pub fn compute_spectrum(samples: &[f64], sample_rate_hz: f64, pad_to: usize) -> Result<Spectrum> {
    compute_spectrum_windowed(samples, sample_rate_hz, pad_to, WindowFn::Rectangular)
}

/// Like [`compute_spectrum`] but tapers the mean-removed segment first.
///
/// Bins `1..=pad_to/2` are returned, so an even `pad_to` yields exactly
/// `pad_to / 2` values and the bin spacing is `sample_rate_hz / pad_to`.
pub fn compute_spectrum_windowed(
    samples: &[f64],
    sample_rate_hz: f64,
    pad_to: usize,
    window: WindowFn,
) -> Result<Spectrum> {
    if samples.is_empty() {
        return Err(Error::invalid_input("spectrum of an empty segment"));
    }
    if pad_to < samples.len() {
        return Err(Error::invalid_input(format!(
            "pad_to ({pad_to}) is shorter than the segment ({})",
            samples.len()
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid_input("sample rate must be positive"));
    }

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let taper = window.coefficients(samples.len());
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(pad_to);
    buf.extend(
        samples
            .iter()
            .zip(&taper)
            .map(|(s, w)| Complex::new((s - mean) * w, 0.0)),
    );
    buf.resize(pad_to, Complex::new(0.0, 0.0));

    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(pad_to).process(&mut buf));

    let bins = pad_to / 2;
    let df = sample_rate_hz / pad_to as f64;
    let freqs_hz = (1..=bins).map(|k| k as f64 * df).collect();
    let magnitudes = buf[1..=bins].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        freqs_hz,
        magnitudes,
    })
}

/// Frequency of the largest magnitude. Ties go to the lowest frequency.
pub fn peak_frequency(spectrum: &Spectrum) -> Result<f64> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &m) in spectrum.magnitudes.iter().enumerate() {
        match best {
            Some((_, bm)) if m <= bm => {}
            _ => best = Some((i, m)),
        }
    }
    best.map(|(i, _)| spectrum.freqs_hz[i])
        .ok_or_else(|| Error::invalid_input("peak of an empty spectrum"))
}
