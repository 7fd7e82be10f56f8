use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    compute_spectrum, default_pad, peak_frequency, samples_for, window_trace, SeismicTrace,
};

/// Parameters of the windowed detection score. Band and count comparisons
/// are strict where the field names say so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Algorithm1Params {
    /// Sub-segment peak must be strictly above this.
    pub band_low_hz: f64,
    /// Sub-segment peak must be strictly below this.
    pub band_high_hz: f64,
    /// Runs strictly longer than this score 1.
    pub count_low: usize,
    /// Runs at least this long score 2.
    pub count_high: usize,
    pub subsegment_s: f64,
    pub window_s: f64,
}

impl Default for Algorithm1Params {
    fn default() -> Self {
        Self {
            band_low_hz: 20.0,
            band_high_hz: 40.0,
            count_low: 6,
            count_high: 24,
            subsegment_s: 0.125,
            window_s: 4.0,
        }
    }
}

impl Algorithm1Params {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.band_low_hz && self.band_low_hz < self.band_high_hz) {
            return Err(Error::invalid_config(format!(
                "need 0 < band_low_hz ({}) < band_high_hz ({})",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if !(0 < self.count_low && self.count_low < self.count_high) {
            return Err(Error::invalid_config(format!(
                "need 0 < count_low ({}) < count_high ({})",
                self.count_low, self.count_high
            )));
        }
        if !(self.subsegment_s > 0.0 && self.window_s > 0.0) {
            return Err(Error::invalid_config(
                "sub-segment and window must be positive",
            ));
        }
        if self.count_high as f64 * self.subsegment_s > self.window_s + 1e-9 {
            return Err(Error::invalid_config(format!(
                "count_high * subsegment_s ({}) exceeds window_s ({})",
                self.count_high as f64 * self.subsegment_s,
                self.window_s
            )));
        }
        Ok(())
    }

    pub fn in_band(&self, freq_hz: f64) -> bool {
        self.band_low_hz < freq_hz && freq_hz < self.band_high_hz
    }

    /// Maps the longest in-band run to a score.
    pub fn score_for_run(&self, max_run: usize) -> DetectionScore {
        if max_run >= self.count_high {
            DetectionScore::Strong
        } else if max_run > self.count_low {
            DetectionScore::Weak
        } else {
            DetectionScore::None
        }
    }
}

/// Three-level seismic evidence: 0, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum DetectionScore {
    None = 0,
    Weak = 1,
    Strong = 2,
}

impl DetectionScore {
    pub fn value(self) -> u8 {
        self as u8
    }
}

impl From<DetectionScore> for u8 {
    fn from(ds: DetectionScore) -> u8 {
        ds.value()
    }
}

impl TryFrom<u8> for DetectionScore {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(DetectionScore::None),
            1 => Ok(DetectionScore::Weak),
            2 => Ok(DetectionScore::Strong),
            other => Err(format!("detection score must be 0, 1 or 2, got {other}")),
        }
    }
}

impl std::fmt::Display for DetectionScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Score of one window, serialized as `{window_index, start_s, ds, max_run}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDetection {
    pub window_index: usize,
    #[serde(rename = "start_s")]
    pub window_start_s: f64,
    pub ds: DetectionScore,
    pub max_run: usize,
}

/// Scores a single window.
///
/// The window is split into `subsegment_s` pieces; each piece's peak
/// frequency (mean removed, rectangular window, zero-padded) is tested
/// against the band, and the longest run of consecutive in-band pieces
/// decides the score. A rumble that ends mid-window still counts.
pub fn detect_window(
    window: &SeismicTrace,
    params: &Algorithm1Params,
    window_index: usize,
) -> Result<WindowDetection> {
    params.validate()?;
    let expected = samples_for(params.window_s, window.sample_rate_hz);
    if window.len().abs_diff(expected) > 1 {
        return Err(Error::invalid_input(format!(
            "window has {} samples, expected {expected} ({} s)",
            window.len(),
            params.window_s
        )));
    }
    let seg_len = samples_for(params.subsegment_s, window.sample_rate_hz);
    if seg_len == 0 {
        return Err(Error::invalid_input("sub-segment shorter than one sample"));
    }
    let pad = default_pad(seg_len);

    let mut run = 0usize;
    let mut max_run = 0usize;
    for seg in window.samples.chunks_exact(seg_len) {
        let spectrum = compute_spectrum(seg, window.sample_rate_hz, pad)?;
        if params.in_band(peak_frequency(&spectrum)?) {
            run += 1;
            max_run = max_run.max(run);
        } else {
            run = 0;
        }
    }
    Ok(WindowDetection {
        window_index,
        window_start_s: window.start_time_s,
        ds: params.score_for_run(max_run),
        max_run,
    })
}

/// Windows the trace and scores each window in order.
pub fn detect_stream(
    trace: &SeismicTrace,
    params: &Algorithm1Params,
) -> Result<Vec<WindowDetection>> {
    params.validate()?;
    window_trace(trace, params.window_s)?
        .iter()
        .enumerate()
        .map(|(i, w)| detect_window(w, params, i))
        .collect()
}
