use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{compute_stft, SeismicTrace, WindowFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub frame_s: f64,
    pub hop_s: f64,
    pub min_event_s: f64,
    /// Also require the peak trajectory to rise and then fall.
    pub require_rise_fall: bool,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            frame_s: 0.5,
            hop_s: 0.125,
            min_event_s: 3.0,
            require_rise_fall: false,
            band_low_hz: 20.0,
            band_high_hz: 40.0,
        }
    }
}

/// A rumble found by the STFT reference detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RumbleEvent {
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// `(frame centre time, peak frequency)` for every frame in the event.
    pub peak_trajectory: Vec<(f64, f64)>,
}

impl RumbleEvent {
    pub fn duration_s(&self) -> f64 {
        self.t_end_s - self.t_start_s
    }

    fn rises_then_falls(&self) -> bool {
        let track = &self.peak_trajectory;
        if track.len() < 3 {
            return false;
        }
        let mut imax = 0;
        for (i, &(_, f)) in track.iter().enumerate() {
            if f > track[imax].1 {
                imax = i;
            }
        }
        imax > 0 && imax < track.len() - 1
    }
}

/// Finds maximal runs of Hann-windowed STFT frames whose peak lies strictly
/// inside the band and that last at least `min_event_s`.
///
/// Each frame accounts for one hop of time centred on the frame, so an event
/// spans `[first centre - hop/2, last centre + hop/2]`.
pub fn stft_oracle_detect(trace: &SeismicTrace, params: &OracleParams) -> Result<Vec<RumbleEvent>> {
    if !(params.band_low_hz < params.band_high_hz) {
        return Err(Error::invalid_config("oracle band is empty"));
    }
    let spec = compute_stft(trace, params.frame_s, params.hop_s, WindowFn::Hann)?;
    let track = spec.peak_track();
    let hop = spec.hop_s;
    let in_band = |f: f64| params.band_low_hz < f && f < params.band_high_hz;

    let mut events = Vec::new();
    let mut i = 0;
    while i < track.len() {
        if !in_band(track[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < track.len() && in_band(track[i]) {
            i += 1;
        }
        let event = RumbleEvent {
            t_start_s: spec.frame_times_s[start] - hop / 2.0,
            t_end_s: spec.frame_times_s[i - 1] + hop / 2.0,
            peak_trajectory: (start..i)
                .map(|k| (spec.frame_times_s[k], track[k]))
                .collect(),
        };
        if event.duration_s() + 1e-9 >= params.min_event_s
            && (!params.require_rise_fall || event.rises_then_falls())
        {
            events.push(event);
        }
    }
    Ok(events)
}
