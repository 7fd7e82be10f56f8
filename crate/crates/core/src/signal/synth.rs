//! Test-signal synthesis: elephant rumbles buried in geophone noise and a
//! harmonic bee buzz for the deterrent pipeline.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{rms, samples_for, AudioClip, SeismicTrace};
use crate::deterrent::power_law_noise;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Flat,
    Hann,
    /// Cosine tapers covering `taper` of the duration in total (half at each end).
    Tukey {
        taper: f64,
    },
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope::Tukey { taper: 0.2 }
    }
}

impl Envelope {
    /// Gain at normalized position `u` in [0, 1].
    fn gain(self, u: f64) -> f64 {
        match self {
            Envelope::Flat => 1.0,
            Envelope::Hann => 0.5 - 0.5 * (2.0 * PI * u).cos(),
            Envelope::Tukey { taper } => {
                let half = (taper.clamp(0.0, 1.0)) / 2.0;
                if half == 0.0 {
                    1.0
                } else if u < half {
                    0.5 - 0.5 * (PI * u / half).cos()
                } else if u > 1.0 - half {
                    0.5 - 0.5 * (PI * (1.0 - u) / half).cos()
                } else {
                    1.0
                }
            }
        }
    }
}

/// A rise-then-fall frequency-modulated rumble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RumbleSpec {
    pub duration_s: f64,
    pub f_start_hz: f64,
    pub f_peak_hz: f64,
    pub f_end_hz: f64,
    pub envelope: Envelope,
    /// Ratio of rumble power to background power in dB. `None` means a
    /// noiseless trace.
    pub snr_db: Option<f64>,
    pub amplitude: f64,
}

impl Default for RumbleSpec {
    fn default() -> Self {
        Self {
            duration_s: 4.0,
            f_start_hz: 20.0,
            f_peak_hz: 40.0,
            f_end_hz: 20.0,
            envelope: Envelope::default(),
            snr_db: Some(20.0),
            amplitude: 1.0,
        }
    }
}

impl RumbleSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid_input(format!(
                "rumble duration must be >= 0, got {}",
                self.duration_s
            )));
        }
        let nyquist = sample_rate_hz / 2.0;
        for (name, f) in [
            ("f_start_hz", self.f_start_hz),
            ("f_peak_hz", self.f_peak_hz),
            ("f_end_hz", self.f_end_hz),
        ] {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::invalid_input(format!(
                    "{name} = {f} outside (0, {nyquist}) Hz"
                )));
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid_input(
                    "snr_db must be finite (use null for no noise)",
                ));
            }
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid_input("rumble amplitude must be positive"));
        }
        Ok(())
    }

    /// 3-5 s long with every corner frequency inside [20, 40] Hz.
    pub fn is_field_typical(&self) -> bool {
        (3.0..=5.0).contains(&self.duration_s)
            && [self.f_start_hz, self.f_peak_hz, self.f_end_hz]
                .iter()
                .all(|f| (20.0..=40.0).contains(f))
    }

    fn instantaneous_hz(&self, t: f64) -> f64 {
        let half = self.duration_s / 2.0;
        if half <= 0.0 {
            return self.f_start_hz;
        }
        if t <= half {
            self.f_start_hz + (self.f_peak_hz - self.f_start_hz) * t / half
        } else {
            self.f_peak_hz + (self.f_end_hz - self.f_peak_hz) * (t - half) / half
        }
    }
}

/// Noise-free rumble samples, phase-continuous, `round(duration * rate)` long.
pub fn rumble_waveform(spec: &RumbleSpec, sample_rate_hz: f64) -> Result<Vec<f64>> {
    spec.validate(sample_rate_hz)?;
    let n = samples_for(spec.duration_s, sample_rate_hz);
    let dt = 1.0 / sample_rate_hz;
    let mut phase = 0.0_f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let u = if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.5
        };
        out.push(spec.amplitude * spec.envelope.gain(u) * phase.sin());
        // midpoint rule keeps the accumulated phase faithful to the
        // piecewise-linear frequency law
        phase += 2.0 * PI * spec.instantaneous_hz(t + dt / 2.0) * dt;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    Ok(out)
}

/// Seeded zero-mean Gaussian white noise with standard deviation `std`.
pub fn background_noise(n: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// A trace of `total_s` seconds holding one rumble at `onset_s` over white
/// background noise at the spec's SNR.
///
/// The SNR reference is the mean power of the rumble over its own duration;
/// a zero-length rumble uses the power of an un-enveloped sinusoid of the
/// same amplitude.
pub fn synth_rumble(
    spec: &RumbleSpec,
    sample_rate_hz: f64,
    total_s: f64,
    onset_s: f64,
    seed: u64,
) -> Result<SeismicTrace> {
    spec.validate(sample_rate_hz)?;
    if !(onset_s >= 0.0 && total_s > 0.0) {
        return Err(Error::invalid_input("onset must be >= 0 and total > 0"));
    }
    if onset_s + spec.duration_s > total_s + 1e-9 {
        return Err(Error::invalid_input(format!(
            "rumble [{onset_s}, {}] runs past the trace end {total_s}",
            onset_s + spec.duration_s
        )));
    }
    let n = samples_for(total_s, sample_rate_hz);
    let rumble = rumble_waveform(spec, sample_rate_hz)?;
    let mut samples = match spec.snr_db {
        Some(snr) => {
            let ref_rms = if rumble.is_empty() {
                spec.amplitude / 2f64.sqrt()
            } else {
                rms(&rumble)
            };
            background_noise(n, ref_rms / 10f64.powf(snr / 20.0), seed)
        }
        None => vec![0.0; n],
    };
    let start = samples_for(onset_s, sample_rate_hz);
    for (dst, r) in samples.iter_mut().skip(start).zip(&rumble) {
        *dst += r;
    }
    SeismicTrace::new(samples, sample_rate_hz, 0.0)
}

/// A swarm buzz standing in for a recorded bee clip: several voices with
/// slightly different wingbeat fundamentals, harmonics rolling off with a
/// power law, and a power-law broadband bed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeeBuzzSpec {
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    pub fundamental_hz: f64,
    /// Number of bees in the swarm.
    pub voices: usize,
    /// Relative spread of the voices' fundamentals (uniform, +/-).
    pub spread: f64,
    /// Harmonic amplitude falls by this many dB per octave.
    pub rolloff_db_per_octave: f64,
    pub vibrato_hz: f64,
    /// Relative frequency deviation of the vibrato.
    pub vibrato_depth: f64,
    pub tremolo_hz: f64,
    pub tremolo_depth: f64,
    /// Broadband noise RMS relative to the harmonic part.
    pub noise_level: f64,
    /// Spectral exponent of the noise bed (PSD ~ 1/f^exponent).
    pub bed_exponent: f64,
    pub peak: f64,
}

impl Default for BeeBuzzSpec {
    fn default() -> Self {
        Self {
            duration_s: 4.0,
            frame_rate_hz: 8000.0,
            fundamental_hz: 220.0,
            voices: 8,
            spread: 0.06,
            rolloff_db_per_octave: 15.0,
            vibrato_hz: 5.0,
            vibrato_depth: 0.02,
            tremolo_hz: 3.0,
            tremolo_depth: 0.1,
            noise_level: 1.0,
            bed_exponent: 2.0,
            peak: 0.8,
        }
    }
}

pub fn synth_bee_buzz(spec: &BeeBuzzSpec, seed: u64) -> Result<AudioClip> {
    if !(spec.duration_s > 0.0 && spec.frame_rate_hz > 0.0 && spec.fundamental_hz > 0.0) {
        return Err(Error::invalid_input(
            "bee buzz needs positive duration, frame rate and fundamental",
        ));
    }
    if spec.voices == 0 {
        return Err(Error::invalid_input("bee buzz needs at least one voice"));
    }
    let mut rng = rng_from_seed(seed);
    let nyquist = spec.frame_rate_hz / 2.0;
    let n = samples_for(spec.duration_s, spec.frame_rate_hz);
    let dt = 1.0 / spec.frame_rate_hz;
    let exponent = spec.rolloff_db_per_octave / (20.0 * 2f64.log10());
    let mut out = vec![0.0; n];
    for _ in 0..spec.voices {
        let f0 = spec.fundamental_hz * (1.0 + rng.random_range(-spec.spread..=spec.spread));
        let vib_phase = rng.random_range(0.0..2.0 * PI);
        let n_harm = ((nyquist / (f0 * (1.0 + spec.vibrato_depth))).floor() as usize).max(1);
        let phases: Vec<f64> = (0..n_harm)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let mut base = 0.0_f64;
        for (i, o) in out.iter_mut().enumerate() {
            let t = i as f64 * dt;
            let f = f0
                * (1.0 + spec.vibrato_depth * (2.0 * PI * spec.vibrato_hz * t + vib_phase).sin());
            let mut v = 0.0;
            for (k, ph) in phases.iter().enumerate() {
                let h = (k + 1) as f64;
                v += (h * base + ph).sin() * h.powf(-exponent);
            }
            *o += v;
            base = (base + 2.0 * PI * f * dt) % (2.0 * PI);
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 * dt;
        *o *= 1.0 - spec.tremolo_depth * 0.5 * (1.0 + (2.0 * PI * spec.tremolo_hz * t).sin());
    }
    if spec.noise_level > 0.0 {
        let harmonic_rms = rms(&out);
        let bed = power_law_noise(n, spec.frame_rate_hz, spec.bed_exponent, rng.random())?;
        for (o, b) in out.iter_mut().zip(&bed) {
            *o += spec.noise_level * harmonic_rms * b;
        }
    }
    let peak = out.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        for s in &mut out {
            *s *= spec.peak / peak;
        }
    }
    AudioClip::new(out, spec.frame_rate_hz)
}
