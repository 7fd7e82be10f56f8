use std::cell::RefCell;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Bins below this frequency get the gain of `PINK_F_MIN_HZ` instead of an
/// ever-growing 1/sqrt(f).
pub const PINK_F_MIN_HZ: f64 = 1.0;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Seeded 1/f noise, zero mean and unit RMS.
///
/// White Gaussian noise is transformed, each bin scaled by 1/sqrt(f) (DC
/// removed), and transformed back.
pub fn generate_pink_noise(n_samples: usize, sample_rate_hz: f64, seed: u64) -> Result<Vec<f64>> {
    power_law_noise(n_samples, sample_rate_hz, 1.0, seed)
}

/// Seeded noise with power spectral density proportional to 1/f^exponent,
/// zero mean and unit RMS. Exponent 0 is white, 1 pink, 2 brown.
pub fn power_law_noise(
    n_samples: usize,
    sample_rate_hz: f64,
    exponent: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::invalid_input("noise needs at least one sample"));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid_input("sample rate must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut buf: Vec<Complex<f64>> = (0..n_samples)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();

    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        p.plan_fft_forward(n_samples).process(&mut buf);
        let df = sample_rate_hz / n_samples as f64;
        buf[0] = Complex::new(0.0, 0.0);
        for (k, c) in buf.iter_mut().enumerate().skip(1) {
            // mirror index so the negative half gets the same gain
            let kk = k.min(n_samples - k);
            let f = (kk as f64 * df).max(PINK_F_MIN_HZ);
            *c *= f.powf(-exponent / 2.0);
        }
        p.plan_fft_inverse(n_samples).process(&mut buf);
    });

    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n_samples as f64;
    for v in &mut out {
        *v -= mean;
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n_samples as f64).sqrt();
    if rms > 0.0 {
        for v in &mut out {
            *v /= rms;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rms_zero_mean() {
        for seed in 0..5 {
            let x = generate_pink_noise(10_000, 8000.0, seed).unwrap();
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
            assert!(mean.abs() < 1e-12);
            assert!((rms - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn seeded() {
        let a = generate_pink_noise(1024, 1000.0, 5).unwrap();
        assert_eq!(a, generate_pink_noise(1024, 1000.0, 5).unwrap());
        assert_ne!(a, generate_pink_noise(1024, 1000.0, 6).unwrap());
        assert!(generate_pink_noise(0, 1000.0, 5).is_err());
    }
}
