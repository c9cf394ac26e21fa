use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ComplexSignal;
use crate::error::{Error, Result};

/// Target SNR measured inside `reference_bandwidth` (Hz) around DC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub target_snr_db: f64,
    pub reference_bandwidth: f64,
}

impl SnrSpec {
    pub fn new(target_snr_db: f64, reference_bandwidth: f64) -> Self {
        Self {
            target_snr_db,
            reference_bandwidth,
        }
    }

    fn validate(&self, sample_rate: f64) -> Result<()> {
        if !self.target_snr_db.is_finite() {
            return Err(Error::invalid("target SNR must be finite"));
        }
        if !(self.reference_bandwidth > 0.0) {
            return Err(Error::invalid("reference bandwidth must be positive"));
        }
        if self.reference_bandwidth > sample_rate * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "reference bandwidth {} Hz exceeds sample rate {} Hz",
                self.reference_bandwidth, sample_rate
            )));
        }
        Ok(())
    }
}

/// Per-sample complex noise standard deviation that gives `spec` for a
/// signal of mean power `signal_power` sampled at `sample_rate`.
///
/// The noise is white over the whole sample rate, so its total power is the
/// in-band power times `sample_rate / reference_bandwidth`.
pub fn noise_std_for(signal_power: f64, sample_rate: f64, spec: &SnrSpec) -> Result<f64> {
    spec.validate(sample_rate)?;
    if !(signal_power >= 0.0 && signal_power.is_finite()) {
        return Err(Error::invalid(
            "signal power must be finite and non-negative",
        ));
    }
    let snr = 10f64.powf(spec.target_snr_db / 10.0);
    Ok((signal_power * sample_rate / spec.reference_bandwidth / snr).sqrt())
}

/// Circular complex Gaussian samples with E|n|^2 = std^2.
pub fn complex_gaussian(len: usize, std: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std / 2f64.sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

pub fn add_awgn(sig: &ComplexSignal, spec: &SnrSpec, seed: u64) -> Result<ComplexSignal> {
    sig.require_nonempty("add_awgn")?;
    let std = noise_std_for(sig.power(), sig.sample_rate(), spec)?;
    let noise = complex_gaussian(sig.len(), std, seed);
    let samples = sig
        .samples()
        .iter()
        .zip(noise)
        .map(|(s, n)| s + n)
        .collect();
    ComplexSignal::new(sig.sample_rate(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn unit_tone(rate: f64, len: usize) -> ComplexSignal {
        let s = (0..len)
            .map(|n| Complex64::from_polar(1.0, 0.01 * n as f64))
            .collect();
        ComplexSignal::new(rate, s).unwrap()
    }

    fn measured_snr_db(clean: &ComplexSignal, noisy: &ComplexSignal) -> f64 {
        let noise: f64 = clean
            .samples()
            .iter()
            .zip(noisy.samples())
            .map(|(a, b)| (b - a).norm_sqr())
            .sum();
        10.0 * (clean.energy() / noise).log10()
    }

    #[test]
    fn full_band_reference_gives_target() {
        let s = unit_tone(1.0e6, 200_000);
        let n = add_awgn(&s, &SnrSpec::new(20.0, 1.0e6), 7).unwrap();
        assert!((measured_snr_db(&s, &n) - 20.0).abs() < 0.2);
    }

    #[test]
    fn quarter_band_reference_adds_bandwidth_ratio() {
        let s = unit_tone(1.0e6, 200_000);
        let n = add_awgn(&s, &SnrSpec::new(20.0, 0.25e6), 7).unwrap();
        let expected = 20.0 - 10.0 * 4f64.log10();
        assert!((measured_snr_db(&s, &n) - expected).abs() < 0.3);
    }

    #[test]
    fn same_seed_same_noise() {
        let s = unit_tone(1.0e6, 1000);
        let spec = SnrSpec::new(5.0, 1.0e6);
        assert_eq!(
            add_awgn(&s, &spec, 3).unwrap(),
            add_awgn(&s, &spec, 3).unwrap()
        );
        assert_ne!(
            add_awgn(&s, &spec, 3).unwrap(),
            add_awgn(&s, &spec, 4).unwrap()
        );
    }

    #[test]
    fn reference_wider_than_rate_rejected() {
        let s = unit_tone(1.0e6, 10);
        assert!(add_awgn(&s, &SnrSpec::new(5.0, 2.0e6), 0).is_err());
    }

    #[test]
    fn noise_is_white_across_subbands() {
        let len = 1 << 17;
        let mut x = complex_gaussian(len, 1.0, 11);
        FftPlanner::<f64>::new()
            .plan_fft_forward(len)
            .process(&mut x);
        let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        for band in x.chunks(len / 8) {
            let p: f64 = band.iter().map(|v| v.norm_sqr()).sum();
            assert!((p / total - 0.125).abs() < 0.125 * 0.05);
        }
    }
}
