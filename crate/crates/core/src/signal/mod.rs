//! Rate-tagged complex baseband signals and the DSP primitives shared by every
//! other module: resampling, FIR low-pass design and filtering, calibrated
//! white-noise injection, SNR metrology and power spectra.

mod filter;
mod metrics;
mod noise;
mod resample;
mod spectrum;

pub use filter::{
    apply_filter, design_lowpass, design_lowpass_aligned, design_lowpass_half_delay, kaiser_beta,
    FirFilter,
};
pub use metrics::{measure_snr, measure_snr_capped, tone_gain, DEFAULT_SNR_CAP_DB};
pub use noise::{add_awgn, complex_gaussian, noise_std_for, SnrSpec};
pub use resample::{decimate, upsample, UpsampleMethod};
pub use spectrum::{power_spectrum, Spectrum};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A sampled complex baseband waveform tagged with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    sample_rate: f64,
    samples: Vec<Complex64>,
}

impl ComplexSignal {
    pub fn new(sample_rate: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn zeros(sample_rate: f64, len: usize) -> Result<Self> {
        Self::new(sample_rate, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power per sample.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    pub(crate) fn require_nonempty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::invalid(format!("{what}: signal is empty")))
        } else {
            Ok(())
        }
    }

    /// Fails unless `other` has the same rate and length, the precondition
    /// for any elementwise combination.
    pub fn ensure_compatible(&self, other: &ComplexSignal) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::invalid(format!(
                "sample rate mismatch: {} Hz vs {} Hz",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &ComplexSignal) -> Result<ComplexSignal> {
        self.ensure_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            samples,
        })
    }

    /// `self + gain * other`, elementwise.
    pub fn add_scaled(&self, other: &ComplexSignal, gain: f64) -> Result<ComplexSignal> {
        self.ensure_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b * gain)
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            samples,
        })
    }

    pub fn scaled(&self, gain: Complex64) -> ComplexSignal {
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|s| s * gain).collect(),
        }
    }

    /// Copy of `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<ComplexSignal> {
        if start + len > self.len() {
            return Err(Error::invalid(format!(
                "slice {start}..{} out of bounds for length {}",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            sample_rate: self.sample_rate,
            samples: self.samples[start..start + len].to_vec(),
        })
    }

    /// Treats the signal as one period of a periodic waveform and extends it
    /// by `guard` samples on both sides.
    pub fn cyclic_extend(&self, guard: usize) -> Result<ComplexSignal> {
        self.require_nonempty("cyclic_extend")?;
        let n = self.len();
        let samples = (0..n + 2 * guard)
            .map(|i| self.samples[(i + n - guard % n) % n])
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            samples,
        })
    }
}

/// Rates are carried as `f64` Hz; integer relationships between them are
/// checked with a relative tolerance.
pub(crate) fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    if !(num > 0.0 && den > 0.0) {
        return None;
    }
    let r = num / den;
    let rounded = r.round();
    if rounded >= 1.0 && (r - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

pub(crate) fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}
