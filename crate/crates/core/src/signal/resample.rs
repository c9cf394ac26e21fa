use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ComplexSignal;
use crate::error::{Error, Result};

/// Interpolation used to move a baseband waveform onto a faster grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMethod {
    /// Zero-order hold: every input sample repeats `factor` times.
    Hold,
    /// Band-limited interpolation. The input is treated as one period of a
    /// periodic waveform and zero-padded in the DFT domain, so the original
    /// samples are reproduced exactly and no images are created.
    #[default]
    Sinc,
}

pub fn upsample(
    sig: &ComplexSignal,
    factor: usize,
    method: UpsampleMethod,
) -> Result<ComplexSignal> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be at least 1"));
    }
    sig.require_nonempty("upsample")?;
    let rate = sig.sample_rate() * factor as f64;
    if factor == 1 {
        return ComplexSignal::new(rate, sig.samples().to_vec());
    }
    let samples = match method {
        UpsampleMethod::Hold => sig
            .samples()
            .iter()
            .flat_map(|&s| std::iter::repeat(s).take(factor))
            .collect(),
        UpsampleMethod::Sinc => sinc_interpolate(sig.samples(), factor),
    };
    ComplexSignal::new(rate, samples)
}

fn sinc_interpolate(x: &[Complex64], factor: usize) -> Vec<Complex64> {
    let n = x.len();
    let out_len = n * factor;
    let mut planner = FftPlanner::<f64>::new();

    let mut spectrum = x.to_vec();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let mut padded = vec![Complex64::new(0.0, 0.0); out_len];
    let half = n / 2;
    if n % 2 == 0 {
        // Positive bins below Nyquist, negative bins above it, and the
        // Nyquist bin split evenly between +fs/2 and -fs/2.
        padded[..half].copy_from_slice(&spectrum[..half]);
        for k in half + 1..n {
            padded[out_len - (n - k)] = spectrum[k];
        }
        padded[half] = spectrum[half] * 0.5;
        padded[out_len - half] += spectrum[half] * 0.5;
    } else {
        padded[..=half].copy_from_slice(&spectrum[..=half]);
        for k in half + 1..n {
            padded[out_len - (n - k)] = spectrum[k];
        }
    }

    planner.plan_fft_inverse(out_len).process(&mut padded);
    let scale = 1.0 / n as f64;
    padded.iter_mut().for_each(|v| *v *= scale);
    padded
}

/// Keeps every `factor`-th sample starting at `phase`.
pub fn decimate(sig: &ComplexSignal, factor: usize, phase: usize) -> Result<ComplexSignal> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    if phase >= factor {
        return Err(Error::invalid(format!(
            "decimation phase {phase} must be below factor {factor}"
        )));
    }
    sig.require_nonempty("decimate")?;
    let samples = sig
        .samples()
        .iter()
        .skip(phase)
        .step_by(factor)
        .take(sig.len() / factor)
        .copied()
        .collect();
    ComplexSignal::new(sig.sample_rate() / factor as f64, samples)
}
