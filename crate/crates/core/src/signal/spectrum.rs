use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::ComplexSignal;
use crate::error::{Error, Result};

/// Two-sided power spectrum, frequencies ascending from -rate/2.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    /// Power per bin in dB; the linear bins sum to the mean signal power.
    pub power_db: Vec<f64>,
}

impl Spectrum {
    /// Linear power summed over bins with `lo <= f <= hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freq_hz
            .iter()
            .zip(&self.power_db)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| 10f64.powf(p / 10.0))
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power_db.iter().map(|p| 10f64.powf(p / 10.0)).sum()
    }
}

/// Welch estimate with a Hann window and 50% overlap.
pub fn power_spectrum(sig: &ComplexSignal, nfft: usize) -> Result<Spectrum> {
    if nfft < 2 {
        return Err(Error::invalid("nfft must be at least 2"));
    }
    if sig.len() < nfft {
        return Err(Error::invalid(format!(
            "signal of {} samples shorter than nfft {nfft}",
            sig.len()
        )));
    }
    let window: Vec<f64> = (0..nfft)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / nfft as f64).cos())
        .collect();
    let w_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);

    let hop = nfft / 2;
    let mut acc = vec![0.0; nfft];
    let mut segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let x = sig.samples();
    let mut start = 0;
    while start + nfft <= x.len() {
        for ((b, v), w) in buf.iter_mut().zip(&x[start..start + nfft]).zip(&window) {
            *b = v * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * nfft as f64 * w_energy);
    let rate = sig.sample_rate();
    let half = nfft / 2;
    let (freq_hz, power_db) = (0..nfft)
        .map(|i| {
            let k = (i + nfft - half) % nfft;
            let f = (i as f64 - half as f64) * rate / nfft as f64;
            (f, 10.0 * (acc[k] * scale).max(1e-300).log10())
        })
        .unzip();
    Ok(Spectrum { freq_hz, power_db })
}
