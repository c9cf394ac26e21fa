use std::f64::consts::PI;

use num_complex::Complex64;

use super::{same_rate, ComplexSignal};
use crate::error::{Error, Result};

/// Linear-phase FIR filter with real, symmetric taps and unit DC gain. An
/// even tap count gives a group delay of a whole number plus half a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    design_cutoff: f64,
    design_rate: f64,
}

impl FirFilter {
    /// Wraps an existing tap set. Taps must be symmetric; they are
    /// renormalized to unit DC gain.
    pub fn from_taps(taps: Vec<f64>, design_cutoff: f64, design_rate: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("filter needs at least one tap"));
        }
        let n = taps.len();
        let scale = taps.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if (0..n / 2).any(|i| (taps[i] - taps[n - 1 - i]).abs() > 1e-12 * scale) {
            return Err(Error::invalid("taps are not symmetric"));
        }
        let dc: f64 = taps.iter().sum();
        if dc.abs() < 1e-12 {
            return Err(Error::invalid("taps have zero DC gain"));
        }
        if !(design_rate > 0.0) {
            return Err(Error::invalid("design rate must be positive"));
        }
        Ok(Self {
            taps: taps.iter().map(|t| t / dc).collect(),
            design_cutoff,
            design_rate,
        })
    }

    /// Single unit tap: passes the signal through unchanged.
    pub fn identity(rate: f64) -> Self {
        Self {
            taps: vec![1.0],
            design_cutoff: rate / 2.0,
            design_rate: rate,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn design_cutoff(&self) -> f64 {
        self.design_cutoff
    }

    pub fn design_rate(&self) -> f64 {
        self.design_rate
    }

    /// (N - 1) / 2 samples.
    pub fn group_delay(&self) -> f64 {
        (self.taps.len() - 1) as f64 / 2.0
    }

    /// Whole-sample part of the group delay.
    pub fn integer_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Zero-phase (delay-compensated) frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.design_rate;
        let g = self.group_delay();
        self.taps
            .iter()
            .enumerate()
            .map(|(n, h)| h * (w * (n as f64 - g)).cos())
            .sum()
    }
}

/// Kaiser window shape parameter for a given stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

const KAISER_MARGIN_DB: f64 = 1.0;

fn kaiser_tap_count(rate: f64, transition: f64, atten_db: f64) -> usize {
    let dw = 2.0 * PI * transition / rate;
    let n = ((atten_db - 7.95) / (2.285 * dw)).ceil().max(1.0) as usize + 1;
    n | 1
}

/// Kaiser-windowed sinc low-pass filter.
///
/// `cutoff` is the one-sided band edge at complex baseband (the -6 dB point);
/// the passband ends at `cutoff - transition/2` and the stopband starts at
/// `cutoff + transition/2`. Taps are normalized to unit DC gain.
pub fn design_lowpass(
    cutoff: f64,
    rate: f64,
    transition: f64,
    stopband_atten: f64,
) -> Result<FirFilter> {
    design_lowpass_aligned(cutoff, rate, transition, stopband_atten, 1)
}

/// Same as [`design_lowpass`], with the tap count rounded up so that the
/// group delay is a multiple of `delay_multiple` samples.
pub fn design_lowpass_aligned(
    cutoff: f64,
    rate: f64,
    transition: f64,
    stopband_atten: f64,
    delay_multiple: usize,
) -> Result<FirFilter> {
    kaiser_lowpass(
        cutoff,
        rate,
        transition,
        stopband_atten,
        delay_multiple,
        false,
    )
}

/// Like [`design_lowpass_aligned`] but with an even tap count, so the group
/// delay is a multiple of `delay_multiple` plus half a sample. After
/// [`apply_filter`] with delay compensation the output leads the input by
/// half a sample: output `n` is centred on input time `n + 1/2`.
pub fn design_lowpass_half_delay(
    cutoff: f64,
    rate: f64,
    transition: f64,
    stopband_atten: f64,
    delay_multiple: usize,
) -> Result<FirFilter> {
    kaiser_lowpass(
        cutoff,
        rate,
        transition,
        stopband_atten,
        delay_multiple,
        true,
    )
}

fn kaiser_lowpass(
    cutoff: f64,
    rate: f64,
    transition: f64,
    stopband_atten: f64,
    delay_multiple: usize,
    half_sample: bool,
) -> Result<FirFilter> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid("filter rate must be positive"));
    }
    if !(cutoff > 0.0 && cutoff < rate / 2.0) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff} Hz must lie in (0, {}) Hz; use a bypass instead",
            rate / 2.0
        )));
    }
    if !(transition > 0.0 && transition.is_finite()) {
        return Err(Error::invalid("transition width must be positive"));
    }
    if !(stopband_atten > 0.0) {
        return Err(Error::invalid("stopband attenuation must be positive"));
    }
    let multiple = delay_multiple.max(1);
    // The Kaiser formulas are empirical and can miss the target by a fraction
    // of a dB, so design against a slightly tighter mask.
    let atten = stopband_atten + KAISER_MARGIN_DB;
    let n_min = kaiser_tap_count(rate, transition, atten);
    let delay = ((n_min - 1) / 2).div_ceil(multiple) * multiple;
    let n = 2 * delay + 1 + usize::from(half_sample);

    let beta = kaiser_beta(atten);
    let i0_beta = bessel_i0(beta);
    let fc = cutoff / rate;
    let center = (n - 1) as f64 / 2.0;
    let taps: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - center;
            let ideal = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let r = if n == 1 { 0.0 } else { x / center };
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            ideal * window
        })
        .collect();
    // Enforce exact symmetry before normalization.
    let taps: Vec<f64> = (0..n).map(|i| 0.5 * (taps[i] + taps[n - 1 - i])).collect();
    FirFilter::from_taps(taps, cutoff, rate)
}

/// Linear convolution of `sig` with `f`, trimmed to the input length. With
/// `compensate_delay` the output is advanced by the whole-sample part of the
/// group delay, so in-band content keeps zero phase for odd tap counts.
pub fn apply_filter(
    sig: &ComplexSignal,
    f: &FirFilter,
    compensate_delay: bool,
) -> Result<ComplexSignal> {
    if !same_rate(sig.sample_rate(), f.design_rate()) {
        return Err(Error::invalid(format!(
            "filter designed for {} Hz applied to {} Hz signal",
            f.design_rate(),
            sig.sample_rate()
        )));
    }
    sig.require_nonempty("apply_filter")?;
    let taps = f.taps();
    if taps.len() == 1 {
        return Ok(sig.scaled(Complex64::new(taps[0], 0.0)));
    }
    let shift = if compensate_delay {
        f.integer_delay()
    } else {
        taps.len() - 1
    };
    let x = sig.samples();
    let len = x.len() as isize;
    let n_taps = taps.len() as isize;
    // Taps are symmetric, so convolution equals correlation:
    // y[n] = sum_j h[j] x[n - shift + j].
    let out = (0..len)
        .map(|n| {
            let start = n - shift as isize;
            let j_lo = (-start).max(0);
            let j_hi = (len - start).min(n_taps);
            let mut re = 0.0;
            let mut im = 0.0;
            if j_lo < j_hi {
                let hs = &taps[j_lo as usize..j_hi as usize];
                let xs = &x[(start + j_lo) as usize..(start + j_hi) as usize];
                for (h, v) in hs.iter().zip(xs) {
                    re += h * v.re;
                    im += h * v.im;
                }
            }
            Complex64::new(re, im)
        })
        .collect();
    ComplexSignal::new(sig.sample_rate(), out)
}
