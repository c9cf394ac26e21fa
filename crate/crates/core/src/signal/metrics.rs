use num_complex::Complex64;

use super::ComplexSignal;
use crate::error::{Error, Result};

pub const DEFAULT_SNR_CAP_DB: f64 = 100.0;

/// Least-squares complex gain `alpha` minimizing |test - alpha * reference|.
pub fn tone_gain(reference: &ComplexSignal, test: &ComplexSignal) -> Result<Complex64> {
    reference.ensure_compatible(test)?;
    reference.require_nonempty("tone_gain")?;
    let e = reference.energy();
    if e == 0.0 {
        return Err(Error::invalid("reference has zero power"));
    }
    let cross: Complex64 = reference
        .samples()
        .iter()
        .zip(test.samples())
        .map(|(r, t)| r.conj() * t)
        .sum();
    Ok(cross / e)
}

pub fn measure_snr(reference: &ComplexSignal, test: &ComplexSignal) -> Result<f64> {
    measure_snr_capped(reference, test, DEFAULT_SNR_CAP_DB)
}

/// SNR of `test` against `reference` after least-squares scale alignment,
/// clamped to `[-cap_db, cap_db]`.
///
/// Signal power is that of the aligned reference, so the result does not
/// change when `test` is multiplied by any nonzero constant.
pub fn measure_snr_capped(
    reference: &ComplexSignal,
    test: &ComplexSignal,
    cap_db: f64,
) -> Result<f64> {
    let alpha = tone_gain(reference, test)?;
    let mut err = 0.0;
    for (r, t) in reference.samples().iter().zip(test.samples()) {
        err += (t - alpha * r).norm_sqr();
    }
    let sig = alpha.norm_sqr() * reference.energy();
    if sig == 0.0 {
        return Ok(-cap_db);
    }
    if err == 0.0 {
        return Ok(cap_db);
    }
    Ok((10.0 * (sig / err).log10()).clamp(-cap_db, cap_db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::complex_gaussian;

    fn reference(len: usize) -> ComplexSignal {
        let s = (0..len)
            .map(|n| Complex64::from_polar(1.0, 0.37 * n as f64))
            .collect();
        ComplexSignal::new(1.0e6, s).unwrap()
    }

    #[test]
    fn identical_signals_hit_cap() {
        let r = reference(64);
        assert_eq!(measure_snr(&r, &r).unwrap(), DEFAULT_SNR_CAP_DB);
        assert_eq!(measure_snr_capped(&r, &r, 60.0).unwrap(), 60.0);
    }

    #[test]
    fn pure_scaling_is_not_error() {
        let r = reference(64);
        let t = r.scaled(Complex64::new(0.5, 0.0));
        assert_eq!(measure_snr(&r, &t).unwrap(), DEFAULT_SNR_CAP_DB);
    }

    #[test]
    fn ten_db_noise_measures_ten_db() {
        let r = reference(100_000);
        let mut noise = complex_gaussian(r.len(), 1.0, 5);
        // Remove the component along the reference, then scale to exactly
        // one tenth of the reference energy.
        let n = ComplexSignal::new(r.sample_rate(), noise.clone()).unwrap();
        let proj = tone_gain(&r, &n).unwrap();
        for (v, x) in noise.iter_mut().zip(r.samples()) {
            *v -= proj * x;
        }
        let e: f64 = noise.iter().map(|v| v.norm_sqr()).sum();
        let k = (0.1 * r.energy() / e).sqrt();
        let t: Vec<Complex64> = r
            .samples()
            .iter()
            .zip(&noise)
            .map(|(x, v)| x + v * k)
            .collect();
        let t = ComplexSignal::new(r.sample_rate(), t).unwrap();
        assert!((measure_snr(&r, &t).unwrap() - 10.0).abs() < 0.1);
    }

    #[test]
    fn zero_reference_rejected() {
        let r = ComplexSignal::zeros(1.0, 8).unwrap();
        assert!(measure_snr(&r, &r).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(measure_snr(&reference(8), &reference(9)).is_err());
    }
}
