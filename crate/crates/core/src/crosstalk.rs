//! Measurement of the cross-talk matrix C that the decimation filter
//! introduces between de-interleaved antenna streams, the clock harmonic
//! spectra behind it, and the SISO ceilings it implies.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::frontend::{run_shared_chain, ungated_streams, ClockSet, FrontendConfig};
use crate::ofdm::SINGULAR_CONDITION;
use crate::signal::{integer_ratio, tone_gain, upsample, ComplexSignal, UpsampleMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Every in-band DFT bin at unit amplitude with random phase.
    #[default]
    Wideband,
    /// Every 8th in-band bin with Schroeder phases; antenna `j` is offset
    /// by `j` bins so simultaneous probes never share a tone.
    ToneGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    /// Probe period in samples at rate B.
    pub length: usize,
    /// Fraction of the band B occupied by probe tones.
    pub occupancy: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: ProbeKind::Wideband,
            length: 4096,
            occupancy: 0.8,
        }
    }
}

const TONE_GRID_SPACING: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    /// Entry (i, j): gain from antenna j into reconstructed stream i.
    pub entries: DMatrix<Complex64>,
    /// Decimation filter cutoff, `None` for bypass.
    pub measured_at_fc: Option<f64>,
}

impl CrosstalkMatrix {
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Total off-diagonal power relative to total diagonal power, in dB.
    pub fn offdiag_to_diag_db(&self) -> f64 {
        let (mut off, mut diag) = (0.0, 0.0);
        for i in 0..self.m() {
            for j in 0..self.m() {
                if i == j {
                    diag += self.entries[(i, j)].norm_sqr();
                } else {
                    off += self.entries[(i, j)].norm_sqr();
                }
            }
        }
        10.0 * (off / diag).log10()
    }

    /// min |a_i| > max |c_ij|.
    pub fn is_diagonally_dominant(&self) -> bool {
        let m = self.m();
        let min_diag = (0..m)
            .map(|i| self.entries[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        let max_off = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[(i, j)].norm())
            .fold(0.0, f64::max);
        min_diag > max_off
    }
}

/// Cross-talk matrix at one probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneMatrix {
    pub freq_hz: f64,
    pub entries: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMeasurement {
    /// Probe-averaged (frequency-flat) matrix from one-antenna-at-a-time
    /// excitation.
    pub matrix: CrosstalkMatrix,
    /// The same matrix regressed from all antennas excited together.
    pub simultaneous: DMatrix<Complex64>,
    /// max |matrix - simultaneous|. Non-zero only through the frequency
    /// dependence of C, since finite random-phase probes are not exactly
    /// orthogonal.
    pub regression_gap: f64,
    /// Relative error of superposition: the all-antenna output against the
    /// sum of the single-antenna outputs, worst stream.
    pub linearity_error: f64,
    /// Per stream, power of `stream - sum_j C_ij ref_ij` relative to the
    /// stream, in dB. Only the frequency dependence of C shows up here.
    pub residual_db: Vec<f64>,
    /// Per-tone matrices, ascending in frequency.
    pub tone_matrices: Vec<ToneMatrix>,
}

fn signed_bin(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// In-band bins of the probe for antenna `antenna`, as unsigned DFT indices.
fn probe_bins(probe: &ProbeConfig, antenna: usize) -> Vec<usize> {
    let n = probe.length;
    let half = (probe.occupancy * n as f64 / 2.0).floor() as i64;
    (0..n)
        .filter(|&k| {
            let f = signed_bin(k, n);
            if f.abs() > half {
                return false;
            }
            match probe.kind {
                ProbeKind::Wideband => true,
                ProbeKind::ToneGrid => {
                    (f + half).rem_euclid(TONE_GRID_SPACING as i64) == antenna as i64 % 8
                }
            }
        })
        .collect()
}

/// Unit-power periodic multitone at rate `rate`.
pub fn make_probe(
    probe: &ProbeConfig,
    antenna: usize,
    rate: f64,
    seed: u64,
) -> Result<ComplexSignal> {
    if probe.length < 16 || !(probe.occupancy > 0.0 && probe.occupancy <= 1.0) {
        return Err(Error::invalid(
            "probe needs length >= 16 and occupancy in (0, 1]",
        ));
    }
    let n = probe.length;
    let bins = probe_bins(probe, antenna);
    if bins.is_empty() {
        return Err(Error::invalid("probe has no tones"));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (antenna as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let count = bins.len() as f64;
    for (idx, &k) in bins.iter().enumerate() {
        let phase = match probe.kind {
            ProbeKind::Wideband => rng.gen::<f64>() * 2.0 * PI,
            ProbeKind::ToneGrid => PI * (idx * idx) as f64 / count,
        };
        spec[k] = Complex64::from_polar(1.0, phase);
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(n)
        .process(&mut spec);
    let scale = 1.0 / count.sqrt();
    ComplexSignal::new(rate, spec.into_iter().map(|v| v * scale).collect())
}

fn spectrum(x: &ComplexSignal) -> Vec<Complex64> {
    let mut s = x.samples().to_vec();
    FftPlanner::<f64>::new()
        .plan_fft_forward(s.len())
        .process(&mut s);
    s
}

/// Excites one antenna at a time with a known in-band probe, noiselessly,
/// and fits each reconstructed stream to the per-stream reference of the
/// active antenna (see [`ungated_streams`]). Also regresses all entries from
/// a run with every antenna probed at once.
pub fn estimate_crosstalk(
    cfg: &FrontendConfig,
    probe: &ProbeConfig,
    seed: u64,
) -> Result<CrosstalkMeasurement> {
    cfg.validate()?;
    let m = cfg.m_antennas;
    let factor = integer_ratio(cfg.analog_rate, cfg.bandwidth_b)
        .ok_or_else(|| Error::invalid("analog rate is not a multiple of B"))?;

    let analog: Vec<ComplexSignal> = (0..m)
        .map(|j| {
            upsample(
                &make_probe(probe, j, cfg.bandwidth_b, seed)?,
                factor,
                UpsampleMethod::Sinc,
            )
        })
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<ComplexSignal>> = analog
        .iter()
        .map(|x| ungated_streams(x, cfg))
        .collect::<Result<_>>()
        .stage("reference")?;

    let silent = ComplexSignal::zeros(cfg.analog_rate, analog[0].len())?;
    let mut entries = DMatrix::zeros(m, m);
    let mut single_outputs = Vec::with_capacity(m);
    for j in 0..m {
        let inputs: Vec<ComplexSignal> = (0..m)
            .map(|k| {
                if k == j {
                    analog[j].clone()
                } else {
                    silent.clone()
                }
            })
            .collect();
        let out = run_shared_chain(&inputs, cfg).stage("probe")?.streams;
        for i in 0..m {
            entries[(i, j)] = tone_gain(&refs[j][i], &out[i])?;
        }
        single_outputs.push(out);
    }

    let all = run_shared_chain(&analog, cfg)
        .stage("simultaneous probe")?
        .streams;
    let mut simultaneous = DMatrix::zeros(m, m);
    let mut residual_db = Vec::with_capacity(m);
    for i in 0..m {
        let a = DMatrix::from_fn(all[i].len(), m, |n, j| refs[j][i].samples()[n]);
        let y = DVector::from_column_slice(all[i].samples());
        let ah = a.adjoint();
        let coef = (&ah * &a)
            .lu()
            .solve(&(&ah * &y))
            .ok_or_else(|| Error::invalid("probe references are linearly dependent"))?;
        for j in 0..m {
            simultaneous[(i, j)] = coef[j];
        }
        let fit = &a * entries.row(i).transpose();
        let resid = (&y - fit).norm_squared();
        residual_db.push(10.0 * (resid / y.norm_squared()).max(1e-30).log10());
    }
    let regression_gap = (&entries - &simultaneous)
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let linearity_error = (0..m)
        .map(|i| {
            let err: f64 = (0..all[i].len())
                .map(|n| {
                    let sum: Complex64 = single_outputs.iter().map(|o| o[i].samples()[n]).sum();
                    (all[i].samples()[n] - sum).norm_sqr()
                })
                .sum();
            (err / all[i].energy()).sqrt()
        })
        .fold(0.0, f64::max);

    let n = probe.length;
    let out_spec: Vec<Vec<Vec<Complex64>>> = single_outputs
        .iter()
        .map(|o| o.iter().map(spectrum).collect())
        .collect();
    let ref_spec: Vec<Vec<Vec<Complex64>>> = refs
        .iter()
        .map(|r| r.iter().map(spectrum).collect())
        .collect();
    let shared: Vec<usize> = (0..n)
        .filter(|k| (0..m).all(|j| probe_bins(probe, j).binary_search(k).is_ok()))
        .collect();
    let mut tone_matrices: Vec<ToneMatrix> = shared
        .iter()
        .map(|&k| ToneMatrix {
            freq_hz: signed_bin(k, n) as f64 * cfg.bandwidth_b / n as f64,
            entries: DMatrix::from_fn(m, m, |i, j| out_spec[j][i][k] / ref_spec[j][i][k]),
        })
        .collect();
    tone_matrices.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));

    Ok(CrosstalkMeasurement {
        matrix: CrosstalkMatrix {
            entries,
            measured_at_fc: cfg.lpf.cutoff_hz(),
        },
        simultaneous,
        regression_gap,
        linearity_error,
        residual_db,
        tone_matrices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicLine {
    /// Harmonic index; the line sits at k x B.
    pub k: i64,
    /// Fourier-series magnitude |H_k| over one period (|H_0| = 1/M).
    pub magnitude: f64,
}

/// Lines of gate `i` for `k` in `-max_harmonic..=max_harmonic`, from a DFT
/// over one period 1/B.
pub fn clock_harmonics(clocks: &ClockSet, max_harmonic: usize) -> Vec<Vec<HarmonicLine>> {
    let p = clocks.period();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(p);
    (0..clocks.m())
        .map(|i| {
            let mut buf: Vec<Complex64> = clocks
                .gate_period(i)
                .into_iter()
                .map(|g| Complex64::new(g as f64, 0.0))
                .collect();
            fft.process(&mut buf);
            let kmax = max_harmonic.min(p / 2) as i64;
            (-kmax..=kmax)
                .map(|k| HarmonicLine {
                    k,
                    magnitude: buf[k.rem_euclid(p as i64) as usize].norm() / p as f64,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkReport {
    pub matrix: CrosstalkMatrix,
    /// Largest over smallest singular value, capped at the singularity
    /// threshold.
    pub condition_number: f64,
    pub invertible: bool,
    /// 20 log10 |a_i|.
    pub self_loss_db: Vec<f64>,
    /// Largest single |c_ij| relative to its row's |a_i|, in dB.
    pub worst_crosstalk_db: f64,
    /// See [`CrosstalkMatrix::offdiag_to_diag_db`].
    pub offdiag_to_diag_db: f64,
    /// 10 log10(|a_i|^2 / sum_j!=i |c_ij|^2): the output SNR a per-stream
    /// equalizer cannot exceed.
    pub predicted_sinr_ceiling_db: Vec<f64>,
}

/// `noise_floor_db` bounds every reported ratio: ceilings never exceed it and
/// leakage figures never drop below its negative.
pub fn analyze(cm: &CrosstalkMatrix, noise_floor_db: f64) -> Result<CrosstalkReport> {
    let c = &cm.entries;
    if !c.is_square() || c.nrows() == 0 {
        return Err(Error::invalid(
            "cross-talk matrix must be square and non-empty",
        ));
    }
    let m = c.nrows();
    let sv = c.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let raw_cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let invertible = raw_cond <= SINGULAR_CONDITION;
    let condition_number = raw_cond.min(SINGULAR_CONDITION);

    let db = |x: f64| (10.0 * x.log10()).clamp(-noise_floor_db, noise_floor_db);
    let self_loss_db = (0..m).map(|i| 20.0 * c[(i, i)].norm().log10()).collect();
    let mut worst: f64 = 0.0;
    let predicted_sinr_ceiling_db = (0..m)
        .map(|i| {
            let d = c[(i, i)].norm_sqr();
            let leak: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| c[(i, j)].norm_sqr())
                .sum();
            for j in (0..m).filter(|&j| j != i) {
                worst = worst.max(c[(i, j)].norm_sqr() / d);
            }
            if leak == 0.0 {
                noise_floor_db
            } else {
                db(d / leak)
            }
        })
        .collect();
    let offdiag = cm.offdiag_to_diag_db();
    Ok(CrosstalkReport {
        matrix: cm.clone(),
        condition_number,
        invertible,
        self_loss_db,
        worst_crosstalk_db: if worst == 0.0 {
            -noise_floor_db
        } else {
            db(worst)
        },
        offdiag_to_diag_db: if offdiag.is_finite() {
            offdiag.max(-noise_floor_db)
        } else {
            -noise_floor_db
        },
        predicted_sinr_ceiling_db,
    })
}

/// Mean over tones of each stream's interference-to-self ratio, expressed as
/// a ceiling in dB. This is the per-subcarrier counterpart of
/// `predicted_sinr_ceiling_db`.
pub fn tone_ceiling_db(tones: &[ToneMatrix]) -> Vec<f64> {
    let Some(first) = tones.first() else {
        return Vec::new();
    };
    let m = first.entries.nrows();
    (0..m)
        .map(|i| {
            let ratio: f64 = tones
                .iter()
                .map(|t| {
                    let d = t.entries[(i, i)].norm_sqr();
                    let leak: f64 = (0..m)
                        .filter(|&j| j != i)
                        .map(|j| t.entries[(i, j)].norm_sqr())
                        .sum();
                    leak / d
                })
                .sum::<f64>()
                / tones.len() as f64;
            -10.0 * ratio.log10()
        })
        .collect()
}

impl CrosstalkReport {
    /// `key = value` lines, one quantity per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let fc = match self.matrix.measured_at_fc {
            Some(f) => format!("{f}"),
            None => "bypass".to_string(),
        };
        let _ = writeln!(s, "measured_at_fc = {fc}");
        let _ = writeln!(s, "m = {}", self.matrix.m());
        let _ = writeln!(s, "condition_number = {}", self.condition_number);
        let _ = writeln!(s, "invertible = {}", self.invertible);
        let _ = writeln!(s, "offdiag_to_diag_db = {:.3}", self.offdiag_to_diag_db);
        let _ = writeln!(s, "worst_crosstalk_db = {:.3}", self.worst_crosstalk_db);
        for (i, v) in self.self_loss_db.iter().enumerate() {
            let _ = writeln!(s, "self_loss_db[{i}] = {v:.4}");
        }
        for (i, v) in self.predicted_sinr_ceiling_db.iter().enumerate() {
            let _ = writeln!(s, "predicted_sinr_ceiling_db[{i}] = {v:.3}");
        }
        for i in 0..self.matrix.m() {
            for j in 0..self.matrix.m() {
                let c = self.matrix.entries[(i, j)];
                let _ = writeln!(s, "c[{i}][{j}] = {:.6e} {:+.6e}j", c.re, c.im);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{generate_clocks, LpfSetting};

    fn cfg(lpf: LpfSetting) -> FrontendConfig {
        FrontendConfig {
            analog_rate: 6.4e9,
            lpf,
            guard_samples: 48,
            ..Default::default()
        }
    }

    fn small_probe() -> ProbeConfig {
        ProbeConfig {
            length: 512,
            ..Default::default()
        }
    }

    #[test]
    fn bypass_is_identity() {
        let meas = estimate_crosstalk(&cfg(LpfSetting::Bypass), &small_probe(), 1).unwrap();
        let eye = DMatrix::<Complex64>::identity(4, 4);
        assert!((&meas.matrix.entries - &eye)
            .iter()
            .all(|v| v.norm() < 1e-9));
        assert!(meas.linearity_error < 1e-12);
        assert!(meas.regression_gap < 1e-9);
        assert!(meas.residual_db.iter().all(|r| *r < -200.0));
        assert_eq!(meas.matrix.measured_at_fc, None);
    }

    #[test]
    fn lowpass_above_mb_is_diagonally_dominant_and_linear() {
        let lpf = LpfSetting::Lowpass {
            cutoff_hz: 500.0e6,
            transition_hz: 125.0e6,
            stopband_atten_db: 60.0,
        };
        let a = estimate_crosstalk(&cfg(lpf), &small_probe(), 1).unwrap();
        let b = estimate_crosstalk(&cfg(lpf), &small_probe(), 2).unwrap();
        assert!(a.matrix.is_diagonally_dominant());
        assert!(a.linearity_error < 1e-12);
        assert!(a.regression_gap < 0.01);
        assert!(a.residual_db.iter().all(|r| *r < -25.0));
        let seed_diff = (&a.matrix.entries - &b.matrix.entries)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(seed_diff < 1e-3, "seed dependence {seed_diff}");
        let ratio = a.matrix.offdiag_to_diag_db();
        assert!(ratio < -10.0 && ratio > -30.0, "ratio {ratio}");
        assert_eq!(a.tone_matrices.len(), 409);
    }

    #[test]
    fn tone_grid_probe_gives_same_matrix() {
        let lpf = LpfSetting::Lowpass {
            cutoff_hz: 500.0e6,
            transition_hz: 125.0e6,
            stopband_atten_db: 60.0,
        };
        let wide = estimate_crosstalk(&cfg(lpf), &small_probe(), 1).unwrap();
        let grid = ProbeConfig {
            kind: ProbeKind::ToneGrid,
            ..small_probe()
        };
        let tg = estimate_crosstalk(&cfg(lpf), &grid, 1).unwrap();
        assert!(tg.linearity_error < 1e-12);
        assert!(tg.regression_gap < 1e-9);
        let diff = (&wide.matrix.entries - &tg.matrix.entries)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(diff < 0.05, "probe dependence {diff}");
    }

    #[test]
    fn probe_has_unit_power_and_is_in_band() {
        let p = make_probe(&small_probe(), 0, 100.0e6, 4).unwrap();
        assert!((p.power() - 1.0).abs() < 1e-12);
        let s = spectrum(&p);
        for (k, v) in s.iter().enumerate() {
            if signed_bin(k, 512).abs() > 204 {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn harmonics_follow_dirichlet_kernel() {
        let c = generate_clocks(&FrontendConfig::default()).unwrap();
        let (p, s) = (c.period() as f64, c.slot() as f64);
        for lines in clock_harmonics(&c, 12) {
            for l in lines {
                let k = l.k as f64;
                let want = if l.k == 0 {
                    s / p
                } else {
                    ((PI * k * s / p).sin() / (PI * k / p).sin()).abs() / p
                };
                assert!((l.magnitude - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_gate_has_only_dc() {
        let c = generate_clocks(&FrontendConfig {
            m_antennas: 1,
            adc_rate_fs: 400.0e6,
            ..Default::default()
        })
        .unwrap();
        for l in &clock_harmonics(&c, 8)[0] {
            let want = if l.k == 0 { 1.0 } else { 0.0 };
            assert!((l.magnitude - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_report() {
        let cm = CrosstalkMatrix {
            entries: DMatrix::identity(4, 4),
            measured_at_fc: None,
        };
        let r = analyze(&cm, 100.0).unwrap();
        assert_eq!(r.condition_number, 1.0);
        assert!(r.invertible);
        assert!(r.predicted_sinr_ceiling_db.iter().all(|c| *c == 100.0));
        assert!(r.self_loss_db.iter().all(|l| *l == 0.0));
    }

    #[test]
    fn uniform_minus_twenty_db_leakage() {
        let off = Complex64::new(0.1, 0.0);
        let entries = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                off
            }
        });
        let r = analyze(
            &CrosstalkMatrix {
                entries,
                measured_at_fc: Some(4.0e8),
            },
            100.0,
        )
        .unwrap();
        let want = 20.0 - 10.0 * 3f64.log10();
        for c in &r.predicted_sinr_ceiling_db {
            assert!((c - want).abs() < 1e-9);
        }
        assert!((r.worst_crosstalk_db + 20.0).abs() < 1e-9);
        assert!(r.to_key_value().contains("measured_at_fc = 400000000"));
    }

    #[test]
    fn singular_matrix_flagged() {
        let entries = DMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        let r = analyze(
            &CrosstalkMatrix {
                entries,
                measured_at_fc: None,
            },
            100.0,
        )
        .unwrap();
        assert!(!r.invertible);
        assert_eq!(r.condition_number, SINGULAR_CONDITION);
    }
}
