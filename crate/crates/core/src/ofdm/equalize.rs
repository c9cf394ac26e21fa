use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::channel::condition_number;
use super::{ChannelEstimate, OfdmGrid, ResourceGrid, SINGULAR_CONDITION};
use crate::error::{Error, Result};
use crate::signal::DEFAULT_SNR_CAP_DB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualizerMode {
    /// Each stream divided by its own diagonal entry; cross terms ignored.
    Siso,
    /// Pseudo-inverse of the estimated matrix.
    Zf,
    /// Linear MMSE with the estimated noise variance, rescaled per stream
    /// so the output is an unbiased estimate of the transmitted symbol.
    Mmse,
}

impl fmt::Display for EqualizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EqualizerMode::Siso => "siso",
            EqualizerMode::Zf => "zf",
            EqualizerMode::Mmse => "mmse",
        })
    }
}

impl FromStr for EqualizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "siso" => Ok(EqualizerMode::Siso),
            "zf" => Ok(EqualizerMode::Zf),
            "mmse" => Ok(EqualizerMode::Mmse),
            other => Err(Error::invalid(format!("unknown equalizer mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedGrid {
    /// One port per layer.
    pub grid: ResourceGrid,
    /// Subcarriers whose matrix could not be inverted; their cells are zero.
    pub unusable: Vec<bool>,
}

impl EqualizedGrid {
    pub fn unusable_count(&self) -> usize {
        self.unusable.iter().filter(|u| **u).count()
    }
}

fn weights(
    h: &DMatrix<Complex64>,
    noise_variance: f64,
    mode: EqualizerMode,
) -> Option<DMatrix<Complex64>> {
    let (n_rx, n_l) = h.shape();
    match mode {
        EqualizerMode::Siso => {
            let mut w = DMatrix::zeros(n_l, n_rx);
            for l in 0..n_l {
                let d = h[(l, l)];
                if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
                    return None;
                }
                w[(l, l)] = d.inv();
            }
            Some(w)
        }
        EqualizerMode::Zf => {
            if condition_number(h) > SINGULAR_CONDITION {
                return None;
            }
            h.clone().pseudo_inverse(0.0).ok()
        }
        EqualizerMode::Mmse => {
            if noise_variance == 0.0 && condition_number(h) > SINGULAR_CONDITION {
                return None;
            }
            let ha = h.adjoint();
            let gram = &ha * h + DMatrix::identity(n_l, n_l) * Complex64::new(noise_variance, 0.0);
            let mut w = gram.try_inverse()? * ha;
            let bias = &w * h;
            for l in 0..n_l {
                let d = bias[(l, l)];
                if d.norm() > 0.0 {
                    let inv = d.inv();
                    w.row_mut(l).iter_mut().for_each(|v| *v *= inv);
                }
            }
            Some(w)
        }
    }
}

pub fn equalize(
    rx: &ResourceGrid,
    est: &ChannelEstimate,
    mode: EqualizerMode,
) -> Result<EqualizedGrid> {
    if rx.n_subcarriers() != est.n_subcarriers() || rx.n_ports() != est.n_rx() {
        return Err(Error::invalid(format!(
            "received grid ({} subcarriers, {} antennas) does not match estimate ({}, {})",
            rx.n_subcarriers(),
            rx.n_ports(),
            est.n_subcarriers(),
            est.n_rx()
        )));
    }
    let n_l = est.n_layers();
    if mode == EqualizerMode::Siso && est.n_rx() < n_l {
        return Err(Error::invalid(
            "siso equalization needs one antenna per layer",
        ));
    }
    let mut out = ResourceGrid::zeros(rx.n_subcarriers(), rx.n_symbols(), n_l);
    let mut unusable = vec![false; rx.n_subcarriers()];
    for (sc, flag) in unusable.iter_mut().enumerate() {
        let Some(w) = weights(est.matrix(sc), est.noise_variance(), mode) else {
            *flag = true;
            continue;
        };
        for sym in 0..rx.n_symbols() {
            let y = DVector::from_column_slice(rx.cell(sym, sc));
            let x = &w * y;
            out.cell_mut(sym, sc).copy_from_slice(x.as_slice());
        }
    }
    Ok(EqualizedGrid {
        grid: out,
        unusable,
    })
}

/// RMS error over data cells relative to the RMS reference, in percent,
/// per layer.
pub fn compute_evm(equalized: &ResourceGrid, reference: &OfdmGrid) -> Result<Vec<f64>> {
    if !equalized.same_shape(&reference.grid) {
        return Err(Error::invalid(
            "equalized and reference grids differ in shape",
        ));
    }
    let n_l = reference.n_layers();
    let mut err = vec![0.0; n_l];
    let mut pow = vec![0.0; n_l];
    for sym in (0..equalized.n_symbols()).filter(|s| reference.is_data_symbol(*s)) {
        for sc in 0..equalized.n_subcarriers() {
            let e = equalized.cell(sym, sc);
            let r = reference.grid.cell(sym, sc);
            for l in 0..n_l {
                err[l] += (e[l] - r[l]).norm_sqr();
                pow[l] += r[l].norm_sqr();
            }
        }
    }
    Ok(err
        .iter()
        .zip(&pow)
        .map(|(e, p)| {
            if *p > 0.0 {
                100.0 * (e / p).sqrt()
            } else {
                0.0
            }
        })
        .collect())
}

/// `-20 log10(evm / 100) + k_offset`; a non-positive EVM maps to the SNR cap.
pub fn evm_to_snr(evm_percent: f64, k_offset: f64) -> f64 {
    if !(evm_percent > 0.0) || !evm_percent.is_finite() {
        return DEFAULT_SNR_CAP_DB;
    }
    (-20.0 * (evm_percent / 100.0).log10() + k_offset).min(DEFAULT_SNR_CAP_DB)
}
