use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SINGULAR_CONDITION;
use crate::error::{Error, Result};
use crate::signal::{complex_gaussian, ComplexSignal};

/// How the frequency-flat wireless channel H is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ChannelMode {
    #[default]
    Identity,
    /// Row-major entries as `[re, im]` pairs.
    FixedMatrix { rows: Vec<Vec<[f64; 2]>> },
    /// i.i.d. CN(0, 1) entries drawn from `seed`.
    RandomFlat { seed: u64 },
}

/// Frequency-flat M x M channel: antenna r receives sum_l H[r, l] x_l.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    mode: ChannelMode,
    matrix: DMatrix<Complex64>,
}

impl MimoChannel {
    pub fn new(mode: ChannelMode, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("channel dimension must be at least 1"));
        }
        let matrix = match &mode {
            ChannelMode::Identity => DMatrix::identity(m, m),
            ChannelMode::FixedMatrix { rows } => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::invalid(format!(
                        "fixed channel matrix must be {m} x {m}"
                    )));
                }
                DMatrix::from_fn(m, m, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1]))
            }
            ChannelMode::RandomFlat { seed } => {
                DMatrix::from_row_slice(m, m, &complex_gaussian(m * m, 1.0, *seed))
            }
        };
        if matrix
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("channel matrix has non-finite entries"));
        }
        let chan = Self { mode, matrix };
        if chan.condition_number() > SINGULAR_CONDITION {
            return Err(Error::invalid("channel matrix is singular"));
        }
        Ok(chan)
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("channel matrix must be square"));
        }
        let rows = (0..matrix.nrows())
            .map(|r| {
                (0..matrix.ncols())
                    .map(|c| [matrix[(r, c)].re, matrix[(r, c)].im])
                    .collect()
            })
            .collect();
        Self::new(ChannelMode::FixedMatrix { rows }, matrix.nrows())
    }

    pub fn mode(&self) -> &ChannelMode {
        &self.mode
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Ratio of largest to smallest singular value; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix)
    }
}

pub(crate) fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub fn apply_channel(signals: &[ComplexSignal], chan: &MimoChannel) -> Result<Vec<ComplexSignal>> {
    let h = chan.matrix();
    if signals.len() != h.ncols() {
        return Err(Error::invalid(format!(
            "{} layers fed to a {} x {} channel",
            signals.len(),
            h.nrows(),
            h.ncols()
        )));
    }
    for s in &signals[1..] {
        signals[0].ensure_compatible(s)?;
    }
    if matches!(chan.mode(), ChannelMode::Identity) {
        return Ok(signals.to_vec());
    }
    let len = signals[0].len();
    (0..h.nrows())
        .map(|r| {
            let mut out = vec![Complex64::new(0.0, 0.0); len];
            for (l, s) in signals.iter().enumerate() {
                let g = h[(r, l)];
                for (o, x) in out.iter_mut().zip(s.samples()) {
                    *o += g * x;
                }
            }
            ComplexSignal::new(signals[0].sample_rate(), out)
        })
        .collect()
}
