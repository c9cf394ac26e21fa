use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{OfdmConfig, OfdmGrid, ResourceGrid};
use crate::error::{Error, Result};

/// How per-pilot estimates are extended to every subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFit {
    /// Piecewise-linear interpolation between pilots, linear extrapolation
    /// at the band edges.
    Linear,
    /// A common phase slope (a pure delay) per receive stream is removed, a
    /// least-squares polynomial of `order` is fitted across the band and the
    /// slope is restored. Averages noise over all pilots of a layer.
    Polynomial { order: usize },
}

impl Default for ChannelFit {
    fn default() -> Self {
        ChannelFit::Polynomial { order: 3 }
    }
}

impl ChannelFit {
    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            ChannelFit::Polynomial { order } if *order > 16 => {
                Err(Error::invalid("polynomial channel fit order above 16"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-subcarrier estimate of the composite (n_rx x n_layers) channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    matrices: Vec<DMatrix<Complex64>>,
    noise_variance: f64,
}

impl ChannelEstimate {
    pub fn new(matrices: Vec<DMatrix<Complex64>>, noise_variance: f64) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::invalid(
                "channel estimate needs at least one subcarrier",
            ));
        };
        let shape = first.shape();
        if matrices.iter().any(|m| m.shape() != shape) {
            return Err(Error::invalid("channel matrices differ in shape"));
        }
        if matrices
            .iter()
            .flat_map(|m| m.iter())
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("channel estimate has non-finite entries"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(
                "noise variance must be finite and non-negative",
            ));
        }
        Ok(Self {
            matrices,
            noise_variance,
        })
    }

    /// The same matrix on every subcarrier.
    pub fn flat(
        matrix: DMatrix<Complex64>,
        n_subcarriers: usize,
        noise_variance: f64,
    ) -> Result<Self> {
        Self::new(vec![matrix; n_subcarriers], noise_variance)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_rx(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn n_layers(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn matrix(&self, sc: usize) -> &DMatrix<Complex64> {
        &self.matrices[sc]
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Mean over subcarriers, the frequency-flat view of the estimate.
    pub fn mean_matrix(&self) -> DMatrix<Complex64> {
        let mut acc = DMatrix::zeros(self.n_rx(), self.n_layers());
        for m in &self.matrices {
            acc += m;
        }
        acc / Complex64::new(self.matrices.len() as f64, 0.0)
    }
}

/// Least-squares channel estimate from the pilot cells of `tx`.
///
/// Pilot cells of layer `l` on antenna `r` give H[r, l] directly because no
/// other layer transmits there. The per-pilot values are averaged over pilot
/// symbols (the channel is static within a frame), extended across
/// subcarriers per `cfg.channel_fit`, and held constant in time. The noise
/// variance comes from the spread between pilot symbols, or from the fit
/// residual when the frame has a single pilot symbol.
pub fn estimate_channel(
    rx: &ResourceGrid,
    tx: &OfdmGrid,
    cfg: &OfdmConfig,
) -> Result<ChannelEstimate> {
    cfg.validate()?;
    let n_sc = cfg.n_subcarriers;
    if rx.n_subcarriers() != n_sc || rx.n_symbols() != cfg.n_symbols {
        return Err(Error::invalid("received grid does not match OFDM config"));
    }
    if !tx
        .grid
        .same_shape(&ResourceGrid::zeros(n_sc, cfg.n_symbols, cfg.n_layers))
    {
        return Err(Error::invalid("transmit grid does not match OFDM config"));
    }
    let n_rx = rx.n_ports();
    let n_l = cfg.n_layers;
    let pilot_syms: Vec<usize> = cfg.pilot_symbols().collect();

    let mut matrices = vec![DMatrix::<Complex64>::zeros(n_rx, n_l); n_sc];
    let mut diff_acc = 0.0;
    let mut diff_count = 0usize;
    let mut resid_acc = 0.0;
    let mut resid_dof = 0usize;

    let mut combs = Vec::with_capacity(n_l);
    // avg[l][r]: per-pilot LS values averaged over pilot symbols.
    let mut avg = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let ks: Vec<usize> = cfg
            .pilot_subcarriers(l)
            .filter(|&k| pilot_syms.iter().all(|&s| tx.is_pilot(s, k, l)))
            .collect();
        if ks.len() < 2 {
            return Err(Error::invalid(format!(
                "layer {l} has fewer than two pilot subcarriers"
            )));
        }
        let mut rows = Vec::with_capacity(n_rx);
        for r in 0..n_rx {
            let per_sym: Vec<Vec<Complex64>> = pilot_syms
                .iter()
                .map(|&s| {
                    ks.iter()
                        .map(|&k| rx.get(s, k, r) / tx.grid.get(s, k, l))
                        .collect()
                })
                .collect();
            for pair in per_sym.windows(2) {
                for (a, b) in pair[0].iter().zip(&pair[1]) {
                    diff_acc += (a - b).norm_sqr() / 2.0;
                    diff_count += 1;
                }
            }
            let inv = 1.0 / per_sym.len() as f64;
            rows.push(
                (0..ks.len())
                    .map(|j| per_sym.iter().map(|v| v[j]).sum::<Complex64>() * inv)
                    .collect::<Vec<Complex64>>(),
            );
        }
        combs.push(ks);
        avg.push(rows);
    }

    // A common delay per receive stream: its sampling instant shifts every
    // entry of the row alike, and pooling keeps weak entries from steering
    // their own slope.
    let spacing = cfg.pilot_period_subcarriers;
    let slopes: Vec<f64> = (0..n_rx)
        .map(|r| delay_slope((0..n_l).map(|l| (&combs[l][..], &avg[l][r][..])), spacing))
        .collect();

    for l in 0..n_l {
        let fitter = Fitter::new(&combs[l], n_sc, cfg.channel_fit);
        for r in 0..n_rx {
            let (curve, resid, dof) = fitter.fit(&avg[l][r], slopes[r]);
            resid_acc += resid;
            resid_dof += dof;
            for (m, v) in matrices.iter_mut().zip(curve) {
                m[(r, l)] = v;
            }
        }
    }
    let noise_variance = if diff_count > 0 {
        diff_acc / diff_count as f64
    } else if resid_dof > 0 {
        resid_acc / resid_dof as f64
    } else {
        0.0
    };
    ChannelEstimate::new(matrices, noise_variance)
}

struct Fitter<'a> {
    ks: &'a [usize],
    n_sc: usize,
    kind: ChannelFit,
    /// Pseudo-inverse of the Vandermonde matrix and the evaluation basis.
    poly: Option<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)>,
}

impl<'a> Fitter<'a> {
    fn new(ks: &'a [usize], n_sc: usize, kind: ChannelFit) -> Self {
        let poly = match kind {
            ChannelFit::Polynomial { order } => {
                let p = order.min(ks.len() - 1) + 1;
                let c = (n_sc as f64 - 1.0) / 2.0;
                let w = c.max(1.0);
                let basis =
                    |k: usize, i: usize| Complex64::new(((k as f64 - c) / w).powi(i as i32), 0.0);
                let a = DMatrix::from_fn(ks.len(), p, |j, i| basis(ks[j], i));
                let pinv = a
                    .clone()
                    .pseudo_inverse(1e-12)
                    .expect("svd of real Vandermonde");
                let eval = DMatrix::from_fn(n_sc, p, |k, i| basis(k, i));
                Some((a, pinv, eval))
            }
            ChannelFit::Linear => None,
        };
        Self {
            ks,
            n_sc,
            kind,
            poly,
        }
    }

    /// Returns the curve on every subcarrier, the squared residual at the
    /// pilots and the residual degrees of freedom. `slope` (radians per
    /// subcarrier) is removed before a polynomial fit and restored after.
    fn fit(&self, h: &[Complex64], slope: f64) -> (Vec<Complex64>, f64, usize) {
        match (&self.kind, &self.poly) {
            (ChannelFit::Polynomial { .. }, Some((a, pinv, eval))) => {
                let rot = |k: usize| Complex64::from_polar(1.0, slope * k as f64);
                let g = DVector::from_iterator(
                    h.len(),
                    h.iter().zip(self.ks).map(|(v, &k)| v * rot(k).conj()),
                );
                let coef = pinv * &g;
                let resid = (a * &coef - &g).norm_squared();
                let curve = eval * coef;
                let out = curve.iter().enumerate().map(|(k, v)| v * rot(k)).collect();
                (out, resid, h.len().saturating_sub(a.ncols()))
            }
            _ => (linear(self.ks, h, self.n_sc), 0.0, 0),
        }
    }
}

fn linear(ks: &[usize], h: &[Complex64], n_sc: usize) -> Vec<Complex64> {
    (0..n_sc)
        .map(|k| {
            let j = match ks.binary_search(&k) {
                Ok(j) => return h[j],
                Err(j) => j.clamp(1, ks.len() - 1),
            };
            let (k0, k1) = (ks[j - 1] as f64, ks[j] as f64);
            let t = (k as f64 - k0) / (k1 - k0);
            h[j - 1] * (1.0 - t) + h[j] * t
        })
        .collect()
}

/// Phase slope in radians per subcarrier that best explains every (pilot
/// subcarriers, values) comb as one linear phase: the peak of the summed
/// periodograms, found on a zero-padded FFT grid and refined by golden
/// section. Each comb must sit on multiples of `spacing` from its first
/// subcarrier.
fn delay_slope<'a>(
    combs: impl Iterator<Item = (&'a [usize], &'a [Complex64])>,
    spacing: usize,
) -> f64 {
    let seqs: Vec<Vec<Complex64>> = combs
        .filter(|(ks, _)| !ks.is_empty())
        .map(|(ks, h)| {
            let mut v = vec![Complex64::new(0.0, 0.0); (ks[ks.len() - 1] - ks[0]) / spacing + 1];
            for (&k, &x) in ks.iter().zip(h) {
                v[(k - ks[0]) / spacing] = x;
            }
            v
        })
        .collect();
    let Some(longest) = seqs.iter().map(Vec::len).max() else {
        return 0.0;
    };
    let n_fft = (8 * longest).next_power_of_two();
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut power = vec![0.0; n_fft];
    for v in &seqs {
        let mut buf = v.clone();
        buf.resize(n_fft, Complex64::new(0.0, 0.0));
        fft.process(&mut buf);
        for (p, x) in power.iter_mut().zip(&buf) {
            *p += x.norm_sqr();
        }
    }
    let Some(peak) = (0..n_fft).max_by(|&a, &b| power[a].total_cmp(&power[b])) else {
        return 0.0;
    };
    if power[peak] == 0.0 {
        return 0.0;
    }
    let objective = |phi: f64| -> f64 {
        let step = Complex64::from_polar(1.0, -phi);
        seqs.iter()
            .map(|v| {
                let mut rot = Complex64::new(1.0, 0.0);
                let mut acc = Complex64::new(0.0, 0.0);
                for x in v {
                    acc += x * rot;
                    rot *= step;
                }
                acc.norm_sqr()
            })
            .sum()
    };
    let bin = 2.0 * PI / n_fft as f64;
    let centre = peak as f64 * bin;
    let (mut lo, mut hi) = (centre - bin, centre + bin);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..40 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = objective(x1);
        }
    }
    let phi = (lo + hi) / 2.0;
    let phi = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    phi / spacing as f64
}
