use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OfdmConfig;
use crate::error::{Error, Result};

/// Dense subcarrier x symbol x port array of complex cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    n_subcarriers: usize,
    n_symbols: usize,
    n_ports: usize,
    values: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn zeros(n_subcarriers: usize, n_symbols: usize, n_ports: usize) -> Self {
        Self {
            n_subcarriers,
            n_symbols,
            n_ports,
            values: vec![Complex64::new(0.0, 0.0); n_subcarriers * n_symbols * n_ports],
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    fn index(&self, sym: usize, sc: usize, port: usize) -> usize {
        debug_assert!(sym < self.n_symbols && sc < self.n_subcarriers && port < self.n_ports);
        (sym * self.n_subcarriers + sc) * self.n_ports + port
    }

    #[inline]
    pub fn get(&self, sym: usize, sc: usize, port: usize) -> Complex64 {
        self.values[self.index(sym, sc, port)]
    }

    #[inline]
    pub fn set(&mut self, sym: usize, sc: usize, port: usize, v: Complex64) {
        let i = self.index(sym, sc, port);
        self.values[i] = v;
    }

    /// All ports of one resource element.
    pub fn cell(&self, sym: usize, sc: usize) -> &[Complex64] {
        let i = self.index(sym, sc, 0);
        &self.values[i..i + self.n_ports]
    }

    pub fn cell_mut(&mut self, sym: usize, sc: usize) -> &mut [Complex64] {
        let i = self.index(sym, sc, 0);
        &mut self.values[i..i + self.n_ports]
    }

    pub fn same_shape(&self, other: &ResourceGrid) -> bool {
        self.n_subcarriers == other.n_subcarriers
            && self.n_symbols == other.n_symbols
            && self.n_ports == other.n_ports
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ResourceGrid {
        Self {
            values: self.values.iter().map(|v| f(*v)).collect(),
            ..*self
        }
    }
}

/// Transmit grid: one port per layer plus the pilot layout and payload.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid {
    pub grid: ResourceGrid,
    /// True where the cell holds a pilot of that layer.
    pub pilot_mask: Vec<bool>,
    /// Payload bits per layer, in (symbol, subcarrier) order over data cells.
    pub reference_bits: Vec<Vec<u8>>,
    pilot_period_symbols: usize,
}

impl OfdmGrid {
    pub fn is_pilot(&self, sym: usize, sc: usize, layer: usize) -> bool {
        self.pilot_mask[self.grid.index(sym, sc, layer)]
    }

    pub fn is_data_symbol(&self, sym: usize) -> bool {
        sym % self.pilot_period_symbols != 0
    }

    pub fn n_layers(&self) -> usize {
        self.grid.n_ports()
    }
}

/// Gray-mapped QPSK with unit average energy: bit 0 picks the sign of I,
/// bit 1 the sign of Q.
pub fn qpsk_map(b0: u8, b1: u8) -> Complex64 {
    let i = if b0 == 0 { 1.0 } else { -1.0 };
    let q = if b1 == 0 { 1.0 } else { -1.0 };
    Complex64::new(i * FRAC_1_SQRT_2, q * FRAC_1_SQRT_2)
}

/// Pilot symbols carry only pilots: layer `l` owns subcarriers with
/// `sc % pilot_period_subcarriers == l` and stays silent elsewhere, so each
/// pilot cell sees a single transmitting layer. All other symbols carry
/// QPSK data on every subcarrier of every layer.
pub fn build_grid(cfg: &OfdmConfig, seed: u64) -> Result<OfdmGrid> {
    cfg.validate()?;
    let (n_sc, n_sym, n_l) = (cfg.n_subcarriers, cfg.n_symbols, cfg.n_layers);
    let mut grid = ResourceGrid::zeros(n_sc, n_sym, n_l);
    let mut pilot_mask = vec![false; grid.values.len()];
    let mut bits = vec![Vec::with_capacity(2 * n_sc * n_sym); n_l];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = cfg.pilot_period_subcarriers;

    for sym in 0..n_sym {
        let pilot_sym = cfg.is_pilot_symbol(sym);
        for sc in 0..n_sc {
            for (layer, layer_bits) in bits.iter_mut().enumerate() {
                let b0: u8 = rng.gen_range(0..2);
                let b1: u8 = rng.gen_range(0..2);
                if pilot_sym {
                    if sc % p == layer {
                        grid.set(sym, sc, layer, qpsk_map(b0, b1));
                        let i = grid.index(sym, sc, layer);
                        pilot_mask[i] = true;
                    }
                } else {
                    grid.set(sym, sc, layer, qpsk_map(b0, b1));
                    layer_bits.push(b0);
                    layer_bits.push(b1);
                }
            }
        }
    }
    if (0..n_l).any(|l| cfg.pilot_subcarriers(l).next().is_none()) {
        return Err(Error::invalid("a layer has no pilot cells"));
    }
    Ok(OfdmGrid {
        grid,
        pilot_mask,
        reference_bits: bits,
        pilot_period_symbols: cfg.pilot_period_symbols,
    })
}
