//! Simplified multi-layer OFDM link: comb-pilot resource grids, QPSK,
//! CP-OFDM modulation, flat MIMO channels, pilot-based channel estimation,
//! SISO/ZF/MMSE equalization and EVM.

mod channel;
mod equalize;
mod estimate;
mod grid;
mod modem;

pub use channel::{apply_channel, ChannelMode, MimoChannel};
pub use equalize::{compute_evm, equalize, evm_to_snr, EqualizedGrid, EqualizerMode};
pub use estimate::{estimate_channel, ChannelEstimate, ChannelFit};
pub use grid::{build_grid, qpsk_map, OfdmGrid, ResourceGrid};
pub use modem::{ofdm_demodulate, ofdm_modulate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrices whose condition number exceeds this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub fft_size: usize,
    pub cp_length: usize,
    pub n_symbols: usize,
    pub n_layers: usize,
    /// Every `pilot_period_symbols`-th symbol, starting at 0, carries pilots.
    pub pilot_period_symbols: usize,
    /// Comb spacing of pilots within a pilot symbol; layer `l` uses offset `l`.
    pub pilot_period_subcarriers: usize,
    pub modulation: Modulation,
    /// Baseband sample rate in Hz; this is the per-antenna bandwidth B.
    pub sample_rate: f64,
    pub channel_fit: ChannelFit,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 3276,
            fft_size: 4096,
            cp_length: 288,
            n_symbols: 14,
            n_layers: 4,
            pilot_period_symbols: 7,
            pilot_period_subcarriers: 4,
            modulation: Modulation::Qpsk,
            sample_rate: 100.0e6,
            channel_fit: ChannelFit::default(),
        }
    }
}

impl OfdmConfig {
    /// Reduced numerology for quick runs: same occupancy and pilot density.
    pub fn ci_scale() -> Self {
        Self {
            n_subcarriers: 816,
            fft_size: 1024,
            cp_length: 72,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n_subcarriers == 0 || self.n_subcarriers >= self.fft_size {
            return bad(format!(
                "n_subcarriers {} must be in 1..fft_size ({})",
                self.n_subcarriers, self.fft_size
            ));
        }
        if self.cp_length >= self.fft_size {
            return bad(format!(
                "cp_length {} must be below fft_size",
                self.cp_length
            ));
        }
        if self.n_symbols == 0 || self.n_layers == 0 {
            return bad("n_symbols and n_layers must be at least 1".into());
        }
        if self.pilot_period_symbols < 2 {
            return bad("pilot_period_symbols must be at least 2 so data symbols remain".into());
        }
        if self.pilot_period_subcarriers == 0 {
            return bad("pilot_period_subcarriers must be at least 1".into());
        }
        if self.n_layers > self.pilot_period_subcarriers {
            return bad(format!(
                "{} layers cannot have disjoint pilots on a comb of period {}",
                self.n_layers, self.pilot_period_subcarriers
            ));
        }
        if self.n_subcarriers < 2 * self.pilot_period_subcarriers {
            return bad("grid too narrow for two pilots per layer".into());
        }
        if !(self.sample_rate > 0.0) {
            return bad("sample_rate must be positive".into());
        }
        self.channel_fit.validate()
    }

    pub fn symbol_length(&self) -> usize {
        self.fft_size + self.cp_length
    }

    pub fn frame_length(&self) -> usize {
        self.n_symbols * self.symbol_length()
    }

    pub fn is_pilot_symbol(&self, sym: usize) -> bool {
        sym % self.pilot_period_symbols == 0
    }

    pub fn pilot_symbols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_symbols).filter(|s| self.is_pilot_symbol(*s))
    }

    pub fn data_symbols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_symbols).filter(|s| !self.is_pilot_symbol(*s))
    }

    /// Subcarriers carrying pilots of `layer` on every pilot symbol.
    pub fn pilot_subcarriers(&self, layer: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.pilot_period_subcarriers;
        (layer % p..self.n_subcarriers).step_by(p)
    }

    /// FFT bin of subcarrier `sc`; subcarrier `n_subcarriers / 2` sits on DC.
    pub(crate) fn bin(&self, sc: usize) -> usize {
        (sc + self.fft_size - self.n_subcarriers / 2) % self.fft_size
    }

    /// Signed frequency index of subcarrier `sc` relative to DC.
    pub(crate) fn freq_index(&self, sc: usize) -> f64 {
        sc as f64 - (self.n_subcarriers / 2) as f64
    }
}
