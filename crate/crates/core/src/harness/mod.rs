//! Sweep configuration, the per-cell simulation pipeline, Monte-Carlo sweeps
//! over (regime x input SNR x equalizer x seed), and result export.

mod export;
mod plateau;
mod run;

pub use export::{
    read_records_csv, read_summary_csv, write_records_csv, write_spectrum_dump, write_summary_csv,
    SWEEP_RECORD_HEADER,
};
pub use plateau::{detect_plateau, Plateau, PLATEAU_SLOPE};
pub use run::{
    calibrate_k, noise_reference_bandwidth, resolve_k, run_cell, run_spectrum, run_sweep,
    summarize, SummaryRow, SweepOutput, SweepRecord,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{FrontendConfig, LpfSetting};
use crate::ofdm::{ChannelMode, EqualizerMode, OfdmConfig};
use crate::signal::same_rate;

const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");
const CI_CONFIG: &str = include_str!("../../config/ci.toml");

/// Label of the dedicated-ADC reference regime.
pub const BASELINE_LABEL: &str = "baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interface {
    /// M antennas time-share one ADC.
    #[default]
    Shared,
    /// One ADC per antenna at Fs / M.
    Dedicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub label: String,
    #[serde(default)]
    pub interface: Interface,
    #[serde(default)]
    pub lpf: LpfSetting,
}

impl Regime {
    pub fn shared(label: &str, lpf: LpfSetting) -> Self {
        Self {
            label: label.to_string(),
            interface: Interface::Shared,
            lpf,
        }
    }

    pub fn baseline() -> Self {
        Self {
            label: BASELINE_LABEL.to_string(),
            interface: Interface::Dedicated,
            lpf: LpfSetting::Bypass,
        }
    }

    pub fn fc(&self) -> Option<f64> {
        match self.interface {
            Interface::Shared => self.lpf.cutoff_hz(),
            Interface::Dedicated => None,
        }
    }

    /// The frontend config with this regime's decimation filter applied.
    pub fn frontend(&self, base: &FrontendConfig) -> FrontendConfig {
        FrontendConfig {
            lpf: self.lpf,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Its `lpf` is overridden by each regime.
    pub frontend: FrontendConfig,
    pub ofdm: OfdmConfig,
    pub channel: ChannelMode,
    pub snr_grid_db: Vec<f64>,
    pub fc_regimes: Vec<Regime>,
    pub equalizer_modes: Vec<EqualizerMode>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// EVM-to-SNR offset K in dB. When absent it is calibrated so that the
    /// SISO-equalized baseline reads `calibration_snr_db` at that input SNR.
    pub k_offset_db: Option<f64>,
    pub calibration_snr_db: f64,
}

/// The four shipped regimes. `cutoff_hz` is the two-sided passband width.
pub fn default_regimes() -> Vec<Regime> {
    let lp = |cutoff_hz: f64, transition_hz: f64| LpfSetting::Lowpass {
        cutoff_hz,
        transition_hz,
        stopband_atten_db: 60.0,
    };
    vec![
        Regime::shared("i-bypass", LpfSetting::Bypass),
        Regime::shared("ii-fc500", lp(500.0e6, 160.0e6)),
        Regime::shared("iii-fc480", lp(480.0e6, 80.0e6)),
        Regime::shared("iv-fc300", lp(300.0e6, 145.0e6)),
    ]
}

impl Default for SweepConfig {
    /// Full size, identical to `config/default.toml`.
    fn default() -> Self {
        Self {
            frontend: FrontendConfig::default(),
            ofdm: OfdmConfig::default(),
            channel: ChannelMode::Identity,
            snr_grid_db: (0..=12).map(|i| 2.5 * i as f64).collect(),
            fc_regimes: default_regimes(),
            equalizer_modes: vec![EqualizerMode::Siso, EqualizerMode::Mmse],
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("results"),
            k_offset_db: None,
            calibration_snr_db: 10.0,
        }
    }
}

impl SweepConfig {
    /// Reduced sizes (1024-point FFT, analog rate 32 x B) for quick runs,
    /// identical to `config/ci.toml`.
    pub fn ci_scale() -> Self {
        let d = Self::default();
        Self {
            frontend: FrontendConfig {
                analog_rate: 32.0 * d.frontend.bandwidth_b,
                ..d.frontend
            },
            ofdm: OfdmConfig::ci_scale(),
            output_dir: PathBuf::from("results-ci"),
            ..d
        }
    }

    /// Text of the bundled full-size and CI configuration files.
    pub fn bundled_files() -> [(&'static str, &'static str); 2] {
        [("default.toml", DEFAULT_CONFIG), ("ci.toml", CI_CONFIG)]
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.snr_grid_db.is_empty()
            || self.fc_regimes.is_empty()
            || self.equalizer_modes.is_empty()
        {
            return bad("snr_grid_db, fc_regimes and equalizer_modes must be non-empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) || !self.calibration_snr_db.is_finite() {
            return bad("SNR values must be finite");
        }
        for (i, r) in self.fc_regimes.iter().enumerate() {
            if r.label.is_empty() || r.label == BASELINE_LABEL {
                return bad("regime labels must be non-empty and not \"baseline\"");
            }
            if self.fc_regimes[..i].iter().any(|o| o.label == r.label) {
                return bad("regime labels must be distinct");
            }
            r.frontend(&self.frontend).validate()?;
        }
        self.ofdm.validate()?;
        if !same_rate(self.ofdm.sample_rate, self.frontend.bandwidth_b) {
            return bad("ofdm.sample_rate must equal frontend.bandwidth_b");
        }
        if self.ofdm.n_layers != self.frontend.m_antennas {
            return bad("ofdm.n_layers must equal frontend.m_antennas");
        }
        Ok(())
    }

    pub fn regime(&self, label: &str) -> Result<&Regime> {
        self.fc_regimes
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| Error::Config(format!("no regime labelled {label:?}")))
    }

    /// Keeps only the named regime.
    pub fn select_regime(&mut self, label: &str) -> Result<()> {
        let r = self.regime(label)?.clone();
        self.fc_regimes = vec![r];
        Ok(())
    }
}
