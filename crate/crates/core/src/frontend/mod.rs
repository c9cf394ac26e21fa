//! Antenna-to-baseband interfaces: the switched combiner feeding one shared
//! ADC and its decimation chain, and the reference chain with one ADC per
//! antenna.

mod chain;
mod clocks;

pub use chain::{
    adc_sample_hold, calibrate_slot_offset, decimate_to_mb, deinterleave, final_decimate,
    run_dedicated_chain, run_shared_chain, ungated_streams, ChainDiagnostics, SharedChainOutput,
    FINAL_STOPBAND_DB,
};
pub use clocks::{generate_clocks, switched_combine, ClockSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::integer_ratio;

/// Decimation low-pass in front of the Fs -> MB decimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LpfSetting {
    /// No filter: each output sample is the mean of the D ADC samples in
    /// one antenna slot (integrate and dump).
    #[default]
    Bypass,
    /// Kaiser low-pass whose passband spans `cutoff_hz` in total, that is
    /// +-cutoff_hz/2 around DC at complex baseband.
    Lowpass {
        cutoff_hz: f64,
        transition_hz: f64,
        #[serde(default = "default_atten")]
        stopband_atten_db: f64,
    },
}

fn default_atten() -> f64 {
    60.0
}

impl LpfSetting {
    /// Low-pass with the default 60 dB stopband and a transition of 12.5%
    /// of the band edge.
    pub fn lowpass(cutoff_hz: f64) -> Self {
        LpfSetting::Lowpass {
            cutoff_hz,
            transition_hz: 0.125 * cutoff_hz / 2.0,
            stopband_atten_db: default_atten(),
        }
    }

    pub fn cutoff_hz(&self) -> Option<f64> {
        match self {
            LpfSetting::Bypass => None,
            LpfSetting::Lowpass { cutoff_hz, .. } => Some(*cutoff_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub m_antennas: usize,
    pub bandwidth_b: f64,
    pub adc_rate_fs: f64,
    pub analog_rate: f64,
    pub lpf: LpfSetting,
    pub quantizer_bits: Option<u32>,
    /// Inputs are treated as one period of a periodic waveform and extended
    /// cyclically by this many samples (at rate B) on each side before
    /// filtering; 0 processes them as finite sequences with zero padding.
    pub guard_samples: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            m_antennas: 4,
            bandwidth_b: 100.0e6,
            adc_rate_fs: 1600.0e6,
            analog_rate: 16.0e9,
            lpf: LpfSetting::Bypass,
            quantizer_bits: None,
            guard_samples: 64,
        }
    }
}

/// Integer rate relationships derived from a validated config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratios {
    pub m: usize,
    /// Analog samples per period 1/B.
    pub period: usize,
    /// Analog samples per antenna slot 1/(MB).
    pub slot: usize,
    /// Analog samples per ADC sample.
    pub adc_step: usize,
    /// Fs / (MB).
    pub d: usize,
}

impl FrontendConfig {
    pub fn mb_rate(&self) -> f64 {
        self.m_antennas as f64 * self.bandwidth_b
    }

    /// Rate of each per-antenna ADC in the dedicated interface: the shared
    /// rate split evenly, Fs / M.
    pub fn dedicated_rate(&self) -> f64 {
        self.adc_rate_fs / self.m_antennas as f64
    }

    pub fn ratios(&self) -> Result<Ratios> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.m_antennas == 0 {
            return bad("m_antennas must be at least 1".into());
        }
        for (name, v) in [
            ("bandwidth_b", self.bandwidth_b),
            ("adc_rate_fs", self.adc_rate_fs),
            ("analog_rate", self.analog_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let mb = self.mb_rate();
        if self.adc_rate_fs < mb * (1.0 - 1e-12) {
            return bad(format!(
                "adc_rate_fs {} is below M x B = {mb}",
                self.adc_rate_fs
            ));
        }
        let Some(d) = integer_ratio(self.adc_rate_fs, mb) else {
            return bad(format!(
                "adc_rate_fs {} is not an integer multiple of M x B = {mb}",
                self.adc_rate_fs
            ));
        };
        let Some(adc_step) = integer_ratio(self.analog_rate, self.adc_rate_fs) else {
            return bad(format!(
                "analog_rate {} is not an integer multiple of adc_rate_fs {}",
                self.analog_rate, self.adc_rate_fs
            ));
        };
        let Some(slot) = integer_ratio(self.analog_rate, mb) else {
            return bad("analog_rate / (M x B) is not an integer".into());
        };
        Ok(Ratios {
            m: self.m_antennas,
            period: slot * self.m_antennas,
            slot,
            adc_step,
            d,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.ratios()?;
        if let LpfSetting::Lowpass {
            cutoff_hz,
            transition_hz,
            stopband_atten_db,
        } = self.lpf
        {
            if !(cutoff_hz > 0.0 && cutoff_hz < self.adc_rate_fs) {
                return Err(Error::invalid(format!(
                    "lpf cutoff {cutoff_hz} Hz must lie in (0, Fs = {}) Hz; use bypass instead",
                    self.adc_rate_fs
                )));
            }
            if !(transition_hz > 0.0) || !(stopband_atten_db > 0.0) {
                return Err(Error::invalid(
                    "lpf transition and attenuation must be positive",
                ));
            }
        }
        if let Some(bits) = self.quantizer_bits {
            if !(1..=32).contains(&bits) {
                return Err(Error::invalid(format!(
                    "quantizer_bits {bits} outside 1..=32"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ratios() {
        let r = FrontendConfig::default().ratios().unwrap();
        assert_eq!(
            r,
            Ratios {
                m: 4,
                period: 160,
                slot: 40,
                adc_step: 10,
                d: 4
            }
        );
    }

    #[test]
    fn fs_below_mb_rejected() {
        let cfg = FrontendConfig {
            adc_rate_fs: 300.0e6,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_integer_decimation_rejected() {
        let cfg = FrontendConfig {
            adc_rate_fs: 1000.0e6,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cutoff_at_fs_rejected() {
        let cfg = FrontendConfig {
            lpf: LpfSetting::lowpass(1600.0e6),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let ok = FrontendConfig {
            lpf: LpfSetting::lowpass(400.0e6),
            ..Default::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn lpf_setting_toml_forms() {
        #[derive(Deserialize)]
        struct W {
            lpf: LpfSetting,
        }
        let w: W = toml::from_str("lpf = { kind = \"bypass\" }").unwrap();
        assert_eq!(w.lpf, LpfSetting::Bypass);
        let w: W =
            toml::from_str("lpf = { kind = \"lowpass\", cutoff_hz = 5e8, transition_hz = 1.25e8 }")
                .unwrap();
        assert_eq!(w.lpf.cutoff_hz(), Some(5e8));
    }
}
