use num_complex::Complex64;

use super::FrontendConfig;
use crate::error::{Error, Result};
use crate::signal::{same_rate, ComplexSignal};

/// M periodic on/off gates on the analog grid. Gate `i` is on during
/// `[i/(MB), (i+1)/(MB))` of every period `1/B`; only one period is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockSet {
    rate: f64,
    period: usize,
    slot: usize,
    m: usize,
}

impl ClockSet {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Samples per period 1/B.
    pub fn period(&self) -> usize {
        self.period
    }

    /// Samples per antenna slot.
    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Index of the gate that is on at analog sample `n`.
    #[inline]
    pub fn owner(&self, n: usize) -> usize {
        (n % self.period) / self.slot
    }

    #[inline]
    pub fn gate(&self, i: usize, n: usize) -> bool {
        self.owner(n) == i
    }

    /// One period of gate `i` as 0/1 values.
    pub fn gate_period(&self, i: usize) -> Vec<u8> {
        (0..self.period).map(|n| self.gate(i, n) as u8).collect()
    }
}

pub fn generate_clocks(cfg: &FrontendConfig) -> Result<ClockSet> {
    let r = cfg.ratios()?;
    Ok(ClockSet {
        rate: cfg.analog_rate,
        period: r.period,
        slot: r.slot,
        m: r.m,
    })
}

/// `y = sum_i x_i c_i`, with the clocks aligned so that sample 0 starts a
/// period.
pub fn switched_combine(signals: &[ComplexSignal], clocks: &ClockSet) -> Result<ComplexSignal> {
    if signals.len() != clocks.m() {
        return Err(Error::invalid(format!(
            "{} signals for {} clocks",
            signals.len(),
            clocks.m()
        )));
    }
    for s in signals {
        if !same_rate(s.sample_rate(), clocks.rate()) {
            return Err(Error::invalid(format!(
                "signal at {} Hz, clocks at {} Hz",
                s.sample_rate(),
                clocks.rate()
            )));
        }
        signals[0].ensure_compatible(s)?;
    }
    signals[0].require_nonempty("switched_combine")?;
    let len = signals[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (i, s) in signals.iter().enumerate() {
        for (n, (o, x)) in out.iter_mut().zip(s.samples()).enumerate() {
            if clocks.gate(i, n) {
                *o += x;
            }
        }
    }
    ComplexSignal::new(clocks.rate(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::complex_gaussian;

    fn cfg(m: usize) -> FrontendConfig {
        FrontendConfig {
            m_antennas: m,
            adc_rate_fs: m as f64 * 400.0e6,
            ..Default::default()
        }
    }

    #[test]
    fn four_gates_forty_samples_each() {
        let c = generate_clocks(&cfg(4)).unwrap();
        assert_eq!(c.period(), 160);
        for i in 0..4 {
            let g = c.gate_period(i);
            let on: Vec<usize> = (0..160).filter(|&n| g[n] == 1).collect();
            assert_eq!(on, (40 * i..40 * (i + 1)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn single_gate_always_on() {
        let c = generate_clocks(&FrontendConfig {
            m_antennas: 1,
            adc_rate_fs: 400.0e6,
            ..Default::default()
        })
        .unwrap();
        assert!(c.gate_period(0).iter().all(|g| *g == 1));
    }

    #[test]
    fn gates_partition_time() {
        for m in [1, 2, 4, 8] {
            let c = generate_clocks(&cfg(m)).unwrap();
            let gates: Vec<Vec<u8>> = (0..m).map(|i| c.gate_period(i)).collect();
            for n in 0..c.period() {
                assert_eq!(gates.iter().map(|g| g[n] as u32).sum::<u32>(), 1);
            }
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        let dot: u32 = gates[i]
                            .iter()
                            .zip(&gates[j])
                            .map(|(a, b)| (a * b) as u32)
                            .sum();
                        assert_eq!(dot, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_inputs_pass_through() {
        let c = generate_clocks(&cfg(4)).unwrap();
        let x = ComplexSignal::new(c.rate(), complex_gaussian(480, 1.0, 1)).unwrap();
        let y = switched_combine(&vec![x.clone(); 4], &c).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn silent_antenna_leaves_its_slots_empty() {
        let c = generate_clocks(&cfg(4)).unwrap();
        let x = ComplexSignal::new(c.rate(), complex_gaussian(480, 1.0, 1)).unwrap();
        let zero = ComplexSignal::zeros(c.rate(), 480).unwrap();
        let y = switched_combine(&[x.clone(), zero, x.clone(), x], &c).unwrap();
        for (n, v) in y.samples().iter().enumerate() {
            assert_eq!(v.norm() == 0.0, c.gate(1, n));
        }
    }

    #[test]
    fn non_integer_slot_rejected() {
        let bad = FrontendConfig {
            analog_rate: 16.4e9,
            ..Default::default()
        };
        assert!(generate_clocks(&bad).is_err());
    }
}
