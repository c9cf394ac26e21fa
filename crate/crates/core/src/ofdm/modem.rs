use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{OfdmConfig, OfdmGrid, ResourceGrid};
use crate::error::{Error, Result};
use crate::signal::{same_rate, ComplexSignal};

/// Amplitude applied after the unnormalized inverse DFT so that the mean
/// power per layer over a frame is one.
fn tx_scale(cfg: &OfdmConfig) -> f64 {
    let n_pilot_syms = cfg.pilot_symbols().count() as f64;
    let n_data_syms = cfg.data_symbols().count() as f64;
    let pilots_per_layer = (0..cfg.n_layers)
        .map(|l| cfg.pilot_subcarriers(l).count() as f64)
        .sum::<f64>()
        / cfg.n_layers as f64;
    let occupied = (n_data_syms * cfg.n_subcarriers as f64 + n_pilot_syms * pilots_per_layer)
        / cfg.n_symbols as f64;
    1.0 / occupied.sqrt()
}

/// The receiver's DFT window starts this many samples early, inside the
/// cyclic prefix, so that both pre- and post-cursor spread of a
/// zero-phase filter are absorbed.
fn window_backoff(cfg: &OfdmConfig) -> usize {
    cfg.cp_length / 2
}

pub fn ofdm_modulate(tx: &OfdmGrid, cfg: &OfdmConfig) -> Result<Vec<ComplexSignal>> {
    cfg.validate()?;
    let g = &tx.grid;
    if g.n_subcarriers() != cfg.n_subcarriers
        || g.n_symbols() != cfg.n_symbols
        || g.n_ports() != cfg.n_layers
    {
        return Err(Error::invalid("grid shape does not match OFDM config"));
    }
    let n = cfg.fft_size;
    let scale = tx_scale(cfg);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    (0..cfg.n_layers)
        .map(|layer| {
            let mut out = Vec::with_capacity(cfg.frame_length());
            for sym in 0..cfg.n_symbols {
                buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                for sc in 0..cfg.n_subcarriers {
                    buf[cfg.bin(sc)] = g.get(sym, sc, layer) * scale;
                }
                ifft.process(&mut buf);
                out.extend_from_slice(&buf[n - cfg.cp_length..]);
                out.extend_from_slice(&buf);
            }
            ComplexSignal::new(cfg.sample_rate, out)
        })
        .collect()
}

/// Inverse of [`ofdm_modulate`] applied per receive antenna. Samples beyond
/// one frame are ignored.
pub fn ofdm_demodulate(signals: &[ComplexSignal], cfg: &OfdmConfig) -> Result<ResourceGrid> {
    cfg.validate()?;
    if signals.is_empty() {
        return Err(Error::invalid("no receive signals"));
    }
    for s in signals {
        if !same_rate(s.sample_rate(), cfg.sample_rate) {
            return Err(Error::invalid(format!(
                "signal at {} Hz, OFDM expects {} Hz",
                s.sample_rate(),
                cfg.sample_rate
            )));
        }
        if s.len() < cfg.frame_length() {
            return Err(Error::invalid(format!(
                "signal of {} samples is shorter than one frame ({})",
                s.len(),
                cfg.frame_length()
            )));
        }
    }
    let n = cfg.fft_size;
    let d = window_backoff(cfg);
    let scale = 1.0 / (n as f64 * tx_scale(cfg));
    let derotate: Vec<Complex64> = (0..cfg.n_subcarriers)
        .map(|sc| Complex64::from_polar(scale, 2.0 * PI * cfg.freq_index(sc) * d as f64 / n as f64))
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut rx = ResourceGrid::zeros(cfg.n_subcarriers, cfg.n_symbols, signals.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    for (ant, s) in signals.iter().enumerate() {
        let x = s.samples();
        for sym in 0..cfg.n_symbols {
            let start = sym * cfg.symbol_length() + cfg.cp_length - d;
            buf.copy_from_slice(&x[start..start + n]);
            fft.process(&mut buf);
            for (sc, rot) in derotate.iter().enumerate() {
                rx.set(sym, sc, ant, buf[cfg.bin(sc)] * rot);
            }
        }
    }
    Ok(rx)
}
