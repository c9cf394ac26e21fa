use num_complex::Complex64;

use super::{generate_clocks, FrontendConfig, LpfSetting, Ratios};
use crate::error::{Error, Result, StageExt};
use crate::signal::{
    apply_filter, decimate, design_lowpass, design_lowpass_aligned, design_lowpass_half_delay,
    integer_ratio, power_spectrum, same_rate, ComplexSignal, Spectrum,
};

/// Stopband of the fixed rate-B channel filter used by [`final_decimate`].
/// Its passband ripple equals its stopband level, so it is kept well below
/// the -60 dB reconstruction floor.
pub const FINAL_STOPBAND_DB: f64 = 80.0;
const FINAL_TRANSITION_FRACTION: f64 = 0.125;
const DIAGNOSTIC_NFFT: usize = 2048;

/// Power spectra tapped inside the shared interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    /// ADC output at Fs.
    pub pre_lpf: Spectrum,
    /// After the decimation low-pass, still at Fs (equal to `pre_lpf` in
    /// bypass).
    pub post_lpf: Spectrum,
    /// Interface output at M x B, before de-interleaving.
    pub interface: Spectrum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedChainOutput {
    /// One stream per antenna at rate B.
    pub streams: Vec<ComplexSignal>,
    pub diagnostics: Option<ChainDiagnostics>,
}

fn quantize(samples: &mut [Complex64], bits: u32) {
    let full_scale = samples
        .iter()
        .map(|v| v.re.abs().max(v.im.abs()))
        .fold(0.0, f64::max);
    if full_scale == 0.0 {
        return;
    }
    let q = 2.0 * full_scale / 2f64.powi(bits as i32);
    let top = full_scale - q / 2.0;
    let mid_rise = |x: f64| (q * ((x / q).floor() + 0.5)).clamp(-top, top);
    for v in samples.iter_mut() {
        *v = Complex64::new(mid_rise(v.re), mid_rise(v.im));
    }
}

/// Samples `x` every `step` analog samples starting at `offset`, reading `x`
/// as periodic and shifted left by `guard` samples so that the result covers
/// `guard` extra analog samples on each side.
fn sample_periodic(x: &[Complex64], step: usize, offset: usize, guard: usize) -> Vec<Complex64> {
    let len = x.len();
    let total = len + 2 * guard;
    let count = (total - offset).div_ceil(step).min(total / step);
    (0..count)
        .map(|k| x[(offset + k * step + len - guard % len) % len])
        .collect()
}

/// Takes every (analog_rate / Fs)-th sample, aligned to slot starts, with
/// optional uniform mid-rise quantization of I and Q.
pub fn adc_sample_hold(sig: &ComplexSignal, cfg: &FrontendConfig) -> Result<ComplexSignal> {
    let r = cfg.ratios()?;
    if !same_rate(sig.sample_rate(), cfg.analog_rate) {
        return Err(Error::invalid(format!(
            "ADC input at {} Hz, expected analog rate {} Hz",
            sig.sample_rate(),
            cfg.analog_rate
        )));
    }
    sig.require_nonempty("adc_sample_hold")?;
    let mut s = sample_periodic(sig.samples(), r.adc_step, 0, 0);
    if let Some(bits) = cfg.quantizer_bits {
        quantize(&mut s, bits);
    }
    ComplexSignal::new(cfg.adc_rate_fs, s)
}

fn lpf_design(cfg: &FrontendConfig, r: &Ratios) -> Result<Option<crate::signal::FirFilter>> {
    match cfg.lpf {
        LpfSetting::Bypass => Ok(None),
        LpfSetting::Lowpass {
            cutoff_hz,
            transition_hz,
            stopband_atten_db,
        } => {
            // With an even number D of samples per slot the slot centre falls
            // half-way between samples; an even-length filter supplies the
            // missing half sample.
            let design = if r.d % 2 == 0 {
                design_lowpass_half_delay
            } else {
                design_lowpass_aligned
            };
            design(
                cutoff_hz / 2.0,
                cfg.adc_rate_fs,
                transition_hz,
                stopband_atten_db,
                1,
            )
            .map(Some)
        }
    }
}

/// Returns the M x B output and the filtered signal at Fs.
fn decimate_with_tap(
    sig: &ComplexSignal,
    cfg: &FrontendConfig,
) -> Result<(ComplexSignal, ComplexSignal)> {
    let r = cfg.ratios()?;
    if !same_rate(sig.sample_rate(), cfg.adc_rate_fs) {
        return Err(Error::invalid(format!(
            "decimator input at {} Hz, expected Fs = {} Hz",
            sig.sample_rate(),
            cfg.adc_rate_fs
        )));
    }
    sig.require_nonempty("decimate_to_mb")?;
    match lpf_design(cfg, &r)? {
        None => {
            if r.d == 1 {
                return Ok((sig.clone(), sig.clone()));
            }
            let inv = 1.0 / r.d as f64;
            let out = sig
                .samples()
                .chunks_exact(r.d)
                .map(|c| c.iter().sum::<Complex64>() * inv)
                .collect();
            Ok((ComplexSignal::new(cfg.mb_rate(), out)?, sig.clone()))
        }
        Some(f) => {
            let filtered = apply_filter(sig, &f, true)?;
            // Keep the sample centred on the slot centre (D - 1) / 2, where
            // the smoothed gate edges disturb it least. For even D the
            // half-sample lead of the filter puts sample D/2 - 1 there.
            let phase = if r.d % 2 == 0 { r.d / 2 - 1 } else { r.d / 2 };
            let out = decimate(&filtered, r.d, phase)?;
            Ok((out, filtered))
        }
    }
}

/// Fs -> M x B. In bypass each output is the mean of the D ADC samples of
/// one slot; otherwise the configured low-pass (band edge at +-Fc/2) is
/// applied with delay compensation and the slot-center sample is kept.
pub fn decimate_to_mb(sig: &ComplexSignal, cfg: &FrontendConfig) -> Result<ComplexSignal> {
    decimate_with_tap(sig, cfg).map(|(out, _)| out)
}

/// Stream `i` takes the samples with index `n = (i + slot_offset) mod M`.
pub fn deinterleave(
    sig: &ComplexSignal,
    cfg: &FrontendConfig,
    slot_offset: usize,
) -> Result<Vec<ComplexSignal>> {
    let m = cfg.ratios()?.m;
    if slot_offset >= m {
        return Err(Error::invalid(format!(
            "slot_offset {slot_offset} must be below M = {m}"
        )));
    }
    if !same_rate(sig.sample_rate(), cfg.mb_rate()) {
        return Err(Error::invalid(format!(
            "de-interleaver input at {} Hz, expected M x B = {} Hz",
            sig.sample_rate(),
            cfg.mb_rate()
        )));
    }
    sig.require_nonempty("deinterleave")?;
    let n_out = sig.len() / m;
    let x = sig.samples();
    (0..m)
        .map(|i| {
            let start = (i + slot_offset) % m;
            let s = (0..n_out).map(|k| x[start + m * k]).collect();
            ComplexSignal::new(cfg.bandwidth_b, s)
        })
        .collect()
}

/// Chooses the slot offset whose de-interleaved streams correlate best
/// with the known per-antenna preambles.
pub fn calibrate_slot_offset(
    sig: &ComplexSignal,
    preambles: &[ComplexSignal],
    cfg: &FrontendConfig,
) -> Result<usize> {
    let m = cfg.ratios()?.m;
    if preambles.len() != m {
        return Err(Error::invalid(format!(
            "{} preambles for {m} antennas",
            preambles.len()
        )));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for off in 0..m {
        let streams = deinterleave(sig, cfg, off)?;
        let score: f64 = streams
            .iter()
            .zip(preambles)
            .map(|(s, p)| {
                let n = s.len().min(p.len());
                let (a, b) = (&s.samples()[..n], &p.samples()[..n]);
                let dot: Complex64 = a.iter().zip(b).map(|(u, v)| u * v.conj()).sum();
                let ea: f64 = a.iter().map(|v| v.norm_sqr()).sum();
                let eb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
                if ea > 0.0 && eb > 0.0 {
                    dot.norm() / (ea * eb).sqrt()
                } else {
                    0.0
                }
            })
            .sum();
        if score > best.1 {
            best = (off, score);
        }
    }
    Ok(best.0)
}

fn final_decimate_phased(
    streams: &[ComplexSignal],
    cfg: &FrontendConfig,
    phases: &[usize],
) -> Result<Vec<ComplexSignal>> {
    let Some(first) = streams.first() else {
        return Ok(Vec::new());
    };
    let rate = first.sample_rate();
    let Some(ratio) = integer_ratio(rate, cfg.bandwidth_b) else {
        return Err(Error::invalid(format!(
            "stream rate {rate} Hz is not an integer multiple of B = {} Hz",
            cfg.bandwidth_b
        )));
    };
    if streams.iter().any(|s| !same_rate(s.sample_rate(), rate)) {
        return Err(Error::invalid("streams at different rates"));
    }
    if ratio == 1 {
        return Ok(streams.to_vec());
    }
    let edge = cfg.bandwidth_b / 2.0;
    let f = design_lowpass(
        edge,
        rate,
        FINAL_TRANSITION_FRACTION * edge,
        FINAL_STOPBAND_DB,
    )?;
    streams
        .iter()
        .zip(phases)
        .map(|(s, &p)| decimate(&apply_filter(s, &f, true)?, ratio, p))
        .collect()
}

/// Channel filter at B (band edge B/2 at complex baseband) followed by
/// decimation to B. Streams already at B pass unchanged.
pub fn final_decimate(
    streams: &[ComplexSignal],
    cfg: &FrontendConfig,
) -> Result<Vec<ComplexSignal>> {
    final_decimate_phased(streams, cfg, &vec![0; streams.len()])
}

fn check_antennas(antennas: &[ComplexSignal], cfg: &FrontendConfig, r: &Ratios) -> Result<()> {
    if antennas.len() != r.m {
        return Err(Error::invalid(format!(
            "{} antenna signals for M = {}",
            antennas.len(),
            r.m
        )));
    }
    for a in antennas {
        if !same_rate(a.sample_rate(), cfg.analog_rate) {
            return Err(Error::invalid(format!(
                "antenna signal at {} Hz, expected analog rate {} Hz",
                a.sample_rate(),
                cfg.analog_rate
            )));
        }
        antennas[0].ensure_compatible(a)?;
    }
    antennas[0].require_nonempty("antenna input")?;
    if antennas[0].len() % r.period != 0 {
        return Err(Error::invalid(format!(
            "antenna length {} is not a whole number of clock periods ({})",
            antennas[0].len(),
            r.period
        )));
    }
    Ok(())
}

fn strip_guard(
    streams: Vec<ComplexSignal>,
    guard: usize,
    len: usize,
) -> Result<Vec<ComplexSignal>> {
    streams.iter().map(|s| s.slice(guard, len)).collect()
}

/// Interface (a): one ADC per antenna at Fs/M, channel filter, decimation
/// to B. Antenna `i` is sampled at the instants of its own slot in the
/// shared interface so both interfaces see the same sampling phase.
pub fn run_dedicated_chain(
    antennas: &[ComplexSignal],
    cfg: &FrontendConfig,
) -> Result<Vec<ComplexSignal>> {
    cfg.validate()?;
    let r = cfg.ratios()?;
    check_antennas(antennas, cfg, &r)?;
    let len_b = antennas[0].len() / r.period;
    let guard = cfg.guard_samples * r.period;
    let step = r.adc_step * r.m;
    let mut sampled = Vec::with_capacity(r.m);
    let mut phases = Vec::with_capacity(r.m);
    for (i, a) in antennas.iter().enumerate() {
        let start = i * r.slot;
        let mut s = sample_periodic(a.samples(), step, start % step, guard);
        if let Some(bits) = cfg.quantizer_bits {
            quantize(&mut s, bits);
        }
        sampled.push(ComplexSignal::new(cfg.dedicated_rate(), s)?);
        phases.push(start / step);
    }
    let out = final_decimate_phased(&sampled, cfg, &phases).stage("final_decimate")?;
    strip_guard(out, cfg.guard_samples, len_b)
}

fn shared_core(
    combined: ComplexSignal,
    cfg: &FrontendConfig,
    diagnostics: bool,
) -> Result<SharedChainOutput> {
    let sh = adc_sample_hold(&combined, cfg).stage("adc_sample_hold")?;
    drop(combined);
    let (mb, filtered) = decimate_with_tap(&sh, cfg).stage("decimate_to_mb")?;
    let diagnostics = if diagnostics {
        let nfft = |len: usize| DIAGNOSTIC_NFFT.min(1 << len.ilog2());
        Some(ChainDiagnostics {
            pre_lpf: power_spectrum(&sh, nfft(sh.len()))?,
            post_lpf: power_spectrum(&filtered, nfft(filtered.len()))?,
            interface: power_spectrum(&mb, nfft(mb.len()))?,
        })
    } else {
        None
    };
    let streams = deinterleave(&mb, cfg, 0).stage("deinterleave")?;
    let streams = final_decimate(&streams, cfg).stage("final_decimate")?;
    Ok(SharedChainOutput {
        streams,
        diagnostics,
    })
}

/// Interface (b): switched combiner, one ADC at Fs, decimation to M x B,
/// de-interleaving and the rate-B channel filter.
pub fn run_shared_chain(
    antennas: &[ComplexSignal],
    cfg: &FrontendConfig,
) -> Result<SharedChainOutput> {
    run_shared_chain_with(antennas, cfg, true)
}

pub(crate) fn run_shared_chain_with(
    antennas: &[ComplexSignal],
    cfg: &FrontendConfig,
    diagnostics: bool,
) -> Result<SharedChainOutput> {
    cfg.validate()?;
    let r = cfg.ratios()?;
    check_antennas(antennas, cfg, &r)?;
    let clocks = generate_clocks(cfg)?;
    let len = antennas[0].len();
    let len_b = len / r.period;
    let guard = cfg.guard_samples * r.period;
    // Combining straight from the periodic inputs avoids materializing M
    // extended copies at the analog rate. The guard is a whole number of
    // periods, so gate alignment is unchanged.
    let combined: Vec<Complex64> = (0..len + 2 * guard)
        .map(|n| antennas[clocks.owner(n)].samples()[(n + len - guard % len) % len])
        .collect();
    let combined = ComplexSignal::new(cfg.analog_rate, combined)?;
    let mut out = shared_core(combined, cfg, diagnostics)?;
    out.streams = strip_guard(out.streams, cfg.guard_samples, len_b)?;
    Ok(out)
}

/// What stream `i` of the shared interface would carry if `x` were
/// connected during every slot, for each `i`. This is the per-stream
/// reference against which cross-talk gains are measured.
pub fn ungated_streams(x: &ComplexSignal, cfg: &FrontendConfig) -> Result<Vec<ComplexSignal>> {
    cfg.validate()?;
    let r = cfg.ratios()?;
    let copies = vec![x.clone(); r.m];
    run_shared_chain_with(&copies, cfg, false).map(|o| o.streams)
}
