use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detect_plateau, Interface, Plateau, Regime, SweepConfig};
use crate::error::{Error, Result, StageExt};
use crate::frontend::{run_dedicated_chain, run_shared_chain, ChainDiagnostics, FrontendConfig};
use crate::ofdm::{
    apply_channel, build_grid, compute_evm, equalize, estimate_channel, evm_to_snr,
    ofdm_demodulate, ofdm_modulate, EqualizerMode, MimoChannel, OfdmGrid,
};
use crate::signal::{
    complex_gaussian, integer_ratio, noise_std_for, upsample, ComplexSignal, SnrSpec,
    UpsampleMethod,
};

/// One (regime, input SNR, equalizer, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub regime_label: String,
    /// Decimation cutoff in Hz; `None` for bypass and the dedicated baseline.
    pub fc: Option<f64>,
    pub input_snr_db: f64,
    pub equalizer_mode: EqualizerMode,
    pub seed: u64,
    pub per_layer_output_snr_db: Vec<f64>,
    pub per_layer_evm_percent: Vec<f64>,
    /// Mean of the per-layer output SNRs in dB.
    pub mean_output_snr_db: f64,
}

/// Seed-averaged cell with the matching baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub regime_label: String,
    pub fc: Option<f64>,
    pub input_snr_db: f64,
    pub equalizer_mode: EqualizerMode,
    pub n_seeds: usize,
    pub mean_output_snr_db: f64,
    /// Dedicated-ADC output SNR for the same input SNR and equalizer.
    pub baseline_snr_db: f64,
    /// baseline - mean; positive means the shared interface lost SNR.
    pub degradation_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub k_offset_db: f64,
    /// Regime-major, then SNR, equalizer and seed, as declared.
    pub records: Vec<SweepRecord>,
    /// The dedicated-ADC baseline on the same SNR, equalizer and seed grid.
    pub baseline: Vec<SweepRecord>,
    pub summary: Vec<SummaryRow>,
    /// Per regime and equalizer, the plateau of the mean output SNR curve.
    pub plateaus: Vec<(String, EqualizerMode, Option<Plateau>)>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn noise_seed(seed: u64, antenna: usize) -> u64 {
    splitmix(splitmix(seed) ^ (0x6e6f_6973_6500 + antenna as u64))
}

/// The noiseless analog antenna signals of one seed's frame plus unit-power
/// noise for each antenna.
struct Frame {
    tx: OfdmGrid,
    antennas: Vec<ComplexSignal>,
    unit_noise: Vec<ComplexSignal>,
}

fn make_frame(cfg: &SweepConfig, seed: u64) -> Result<Frame> {
    let tx = build_grid(&cfg.ofdm, seed).stage("build_grid")?;
    let baseband = ofdm_modulate(&tx, &cfg.ofdm).stage("ofdm_modulate")?;
    let chan = MimoChannel::new(cfg.channel.clone(), cfg.frontend.m_antennas).stage("channel")?;
    let received = apply_channel(&baseband, &chan).stage("apply_channel")?;
    let factor = integer_ratio(cfg.frontend.analog_rate, cfg.frontend.bandwidth_b)
        .ok_or_else(|| Error::invalid("analog rate is not a multiple of B"))
        .stage("upsample")?;
    let antennas: Vec<ComplexSignal> = received
        .iter()
        .map(|s| upsample(s, factor, UpsampleMethod::Sinc))
        .collect::<Result<_>>()
        .stage("upsample")?;
    let unit_noise = antennas
        .iter()
        .enumerate()
        .map(|(i, a)| {
            ComplexSignal::new(
                a.sample_rate(),
                complex_gaussian(a.len(), 1.0, noise_seed(seed, i)),
            )
        })
        .collect::<Result<_>>()?;
    Ok(Frame {
        tx,
        antennas,
        unit_noise,
    })
}

/// Reference bandwidth for the input SNR. Sampling at Fs / M folds the
/// whole analog noise band into the dedicated ADC's Nyquist zone, and its
/// channel filter keeps the fraction B / (Fs / M) of it. Referencing the
/// analog noise to analog_rate x B / (Fs / M) therefore makes the input SNR
/// the in-band SNR that the dedicated interface delivers.
pub fn noise_reference_bandwidth(fe: &FrontendConfig) -> f64 {
    fe.analog_rate * fe.bandwidth_b / fe.dedicated_rate()
}

/// Noise standard deviation per antenna for an input SNR of `snr_db`, see
/// [`noise_reference_bandwidth`].
fn noise_stds(frame: &Frame, fe: &FrontendConfig, snr_db: f64) -> Result<Vec<f64>> {
    let spec = SnrSpec::new(snr_db, noise_reference_bandwidth(fe));
    frame
        .antennas
        .iter()
        .map(|a| noise_std_for(a.power(), a.sample_rate(), &spec))
        .collect::<Result<_>>()
        .stage("add_awgn")
}

fn front(
    regime: &Regime,
    fe: &FrontendConfig,
    antennas: &[ComplexSignal],
) -> Result<Vec<ComplexSignal>> {
    match regime.interface {
        Interface::Shared => run_shared_chain(antennas, fe)
            .map(|o| o.streams)
            .stage("run_shared_chain"),
        Interface::Dedicated => run_dedicated_chain(antennas, fe).stage("run_dedicated_chain"),
    }
}

fn mix(
    signal: &[ComplexSignal],
    noise: &[ComplexSignal],
    stds: &[f64],
) -> Result<Vec<ComplexSignal>> {
    signal
        .iter()
        .zip(noise)
        .zip(stds)
        .map(|((s, n), &std)| s.add_scaled(n, std))
        .collect()
}

/// Received streams at rate B for every SNR in `snrs`. Without a quantizer
/// every interface is linear, so signal and unit noise each pass through it
/// once and are mixed afterwards; with one, each SNR is run separately.
fn receive(
    cfg: &SweepConfig,
    regime: &Regime,
    frame: &Frame,
    snrs: &[f64],
) -> Result<Vec<Vec<ComplexSignal>>> {
    let fe = regime.frontend(&cfg.frontend);
    if fe.quantizer_bits.is_none() {
        let sig = front(regime, &fe, &frame.antennas)?;
        let noise = front(regime, &fe, &frame.unit_noise)?;
        snrs.iter()
            .map(|&snr| mix(&sig, &noise, &noise_stds(frame, &fe, snr)?))
            .collect()
    } else {
        snrs.iter()
            .map(|&snr| {
                let noisy = mix(
                    &frame.antennas,
                    &frame.unit_noise,
                    &noise_stds(frame, &fe, snr)?,
                )
                .stage("add_awgn")?;
                front(regime, &fe, &noisy)
            })
            .collect()
    }
}

/// Per-layer EVM in percent for each equalizer mode.
fn evaluate(
    cfg: &SweepConfig,
    frame: &Frame,
    rx: &[ComplexSignal],
    modes: &[EqualizerMode],
) -> Result<Vec<Vec<f64>>> {
    let grid = ofdm_demodulate(rx, &cfg.ofdm).stage("ofdm_demodulate")?;
    let est = estimate_channel(&grid, &frame.tx, &cfg.ofdm).stage("estimate_channel")?;
    modes
        .iter()
        .map(|&mode| {
            let eq = equalize(&grid, &est, mode).stage("equalize")?;
            compute_evm(&eq.grid, &frame.tx).stage("compute_evm")
        })
        .collect()
}

fn record(
    regime: &Regime,
    snr: f64,
    mode: EqualizerMode,
    seed: u64,
    evm: Vec<f64>,
    k: f64,
) -> SweepRecord {
    let snrs: Vec<f64> = evm.iter().map(|&e| evm_to_snr(e, k)).collect();
    let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
    SweepRecord {
        regime_label: regime.label.clone(),
        fc: regime.fc(),
        input_snr_db: snr,
        equalizer_mode: mode,
        seed,
        per_layer_output_snr_db: snrs,
        per_layer_evm_percent: evm,
        mean_output_snr_db: mean,
    }
}

/// All records of one (regime, seed), SNR-major then mode.
fn run_regime_seed(
    cfg: &SweepConfig,
    regime: &Regime,
    seed: u64,
    k: f64,
) -> Result<Vec<SweepRecord>> {
    let frame = make_frame(cfg, seed)?;
    let rx = receive(cfg, regime, &frame, &cfg.snr_grid_db)?;
    let mut out = Vec::with_capacity(cfg.snr_grid_db.len() * cfg.equalizer_modes.len());
    for (&snr, rx) in cfg.snr_grid_db.iter().zip(&rx) {
        let evms = evaluate(cfg, &frame, rx, &cfg.equalizer_modes)?;
        for (&mode, evm) in cfg.equalizer_modes.iter().zip(evms) {
            out.push(record(regime, snr, mode, seed, evm, k));
        }
    }
    Ok(out)
}

/// Runs one cell end to end. The result depends only on the arguments.
pub fn run_cell(
    cfg: &SweepConfig,
    regime: &Regime,
    snr_db: f64,
    mode: EqualizerMode,
    seed: u64,
    k_offset_db: f64,
) -> Result<SweepRecord> {
    cfg.validate()?;
    let frame = make_frame(cfg, seed)?;
    let rx = receive(cfg, regime, &frame, &[snr_db])?;
    let evm = evaluate(cfg, &frame, &rx[0], &[mode])?.remove(0);
    Ok(record(regime, snr_db, mode, seed, evm, k_offset_db))
}

/// K such that the SISO-equalized dedicated baseline, averaged over seeds and
/// layers, reads `calibration_snr_db` at that input SNR.
pub fn calibrate_k(cfg: &SweepConfig) -> Result<f64> {
    let base = Regime::baseline();
    let snr = cfg.calibration_snr_db;
    let raw: Vec<f64> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            run_cell(cfg, &base, snr, EqualizerMode::Siso, seed, 0.0).map(|r| r.mean_output_snr_db)
        })
        .collect::<Result<_>>()
        .stage("calibrate_k")?;
    Ok(snr - raw.iter().sum::<f64>() / raw.len() as f64)
}

pub fn resolve_k(cfg: &SweepConfig) -> Result<f64> {
    match cfg.k_offset_db {
        Some(k) => Ok(k),
        None => calibrate_k(cfg),
    }
}

/// Seed-averages `records` per (regime, SNR, mode) and pairs each cell with
/// the baseline cell of the same SNR and mode.
pub fn summarize(records: &[SweepRecord], baseline: &[SweepRecord]) -> Vec<SummaryRow> {
    let key = |r: &SweepRecord| {
        (
            r.regime_label.clone(),
            r.input_snr_db.to_bits(),
            r.equalizer_mode,
        )
    };
    let mean_of = |set: &[SweepRecord], label: &str, snr: f64, mode: EqualizerMode| {
        let v: Vec<f64> = set
            .iter()
            .filter(|r| {
                r.regime_label == label && r.input_snr_db == snr && r.equalizer_mode == mode
            })
            .map(|r| r.mean_output_snr_db)
            .collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut seen = Vec::new();
    for r in records {
        let k = key(r);
        if seen.contains(&k) {
            continue;
        }
        seen.push(k);
        let (mean, n) = mean_of(records, &r.regime_label, r.input_snr_db, r.equalizer_mode);
        let base_label = baseline
            .first()
            .map(|b| b.regime_label.clone())
            .unwrap_or_default();
        let (base, _) = mean_of(baseline, &base_label, r.input_snr_db, r.equalizer_mode);
        rows.push(SummaryRow {
            regime_label: r.regime_label.clone(),
            fc: r.fc,
            input_snr_db: r.input_snr_db,
            equalizer_mode: r.equalizer_mode,
            n_seeds: n,
            mean_output_snr_db: mean,
            baseline_snr_db: base,
            degradation_db: base - mean,
        });
    }
    rows
}

/// Cross product of the grids. (regime, seed) jobs run in parallel; records
/// are emitted in declared grid order whatever the scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let k = resolve_k(cfg)?;
    let mut regimes: Vec<Regime> = vec![Regime::baseline()];
    regimes.extend(cfg.fc_regimes.iter().cloned());
    let jobs: Vec<(usize, u64)> = (0..regimes.len())
        .flat_map(|r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(r, seed)| run_regime_seed(cfg, &regimes[r], seed, k))
        .collect::<Result<_>>()?;

    let n_seeds = cfg.seeds.len();
    let per_seed = cfg.snr_grid_db.len() * cfg.equalizer_modes.len();
    let mut ordered: Vec<Vec<SweepRecord>> = Vec::with_capacity(regimes.len());
    for r in 0..regimes.len() {
        let block = &results[r * n_seeds..(r + 1) * n_seeds];
        let mut recs = Vec::with_capacity(per_seed * n_seeds);
        for cell in 0..per_seed {
            for seed_recs in block {
                recs.push(seed_recs[cell].clone());
            }
        }
        ordered.push(recs);
    }
    let baseline = ordered.remove(0);
    let records: Vec<SweepRecord> = ordered.into_iter().flatten().collect();
    let summary = summarize(&records, &baseline);
    let mut plateaus = Vec::new();
    for regime in &cfg.fc_regimes {
        for &mode in &cfg.equalizer_modes {
            let curve: Vec<(f64, f64)> = summary
                .iter()
                .filter(|s| s.regime_label == regime.label && s.equalizer_mode == mode)
                .map(|s| (s.input_snr_db, s.mean_output_snr_db))
                .collect();
            plateaus.push((regime.label.clone(), mode, detect_plateau(&curve)));
        }
    }
    Ok(SweepOutput {
        k_offset_db: k,
        records,
        baseline,
        summary,
        plateaus,
    })
}

/// Interface spectra for one noisy frame of `regime`. The dedicated
/// interface has no shared taps and is rejected.
pub fn run_spectrum(
    cfg: &SweepConfig,
    regime: &Regime,
    snr_db: f64,
    seed: u64,
) -> Result<ChainDiagnostics> {
    cfg.validate()?;
    if regime.interface != Interface::Shared {
        return Err(Error::invalid(
            "spectra are tapped inside the shared interface only",
        ));
    }
    let fe = regime.frontend(&cfg.frontend);
    let frame = make_frame(cfg, seed)?;
    let noisy = mix(
        &frame.antennas,
        &frame.unit_noise,
        &noise_stds(&frame, &fe, snr_db)?,
    )
    .stage("add_awgn")?;
    let out = run_shared_chain(&noisy, &fe).stage("run_shared_chain")?;
    out.diagnostics
        .ok_or_else(|| Error::invalid("shared chain returned no diagnostics"))
}
