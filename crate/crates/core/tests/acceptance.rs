//! Acceptance checks. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use shared_adc_core::cost::{compare, ArchitectureSpec, PriceBook, TRANSCEIVER_ITEM};
use shared_adc_core::crosstalk::{
    analyze, clock_harmonics, estimate_crosstalk, make_probe, CrosstalkReport, ProbeConfig,
};
use shared_adc_core::frontend::{
    generate_clocks, run_dedicated_chain, run_shared_chain, FrontendConfig, LpfSetting,
};
use shared_adc_core::harness::{
    run_sweep, write_records_csv, write_summary_csv, Regime, SweepConfig, SweepOutput,
};
use shared_adc_core::ofdm::{build_grid, ofdm_modulate, EqualizerMode, OfdmConfig};
use shared_adc_core::signal::{
    complex_gaussian, measure_snr, upsample, ComplexSignal, UpsampleMethod,
};

fn verdict(n: usize, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {word} | {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rel_err_db(got: &ComplexSignal, want: &ComplexSignal) -> f64 {
    let err: f64 = got
        .samples()
        .iter()
        .zip(want.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    10.0 * (err / want.energy()).log10()
}

struct CiRun {
    cfg: SweepConfig,
    out: SweepOutput,
    seconds: f64,
}

fn ci_run() -> &'static CiRun {
    static RUN: OnceLock<CiRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = SweepConfig::ci_scale();
        let t = Instant::now();
        let out = run_sweep(&cfg).expect("ci sweep");
        CiRun {
            cfg,
            out,
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

fn regime<'a>(cfg: &'a SweepConfig, prefix: &str) -> &'a Regime {
    cfg.fc_regimes
        .iter()
        .find(|r| r.label.starts_with(prefix))
        .unwrap_or_else(|| panic!("no regime {prefix}"))
}

/// (input SNR, mean output SNR, degradation vs baseline) for one curve.
fn curve(out: &SweepOutput, label: &str, mode: EqualizerMode) -> Vec<(f64, f64, f64)> {
    out.summary
        .iter()
        .filter(|r| r.regime_label == label && r.equalizer_mode == mode)
        .map(|r| (r.input_snr_db, r.mean_output_snr_db, r.degradation_db))
        .collect()
}

fn crosstalk_report(fe: &FrontendConfig) -> CrosstalkReport {
    let cm = estimate_crosstalk(fe, &ProbeConfig::default(), 1).expect("crosstalk");
    analyze(&cm.matrix, f64::INFINITY).expect("analyze")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_1_perfect_reconstruction_at_mb() {
    let fe = FrontendConfig {
        adc_rate_fs: 400.0e6,
        lpf: LpfSetting::Bypass,
        ..FrontendConfig::default()
    };
    let ofdm = OfdmConfig::default();
    let tx = build_grid(&ofdm, 11).unwrap();
    let factor = (fe.analog_rate / fe.bandwidth_b).round() as usize;
    let antennas: Vec<ComplexSignal> = ofdm_modulate(&tx, &ofdm)
        .unwrap()
        .iter()
        .map(|s| upsample(s, factor, UpsampleMethod::Sinc).unwrap())
        .collect();
    let t = Instant::now();
    let shared = run_shared_chain(&antennas, &fe).unwrap().streams;
    let seconds = t.elapsed().as_secs_f64();
    let dedicated = run_dedicated_chain(&antennas, &fe).unwrap();
    let worst = shared
        .iter()
        .zip(&dedicated)
        .map(|(s, d)| rel_err_db(s, d))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        1,
        worst < -60.0 && seconds < 10.0,
        &format!(
            "worst relative error {worst:.1} dB (< -60), shared frame in {seconds:.2} s (< 10)"
        ),
    );
}

#[test]
fn criterion_2_bypass_matches_baseline() {
    let run = ci_run();
    let label = &regime(&run.cfg, "i-").label;
    let c = curve(&run.out, label, EqualizerMode::Siso);
    let worst = c.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let covers = c.len() == run.cfg.snr_grid_db.len()
        && c.first().map(|p| p.0) == Some(0.0)
        && c.last().map(|p| p.0) == Some(30.0);
    verdict(
        2,
        covers && worst <= 0.5 && run.cfg.seeds.len() == 5,
        &format!(
            "{label} SISO worst |output - baseline| {worst:.3} dB (<= 0.5) over {} SNRs, {} seeds; ci sweep {:.1} s",
            c.len(),
            run.cfg.seeds.len(),
            run.seconds
        ),
    );
}

#[test]
fn criterion_3_plateau_and_mimo_recovery() {
    let run = ci_run();
    let k = run.out.k_offset_db;
    let mut pass = true;
    let mut parts = Vec::new();
    for (prefix, anchor) in [("ii-", 20.0), ("iii-", 15.0)] {
        let r = regime(&run.cfg, prefix);
        let plateau = run
            .out
            .plateaus
            .iter()
            .find(|(l, m, _)| l == &r.label && *m == EqualizerMode::Siso)
            .and_then(|p| p.2.clone());
        let mmse = curve(&run.out, &r.label, EqualizerMode::Mmse);
        let mmse_worst = mmse.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
        let report = crosstalk_report(&r.frontend(&run.cfg.frontend));
        let ceiling = mean(&report.predicted_sinr_ceiling_db);
        match plateau {
            Some(p) => {
                let evm_level = p.level_db - k;
                let ok = p.max_slope < 0.2
                    && mmse_worst <= 1.0
                    && (p.level_db - anchor).abs() <= 3.0
                    && (evm_level - ceiling).abs() <= 2.0;
                pass &= ok;
                parts.push(format!(
                    "{}: knee {:.1} dB, slope {:.3}, plateau {:.2} dB (anchor {anchor}), plateau - K {:.2} vs ceiling {:.2}, MMSE worst {:.2} dB",
                    r.label, p.knee_input_db, p.max_slope, p.level_db, evm_level, ceiling, mmse_worst
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{}: no SISO plateau", r.label));
            }
        }
    }
    verdict(3, pass, &parts.join("; "));
}

#[test]
fn criterion_4_below_mb_degrades() {
    let run = ci_run();
    let r = regime(&run.cfg, "iv-");
    let at30 = curve(&run.out, &r.label, EqualizerMode::Mmse)
        .into_iter()
        .find(|p| p.0 == 30.0)
        .map(|p| p.2);
    let pass = matches!(at30, Some(d) if d >= 5.0 && (d - 7.5).abs() <= 2.5);
    verdict(
        4,
        pass,
        &format!(
            "{} (Fc {:.0} MHz) MMSE degradation at 30 dB: {} (>= 5, 7.5 +- 2.5)",
            r.label,
            r.fc().unwrap_or(f64::NAN) / 1e6,
            at30.map_or("missing".to_string(), |d| format!("{d:.2} dB"))
        ),
    );
}

#[test]
fn criterion_5_crosstalk_magnitude() {
    let cfg = SweepConfig::ci_scale();
    let ii = regime(&cfg, "ii-");
    let report = crosstalk_report(&ii.frontend(&cfg.frontend));
    let ratio = report.offdiag_to_diag_db;
    let bypass = regime(&cfg, "i-").frontend(&cfg.frontend);
    let cm = estimate_crosstalk(&bypass, &ProbeConfig::default(), 1).unwrap();
    let m = cm.matrix.m();
    let dev = (&cm.matrix.entries - DMatrix::<Complex64>::identity(m, m))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    verdict(
        5,
        (ratio + 20.0).abs() <= 3.0 && dev <= 1e-9,
        &format!(
            "{} off-diagonal/diagonal {ratio:.2} dB (-20 +- 3); bypass max |C - I| {dev:.2e} (<= 1e-9)",
            ii.label
        ),
    );
}

#[test]
fn criterion_6_clock_spectrum_and_self_loss() {
    let mut worst_line = 0.0f64;
    for m in [2usize, 4, 8] {
        let fe = FrontendConfig {
            m_antennas: m,
            adc_rate_fs: m as f64 * 100.0e6,
            analog_rate: 65536.0 * 100.0e6,
            ..FrontendConfig::default()
        };
        let clocks = generate_clocks(&fe).unwrap();
        for lines in clock_harmonics(&clocks, 4 * m) {
            for line in lines {
                let x = line.k as f64 / m as f64;
                let sinc = if line.k == 0 {
                    1.0
                } else {
                    (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                };
                worst_line = worst_line.max((line.magnitude - sinc.abs() / m as f64).abs());
            }
        }
    }
    let cfg = SweepConfig::ci_scale();
    let mut worst_loss = 0.0f64;
    let mut parts = Vec::new();
    for r in cfg
        .fc_regimes
        .iter()
        .filter(|r| matches!(r.fc(), Some(fc) if fc >= cfg.frontend.mb_rate()))
    {
        let report = crosstalk_report(&r.frontend(&cfg.frontend));
        let loss = report
            .self_loss_db
            .iter()
            .map(|db| db.abs())
            .fold(0.0, f64::max);
        worst_loss = worst_loss.max(loss);
        parts.push(format!("{} {loss:.3} dB", r.label));
    }
    verdict(
        6,
        worst_line <= 1e-6 && !parts.is_empty() && worst_loss <= 0.2,
        &format!(
            "worst |harmonic - sinc law| {worst_line:.2e} (<= 1e-6) for M in {{2,4,8}}; self-term |20log a_i| with Fc >= MB: {} (<= 0.2)",
            parts.join(", ")
        ),
    );
}

#[test]
fn criterion_7_noise_folding_gain() {
    let base = FrontendConfig {
        analog_rate: 3.2e9,
        guard_samples: 64,
        ..FrontendConfig::default()
    };
    let probe = ProbeConfig {
        length: 16384,
        ..ProbeConfig::default()
    };
    let factor = (base.analog_rate / base.bandwidth_b).round() as usize;
    let clean: Vec<ComplexSignal> = (0..base.m_antennas)
        .map(|i| {
            let p = make_probe(&probe, i, base.bandwidth_b, 3).unwrap();
            upsample(&p, factor, UpsampleMethod::Sinc).unwrap()
        })
        .collect();
    let noisy: Vec<ComplexSignal> = clean
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let n = ComplexSignal::new(
                c.sample_rate(),
                complex_gaussian(c.len(), 0.1, 40 + i as u64),
            )
            .unwrap();
            c.add(&n).unwrap()
        })
        .collect();
    let snr = |fs: f64| {
        let fe = FrontendConfig {
            adc_rate_fs: fs,
            ..base.clone()
        };
        let want = run_dedicated_chain(&clean, &fe).unwrap();
        let got = run_dedicated_chain(&noisy, &fe).unwrap();
        mean(
            &want
                .iter()
                .zip(&got)
                .map(|(w, g)| measure_snr(w, g).unwrap())
                .collect::<Vec<_>>(),
        )
    };
    let over = snr(1600.0e6);
    let at_b = snr(400.0e6);
    let gain = over - at_b;
    verdict(
        7,
        (gain - 6.0).abs() <= 0.5,
        &format!("4x oversampled {over:.2} dB vs sampled at B {at_b:.2} dB: gain {gain:.2} dB (6 +- 0.5)"),
    );
}

#[test]
fn criterion_8_cost_savings() {
    let prices = PriceBook::default();
    let cmp = compare(
        &ArchitectureSpec::traditional(64),
        &ArchitectureSpec::shared(64, 4),
        &prices,
    )
    .unwrap();
    let share = cmp.a.subtotal(TRANSCEIVER_ITEM) / cmp.a.total;
    verdict(
        8,
        prices.channels_per_ic == 4 && (cmp.savings - 0.5).abs() <= 0.1 && share > 0.7,
        &format!(
            "A {:.0} vs B {:.0}: savings {:.3} (0.5 +- 0.1), transceiver share of A {share:.3} (> 0.7)",
            cmp.a.total, cmp.b.total, cmp.savings
        ),
    );
}

#[test]
fn criterion_9_full_sweep_is_deterministic() {
    let cfg = SweepConfig::default();
    let bytes = || {
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&cfg).unwrap();
        let mut all = Vec::new();
        for (name, records) in [
            ("records.csv", &out.records),
            ("baseline.csv", &out.baseline),
        ] {
            let path = dir.path().join(name);
            write_records_csv(&path, records).unwrap();
            all.extend(std::fs::read(&path).unwrap());
        }
        let path = dir.path().join("summary.csv");
        write_summary_csv(&path, &out.summary).unwrap();
        all.extend(std::fs::read(&path).unwrap());
        (all, out.records.len())
    };
    let t = Instant::now();
    let (a, n) = bytes();
    let (b, _) = bytes();
    verdict(
        9,
        a == b && n > 0,
        &format!(
            "two full default sweeps ({n} records, {} CSV bytes) identical: {}; {:.0} s",
            a.len(),
            a == b,
            t.elapsed().as_secs_f64()
        ),
    );
}
