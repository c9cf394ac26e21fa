use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use shared_adc_core::cost::{compare, ArchitectureSpec, PriceBook};
use shared_adc_core::crosstalk::{
    analyze, estimate_crosstalk, tone_ceiling_db, ProbeConfig, ProbeKind,
};
use shared_adc_core::harness::{
    resolve_k, run_cell, run_spectrum, run_sweep, write_records_csv, write_spectrum_dump,
    write_summary_csv, Interface, SweepConfig, SweepOutput,
};
use shared_adc_core::ofdm::EqualizerMode;

/// Simulator for a MIMO receiver whose antennas share one ADC.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Sweep configuration (TOML). Defaults to the built-in full-size config.
    #[arg(long, global = true, env = "SHARED_ADC_SIM_CONFIG")]
    config: Option<PathBuf>,

    /// Built-in configuration to use when no --config is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Default)]
    preset: Preset,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replace the configured seed list with this single seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Restrict to the regime with this label.
    #[arg(long, global = true)]
    regime: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Default,
    Ci,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full grid and write records, baseline and summary CSVs.
    Sweep,
    /// Run a single cell and print per-layer results.
    Cell {
        #[arg(long, default_value_t = 20.0)]
        snr: f64,
        #[arg(long, default_value = "mmse")]
        mode: EqualizerMode,
    },
    /// Measure and analyze the cross-talk matrix of each regime.
    Crosstalk {
        #[arg(long, value_enum, default_value_t = Probe::Wideband)]
        probe: Probe,
        #[arg(long, default_value_t = 4096)]
        probe_length: usize,
        #[arg(long, default_value_t = 1)]
        probe_seed: u64,
    },
    /// Compare a one-channel-per-antenna radio with a multiplexed one.
    Cost {
        /// Price book (TOML). Defaults to the bundled estimated prices.
        #[arg(long)]
        pricebook: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        antennas: usize,
        #[arg(long, default_value_t = 4)]
        multiplex: usize,
    },
    /// Write interface spectra (pre-filter, post-filter, M x B) per regime.
    Spectrum {
        #[arg(long, default_value_t = 30.0)]
        snr: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Probe {
    Wideband,
    ToneGrid,
}

fn load_config(cli: &Cli) -> Result<SweepConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SweepConfig::load(path)?,
        None => match cli.preset {
            Preset::Default => SweepConfig::default(),
            Preset::Ci => SweepConfig::ci_scale(),
        },
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed_override {
        cfg.seeds = vec![seed];
    }
    if let Some(label) = &cli.regime {
        cfg.select_regime(label)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_fc(fc: Option<f64>) -> String {
    fc.map_or_else(|| "-".to_string(), |f| format!("{:.0}", f / 1e6))
}

fn summary_text(out: &SweepOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "K = {:.3} dB", out.k_offset_db);
    let _ = writeln!(
        s,
        "{:<18} {:>7} {:>7} {:>5} {:>9} {:>9} {:>8}",
        "regime", "fc_MHz", "in_dB", "mode", "out_dB", "base_dB", "loss_dB"
    );
    for r in &out.summary {
        let _ = writeln!(
            s,
            "{:<18} {:>7} {:>7.1} {:>5} {:>9.2} {:>9.2} {:>8.2}",
            r.regime_label,
            fmt_fc(r.fc),
            r.input_snr_db,
            r.equalizer_mode,
            r.mean_output_snr_db,
            r.baseline_snr_db,
            r.degradation_db
        );
    }
    for (label, mode, p) in &out.plateaus {
        match p {
            Some(p) => {
                let _ = writeln!(
                    s,
                    "plateau {label} {mode}: knee {:.1} dB, level {:.2} dB, max slope {:.3}",
                    p.knee_input_db, p.level_db, p.max_slope
                );
            }
            None => {
                let _ = writeln!(s, "plateau {label} {mode}: none");
            }
        }
    }
    s
}

fn sweep(cfg: &SweepConfig) -> Result<()> {
    let out = run_sweep(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records_csv(&dir.join("records.csv"), &out.records)?;
    write_records_csv(&dir.join("baseline.csv"), &out.baseline)?;
    write_summary_csv(&dir.join("summary.csv"), &out.summary)?;
    let text = summary_text(&out);
    fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    eprintln!("{} records written to {}", out.records.len(), dir.display());
    Ok(())
}

fn cell(cfg: &SweepConfig, snr: f64, mode: EqualizerMode) -> Result<()> {
    let regime = &cfg.fc_regimes[0];
    let seed = cfg.seeds[0];
    let k = resolve_k(cfg)?;
    let r = run_cell(cfg, regime, snr, mode, seed, k)?;
    println!("regime = {}", r.regime_label);
    println!(
        "fc_hz = {}",
        r.fc.map_or("bypass".to_string(), |f| f.to_string())
    );
    println!("input_snr_db = {}", r.input_snr_db);
    println!("equalizer_mode = {}", r.equalizer_mode);
    println!("seed = {}", r.seed);
    println!("k_offset_db = {k:.4}");
    for (l, (snr, evm)) in r
        .per_layer_output_snr_db
        .iter()
        .zip(&r.per_layer_evm_percent)
        .enumerate()
    {
        println!("layer {l}: evm {evm:.4} %, snr {snr:.3} dB");
    }
    println!("mean_output_snr_db = {:.3}", r.mean_output_snr_db);
    Ok(())
}

fn crosstalk(cfg: &SweepConfig, probe: Probe, length: usize, seed: u64) -> Result<()> {
    let probe = ProbeConfig {
        kind: match probe {
            Probe::Wideband => ProbeKind::Wideband,
            Probe::ToneGrid => ProbeKind::ToneGrid,
        },
        length,
        ..ProbeConfig::default()
    };
    fs::create_dir_all(&cfg.output_dir)?;
    for regime in cfg
        .fc_regimes
        .iter()
        .filter(|r| r.interface == Interface::Shared)
    {
        let fe = regime.frontend(&cfg.frontend);
        let meas = estimate_crosstalk(&fe, &probe, seed)
            .with_context(|| format!("regime {}", regime.label))?;
        let report = analyze(&meas.matrix, 100.0)?;
        let mut text = format!("regime = {}\n", regime.label);
        text.push_str(&report.to_key_value());
        let _ = writeln!(text, "linearity_error = {:e}", meas.linearity_error);
        let _ = writeln!(text, "regression_gap = {:e}", meas.regression_gap);
        for (i, v) in tone_ceiling_db(&meas.tone_matrices).iter().enumerate() {
            let _ = writeln!(text, "tone_ceiling_db[{i}] = {v:.3}");
        }
        let path = cfg
            .output_dir
            .join(format!("crosstalk_{}.txt", regime.label));
        fs::write(&path, &text)?;
        println!("{text}");
    }
    Ok(())
}

fn cost(pricebook: Option<&Path>, antennas: usize, multiplex: usize) -> Result<()> {
    let prices = match pricebook {
        Some(p) => PriceBook::load(p)?,
        None => PriceBook::default(),
    };
    if prices.estimated {
        println!("prices: ESTIMATED ({})", prices.currency);
    }
    let c = compare(
        &ArchitectureSpec::traditional(antennas),
        &ArchitectureSpec::shared(antennas, multiplex),
        &prices,
    )?;
    println!("Architecture A");
    print!("{}", c.a.to_table(&prices.currency));
    println!("transceiver share = {:.3}\n", c.a.transceiver_share());
    println!("Architecture B");
    print!("{}", c.b.to_table(&prices.currency));
    println!("transceiver share = {:.3}\n", c.b.transceiver_share());
    println!("savings = {:.3}", c.savings);
    Ok(())
}

fn spectrum(cfg: &SweepConfig, snr: f64) -> Result<()> {
    let seed = cfg.seeds[0];
    for regime in cfg
        .fc_regimes
        .iter()
        .filter(|r| r.interface == Interface::Shared)
    {
        let d = run_spectrum(cfg, regime, snr, seed)
            .with_context(|| format!("regime {}", regime.label))?;
        for p in write_spectrum_dump(&cfg.output_dir, &format!("spectrum_{}", regime.label), &d)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Cost {
        pricebook,
        antennas,
        multiplex,
    } = &cli.command
    {
        return cost(pricebook.as_deref(), *antennas, *multiplex);
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Sweep => sweep(&cfg),
        Command::Cell { snr, mode } => {
            if cfg.fc_regimes.len() > 1 && cli.regime.is_none() {
                bail!("cell needs --regime <label>");
            }
            cell(&cfg, *snr, *mode)
        }
        Command::Crosstalk {
            probe,
            probe_length,
            probe_seed,
        } => crosstalk(&cfg, *probe, *probe_length, *probe_seed),
        Command::Spectrum { snr } => spectrum(&cfg, *snr),
        Command::Cost { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
