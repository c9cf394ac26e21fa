use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SummaryRow, SweepRecord};
use crate::error::{Error, Result};
use crate::frontend::ChainDiagnostics;
use crate::signal::Spectrum;

pub const SWEEP_RECORD_HEADER: [&str; 8] = [
    "regime_label",
    "fc",
    "input_snr_db",
    "equalizer_mode",
    "seed",
    "per_layer_output_snr_db",
    "per_layer_evm_percent",
    "mean_output_snr_db",
];

const SUMMARY_HEADER: [&str; 8] = [
    "regime_label",
    "fc",
    "input_snr_db",
    "equalizer_mode",
    "n_seeds",
    "mean_output_snr_db",
    "baseline_snr_db",
    "degradation_db",
];

/// Per-layer lists are written as `;`-separated values inside one field.
#[derive(Serialize, Deserialize)]
struct RecordRow {
    regime_label: String,
    fc: Option<f64>,
    input_snr_db: f64,
    equalizer_mode: String,
    seed: u64,
    per_layer_output_snr_db: String,
    per_layer_evm_percent: String,
    mean_output_snr_db: f64,
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| {
            x.parse()
                .map_err(|e| Error::Config(format!("bad per-layer value {x:?}: {e}")))
        })
        .collect()
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

/// UTF-8 CSV with a header row, one row per record; an empty list gives a
/// header-only file.
pub fn write_records_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = writer(path, &SWEEP_RECORD_HEADER)?;
    for r in records {
        w.serialize(RecordRow {
            regime_label: r.regime_label.clone(),
            fc: r.fc,
            input_snr_db: r.input_snr_db,
            equalizer_mode: r.equalizer_mode.to_string(),
            seed: r.seed,
            per_layer_output_snr_db: join(&r.per_layer_output_snr_db),
            per_layer_evm_percent: join(&r.per_layer_evm_percent),
            mean_output_snr_db: r.mean_output_snr_db,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().ne(SWEEP_RECORD_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected CSV header",
            path.display()
        )));
    }
    rdr.deserialize::<RecordRow>()
        .map(|row| {
            let row = row?;
            Ok(SweepRecord {
                regime_label: row.regime_label,
                fc: row.fc,
                input_snr_db: row.input_snr_db,
                equalizer_mode: row.equalizer_mode.parse()?,
                seed: row.seed,
                per_layer_output_snr_db: split(&row.per_layer_output_snr_db)?,
                per_layer_evm_percent: split(&row.per_layer_evm_percent)?,
                mean_output_snr_db: row.mean_output_snr_db,
            })
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path, &SUMMARY_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_spectrum(path: &Path, s: &Spectrum) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# freq_hz\tmag_db")?;
    for (f, p) in s.freq_hz.iter().zip(&s.power_db) {
        writeln!(w, "{f}\t{p}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<prefix>_pre_lpf.txt`, `<prefix>_post_lpf.txt` and
/// `<prefix>_interface.txt` into `dir` and returns their paths.
pub fn write_spectrum_dump(
    dir: &Path,
    prefix: &str,
    d: &ChainDiagnostics,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    [
        ("pre_lpf", &d.pre_lpf),
        ("post_lpf", &d.post_lpf),
        ("interface", &d.interface),
    ]
    .into_iter()
    .map(|(tap, s)| {
        let path = dir.join(format!("{prefix}_{tap}.txt"));
        write_spectrum(&path, s)?;
        Ok(path)
    })
    .collect()
}
