use serde::{Deserialize, Serialize};

/// Largest output-per-input slope (dB/dB) still counted as flat.
pub const PLATEAU_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// Lowest input SNR from which every later segment is flat.
    pub knee_input_db: f64,
    /// Output SNR at the highest input SNR.
    pub level_db: f64,
    /// Steepest segment slope above the knee.
    pub max_slope: f64,
}

/// Finds the flat tail of an (input dB, output dB) curve: the longest suffix
/// whose consecutive-point slopes are all below [`PLATEAU_SLOPE`]. Points
/// are sorted by input first; fewer than two points never form a plateau.
pub fn detect_plateau(curve: &[(f64, f64)]) -> Option<Plateau> {
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 2 {
        return None;
    }
    let slopes: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let flat_tail = slopes
        .iter()
        .rev()
        .take_while(|s| **s < PLATEAU_SLOPE)
        .count();
    if flat_tail == 0 {
        return None;
    }
    let knee = pts.len() - 1 - flat_tail;
    Some(Plateau {
        knee_input_db: pts[knee].0,
        level_db: pts[pts.len() - 1].1,
        max_slope: slopes[knee..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    })
}
