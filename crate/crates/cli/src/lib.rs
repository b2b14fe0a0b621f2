//! Scenario runner behind the `freechan-lab` command line tool.

pub mod config;
pub mod error;
pub mod outputs;
pub mod plot;
pub mod scenario;
pub mod sweep;

use std::path::Path;

use freechan_core::diagnostics::{log_log_fit, FitResult};
use freechan_core::{load_checkpoint, Representation};
use serde::Serialize;

pub use config::ScenarioConfig;
pub use error::{LabError, LabResult};
pub use scenario::{run_scenario, RunOutcome, RunStatus, RunSummary};

/// Scenarios shipped with the tool, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("free_gaussian_1d", include_str!("../scenarios/free_gaussian_1d.json")),
    ("localized_delta3_1d", include_str!("../scenarios/localized_delta3_1d.json")),
    ("charge_transfer_2movers_1d", include_str!("../scenarios/charge_transfer_2movers_1d.json")),
    ("defocusing_cubic_1d", include_str!("../scenarios/defocusing_cubic_1d.json")),
    ("focusing_soliton_1d", include_str!("../scenarios/focusing_soliton_1d.json")),
    ("hartree_1d", include_str!("../scenarios/hartree_1d.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Reads columns `x` and `y` (by header name) of a CSV file.
pub fn read_columns(path: &Path, x: &str, y: &str) -> LabResult<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::Config(format!("{}: no column {name}", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> LabResult<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| LabError::Config(format!("{}: bad number {:?}", path.display(), rec.get(i))))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

/// Log-log fit of column `y` against `x`; the window defaults to the data
/// range, and nonpositive rows are skipped.
pub fn fit_csv(path: &Path, x: &str, y: &str, window: Option<(f64, f64)>) -> LabResult<FitResult> {
    let (xs, ys) = read_columns(path, x, y)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = xs.into_iter().zip(ys).filter(|(a, b)| *a > 0.0 && *b > 0.0).unzip();
    let window = window.unwrap_or_else(|| {
        (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    Ok(log_log_fit(&xs, &ys, window)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotInfo {
    pub points: Vec<usize>,
    pub half_lengths: Vec<f64>,
    pub time: f64,
    pub representation: String,
    pub mass: f64,
    pub position_mean: Vec<f64>,
    pub momentum_mean: Vec<f64>,
    pub boundary_mass_fraction: f64,
}

pub fn inspect_snapshot(path: &Path) -> LabResult<SnapshotInfo> {
    let s = load_checkpoint(path)?;
    let grid = s.grid();
    let representation = match s.representation() {
        Representation::Position => "position",
        Representation::Frequency => "frequency",
    };
    let p = s.to_position();
    Ok(SnapshotInfo {
        points: grid.shape(),
        half_lengths: grid.axes().iter().map(|a| a.half_length).collect(),
        time: s.time(),
        representation: representation.into(),
        mass: p.mass(),
        position_mean: p.position_mean(),
        momentum_mean: p.momentum_mean(),
        boundary_mass_fraction: p.boundary_mass_fraction(),
    })
}
