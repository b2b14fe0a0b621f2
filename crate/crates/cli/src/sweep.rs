//! Parameter sweeps over a config template.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::error::{LabError, LabResult};
use crate::outputs::emit_outputs;
use crate::scenario::{run_scenario, RunSummary};

pub const WORKERS_ENV: &str = "FREECHAN_WORKERS";
pub const INDEX_FILE: &str = "index.csv";

/// Values per dotted config path, e.g. `"channels.alpha": [0.2, 0.4]`.
/// Cells are the cartesian product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterGrid {
    pub parameters: BTreeMap<String, Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum CellStatus {
    Passed,
    Failed,
    Error(String),
    Panicked(String),
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub index: usize,
    pub assignments: BTreeMap<String, Value>,
    pub dir: PathBuf,
    pub status: CellStatus,
    pub summary: Option<RunSummary>,
}

/// Worker count from `FREECHAN_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|n| *n > 0)
}

fn set_path(root: &mut Value, path: &str, v: Value) -> LabResult<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*key).to_string(), v);
                    return Ok(());
                }
                map.get_mut(*key)
                    .ok_or_else(|| LabError::Config(format!("sweep path {path}: no field {key}")))?
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| LabError::Config(format!("sweep path {path}: {key} is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| LabError::Config(format!("sweep path {path}: index {idx} out of range")))?;
                if last {
                    *slot = v;
                    return Ok(());
                }
                slot
            }
            _ => return Err(LabError::Config(format!("sweep path {path}: {key} is not inside an object or array"))),
        };
    }
    Err(LabError::Config("empty sweep path".into()))
}

/// The cells of `grid` as (assignments, patched template). An empty grid,
/// or one with an empty value list, has no cells.
pub fn expand(template: &Value, grid: &ParameterGrid) -> LabResult<Vec<(BTreeMap<String, Value>, Value)>> {
    if grid.parameters.is_empty() || grid.parameters.values().any(|v| v.is_empty()) {
        return Ok(Vec::new());
    }
    let mut cells = vec![BTreeMap::new()];
    for (path, values) in &grid.parameters {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(path.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    cells
        .into_iter()
        .map(|a| {
            let mut v = template.clone();
            for (p, x) in &a {
                set_path(&mut v, p, x.clone())?;
            }
            Ok((a, v))
        })
        .collect()
}

fn run_cell(value: Value, dir: &Path) -> LabResult<RunSummary> {
    let mut config = ScenarioConfig::from_value(value)?;
    config.output.dir = dir.to_path_buf();
    config.check_files()?;
    let outcome = run_scenario(&config)?;
    emit_outputs(&outcome, dir, &config.output.formats)?;
    Ok(outcome.summary)
}

/// Runs every cell of the sweep into `out_dir/cell_NNN`, isolating errors
/// and panics per cell, then writes the merged `index.csv`.
pub fn sweep(template: &Value, grid: &ParameterGrid, out_dir: &Path, workers: Option<usize>) -> LabResult<Vec<SweepCell>> {
    let cells = expand(template, grid)?;
    std::fs::create_dir_all(out_dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| LabError::Config(format!("worker pool: {e}")))?;
    let results: Vec<SweepCell> = pool.install(|| {
        cells
            .into_par_iter()
            .enumerate()
            .map(|(index, (assignments, value))| {
                let dir = out_dir.join(format!("cell_{index:03}"));
                let run = catch_unwind(AssertUnwindSafe(|| run_cell(value, &dir)));
                let (status, summary) = match run {
                    Ok(Ok(s)) => (if s.passed() { CellStatus::Passed } else { CellStatus::Failed }, Some(s)),
                    Ok(Err(e)) => (CellStatus::Error(e.to_string()), None),
                    Err(p) => {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        (CellStatus::Panicked(msg), None)
                    }
                };
                SweepCell {
                    index,
                    assignments,
                    dir,
                    status,
                    summary,
                }
            })
            .collect()
    });
    write_index(&results, grid, &out_dir.join(INDEX_FILE))?;
    Ok(results)
}

fn write_index(cells: &[SweepCell], grid: &ParameterGrid, path: &Path) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cell".to_string(), "dir".to_string()];
    header.extend(grid.parameters.keys().cloned());
    header.extend(["status", "message", "failed_diagnostics"].map(String::from));
    w.write_record(&header)?;
    for c in cells {
        let mut row = vec![c.index.to_string(), c.dir.display().to_string()];
        row.extend(grid.parameters.keys().map(|k| c.assignments.get(k).map(|v| v.to_string()).unwrap_or_default()));
        let (status, message) = match &c.status {
            CellStatus::Passed => ("passed", String::new()),
            CellStatus::Failed => ("failed", String::new()),
            CellStatus::Error(m) => ("error", m.clone()),
            CellStatus::Panicked(m) => ("panicked", m.clone()),
        };
        let failed = c
            .summary
            .as_ref()
            .map(|s| {
                s.diagnostics
                    .iter()
                    .filter(|d| !d.pass)
                    .map(|d| d.name.as_str())
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        row.extend([status.to_string(), message, failed]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn expansion_is_the_cartesian_product() {
        let t = json!({"a": {"x": 1, "y": [0, 0]}, "b": 2});
        let g = ParameterGrid {
            parameters: BTreeMap::from([
                ("a.x".to_string(), vec![json!(10), json!(20)]),
                ("a.y.1".to_string(), vec![json!(5), json!(6), json!(7)]),
            ]),
        };
        let cells = expand(&t, &g).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[5].1, json!({"a": {"x": 20, "y": [0, 7]}, "b": 2}));
    }

    #[test]
    fn empty_grids_have_no_cells() {
        let t = json!({"a": 1});
        assert!(expand(&t, &ParameterGrid::default()).unwrap().is_empty());
        let g = ParameterGrid {
            parameters: BTreeMap::from([("a".to_string(), vec![])]),
        };
        assert!(expand(&t, &g).unwrap().is_empty());
    }

    #[test]
    fn bad_paths_are_config_errors() {
        let t = json!({"a": {"x": 1}});
        for p in ["a.z.q", "a.x.y", "a.x.0"] {
            let g = ParameterGrid {
                parameters: BTreeMap::from([(p.to_string(), vec![json!(1)])]),
            };
            assert!(matches!(expand(&t, &g), Err(LabError::Config(_))), "{p}");
        }
    }
}
