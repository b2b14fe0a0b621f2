use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freechan_lab::config::ScenarioConfig;
use freechan_lab::outputs::emit_outputs;
use freechan_lab::plot::{line_plot, PlotOptions, Series};
use freechan_lab::sweep::{sweep, workers_from_env, CellStatus, ParameterGrid};
use freechan_lab::{bundled, fit_csv, inspect_snapshot, read_columns, run_scenario, LabError, LabResult, BUNDLED};

/// Free-channel wave operator experiments.
///
/// Exit codes: 0 when every configured acceptance band passes, 2 when a
/// diagnostic fails (or a run aborts), 1 on execution errors.
#[derive(Parser)]
#[command(name = "freechan-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or the bundled catalog.
    Run {
        /// Path to a scenario JSON file.
        config: Option<PathBuf>,
        /// Name of a bundled scenario instead of a file.
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of a parameter grid over a template config.
    Sweep {
        template: PathBuf,
        grid: PathBuf,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
    },
    /// Log-log slope of one CSV column against another.
    Fit {
        series: PathBuf,
        #[arg(long, default_value = "time")]
        x: String,
        /// Column to fit; defaults to the second column.
        #[arg(long)]
        y: Option<String>,
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
        window: Option<Vec<f64>>,
    },
    /// Plot CSV columns to SVG.
    Plot {
        series: PathBuf,
        #[arg(long, default_value = "time")]
        x: String,
        /// Columns to draw; defaults to every other column.
        #[arg(long)]
        y: Vec<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Describe a WFN1 snapshot.
    Inspect { snapshot: PathBuf },
    /// List the bundled scenarios.
    List,
}

fn headers(path: &Path) -> LabResult<Vec<String>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.headers()?.iter().map(String::from).collect())
}

fn run(command: Command) -> LabResult<ExitCode> {
    match command {
        Command::Run { config, scenario, out } => {
            let mut cfg = match (config, scenario) {
                (Some(p), _) => ScenarioConfig::load(p)?,
                (None, Some(name)) => ScenarioConfig::from_json(
                    bundled(&name).ok_or_else(|| LabError::Config(format!("no bundled scenario {name}")))?,
                )?,
                (None, None) => return Err(LabError::Config("give a config file or --scenario".into())),
            };
            if let Some(o) = out {
                cfg.output.dir = o;
            }
            freechan_lab::outputs::prepare_dir(&cfg.output.dir)?;
            let outcome = run_scenario(&cfg)?;
            emit_outputs(&outcome, &cfg.output.dir, &cfg.output.formats)?;
            let s = &outcome.summary;
            println!("scenario {} ({:?}) in {:.1} s", s.scenario, s.status, outcome.timings.total);
            for d in &s.diagnostics {
                let v = d.value.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
                println!("  {:<18} {} {v} ({}) {}", d.name, if d.pass { "PASS" } else { "FAIL" }, d.band, d.detail);
            }
            for w in &s.warnings {
                println!("  warning: {w}");
            }
            Ok(if s.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Sweep { template, grid, out } => {
            let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&template)?)?;
            let g: ParameterGrid = serde_json::from_str(&std::fs::read_to_string(&grid)?)?;
            let cells = sweep(&t, &g, &out, workers_from_env())?;
            let mut code = 0u8;
            for c in &cells {
                println!("cell {:03} {:?} {:?}", c.index, c.assignments, c.status);
                code = match c.status {
                    CellStatus::Passed => code,
                    CellStatus::Failed if code == 0 => 2,
                    CellStatus::Failed => code,
                    _ => 1,
                };
            }
            println!("{} cells, index at {}", cells.len(), out.join(freechan_lab::sweep::INDEX_FILE).display());
            Ok(ExitCode::from(code))
        }
        Command::Fit { series, x, y, window } => {
            let y = match y {
                Some(y) => y,
                None => headers(&series)?
                    .into_iter()
                    .find(|h| *h != x)
                    .ok_or_else(|| LabError::Config("no column to fit".into()))?,
            };
            let fit = fit_csv(&series, &x, &y, window.map(|w| (w[0], w[1])))?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot {
            series,
            x,
            y,
            log_x,
            log_y,
            output,
        } => {
            let cols = if y.is_empty() {
                headers(&series)?.into_iter().filter(|h| *h != x).collect()
            } else {
                y
            };
            let data = cols
                .iter()
                .map(|c| {
                    let (xs, ys) = read_columns(&series, &x, c)?;
                    Ok(Series {
                        label: c.clone(),
                        points: xs.into_iter().zip(ys).collect(),
                    })
                })
                .collect::<LabResult<Vec<_>>>()?;
            let svg = line_plot(
                &data,
                &PlotOptions {
                    title: series.display().to_string(),
                    x_label: x,
                    y_label: String::new(),
                    log_x,
                    log_y,
                    annotation: None,
                },
            );
            let path = output.unwrap_or_else(|| series.with_extension("svg"));
            std::fs::write(&path, svg)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { snapshot } => {
            println!("{}", serde_json::to_string_pretty(&inspect_snapshot(&snapshot)?)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for (name, text) in BUNDLED {
                let c = ScenarioConfig::from_json(text)?;
                println!("{name:<28} {}", c.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
