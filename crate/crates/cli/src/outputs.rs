//! Writing run results to disk.

use std::fs;
use std::path::{Path, PathBuf};

use freechan_core::save_checkpoint;

use crate::config::Format;
use crate::error::LabResult;
use crate::plot::{line_plot, PlotOptions, Series};
use crate::scenario::{RunOutcome, Timings};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Creates `dir` and checks that it accepts files, so that an unwritable
/// target fails before anything is written.
pub fn prepare_dir(dir: &Path) -> LabResult<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(outcome: &RunOutcome, dir: &Path) -> LabResult<Vec<PathBuf>> {
    let s = dir.join(SUMMARY_FILE);
    fs::write(&s, serde_json::to_string_pretty(&outcome.summary)? + "\n")?;
    let t = dir.join(TIMINGS_FILE);
    fs::write(&t, serde_json::to_string_pretty::<Timings>(&outcome.timings)? + "\n")?;
    Ok(vec![s, t])
}

/// Writes the requested formats into `dir` and returns the files written.
pub fn emit_outputs(outcome: &RunOutcome, dir: &Path, formats: &[Format]) -> LabResult<Vec<PathBuf>> {
    prepare_dir(dir)?;
    let art = &outcome.artifacts;
    let mut files = Vec::new();
    if formats.contains(&Format::Json) {
        files.extend(write_summary(outcome, dir)?);
    }
    if formats.contains(&Format::Csv) {
        if let Some(rec) = &art.channels {
            let p = dir.join("channels.csv");
            write_csv(
                &p,
                &["time", "omega_norm", "cauchy_increment", "w_norm", "w_moment", "weps_mass", "weps_moment"],
                rec.times.iter().enumerate().map(|(k, t)| {
                    let w = &rec.weak[k];
                    vec![
                        *t,
                        rec.omega[k].l2_norm(),
                        rec.cauchy_increments.get(k).copied().unwrap_or(f64::NAN),
                        w.w_norm,
                        w.w_moment,
                        w.weps_mass,
                        w.weps_moment,
                    ]
                }),
            )?;
            files.push(p);
        }
        if !art.interaction_norms.is_empty() {
            let p = dir.join("interaction.csv");
            write_csv(&p, &["time", "psi_in_norm"], art.interaction_norms.iter().map(|(t, v)| vec![*t, *v]))?;
            files.push(p);
        }
        if let Some(s) = &art.rpres {
            let p = dir.join("rpres.csv");
            let nan = vec![f64::NAN; s.times.len()];
            let (cp, g) = (s.c_p.as_ref().unwrap_or(&nan), s.g.as_ref().unwrap_or(&nan));
            write_csv(
                &p,
                &["time", "observable", "derivative", "c_p", "g"],
                (0..s.times.len()).map(|k| vec![s.times[k], s.values[k], s.derivative[k], cp[k], g[k]]),
            )?;
            files.push(p);
        }
        if !art.charge.is_empty() {
            let p = dir.join("charge.csv");
            let n = art.charge[0].weak_mass.len();
            let mut header = vec!["time".to_string(), "duhamel_residual".to_string()];
            for j in 0..n {
                header.push(format!("weak_mass_{j}"));
                header.push(format!("weak_center_{j}"));
                header.push(format!("boosted_moment_{j}"));
            }
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(
                &p,
                &h,
                art.charge.iter().map(|s| {
                    let mut r = vec![s.time, s.duhamel_residual];
                    for j in 0..n {
                        r.extend([s.weak_mass[j], s.weak_center[j][0], s.boosted_moment[j]]);
                    }
                    r
                }),
            )?;
            files.push(p);
        }
        if let Some(s) = &art.morawetz {
            let p = dir.join("morawetz.csv");
            write_csv(&p, &["time", "value"], s.times.iter().zip(&s.values).map(|(t, v)| vec![*t, *v]))?;
            files.push(p);
        }
        if !art.solver_log.is_empty() {
            let p = dir.join("solver_log.csv");
            let mut w = csv::Writer::from_path(&p)?;
            for e in &art.solver_log {
                w.serialize(e)?;
            }
            w.flush()?;
            files.push(p);
        }
    }
    if formats.contains(&Format::Svg) {
        let fit_note = |name: &str| {
            art.fits
                .iter()
                .find(|f| f.name == name)
                .map(|f| format!("fitted slope {:.3} on [{}, {}]", f.fit.slope, f.fit.window.0, f.fit.window.1))
        };
        if !art.interaction_norms.is_empty() {
            let p = dir.join("interaction_decay.svg");
            let svg = line_plot(
                &[Series {
                    label: "||psi_in(t)||".into(),
                    points: art.interaction_norms.clone(),
                }],
                &PlotOptions {
                    title: format!("{}: interaction term", outcome.summary.scenario),
                    x_label: "t".into(),
                    y_label: "norm".into(),
                    log_x: true,
                    log_y: true,
                    annotation: fit_note("interaction_decay"),
                },
            );
            fs::write(&p, svg)?;
            files.push(p);
        }
        if let Some(rec) = &art.channels {
            let p = dir.join("cauchy.svg");
            let pts = rec.times.iter().zip(&rec.cauchy_increments).map(|(t, v)| (*t, *v)).collect();
            let svg = line_plot(
                &[Series {
                    label: "||Omega(t_k+1) - Omega(t_k)||".into(),
                    points: pts,
                }],
                &PlotOptions {
                    title: format!("{}: Cauchy increments", outcome.summary.scenario),
                    x_label: "t".into(),
                    y_label: "increment".into(),
                    log_x: true,
                    log_y: true,
                    annotation: None,
                },
            );
            fs::write(&p, svg)?;
            files.push(p);

            let p = dir.join("weak_moment.svg");
            let svg = line_plot(
                &[
                    Series {
                        label: "(psi_w, |x| psi_w)".into(),
                        points: rec.weak.iter().map(|w| (w.time, w.w_moment)).collect(),
                    },
                    Series {
                        label: "(psi_w_eps, |x| psi_w_eps)".into(),
                        points: rec.weak.iter().map(|w| (w.time, w.weps_moment)).collect(),
                    },
                ],
                &PlotOptions {
                    title: format!("{}: weak-part moments", outcome.summary.scenario),
                    x_label: "t".into(),
                    y_label: "moment".into(),
                    log_x: false,
                    log_y: false,
                    annotation: fit_note("weak_moment"),
                },
            );
            fs::write(&p, svg)?;
            files.push(p);
        }
    }
    if formats.contains(&Format::Wfn) {
        for s in &art.snapshots {
            let p = dir.join(format!("snapshot_t{}.wfn", s.time()));
            save_checkpoint(s, &p)?;
            files.push(p);
        }
    }
    Ok(files)
}
