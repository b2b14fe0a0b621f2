//! End-to-end scenario execution: evolve, decompose, evaluate diagnostics.

use std::time::Instant;

use freechan_core::channels::{
    charge_channels, cook_reconstruct, decompose, default_probes, ChannelRecord, ChannelTracker,
    ChargeChannelSample, TrackerOptions,
};
use freechan_core::diagnostics::{exponent_fit, morawetz_series, FitResult, ObservableSeries, RpresBudget};
use freechan_core::phase_space::{coherent_state, ProjectorParams};
use freechan_core::propagators::{
    evolve_observed, Dispersion, FreeFlow, Interaction, Mover, Potential, SolverLogEntry, SplitStepConfig,
    Trajectory, TrajectoryStatus,
};
use freechan_core::{load_checkpoint, Complex64, Grid, WaveFunction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{
    DiagnosticConfig, DispersionConfig, InitialConfig, InteractionConfig, Profile, ScenarioConfig,
};
use crate::error::{LabError, LabResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Aborted,
}

/// Outcome of one configured diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticResult {
    pub name: String,
    pub value: Option<f64>,
    /// Human-readable acceptance band, e.g. `<= -1`.
    pub band: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub status: RunStatus,
    /// SHA-256 of the serialized config.
    pub config_hash: String,
    pub code_version: String,
    pub final_time: f64,
    pub steps: usize,
    pub initial_norm: f64,
    pub psi_plus_norm: Option<f64>,
    pub final_weak_norm: Option<f64>,
    pub diagnostics: Vec<DiagnosticResult>,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Ok && self.diagnostics.iter().all(|d| d.pass)
    }
}

/// Wall-clock seconds per phase; kept out of the summary so that the
/// summary is reproducible byte for byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub evolve: f64,
    pub decompose: f64,
    pub diagnostics: f64,
    pub total: f64,
}

/// A named fit kept for plot annotations.
#[derive(Clone, Debug)]
pub struct NamedFit {
    pub name: &'static str,
    pub fit: FitResult,
}

/// Everything [`crate::outputs::emit_outputs`] can write.
#[derive(Clone, Debug, Default)]
pub struct RunArtifacts {
    pub channels: Option<ChannelRecord>,
    /// `(t, ||psi_in(t)||_2)` at every solver step.
    pub interaction_norms: Vec<(f64, f64)>,
    pub rpres: Option<ObservableSeries>,
    pub charge: Vec<ChargeChannelSample>,
    pub morawetz: Option<ObservableSeries>,
    pub solver_log: Vec<SolverLogEntry>,
    pub snapshots: Vec<WaveFunction>,
    pub fits: Vec<NamedFit>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub timings: Timings,
    pub artifacts: RunArtifacts,
}

pub fn config_hash(config: &ScenarioConfig) -> LabResult<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn dispersion(config: &DispersionConfig) -> LabResult<Dispersion> {
    Ok(match *config {
        DispersionConfig::Laplacian => Dispersion::Laplacian,
        DispersionConfig::Relativistic { mass } => {
            if !(mass >= 0.0) {
                return Err(LabError::Config(format!("relativistic mass must be >= 0, got {mass}")));
            }
            Dispersion::custom(move |k| (k.iter().map(|v| v * v).sum::<f64>() + mass * mass).sqrt())
        }
    })
}

fn gaussian_well(depth: f64, width: f64) -> Potential {
    Potential::real(move |x| -depth * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * width * width)).exp())
}

pub fn build_interaction(grid: &Grid, config: &InteractionConfig) -> LabResult<Interaction> {
    Ok(match config {
        InteractionConfig::Free => Interaction::Free,
        InteractionConfig::Localized {
            strength,
            width,
            delta,
            profile,
        } => {
            let (c, w, d) = (*strength, *width, *delta);
            let potential = match profile {
                Profile::Bracket => {
                    Potential::real(move |x| c * (1.0 + x.iter().map(|v| v * v).sum::<f64>() / (w * w)).powf(-0.5 * d))
                }
                Profile::Gaussian => gaussian_well(-c, w),
            };
            Interaction::localized(grid, potential, d)?
        }
        InteractionConfig::ChargeTransfer { movers } => Interaction::charge_transfer(
            movers
                .iter()
                .map(|m| Mover {
                    potential: gaussian_well(m.depth, m.width),
                    velocity: m.velocity.clone(),
                })
                .collect(),
        )?,
        InteractionConfig::Power { coefficient, exponent } => {
            Interaction::power(Complex64::new(coefficient[0], coefficient[1]), *exponent)?
        }
        InteractionConfig::Hartree { strength, width, sign } => {
            let (c, w) = (*strength, *width);
            Interaction::hartree(
                grid,
                move |y| c * (-y.iter().map(|v| v * v).sum::<f64>() / (2.0 * w * w)).exp(),
                *sign,
            )?
        }
        InteractionConfig::Sum { terms } => {
            Interaction::Sum(terms.iter().map(|t| build_interaction(grid, t)).collect::<LabResult<_>>()?)
        }
    })
}

pub fn build_initial(grid: &Grid, config: &InitialConfig) -> LabResult<WaveFunction> {
    Ok(match config {
        InitialConfig::Coherent {
            center,
            momentum,
            sigma,
        } => coherent_state(grid, center, momentum, *sigma)?,
        InitialConfig::Soliton { eta, center, velocity } => {
            if grid.dims() != 1 {
                return Err(LabError::Config("soliton initial data is one dimensional".into()));
            }
            let (eta, c, v) = (*eta, *center, *velocity);
            WaveFunction::from_position_fn(grid, 0.0, |x| {
                Complex64::from_polar(eta / (eta * (x[0] - c)).cosh(), 0.5 * v * x[0])
            })
        }
        InitialConfig::Superposition { terms } => {
            let mut sum = WaveFunction::zeros(grid, 0.0, freechan_core::Representation::Position);
            for t in terms {
                let s = build_initial(grid, &t.state)?.to_position();
                sum.axpy(Complex64::new(t.amplitude[0], t.amplitude[1]), &s)?;
            }
            sum
        }
        InitialConfig::File { path } => {
            let s = load_checkpoint(path)?;
            if s.grid().shape() != grid.shape()
                || s.grid().axes().iter().zip(grid.axes()).any(|(a, b)| a.half_length != b.half_length)
            {
                return Err(LabError::Config(format!("{} was written on a different grid", path.display())));
            }
            s.to_position().with_time(0.0)
        }
    })
}

/// Roughly `per_octave` samples per octave of `(t, value)` pairs, keeping
/// the first sample at or after each log-spaced target.
fn log_thin(series: &[(f64, f64)], start: f64, per_octave: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut k = 0;
    for &(t, v) in series {
        let target = start * 2f64.powf(k as f64 / per_octave as f64);
        if t >= target * (1.0 - 1e-9) {
            out.push((t, v));
            while start * 2f64.powf(k as f64 / per_octave as f64) <= t * (1.0 + 1e-9) {
                k += 1;
            }
        }
    }
    out
}

fn not_evaluated(d: &DiagnosticConfig, reason: &str) -> DiagnosticResult {
    DiagnosticResult {
        name: d.name().into(),
        value: None,
        band: band(d),
        pass: false,
        detail: reason.into(),
    }
}

fn band(d: &DiagnosticConfig) -> String {
    match d {
        DiagnosticConfig::WeakNorm { max } => format!("<= {max}"),
        DiagnosticConfig::InteractionDecay { max_slope, .. } => format!("<= {max_slope}"),
        DiagnosticConfig::Cook { max_residual } => format!("<= {max_residual}"),
        DiagnosticConfig::CauchyMonotone { after } => format!("non-increasing after t = {after}"),
        DiagnosticConfig::Rpres { max_slack } => format!("<= {max_slack}"),
        DiagnosticConfig::Duhamel { max_residual } => format!("<= {max_residual}"),
        DiagnosticConfig::WeakMoment { max_exponent, .. } => format!("<= {max_exponent}"),
        DiagnosticConfig::WeakMass { mass, tolerance } => format!("within {tolerance} of {mass}"),
        DiagnosticConfig::Morawetz { .. } => "reported".into(),
    }
}

struct Evaluated {
    results: Vec<DiagnosticResult>,
    fits: Vec<NamedFit>,
    rpres: Option<ObservableSeries>,
    charge: Vec<ChargeChannelSample>,
    morawetz: Option<ObservableSeries>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    config: &ScenarioConfig,
    traj: &Trajectory,
    record: &ChannelRecord,
    interaction_norms: &[(f64, f64)],
    rpres: Option<&freechan_core::channels::RpresSeries>,
    duhamel: Option<&freechan_core::channels::DuhamelRecord>,
    params: &ProjectorParams,
    flow: &FreeFlow,
) -> LabResult<Evaluated> {
    let n0 = traj.initial.l2_norm();
    let mut out = Evaluated {
        results: Vec::new(),
        fits: Vec::new(),
        rpres: None,
        charge: Vec::new(),
        morawetz: None,
    };
    for d in &config.diagnostics {
        let b = band(d);
        let r = match d {
            DiagnosticConfig::WeakNorm { max } => {
                let w = record.weak.last().map(|w| w.w_norm).unwrap_or(f64::NAN);
                DiagnosticResult {
                    name: d.name().into(),
                    value: Some(w),
                    band: b,
                    pass: w <= *max,
                    detail: format!("||psi_w(T)||_2 at T = {}", traj.final_state.time()),
                }
            }
            DiagnosticConfig::InteractionDecay { window, max_slope } => {
                let thin = log_thin(interaction_norms, window[0], 4);
                let (t, v): (Vec<f64>, Vec<f64>) = thin.into_iter().filter(|(_, v)| *v > 0.0).unzip();
                match exponent_fit(&t, &v, (window[0], window[1])) {
                    Ok(fit) => {
                        let r = DiagnosticResult {
                            name: d.name().into(),
                            value: Some(fit.slope),
                            band: b,
                            pass: fit.slope <= *max_slope,
                            detail: format!(
                                "slope of ||psi_in(t)|| over [{}, {}] from {} points",
                                window[0], window[1], fit.points
                            ),
                        };
                        out.fits.push(NamedFit {
                            name: "interaction_decay",
                            fit,
                        });
                        r
                    }
                    Err(e) => not_evaluated(d, &format!("fit failed: {e}")),
                }
            }
            DiagnosticConfig::Cook { max_residual } => match cook_reconstruct(record) {
                Ok(r) => {
                    let worst = r.iter().fold(0.0f64, |m, (_, v)| m.max(*v)) / n0;
                    DiagnosticResult {
                        name: d.name().into(),
                        value: Some(worst),
                        band: b,
                        pass: worst <= *max_residual,
                        detail: "largest Cook reconstruction residual relative to ||psi0||".into(),
                    }
                }
                Err(e) => not_evaluated(d, &e.to_string()),
            },
            DiagnosticConfig::CauchyMonotone { after } => {
                let inc: Vec<f64> = record
                    .cauchy_increments
                    .iter()
                    .zip(&record.times)
                    .filter(|(_, t)| **t >= *after)
                    .map(|(v, _)| *v)
                    .collect();
                let worst = inc
                    .windows(2)
                    .map(|w| (w[1] - w[0]) / w[0].max(1e-300))
                    .fold(f64::NEG_INFINITY, f64::max);
                DiagnosticResult {
                    name: d.name().into(),
                    value: Some(worst),
                    band: b,
                    pass: inc.len() >= 2 && worst <= 1e-9,
                    detail: format!("largest relative increase over {} increments", inc.len()),
                }
            }
            DiagnosticConfig::Rpres { max_slack } => match rpres {
                Some(s) => {
                    let series = ObservableSeries::from_tracked(s)?;
                    let budget = RpresBudget::of(&series)?;
                    out.rpres = Some(series);
                    DiagnosticResult {
                        name: d.name().into(),
                        value: Some(budget.slack),
                        band: b,
                        pass: budget.slack <= *max_slack,
                        detail: format!(
                            "int c_p = {:.6e}, sup<B> = {:.6e}, ||g||_1 = {:.6e}",
                            budget.integral_cp, budget.sup_observable, budget.g_l1
                        ),
                    }
                }
                None => not_evaluated(d, "observable was not tracked"),
            },
            DiagnosticConfig::Duhamel { max_residual } => match duhamel {
                Some(rec) => {
                    let ch = charge_channels(traj, rec, params, config.channels.epsilon, flow)?;
                    let worst = ch.samples.iter().fold(0.0f64, |m, s| m.max(s.duhamel_residual)) / n0;
                    out.charge = ch.samples;
                    DiagnosticResult {
                        name: d.name().into(),
                        value: Some(worst),
                        band: b,
                        pass: worst <= *max_residual,
                        detail: "largest Duhamel sum residual relative to ||psi0||".into(),
                    }
                }
                None => not_evaluated(d, "Duhamel integrals need a charge-transfer interaction"),
            },
            DiagnosticConfig::WeakMoment { window, max_exponent } => {
                let t: Vec<f64> = record.weak.iter().map(|w| w.time).collect();
                let m: Vec<f64> = record.weak.iter().map(|w| w.weps_moment).collect();
                match exponent_fit(&t, &m, (window[0], window[1])) {
                    Ok(fit) => {
                        let r = DiagnosticResult {
                            name: d.name().into(),
                            value: Some(fit.slope),
                            band: b,
                            pass: fit.slope <= *max_exponent,
                            detail: format!("growth exponent of (psi_w_eps, |x| psi_w_eps) over [{}, {}]", window[0], window[1]),
                        };
                        out.fits.push(NamedFit { name: "weak_moment", fit });
                        r
                    }
                    Err(e) => not_evaluated(d, &format!("fit failed: {e}")),
                }
            }
            DiagnosticConfig::WeakMass { mass, tolerance } => {
                let w = record.weak.last().map(|w| w.w_norm.powi(2)).unwrap_or(f64::NAN);
                let rel = (w - mass).abs() / mass.abs();
                DiagnosticResult {
                    name: d.name().into(),
                    value: Some(w),
                    band: b,
                    pass: rel <= *tolerance,
                    detail: format!("||psi_w(T)||^2, relative deviation {rel:.4e}"),
                }
            }
            DiagnosticConfig::Morawetz { alpha, radius } => {
                let states: Vec<WaveFunction> =
                    traj.snapshots.iter().filter(|s| s.time() > 0.0).cloned().collect();
                let series = morawetz_series(&states, *alpha, *radius)?;
                let last = series.values.last().copied();
                out.morawetz = Some(series);
                DiagnosticResult {
                    name: d.name().into(),
                    value: last,
                    band: b,
                    pass: true,
                    detail: "exterior Morawetz expectation at T".into(),
                }
            }
        };
        out.results.push(r);
    }
    Ok(out)
}

/// Runs a scenario end to end. Config problems are errors; a solver abort
/// returns a summary with status `aborted` and whatever artifacts exist.
pub fn run_scenario(config: &ScenarioConfig) -> LabResult<RunOutcome> {
    let started = Instant::now();
    config.check()?;
    config.check_files()?;
    let mut timings = Timings::default();
    let mut warnings = Vec::new();

    let grid = Grid::new(&config.grid.points, &config.grid.half_lengths)?;
    let disp = dispersion(&config.dispersion)?;
    let flow = FreeFlow::new(&grid, &disp)?;
    let interaction = build_interaction(&grid, &config.interaction)?;
    let psi0 = build_initial(&grid, &config.initial)?;
    let ch = &config.channels;
    let params = ProjectorParams::new(ch.alpha, ch.b, ch.a);
    match &config.interaction {
        InteractionConfig::Localized { delta, .. } if ch.b > 0.0 => warnings.extend(params.check_short_range(*delta)),
        InteractionConfig::Free => {}
        // the dispersive range only exists from three dimensions on
        _ if grid.dims() >= 3 => warnings.extend(params.check_dispersive(grid.dims())),
        _ => {}
    }

    let schedule = config.schedule()?;
    let mut solver = SplitStepConfig::new(config.solver.dt, schedule.clone())?;
    if let Some(th) = config.solver.boundary_threshold {
        solver.boundary_threshold = th;
    }
    let wants = |f: fn(&DiagnosticConfig) -> bool| config.diagnostics.iter().any(f);
    let is_charge = matches!(interaction, Interaction::ChargeTransfer { .. });
    let options = TrackerOptions {
        cook: wants(|d| matches!(d, DiagnosticConfig::Cook { .. } | DiagnosticConfig::InteractionDecay { .. })),
        rpres: wants(|d| matches!(d, DiagnosticConfig::Rpres { .. })),
        duhamel: is_charge && wants(|d| matches!(d, DiagnosticConfig::Duhamel { .. })),
        start: None,
    };
    timings.setup = started.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut tracker = ChannelTracker::new(&interaction, flow.clone(), params, &schedule, options)?;
    let traj = evolve_observed(&psi0, &interaction, &disp, &solver, config.solver.t_final, &mut tracker)?;
    let tracked = tracker.finish();
    timings.evolve = t.elapsed().as_secs_f64();
    warnings.extend(traj.warnings.iter().cloned());

    let mut artifacts = RunArtifacts {
        solver_log: traj.log.clone(),
        interaction_norms: tracked.cook.as_ref().map(|c| c.interaction_norms.clone()).unwrap_or_default(),
        snapshots: config
            .output
            .snapshot_times
            .iter()
            .filter_map(|t| traj.snapshot_at(*t).cloned())
            .collect(),
        ..RunArtifacts::default()
    };

    let mut summary = RunSummary {
        schema_version: crate::config::SCHEMA_VERSION,
        scenario: config.name.clone(),
        status: RunStatus::Ok,
        config_hash: config_hash(config)?,
        code_version: env!("CARGO_PKG_VERSION").into(),
        final_time: traj.final_state.time(),
        steps: traj.steps,
        initial_norm: psi0.l2_norm(),
        psi_plus_norm: None,
        final_weak_norm: None,
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };

    if let TrajectoryStatus::Aborted { time, boundary_mass } = traj.status {
        summary.status = RunStatus::Aborted;
        let reason = format!("run aborted at t = {time} with boundary mass {boundary_mass:.3e}");
        summary.diagnostics = config.diagnostics.iter().map(|d| not_evaluated(d, &reason)).collect();
        warnings.push(reason);
        summary.warnings = warnings;
        timings.total = started.elapsed().as_secs_f64();
        return Ok(RunOutcome {
            summary,
            timings,
            artifacts,
        });
    }

    let t = Instant::now();
    let probes = default_probes(&grid)?;
    let mut record = decompose(&traj, &params, &probes, ch.epsilon, &flow)?;
    record.cook = tracked.cook;
    warnings.extend(record.warnings.iter().cloned());
    timings.decompose = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ev = evaluate(
        config,
        &traj,
        &record,
        &artifacts.interaction_norms,
        tracked.rpres.as_ref(),
        tracked.duhamel.as_ref(),
        &params,
        &flow,
    )?;
    timings.diagnostics = t.elapsed().as_secs_f64();

    summary.psi_plus_norm = Some(record.psi_plus.l2_norm());
    summary.final_weak_norm = record.weak.last().map(|w| w.w_norm);
    summary.diagnostics = ev.results;
    summary.warnings = warnings;
    artifacts.channels = Some(record);
    artifacts.rpres = ev.rpres;
    artifacts.charge = ev.charge;
    artifacts.morawetz = ev.morawetz;
    artifacts.fits = ev.fits;
    timings.total = started.elapsed().as_secs_f64();
    Ok(RunOutcome {
        summary,
        timings,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_thinning_keeps_about_four_per_octave() {
        let s: Vec<(f64, f64)> = (1..=1600).map(|k| (0.01 * k as f64, 1.0)).collect();
        let thin = log_thin(&s, 1.0, 4);
        // octaves [1, 2), [2, 4), ..., [8, 16] plus the endpoint
        assert!((16..=18).contains(&thin.len()), "{}", thin.len());
        assert!(thin.windows(2).all(|w| w[1].0 / w[0].0 >= 2f64.powf(0.25) * 0.99));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let c = ScenarioConfig::from_json(crate::bundled("free_gaussian_1d").unwrap()).unwrap();
        let h = config_hash(&c).unwrap();
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&c.clone()).unwrap());
        let mut d = c.clone();
        d.channels.alpha = 0.41;
        assert_ne!(h, config_hash(&d).unwrap());
    }
}
