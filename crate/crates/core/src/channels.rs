//! Channel wave operators `Omega*(t)`, Cook expansions, weakly localized
//! parts and charge-transfer channels.
//!
//! All integrals over time (Cook, Duhamel, propagation observables) are
//! trapezoidal sums on the solver steps, accumulated on the fly by
//! [`ChannelTracker`] while [`crate::propagators::evolve_observed`] runs.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{cutoff_field, cutoff_time_derivative_field, CutoffKind, CutoffSpec, Scale, Variable};
use crate::error::{usage, Error, Result};
use crate::field::{MomentWeight, Representation, Space, WaveFunction};
use crate::phase_space::{apply_sobolev_weight, coherent_state, ProjectorParams};
use crate::propagators::{translate_boost, FreeFlow, Interaction, StepObserver, Trajectory};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("channel quantities need t > 0, got t = {t}")));
    }
    Ok(())
}

/// Applies the channel projector to a profile `e^{itH0} <P>^a psi(t)`:
/// momentum cutoff (when `b > 0`) then position cutoff.
fn project_profile(profile: &WaveFunction, params: &ProjectorParams, t: f64) -> Result<WaveFunction> {
    let grid = profile.grid();
    let mut p = profile.clone();
    if params.b > 0.0 {
        p = p.multiply(&cutoff_field(grid, &CutoffSpec::momentum_gt(params.b), t)?, Space::Frequency)?;
    }
    p.multiply(&cutoff_field(grid, &CutoffSpec::position_leq(params.alpha), t)?, Space::Position)
}

/// `e^{itH0} <P>^a psi(t)` with `a` the effective weight order.
fn weighted_profile(state: &WaveFunction, params: &ProjectorParams, flow: &FreeFlow) -> Result<WaveFunction> {
    let t = state.time();
    let w = apply_sobolev_weight(state, params.effective_a(), 1.0)?;
    Ok(flow.apply(&w, -t)?.with_time(t).into_representation(Representation::Position))
}

/// `Omega*(t) psi(0)` evaluated from the snapshot `psi(t)`:
/// `<P>^-a F_c(|x|/t^alpha <= 1) [F_1(t^b |P| > 1)] e^{itH0} <P>^a psi(t)`.
pub fn omega_t(state: &WaveFunction, params: &ProjectorParams, flow: &FreeFlow) -> Result<WaveFunction> {
    let t = state.time();
    check_time(t)?;
    let projected = project_profile(&weighted_profile(state, params, flow)?, params, t)?;
    apply_sobolev_weight(&projected, params.effective_a(), -1.0)
}

/// Which ordering of the interaction integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionVariant {
    /// `-i <P>^-a F_c e^{itH0} <P>^a V psi`
    In,
    /// `-i F_c F_1 e^{itH0} V psi`
    In1,
    /// `-i F_1 F_c e^{itH0} V psi`
    In2,
}

/// Integrand of the Cook interaction integral at the time of `state`, for
/// the multiplicative field `w_field` (see [`Interaction::eval`]).
pub fn interaction_term(
    state: &WaveFunction,
    w_field: &[Complex64],
    params: &ProjectorParams,
    variant: InteractionVariant,
    flow: &FreeFlow,
) -> Result<WaveFunction> {
    let t = state.time();
    check_time(t)?;
    let grid = state.grid();
    let vpsi = state.to_position().multiply(w_field, Space::Position)?;
    let fc = cutoff_field(grid, &CutoffSpec::position_leq(params.alpha), t)?;
    let out = match variant {
        InteractionVariant::In => {
            let a = params.effective_a();
            let w = apply_sobolev_weight(&vpsi, a, 1.0)?;
            let p = flow.apply(&w, -t)?.multiply(&fc, Space::Position)?;
            apply_sobolev_weight(&p, a, -1.0)?
        }
        InteractionVariant::In1 | InteractionVariant::In2 => {
            let f1 = cutoff_field(grid, &CutoffSpec::momentum_gt(params.b), t)?;
            let p = flow.apply(&vpsi, -t)?;
            if variant == InteractionVariant::In1 {
                p.multiply(&f1, Space::Frequency)?.multiply(&fc, Space::Position)?
            } else {
                p.multiply(&fc, Space::Position)?.multiply(&f1, Space::Frequency)?
            }
        }
    };
    Ok(out.scaled(-I).with_time(t).into_representation(Representation::Position))
}

/// Trapezoidal accumulator for a field-valued integrand.
#[derive(Clone, Debug)]
struct FieldIntegral {
    sum: WaveFunction,
    prev: Option<(f64, WaveFunction)>,
}

impl FieldIntegral {
    fn new(template: &WaveFunction) -> Self {
        Self {
            sum: WaveFunction::zeros(template.grid(), template.time(), Representation::Position),
            prev: None,
        }
    }

    fn push(&mut self, t: f64, f: WaveFunction) -> Result<()> {
        if let Some((t0, f0)) = &self.prev {
            let h = t - t0;
            self.sum.axpy(Complex64::new(0.5 * h, 0.0), f0)?;
            self.sum.axpy(Complex64::new(0.5 * h, 0.0), &f)?;
        }
        self.prev = Some((t, f));
        Ok(())
    }

    fn value(&self, t: f64) -> WaveFunction {
        self.sum.clone().with_time(t)
    }
}

/// One schedule time of a Cook expansion.
#[derive(Clone, Debug)]
pub struct CookSample {
    pub time: f64,
    /// `psi_p(t)`: accumulated cutoff transport.
    pub psi_p: WaveFunction,
    /// `int_start^t psi_in(s) ds`
    pub interaction_integral: WaveFunction,
}

#[derive(Clone, Debug)]
pub struct CookRecord {
    pub start: f64,
    pub variant: InteractionVariant,
    pub samples: Vec<CookSample>,
    /// `(s, ||psi_in(s)||_2)` at every solver step.
    pub interaction_norms: Vec<(f64, f64)>,
}

/// Per-step samples of the relative propagation observable
/// `<B>_t = (phi(t), F_c(|x|/t^alpha <= 1) phi(t))`, `phi(t) = e^{itH0} <P>^a psi(t)`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RpresSeries {
    pub times: Vec<f64>,
    pub observable: Vec<f64>,
    /// `c_p(t) = (phi, d_t F_c phi) >= 0`
    pub c_p: Vec<f64>,
    /// `2 Im (phi, F_c e^{itH0} <P>^a W psi)`, the exact remainder.
    pub g_direct: Vec<f64>,
    /// `|| F_c e^{itH0} <P>^a W psi ||_2`
    pub forcing_norm: Vec<f64>,
    pub phi_norm: Vec<f64>,
}

/// Duhamel integrals `phi_j(t) = int_0^t e^{isH0} V_j(x - s v_j, s) psi(s) ds`.
#[derive(Clone, Debug)]
pub struct DuhamelRecord {
    pub start: f64,
    pub velocities: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `phi[k][j]` at `times[k]`.
    pub phi: Vec<Vec<WaveFunction>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerOptions {
    pub cook: bool,
    pub rpres: bool,
    pub duhamel: bool,
    /// Start of the Cook and observable integrals; defaults to the first
    /// schedule time.
    pub start: Option<f64>,
}

impl Default for TrackerOptions {
    fn default() -> Self {
        Self {
            cook: true,
            rpres: false,
            duhamel: false,
            start: None,
        }
    }
}

struct CookState {
    p: FieldIntegral,
    int_in: FieldIntegral,
    samples: Vec<CookSample>,
    norms: Vec<(f64, f64)>,
}

struct DuhamelState {
    acc: Vec<FieldIntegral>,
    times: Vec<f64>,
    phi: Vec<Vec<WaveFunction>>,
}

/// Step observer accumulating Cook, observable and Duhamel integrals.
pub struct ChannelTracker<'a> {
    interaction: &'a Interaction,
    flow: FreeFlow,
    params: ProjectorParams,
    schedule: Vec<f64>,
    options: TrackerOptions,
    start: f64,
    cook: Option<CookState>,
    rpres: Option<RpresSeries>,
    duhamel: Option<DuhamelState>,
    duhamel_start: Option<f64>,
}

/// Everything a [`ChannelTracker`] collected.
#[derive(Clone, Debug, Default)]
pub struct TrackerOutput {
    pub cook: Option<CookRecord>,
    pub rpres: Option<RpresSeries>,
    pub duhamel: Option<DuhamelRecord>,
}

impl<'a> ChannelTracker<'a> {
    pub fn new(
        interaction: &'a Interaction,
        flow: FreeFlow,
        params: ProjectorParams,
        schedule: &[f64],
        options: TrackerOptions,
    ) -> Result<Self> {
        let start = options
            .start
            .or_else(|| schedule.first().copied())
            .ok_or_else(|| Error::Config("tracker needs a schedule".into()))?;
        check_time(start)?;
        if options.duhamel && !matches!(interaction, Interaction::ChargeTransfer { .. }) {
            return usage("Duhamel channel integrals need a charge-transfer interaction");
        }
        Ok(Self {
            interaction,
            flow,
            params,
            schedule: schedule.to_vec(),
            options,
            start,
            cook: None,
            rpres: options.rpres.then(RpresSeries::default),
            duhamel: None,
            duhamel_start: None,
        })
    }

    fn variant(&self) -> InteractionVariant {
        if self.params.b > 0.0 {
            InteractionVariant::In1
        } else {
            InteractionVariant::In
        }
    }

    /// Time derivative of the projector applied to a profile.
    fn transport(&self, profile: &WaveFunction, t: f64) -> Result<WaveFunction> {
        let grid = profile.grid();
        let fc_spec = CutoffSpec::position_leq(self.params.alpha);
        let dfc = cutoff_time_derivative_field(grid, &fc_spec, t)?;
        if self.params.b > 0.0 {
            let f1_spec = CutoffSpec::momentum_gt(self.params.b);
            let f1 = cutoff_field(grid, &f1_spec, t)?;
            let df1 = cutoff_time_derivative_field(grid, &f1_spec, t)?;
            let fc = cutoff_field(grid, &fc_spec, t)?;
            let a = profile.multiply(&f1, Space::Frequency)?.multiply(&dfc, Space::Position)?;
            let b = profile.multiply(&df1, Space::Frequency)?.multiply(&fc, Space::Position)?;
            a.add(&b)
        } else {
            let p = profile.multiply(&dfc, Space::Position)?;
            apply_sobolev_weight(&p, self.params.effective_a(), -1.0)
        }
    }

    fn observe_channels(&mut self, state: &WaveFunction) -> Result<()> {
        let t = state.time();
        let profile = weighted_profile(state, &self.params, &self.flow)?;
        let w = self.interaction.eval(state, t)?;
        let grid = state.grid().clone();

        if self.options.cook {
            let variant = self.variant();
            let psi_in = interaction_term(state, &w, &self.params, variant, &self.flow)?;
            let p_dot = self.transport(&profile, t)?;
            let cook = self.cook.get_or_insert_with(|| CookState {
                p: FieldIntegral::new(state),
                int_in: FieldIntegral::new(state),
                samples: Vec::new(),
                norms: Vec::new(),
            });
            cook.norms.push((t, psi_in.l2_norm()));
            cook.p.push(t, p_dot)?;
            cook.int_in.push(t, psi_in)?;
            if self.schedule.iter().any(|s| same_time(*s, t)) {
                cook.samples.push(CookSample {
                    time: t,
                    psi_p: cook.p.value(t),
                    interaction_integral: cook.int_in.value(t),
                });
            }
        }

        if let Some(series) = &mut self.rpres {
            let fc_spec = CutoffSpec::position_leq(self.params.alpha);
            let fc = cutoff_field(&grid, &fc_spec, t)?;
            let dfc = cutoff_time_derivative_field(&grid, &fc_spec, t)?;
            let dv = grid.cell_volume();
            let (mut b, mut cp) = (0.0, 0.0);
            for ((z, f), d) in profile.values().iter().zip(&fc).zip(&dfc) {
                b += f * z.norm_sqr();
                cp += d * z.norm_sqr();
            }
            let vpsi = state.to_position().multiply(&w, Space::Position)?;
            let forcing = self
                .flow
                .apply(&apply_sobolev_weight(&vpsi, self.params.effective_a(), 1.0)?, -t)?
                .into_representation(Representation::Position)
                .multiply(&fc, Space::Position)?;
            let g = 2.0 * profile.inner(&forcing)?.im;
            series.times.push(t);
            series.observable.push(b * dv);
            series.c_p.push(cp * dv);
            series.g_direct.push(g);
            series.forcing_norm.push(forcing.l2_norm());
            series.phi_norm.push(profile.l2_norm());
        }
        Ok(())
    }

    fn observe_duhamel(&mut self, state: &WaveFunction) -> Result<()> {
        let t = state.time();
        let grid = state.grid().clone();
        let fields = self.interaction.mover_fields(&grid, t)?;
        let pos = state.to_position();
        let d = self.duhamel.get_or_insert_with(|| DuhamelState {
            acc: fields.iter().map(|_| FieldIntegral::new(state)).collect(),
            times: Vec::new(),
            phi: Vec::new(),
        });
        if self.duhamel_start.is_none() {
            self.duhamel_start = Some(t);
        }
        for (acc, f) in d.acc.iter_mut().zip(&fields) {
            let integrand = self
                .flow
                .apply(&pos.multiply(f, Space::Position)?, -t)?
                .into_representation(Representation::Position);
            acc.push(t, integrand)?;
        }
        if self.schedule.iter().any(|s| same_time(*s, t)) {
            d.times.push(t);
            d.phi.push(d.acc.iter().map(|a| a.value(t)).collect());
        }
        Ok(())
    }

    pub fn finish(self) -> TrackerOutput {
        let variant = self.variant();
        let velocities = match self.interaction {
            Interaction::ChargeTransfer { movers } => movers.iter().map(|m| m.velocity.clone()).collect(),
            _ => Vec::new(),
        };
        TrackerOutput {
            cook: self.cook.map(|c| CookRecord {
                start: self.start,
                variant,
                samples: c.samples,
                interaction_norms: c.norms,
            }),
            rpres: self.rpres,
            duhamel: self.duhamel.map(|d| DuhamelRecord {
                start: self.duhamel_start.unwrap_or(0.0),
                velocities,
                times: d.times,
                phi: d.phi,
            }),
        }
    }
}

impl StepObserver for ChannelTracker<'_> {
    fn observe(&mut self, state: &WaveFunction) -> Result<()> {
        let t = state.time();
        if self.options.duhamel {
            self.observe_duhamel(state)?;
        }
        if (self.options.cook || self.options.rpres) && t >= self.start - 1e-9 * self.start {
            self.observe_channels(state)?;
        }
        Ok(())
    }
}

/// Per-time weak-part diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakSample {
    pub time: f64,
    /// `||psi_w(t)||_2`, `psi_w = psi(t) - e^{-itH0} Omega*(t) psi(0)`
    pub w_norm: f64,
    /// `(psi_w, |x| psi_w)`
    pub w_moment: f64,
    /// `||psi_{w,eps}(t)||_2^2`
    pub weps_mass: f64,
    /// `(psi_{w,eps}, |x| psi_{w,eps})`
    pub weps_moment: f64,
    /// `|(phi_k, e^{itH0} psi_w(t))|` for each probe `phi_k`.
    pub overlaps: Vec<f64>,
}

/// Output of [`decompose`].
#[derive(Clone, Debug)]
pub struct ChannelRecord {
    pub params: ProjectorParams,
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `Omega*(t) psi(0)` per time.
    pub omega: Vec<WaveFunction>,
    /// `||Omega(t_{k+1}) - Omega(t_k)||_2`
    pub cauchy_increments: Vec<f64>,
    /// `Omega*(T) psi(0)` at the final time.
    pub psi_plus: WaveFunction,
    /// `||Omega(T) - Omega(T')||_2` with `T'` the schedule time closest to `T/2`.
    pub psi_plus_change: f64,
    pub weak: Vec<WeakSample>,
    /// Attached Cook expansion, if one was tracked.
    pub cook: Option<CookRecord>,
    pub warnings: Vec<String>,
}

/// Scalar summary of a [`ChannelRecord`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub params: ProjectorParams,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub omega_norms: Vec<f64>,
    pub cauchy_increments: Vec<f64>,
    pub psi_plus_norm: f64,
    pub psi_plus_change: f64,
    pub weak: Vec<WeakSample>,
    pub cook_residuals: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ChannelRecord {
    pub fn summary(&self) -> ChannelSummary {
        ChannelSummary {
            params: self.params,
            epsilon: self.epsilon,
            times: self.times.clone(),
            omega_norms: self.omega.iter().map(|o| o.l2_norm()).collect(),
            cauchy_increments: self.cauchy_increments.clone(),
            psi_plus_norm: self.psi_plus.l2_norm(),
            psi_plus_change: self.psi_plus_change,
            weak: self.weak.clone(),
            cook_residuals: cook_reconstruct(self).ok().map(|r| r.into_iter().map(|(_, v)| v).collect()),
            warnings: self.warnings.clone(),
        }
    }

    /// Tail sums `sum_{k >= K} ||Delta Omega_k||` for each `K`.
    pub fn cauchy_tails(&self) -> Vec<f64> {
        let mut tails = vec![0.0; self.cauchy_increments.len()];
        let mut acc = 0.0;
        for (k, d) in self.cauchy_increments.iter().enumerate().rev() {
            acc += d;
            tails[k] = acc;
        }
        tails
    }
}

/// Fixed library of five probe functions for the weak-limit check:
/// Gaussians of several centers and widths and one oscillatory packet.
pub fn default_probes(grid: &crate::field::Grid) -> Result<Vec<WaveFunction>> {
    let dims = grid.dims();
    let l = grid.axes().iter().map(|a| a.half_length).fold(f64::INFINITY, f64::min);
    let on_axis = |v: f64| {
        let mut c = vec![0.0; dims];
        c[0] = v;
        c
    };
    let zero = vec![0.0; dims];
    let s = (l / 16.0).min(4.0);
    [
        (zero.clone(), zero.clone(), s / 4.0),
        (zero.clone(), zero.clone(), s),
        (on_axis(l / 8.0), zero.clone(), s / 2.0),
        (on_axis(-l / 16.0), zero.clone(), s / 8.0),
        (zero.clone(), on_axis(1.0), s / 2.0),
    ]
    .iter()
    .map(|(x0, k0, sigma)| coherent_state(grid, x0, k0, *sigma))
    .collect()
}

/// Weakly localized part of `psi_d`: `prod_j F̄_2(|(x - c)_j| <= t^{1/2+eps})`
/// applied to the complement of the moving cutoff, `e^{-itH0} F̄_c e^{itH0} psi_d`.
/// `drift` moves the window center `c = drift * t`.
fn weakly_localized(
    psi_d: &WaveFunction,
    t: f64,
    alpha: f64,
    epsilon: f64,
    drift: &[f64],
    flow: &FreeFlow,
) -> Result<WaveFunction> {
    let grid = psi_d.grid();
    let comp = cutoff_field(grid, &CutoffSpec::position_leq(alpha).complement(), t)?;
    let mut w = flow
        .apply(&flow.apply(psi_d, -t)?.multiply(&comp, Space::Position)?, t)?
        .into_representation(Representation::Position);
    for (axis, v) in drift.iter().enumerate() {
        let spec = CutoffSpec {
            kind: CutoffKind::F2BarLeq,
            scale: Scale::power(0.5 + epsilon),
            variable: Variable::AbsAxis {
                axis,
                shift: 0.0,
                drift: *v,
            },
            space: Space::Position,
        };
        w = w.multiply(&cutoff_field(grid, &spec, t)?, Space::Position)?;
    }
    Ok(w.with_time(t))
}

/// `psi_d(t) = psi(t) - e^{-itH0} psi(0)`.
fn dispersive_remainder(state: &WaveFunction, initial: &WaveFunction, flow: &FreeFlow) -> Result<WaveFunction> {
    let dt = state.time() - initial.time();
    let free = flow.apply(initial, dt)?;
    state.to_position().sub(&free.to_position())
}

/// Channel decomposition of a trajectory at every positive snapshot time.
pub fn decompose(
    trajectory: &Trajectory,
    params: &ProjectorParams,
    probes: &[WaveFunction],
    epsilon: f64,
    flow: &FreeFlow,
) -> Result<ChannelRecord> {
    let snaps: Vec<&WaveFunction> = trajectory.snapshots.iter().filter(|s| s.time() > 0.0).collect();
    if snaps.is_empty() {
        return usage("trajectory has no snapshot at positive time");
    }
    let mut warnings = Vec::new();
    if params.b > 0.0 && params.a != 0.0 {
        warnings.push(format!(
            "weight order a = {} ignored: the momentum-cutoff construction runs with a = 0",
            params.a
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let simple = params.b == 0.0 && params.effective_a() == 0.0;
    let initial = &trajectory.initial;
    let per_time: Vec<Result<(WaveFunction, WeakSample)>> = snaps
        .par_iter()
        .map(|s| {
            let t = s.time();
            let pos = s.to_position();
            let omega = omega_t(s, params, flow)?;
            let psi_w = if simple {
                let comp = cutoff_field(s.grid(), &CutoffSpec::position_leq(params.alpha).complement(), t)?;
                flow.apply(&flow.apply(&pos, -t)?.multiply(&comp, Space::Position)?, t)?
            } else {
                pos.sub(&flow.apply(&omega, t)?.to_position())?
            }
            .into_representation(Representation::Position);
            let w_profile = flow.apply(&psi_w, -t)?;
            let overlaps = probes
                .iter()
                .map(|p| Ok(p.inner(&w_profile.to_representation(p.representation()))?.norm()))
                .collect::<Result<Vec<f64>>>()?;
            let psi_d = dispersive_remainder(s, initial, flow)?;
            let drift = vec![0.0; s.grid().dims()];
            let weps = weakly_localized(&psi_d, t, params.alpha, epsilon, &drift, flow)?;
            Ok((
                omega,
                WeakSample {
                    time: t,
                    w_norm: psi_w.l2_norm(),
                    w_moment: psi_w.x_moment(&MomentWeight::Abs)?,
                    weps_mass: weps.mass(),
                    weps_moment: weps.x_moment(&MomentWeight::Abs)?,
                    overlaps,
                },
            ))
        })
        .collect();
    let mut omega = Vec::with_capacity(snaps.len());
    let mut weak = Vec::with_capacity(snaps.len());
    for r in per_time {
        let (o, w) = r?;
        omega.push(o);
        weak.push(w);
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
    let cauchy_increments = omega
        .windows(2)
        .map(|w| w[1].distance(&w[0]))
        .collect::<Result<Vec<f64>>>()?;
    let last = omega.len() - 1;
    let t_final = times[last];
    let half = (0..last)
        .min_by(|&i, &j| {
            (times[i] - 0.5 * t_final)
                .abs()
                .total_cmp(&(times[j] - 0.5 * t_final).abs())
        })
        .unwrap_or(last);
    let psi_plus_change = omega[last].distance(&omega[half])?;
    Ok(ChannelRecord {
        params: *params,
        epsilon,
        times,
        psi_plus: omega[last].clone(),
        omega,
        cauchy_increments,
        psi_plus_change,
        weak,
        cook: None,
        warnings,
    })
}

/// Cook residuals `||Omega(t) - Omega(t_0) - psi_p(t) - int psi_in||_2` per
/// time of the attached Cook record.
pub fn cook_reconstruct(record: &ChannelRecord) -> Result<Vec<(f64, f64)>> {
    let cook = record
        .cook
        .as_ref()
        .ok_or_else(|| Error::Usage("record has no Cook expansion attached".into()))?;
    if cook.samples.len() != record.times.len()
        || cook.samples.iter().zip(&record.times).any(|(s, t)| !same_time(s.time, *t))
    {
        return usage("Cook samples do not match the record schedule");
    }
    if !same_time(cook.start, record.times[0]) {
        return usage("Cook expansion does not start at the first record time");
    }
    let omega0 = record.omega[0].to_position();
    record
        .omega
        .iter()
        .zip(&cook.samples)
        .map(|(o, s)| {
            let mut r = o.to_position().sub(&omega0)?;
            r.axpy(Complex64::new(-1.0, 0.0), &s.psi_p)?;
            r.axpy(Complex64::new(-1.0, 0.0), &s.interaction_integral)?;
            Ok((s.time, r.l2_norm()))
        })
        .collect()
}

/// Per-channel diagnostics of a charge-transfer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeChannelSample {
    pub time: f64,
    /// `||e^{itH0} psi(t) - psi(0) + i sum_j phi_j(t)||_2`
    pub duhamel_residual: f64,
    /// `R_jl(t) = (phi_j, phi_l)`, row-major.
    pub overlaps: Vec<Vec<[f64; 2]>>,
    /// `||psi_{w,eps,j}||_2^2`
    pub weak_mass: Vec<f64>,
    /// Mass-weighted center of `psi_{w,eps,j}` (minimal image around `t v_j`).
    pub weak_center: Vec<Vec<f64>>,
    /// `(e^{itP.v_j} psi_{w,eps,j}, |x| e^{itP.v_j} psi_{w,eps,j})`
    pub boosted_moment: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ChargeChannelRecord {
    pub velocities: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub samples: Vec<ChargeChannelSample>,
    /// `psi_{w,eps,j}(t)` per sample and channel.
    pub weak_parts: Vec<Vec<WaveFunction>>,
}

/// Charge-transfer channel split using the Duhamel integrals of a tracked
/// run. The channel dispersive parts are
/// `psi_{d,j} = e^{-itH0} (-i phi_j + r / N)` with `r` the quadrature
/// residual, so that they sum to `psi_d` exactly.
pub fn charge_channels(
    trajectory: &Trajectory,
    duhamel: &DuhamelRecord,
    params: &ProjectorParams,
    epsilon: f64,
    flow: &FreeFlow,
) -> Result<ChargeChannelRecord> {
    let initial = trajectory.initial.to_position();
    let n = duhamel.velocities.len();
    if n == 0 {
        return usage("Duhamel record has no movers");
    }
    if !same_time(duhamel.start, initial.time()) {
        return usage("Duhamel integrals must start at the initial time");
    }
    let results: Vec<Result<(ChargeChannelSample, Vec<WaveFunction>)>> = duhamel
        .times
        .par_iter()
        .zip(&duhamel.phi)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, phis)| {
            let t = *t;
            let state = trajectory
                .snapshot_at(t)
                .ok_or_else(|| Error::Usage(format!("no trajectory snapshot at t = {t}")))?;
            let elapsed = t - initial.time();
            let profile = flow.apply(&state.to_position(), -elapsed)?.to_position();
            let mut residual = profile.sub(&initial)?;
            for p in phis {
                residual.axpy(I, p)?;
            }
            let share = residual.scaled(Complex64::new(1.0 / n as f64, 0.0));
            let overlaps = phis
                .iter()
                .map(|a| {
                    phis.iter()
                        .map(|b| a.inner(b).map(|z| [z.re, z.im]))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let mut weak_mass = Vec::with_capacity(n);
            let mut weak_center = Vec::with_capacity(n);
            let mut boosted_moment = Vec::with_capacity(n);
            let mut parts = Vec::with_capacity(n);
            for (p, v) in phis.iter().zip(&duhamel.velocities) {
                let mut prof = share.clone();
                prof.axpy(-I, p)?;
                let psi_dj = flow.apply(&prof, elapsed)?.to_position().with_time(t);
                let w = weakly_localized(&psi_dj, t, params.alpha, epsilon, v, flow)?;
                let center: Vec<f64> = v.iter().map(|vi| vi * t).collect();
                weak_mass.push(w.mass());
                weak_center.push(if w.mass() > 0.0 { w.position_mean_near(&center) } else { center.clone() });
                boosted_moment.push(translate_boost(&w, v, t)?.x_moment(&MomentWeight::Abs)?);
                parts.push(w);
            }
            Ok((
                ChargeChannelSample {
                    time: t,
                    duhamel_residual: residual.l2_norm(),
                    overlaps,
                    weak_mass,
                    weak_center,
                    boosted_moment,
                },
                parts,
            ))
        })
        .collect();
    let mut samples = Vec::new();
    let mut weak_parts = Vec::new();
    for r in results {
        let (s, p) = r?;
        samples.push(s);
        weak_parts.push(p);
    }
    Ok(ChargeChannelRecord {
        velocities: duhamel.velocities.clone(),
        epsilon,
        samples,
        weak_parts,
    })
}

/// The weakly localized part `psi_{w,eps}(t)` of a single snapshot.
pub fn weak_part(
    state: &WaveFunction,
    initial: &WaveFunction,
    alpha: f64,
    epsilon: f64,
    flow: &FreeFlow,
) -> Result<WaveFunction> {
    let t = state.time();
    check_time(t)?;
    let psi_d = dispersive_remainder(state, initial, flow)?;
    weakly_localized(&psi_d, t, alpha, epsilon, &vec![0.0; state.grid().dims()], flow)
}

/// `e^{-itH0} Omega*(t) psi(0)`, the free part of `psi(t)`.
pub fn free_part(state: &WaveFunction, params: &ProjectorParams, flow: &FreeFlow) -> Result<WaveFunction> {
    let t = state.time();
    Ok(flow.apply(&omega_t(state, params, flow)?, t)?.with_time(t))
}
