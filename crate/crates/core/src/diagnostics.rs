//! Propagation observables, exponent fits, operator-norm estimates and the
//! velocity-bound, commutator and Morawetz scans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::RpresSeries;
use crate::cutoffs::{chi, cutoff_field, cutoff_time_derivative_field, CutoffKind, CutoffSpec, Scale, Variable};
use crate::error::{domain, usage, Error, Result};
use crate::field::{Grid, Representation, Space, WaveFunction};
use crate::phase_space::apply_sobolev_weight;
use crate::propagators::{shift_samples, FreeFlow};

/// A real expectation series `<B>_t` with its centered derivative.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Nonnegative part of the derivative, when the observable has one.
    pub c_p: Option<Vec<f64>>,
    /// `derivative - c_p`
    pub g: Option<Vec<f64>>,
    /// `int_{t_0}^t c_p`
    pub running_cp: Option<Vec<f64>>,
}

impl ObservableSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return usage("times and values differ in length");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return usage("series times must be strictly increasing");
        }
        let derivative = centered_derivative(&times, &values);
        Ok(Self {
            times,
            values,
            derivative,
            c_p: None,
            g: None,
            running_cp: None,
        })
    }

    /// Attaches a nonnegative part; `g` becomes `derivative - c_p`.
    pub fn with_cp(mut self, c_p: Vec<f64>) -> Result<Self> {
        if c_p.len() != self.times.len() {
            return usage("c_p series has the wrong length");
        }
        self.g = Some(self.derivative.iter().zip(&c_p).map(|(d, c)| d - c).collect());
        self.running_cp = Some(running_integral(&self.times, &c_p));
        self.c_p = Some(c_p);
        Ok(self)
    }

    /// Largest single-step decrease `max(v_k - v_{k+1}, 0)`.
    pub fn max_decrease(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    /// Builds the series tracked during a run (one sample per solver step).
    pub fn from_tracked(s: &RpresSeries) -> Result<Self> {
        Self::new(s.times.clone(), s.observable.clone())?.with_cp(s.c_p.clone())
    }
}

/// Centered differences in the interior, one-sided at the ends.
pub fn centered_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (i, j) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            (values[j] - values[i]) / (times[j] - times[i])
        })
        .collect()
}

/// Cumulative trapezoid.
pub fn running_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Observables for [`prob_series`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observable {
    Identity,
    /// Real multiplier cutoff in position or frequency space.
    Cutoff { spec: CutoffSpec },
    /// `F_c(|x - 2tP| / t^alpha <= 1) = e^{-itH0} F_c(|x|/t^alpha <= 1) e^{itH0}`
    MovingCutoff { alpha: f64 },
}

/// The state an observable is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evaluation {
    /// `psi(t)`
    Direct,
    /// `phi(t) = e^{itH0} <P>^a psi(t)`
    Relative { a: f64 },
}

fn evaluation_state(state: &WaveFunction, evaluation: Evaluation, flow: &FreeFlow) -> Result<WaveFunction> {
    match evaluation {
        Evaluation::Direct => Ok(state.to_position()),
        Evaluation::Relative { a } => {
            let t = state.time();
            let w = apply_sobolev_weight(state, a, 1.0)?;
            Ok(flow.apply(&w, -t)?.with_time(t).into_representation(Representation::Position))
        }
    }
}

fn observable_apply(obs: &Observable, phi: &WaveFunction, flow: &FreeFlow) -> Result<WaveFunction> {
    let t = phi.time();
    match obs {
        Observable::Identity => Ok(phi.clone()),
        Observable::Cutoff { spec } => phi.multiply(&cutoff_field(phi.grid(), spec, t)?, spec.space),
        Observable::MovingCutoff { alpha } => {
            let f = cutoff_field(phi.grid(), &CutoffSpec::position_leq(*alpha), t)?;
            flow.apply(&flow.apply(phi, -t)?.multiply(&f, Space::Position)?, t)
        }
    }
}

fn observable_derivative(obs: &Observable, phi: &WaveFunction, flow: &FreeFlow) -> Result<f64> {
    let t = phi.time();
    let (field, space, profile) = match obs {
        Observable::Identity => return usage("the identity observable has no time-derivative field"),
        Observable::Cutoff { spec } => (cutoff_time_derivative_field(phi.grid(), spec, t)?, spec.space, phi.clone()),
        Observable::MovingCutoff { alpha } => (
            cutoff_time_derivative_field(phi.grid(), &CutoffSpec::position_leq(*alpha), t)?,
            Space::Position,
            flow.apply(phi, -t)?,
        ),
    };
    let v = profile.to_representation(space);
    let dv = match space {
        Space::Position => v.grid().cell_volume(),
        Space::Frequency => v.grid().frequency_cell_volume(),
    };
    Ok(v.values().iter().zip(&field).map(|(z, f)| f * z.norm_sqr()).sum::<f64>() * dv)
}

fn real_expectation(phi: &WaveFunction, b_phi: &WaveFunction) -> Result<f64> {
    let z = phi.inner(&b_phi.to_representation(phi.representation()))?;
    if z.im.abs() > 1e-10 * z.norm().max(1.0) {
        return Err(Error::Consistency(format!(
            "expectation of a self-adjoint observable has imaginary part {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `<B>_t` over a sequence of states.
pub fn prob_series(
    states: &[WaveFunction],
    observable: &Observable,
    evaluation: Evaluation,
    flow: &FreeFlow,
) -> Result<ObservableSeries> {
    let values = states
        .par_iter()
        .map(|s| {
            let phi = evaluation_state(s, evaluation, flow)?;
            real_expectation(&phi, &observable_apply(observable, &phi, flow)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    ObservableSeries::new(states.iter().map(|s| s.time()).collect(), values)
}

/// Budget of a relative propagation estimate:
/// `int c_p <= sup <B> + ||g||_1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpresBudget {
    pub integral_cp: f64,
    pub sup_observable: f64,
    pub g_l1: f64,
    /// `<B>_T - <B>_{t_0} - int c_p`, the net remainder.
    pub g_net: f64,
    pub min_cp: f64,
    /// `int c_p - sup <B> - ||g||_1`, relative to the right-hand side.
    pub slack: f64,
    pub passes: bool,
}

impl RpresBudget {
    pub fn of(series: &ObservableSeries) -> Result<Self> {
        let (Some(c_p), Some(g), Some(run)) = (&series.c_p, &series.g, &series.running_cp) else {
            return usage("series has no c_p decomposition");
        };
        let integral_cp = *run.last().unwrap_or(&0.0);
        let sup_observable = series.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_g: Vec<f64> = g.iter().map(|v| v.abs()).collect();
        let g_l1 = *running_integral(&series.times, &abs_g).last().unwrap_or(&0.0);
        let rhs = sup_observable + g_l1;
        let slack = (integral_cp - rhs) / rhs.max(f64::MIN_POSITIVE);
        Ok(Self {
            integral_cp,
            sup_observable,
            g_l1,
            g_net: series.values.last().unwrap_or(&0.0) - series.values.first().unwrap_or(&0.0) - integral_cp,
            min_cp: c_p.iter().copied().fold(f64::INFINITY, f64::min),
            slack,
            passes: slack <= 1e-3,
        })
    }
}

/// Evaluates `c_p = (phi, d_t B phi)` directly from the derivative field
/// and splits the derivative of `series` into `c_p + g`.
pub fn rpres_decompose(
    series: &ObservableSeries,
    states: &[WaveFunction],
    observable: &Observable,
    evaluation: Evaluation,
    flow: &FreeFlow,
) -> Result<(ObservableSeries, RpresBudget)> {
    if states.len() != series.times.len() {
        return usage("states do not match the series");
    }
    let c_p = states
        .par_iter()
        .map(|s| observable_derivative(observable, &evaluation_state(s, evaluation, flow)?, flow))
        .collect::<Result<Vec<f64>>>()?;
    let out = series.clone().with_cp(c_p)?;
    let budget = RpresBudget::of(&out)?;
    Ok((out, budget))
}

/// Least-squares fit `log y = slope * log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub points: usize,
}

/// Log-log fit of `values` against `xs` over `window` (inclusive).
pub fn log_log_fit(xs: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    if xs.len() != values.len() {
        return usage("fit abscissae and values differ in length");
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(x, _)| **x >= window.0 * (1.0 - 1e-12) && **x <= window.1 * (1.0 + 1e-12))
        .map(|(x, y)| (*x, *y))
        .collect();
    if pts.len() < 5 {
        return usage(format!("fit window {window:?} holds {} points, need at least 5", pts.len()));
    }
    if let Some((x, y)) = pts.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return domain(format!("log-log fit needs positive data, got ({x}, {y})"));
    }
    let n = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return usage("fit window has a single abscissa");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    Ok(FitResult {
        slope,
        intercept,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual_rms: (rss / n).sqrt(),
        points: pts.len(),
    })
}

/// Fitted exponent of `values ~ t^slope` over `window`.
pub fn exponent_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    log_log_fit(times, values, window)
}

/// A bounded linear map on lattice fields (position samples).
pub trait LinearOperator: Sync {
    fn grid(&self) -> &Grid;
    fn apply(&self, v: &mut Vec<Complex64>);
    fn apply_adjoint(&self, v: &mut Vec<Complex64>);
}

#[derive(Clone, Debug)]
pub enum Stage {
    Position(Vec<Complex64>),
    Frequency(Vec<Complex64>),
    Scale(Complex64),
}

/// Composition of multipliers. Stages act in insertion order, so the
/// operator `F_2 F_1 e^{iaH0} <x>^-delta` is built as weight, flow, `F_1`, `F_2`.
#[derive(Clone, Debug)]
pub struct Pipeline {
    grid: Grid,
    stages: Vec<Stage>,
}

fn to_complex(field: &[f64]) -> Vec<Complex64> {
    field.iter().map(|v| Complex64::new(*v, 0.0)).collect()
}

impl Pipeline {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            stages: Vec::new(),
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.grid.len() {
            return usage(format!("multiplier of length {n} on a grid of {} points", self.grid.len()));
        }
        Ok(())
    }

    pub fn position(mut self, field: Vec<Complex64>) -> Result<Self> {
        self.check(field.len())?;
        self.stages.push(Stage::Position(field));
        Ok(self)
    }

    pub fn frequency(mut self, field: Vec<Complex64>) -> Result<Self> {
        self.check(field.len())?;
        self.stages.push(Stage::Frequency(field));
        Ok(self)
    }

    pub fn position_real(self, field: &[f64]) -> Result<Self> {
        self.position(to_complex(field))
    }

    pub fn frequency_real(self, field: &[f64]) -> Result<Self> {
        self.frequency(to_complex(field))
    }

    /// A cutoff sampled at time `t` in its own space.
    pub fn cutoff(self, spec: &CutoffSpec, t: f64) -> Result<Self> {
        let f = cutoff_field(&self.grid, spec, t)?;
        match spec.space {
            Space::Position => self.position_real(&f),
            Space::Frequency => self.frequency_real(&f),
        }
    }

    /// `e^{-i dt H0}`
    pub fn free_flow(self, flow: &FreeFlow, dt: f64) -> Result<Self> {
        if flow.grid() != &self.grid {
            return usage("free flow built for a different grid");
        }
        self.frequency(flow.phase(dt))
    }

    pub fn scale(mut self, c: Complex64) -> Self {
        self.stages.push(Stage::Scale(c));
        self
    }

    fn run(&self, v: &mut [Complex64], stage: &Stage, adjoint: bool) {
        let m = |z: &Complex64| if adjoint { z.conj() } else { *z };
        match stage {
            Stage::Position(f) => v.iter_mut().zip(f).for_each(|(a, b)| *a *= m(b)),
            Stage::Frequency(f) => {
                self.grid.forward_in_place(v);
                v.iter_mut().zip(f).for_each(|(a, b)| *a *= m(b));
                self.grid.inverse_in_place(v);
            }
            Stage::Scale(c) => {
                let c = m(c);
                v.iter_mut().for_each(|a| *a *= c);
            }
        }
    }

    /// Product of the stage sup norms, an upper bound for the operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::Position(f) | Stage::Frequency(f) => f.iter().fold(0.0f64, |m, z| m.max(z.norm())),
                Stage::Scale(c) => c.norm(),
            })
            .product()
    }
}

impl LinearOperator for Pipeline {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, v: &mut Vec<Complex64>) {
        for s in &self.stages {
            self.run(v, s, false);
        }
    }

    fn apply_adjoint(&self, v: &mut Vec<Complex64>) {
        for s in self.stages.iter().rev() {
            self.run(v, s, true);
        }
    }
}

/// `[A, B] = AB - BA`
pub struct Commutator<'a, A: LinearOperator, B: LinearOperator> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<A: LinearOperator, B: LinearOperator> LinearOperator for Commutator<'_, A, B> {
    fn grid(&self) -> &Grid {
        self.a.grid()
    }

    fn apply(&self, v: &mut Vec<Complex64>) {
        let mut ba = v.clone();
        self.b.apply(v);
        self.a.apply(v);
        self.a.apply(&mut ba);
        self.b.apply(&mut ba);
        v.iter_mut().zip(&ba).for_each(|(x, y)| *x -= y);
    }

    // [A, B]* = B*A* - A*B*
    fn apply_adjoint(&self, v: &mut Vec<Complex64>) {
        let mut ab = v.clone();
        self.a.apply_adjoint(v);
        self.b.apply_adjoint(v);
        self.b.apply_adjoint(&mut ab);
        self.a.apply_adjoint(&mut ab);
        v.iter_mut().zip(&ab).for_each(|(x, y)| *x -= y);
    }
}

/// Result of [`operator_norm_estimate`]; a lower bound for the norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub max_iterations: usize,
    /// Stop once the relative change of the estimate drops below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||A||` by power iteration on `A*A` from a seeded random start.
pub fn operator_norm_estimate(op: &dyn LinearOperator, settings: &PowerIteration) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut v: Vec<Complex64> = (0..op.grid().len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n0 = l2(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut prev = 0.0;
    for k in 1..=settings.max_iterations {
        let mut w = v.clone();
        op.apply(&mut w);
        let sigma = l2(&w);
        if sigma == 0.0 {
            return NormEstimate {
                value: 0.0,
                converged: true,
                iterations: k,
            };
        }
        if k > 1 && (sigma - prev).abs() <= settings.tolerance * sigma {
            return NormEstimate {
                value: sigma,
                converged: true,
                iterations: k,
            };
        }
        prev = sigma;
        op.apply_adjoint(&mut w);
        let nw = l2(&w);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|z| z / nw).collect();
    }
    NormEstimate {
        value: prev,
        converged: false,
        iterations: settings.max_iterations,
    }
}

/// Which family of velocity bounds a scan evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    /// `F_2(±x_j > s) F_1(±t^{1/2-eps} P_j > 1/50) e^{iaH0} <x_j>^-delta`
    Maximal,
    /// `F_2(±x_j > s) F_1(±t^{1/2-eps} P_j <= 1/50) e^{-ibH0} <x_j>^-delta`
    Minimal,
}

/// One cell of a velocity-bound operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityCell {
    pub kind: VelocityKind,
    pub t: f64,
    /// The flow time `a` (maximal) or `b` (minimal), positive.
    pub shift: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub axis: usize,
    /// `+1` or `-1`
    pub side: f64,
    /// Frame velocity; zero for the unboosted bounds.
    pub velocity: Vec<f64>,
}

impl VelocityCell {
    /// Signed flow time `tau` with the flow `e^{-i tau H0}`.
    fn tau(&self) -> f64 {
        match self.kind {
            VelocityKind::Maximal => -self.shift,
            VelocityKind::Minimal => self.shift,
        }
    }

    /// `t^{1/2+eps} + sqrt(shift)`
    pub fn decay_variable(&self) -> f64 {
        self.t.powf(0.5 + self.epsilon) + self.shift.sqrt()
    }

    pub fn pipeline(&self, flow: &FreeFlow) -> Result<Pipeline> {
        let grid = flow.grid();
        if self.axis >= grid.dims() || self.velocity.len() != grid.dims() {
            return usage("velocity cell axis or velocity does not match the grid");
        }
        if !(self.t > 0.0 && self.shift > 0.0 && self.epsilon > 0.0 && self.epsilon < 0.5) {
            return domain(format!(
                "velocity bounds need t, a > 0 and eps in (0, 1/2); got t = {}, a = {}, eps = {}",
                self.t, self.shift, self.epsilon
            ));
        }
        if self.kind == VelocityKind::Minimal && self.shift > self.t {
            return domain(format!("minimal velocity bound needs b <= t, got b = {}, t = {}", self.shift, self.t));
        }
        let j = self.axis;
        let v = self.velocity[j];
        let tau = self.tau();
        let center = v * self.t - tau * v;
        let ax = grid.axis(j);
        let delta = self.delta;
        let weight = grid.position_field(|x| {
            let y = ax.wrap_position(x[j] - center);
            (1.0 + y * y).powf(-0.5 * delta)
        });
        let momentum = CutoffSpec {
            kind: match self.kind {
                VelocityKind::Maximal => CutoffKind::F1Gt,
                VelocityKind::Minimal => CutoffKind::F1BarLeq,
            },
            scale: Scale::Fixed {
                value: self.t.powf(-(0.5 - self.epsilon)) / 50.0,
            },
            variable: Variable::Axis {
                axis: j,
                sign: self.side,
                shift: 0.5 * v,
                drift: 0.0,
            },
            space: Space::Frequency,
        };
        let position = CutoffSpec {
            kind: CutoffKind::F2Gt,
            scale: Scale::Fixed {
                value: self.t.powf(0.5 + self.epsilon),
            },
            variable: Variable::Axis {
                axis: j,
                sign: self.side,
                shift: v * self.t,
                drift: 0.0,
            },
            space: Space::Position,
        };
        Pipeline::new(grid)
            .position_real(&weight)?
            .free_flow(flow, tau)?
            .cutoff(&momentum, self.t)?
            .cutoff(&position, self.t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityRow {
    pub t: f64,
    pub shift: f64,
    pub decay_variable: f64,
    pub norm: f64,
    pub converged: bool,
}

/// Norm estimates of a velocity-bound operator over a `(t, shift)` table.
pub fn velocity_bound_scan(
    flow: &FreeFlow,
    template: &VelocityCell,
    times: &[f64],
    shifts: &[f64],
    settings: &PowerIteration,
) -> Result<Vec<VelocityRow>> {
    let cells: Vec<(f64, f64)> = times
        .iter()
        .flat_map(|t| shifts.iter().map(move |a| (*t, *a)))
        .collect();
    cells
        .par_iter()
        .map(|(t, a)| {
            let cell = VelocityCell {
                t: *t,
                shift: *a,
                ..template.clone()
            };
            let est = operator_norm_estimate(&cell.pipeline(flow)?, settings);
            Ok(VelocityRow {
                t: *t,
                shift: *a,
                decay_variable: cell.decay_variable(),
                norm: est.value,
                converged: est.converged,
            })
        })
        .collect()
}

/// Checks the Galilean covariance of a boosted velocity-bound operator:
/// returns `max ||G A psi - e^{-i tau k0^2} B T_{-tau v} G psi|| / ||psi||`
/// over `samples` random band-limited fields, with `A` the unboosted and `B`
/// the boosted operator, `G = T_{tv} e^{i k0 x}` and `k0 = v / 2`.
/// The shifts `t v`, `tau v` must be lattice vectors and `k0` a lattice
/// momentum.
pub fn boost_equivalence_residual(flow: &FreeFlow, cell: &VelocityCell, samples: usize, seed: u64) -> Result<f64> {
    let grid = flow.grid();
    let tau = cell.tau();
    let v = &cell.velocity;
    let x0: Vec<f64> = v.iter().map(|c| c * cell.t).collect();
    let back: Vec<f64> = v.iter().map(|c| -tau * c).collect();
    let k0: Vec<f64> = v.iter().map(|c| 0.5 * c).collect();
    for (d, ax) in grid.axes().iter().enumerate() {
        let on = |s: f64, h: f64| ((s / h) - (s / h).round()).abs() < 1e-9;
        if !on(x0[d], ax.spacing()) || !on(back[d], ax.spacing()) || !on(k0[d], ax.frequency_spacing()) {
            return usage("boost shifts must be lattice vectors and v/2 a lattice momentum");
        }
    }
    let unboosted = VelocityCell {
        velocity: vec![0.0; grid.dims()],
        ..cell.clone()
    }
    .pipeline(flow)?;
    let boosted = cell.pipeline(flow)?;
    let kick = grid.position_field(|x| Complex64::from_polar(1.0, x.iter().zip(&k0).map(|(a, b)| a * b).sum()));
    let galilei = |f: &[Complex64]| {
        let m: Vec<Complex64> = f.iter().zip(&kick).map(|(a, b)| a * b).collect();
        shift_samples(grid, &m, &x0)
    };
    let phase = Complex64::from_polar(1.0, -tau * k0.iter().map(|k| k * k).sum::<f64>());
    let band: Vec<f64> = grid.frequency_field(|k| {
        let inside = k
            .iter()
            .zip(grid.axes())
            .all(|(kk, a)| kk.abs() < 0.5 * a.nyquist());
        if inside {
            1.0
        } else {
            0.0
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut psi: Vec<Complex64> = band
            .iter()
            .map(|b| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * b)
            .collect();
        grid.inverse_in_place(&mut psi);
        let mut lhs = psi.clone();
        unboosted.apply(&mut lhs);
        let lhs = galilei(&lhs);
        let mut rhs = shift_samples(grid, &galilei(&psi), &back);
        boosted.apply(&mut rhs);
        let err = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err / l2(&psi));
    }
    Ok(worst)
}

/// Momentum profile of a commutator scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumProfile {
    /// `F_1(t^b |P| > 1)`
    Cutoff,
    /// `f = 1`
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorRow {
    pub t: f64,
    pub norm: f64,
    pub converged: bool,
}

/// `||[F_c(|x|/t^alpha <= 1), f(t^b |P|)]||` for each `t`.
pub fn commutator_scan(
    grid: &Grid,
    profile: MomentumProfile,
    times: &[f64],
    alpha: f64,
    b: f64,
    settings: &PowerIteration,
) -> Result<Vec<CommutatorRow>> {
    if alpha < b {
        return domain(format!("commutator scan needs alpha >= b, got alpha = {alpha}, b = {b}"));
    }
    times
        .par_iter()
        .map(|t| {
            let h = Pipeline::new(grid).cutoff(&CutoffSpec::position_leq(alpha), *t)?;
            let f = match profile {
                MomentumProfile::Cutoff => Pipeline::new(grid).cutoff(&CutoffSpec::momentum_gt(b), *t)?,
                MomentumProfile::One => Pipeline::new(grid),
            };
            let est = operator_norm_estimate(&Commutator { a: &h, b: &f }, settings);
            Ok(CommutatorRow {
                t: *t,
                norm: est.value,
                converged: est.converged,
            })
        })
        .collect()
}

/// The smoothed radial field: `x/|x|` for `|x| >= r`, and
/// `x/r (3/2 - |x|^2 / 2r^2)` inside, which is C^1 across `|x| = r`.
pub fn smoothed_radial_field(grid: &Grid, radius: f64) -> Vec<Vec<f64>> {
    (0..grid.dims())
        .map(|d| {
            grid.position_field(|x| {
                let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if rho >= radius {
                    x[d] / rho
                } else {
                    x[d] / radius * (1.5 - rho * rho / (2.0 * radius * radius))
                }
            })
        })
        .collect()
}

/// Expectation of `F A_g F` with `A_g = (g.P + P.g) / 2` (the self-adjoint
/// form of `(g.grad + grad.g) / 2i`) and `F = F_1(|x|/t^alpha >= 1)`.
pub fn morawetz_expectation(state: &WaveFunction, alpha: f64, radius: f64) -> Result<f64> {
    let t = state.time();
    let grid = state.grid();
    let exterior = grid.position_field(|x| chi(x.iter().map(|v| v * v).sum::<f64>().sqrt() / t.powf(alpha)));
    let u = state.to_position().multiply(&exterior, Space::Position)?;
    let g = smoothed_radial_field(grid, radius);
    let mut total = Complex64::new(0.0, 0.0);
    for (d, gd) in g.iter().enumerate() {
        let p = |f: &WaveFunction| {
            f.multiply(&grid.frequency_field(|k| Complex64::new(k[d], 0.0)), Space::Frequency)
                .map(|w| w.into_representation(Representation::Position))
        };
        // (u, g P u) + (u, P g u)
        let gpu = p(&u)?.multiply(gd, Space::Position)?;
        let pgu = p(&u.multiply(gd, Space::Position)?)?;
        total += u.inner(&gpu)? + u.inner(&pgu)?;
    }
    let z = 0.5 * total;
    if z.im.abs() > 1e-10 * z.norm().max(u.mass()).max(1e-300) {
        return Err(Error::Consistency(format!(
            "Morawetz expectation has imaginary part {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Morawetz expectations over a sequence of states.
pub fn morawetz_series(states: &[WaveFunction], alpha: f64, radius: f64) -> Result<ObservableSeries> {
    let values = states
        .par_iter()
        .map(|s| morawetz_expectation(s, alpha, radius))
        .collect::<Result<Vec<f64>>>()?;
    ObservableSeries::new(states.iter().map(|s| s.time()).collect(), values)
}
