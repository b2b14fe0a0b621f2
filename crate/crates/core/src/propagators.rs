//! Free flow, interactions and the split-step solver.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::field::{Grid, NormSpec, Representation, WaveFunction};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type SymbolFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type PotentialFn = dyn Fn(&[f64], f64) -> Complex64 + Send + Sync;

/// Dispersion symbol `omega(k)` generating the free flow `exp(-i t omega(P))`.
#[derive(Clone, Default)]
pub enum Dispersion {
    /// `omega(k) = |k|^2`
    #[default]
    Laplacian,
    Custom(Arc<SymbolFn>),
}

impl fmt::Debug for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dispersion::Laplacian => f.write_str("Laplacian"),
            Dispersion::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Dispersion {
    pub fn custom(symbol: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Dispersion::Custom(Arc::new(symbol))
    }

    /// Samples the symbol on the frequency lattice, checking it is finite and
    /// even.
    pub fn symbol_field(&self, grid: &Grid) -> Result<Vec<f64>> {
        let f = match self {
            Dispersion::Laplacian => return Ok(grid.frequency_squared()),
            Dispersion::Custom(f) => f,
        };
        let field = grid.frequency_field(|k| f(k));
        let neg = grid.frequency_field(|k| {
            let m: Vec<f64> = k.iter().map(|v| -v).collect();
            f(&m)
        });
        for (w, wm) in field.iter().zip(&neg) {
            if !w.is_finite() {
                return Err(Error::Config("dispersion symbol is not finite on the lattice".into()));
            }
            if (w - wm).abs() > 1e-12 * w.abs().max(1.0) {
                return Err(Error::Config("dispersion symbol is not even in k".into()));
            }
        }
        Ok(field)
    }
}

/// Free propagator with the dispersion symbol sampled once.
#[derive(Clone, Debug)]
pub struct FreeFlow {
    grid: Grid,
    symbol: Arc<Vec<f64>>,
}

impl FreeFlow {
    pub fn new(grid: &Grid, dispersion: &Dispersion) -> Result<Self> {
        Ok(Self {
            grid: grid.clone(),
            symbol: Arc::new(dispersion.symbol_field(grid)?),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// `exp(-i dt omega(k))`.
    pub fn phase(&self, dt: f64) -> Vec<Complex64> {
        self.symbol
            .iter()
            .map(|w| Complex64::from_polar(1.0, -dt * w))
            .collect()
    }

    /// `exp(-i dt H_0) state`, advancing the time stamp by `dt`. The result
    /// is in the representation of the input.
    pub fn apply(&self, state: &WaveFunction, dt: f64) -> Result<WaveFunction> {
        if state.grid() != &self.grid {
            return usage("free flow built for a different grid");
        }
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let t = state.time();
        Ok(state
            .multiply(&self.phase(dt), Representation::Frequency)?
            .with_time(t + dt))
    }
}

/// `exp(-i dt H_0) state`; negative `dt` runs the flow backwards.
pub fn free_flow(state: &WaveFunction, dt: f64, dispersion: &Dispersion) -> Result<WaveFunction> {
    FreeFlow::new(state.grid(), dispersion)?.apply(state, dt)
}

/// Samples of `f(x - s)` given samples of `f` on the position lattice. Uses
/// a circular shift when `s` is a lattice vector, a spectral phase otherwise.
pub(crate) fn shift_samples(grid: &Grid, values: &[Complex64], s: &[f64]) -> Vec<Complex64> {
    if s.iter().all(|v| *v == 0.0) {
        return values.to_vec();
    }
    let steps: Vec<f64> = s
        .iter()
        .zip(grid.axes())
        .map(|(v, a)| v / a.spacing())
        .collect();
    if steps.iter().all(|m| (m - m.round()).abs() < 1e-9) {
        let shape = grid.shape();
        let strides = grid.strides().to_vec();
        let offs: Vec<usize> = steps
            .iter()
            .zip(&shape)
            .map(|(m, n)| (m.round() as i64).rem_euclid(*n as i64) as usize)
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        let mut idx = [0usize; 3];
        for (flat, v) in values.iter().enumerate() {
            grid.unravel(flat, &mut idx[..shape.len()]);
            let target: usize = (0..shape.len())
                .map(|d| ((idx[d] + offs[d]) % shape[d]) * strides[d])
                .sum();
            out[target] = *v;
        }
        return out;
    }
    let mut data = values.to_vec();
    grid.forward_in_place(&mut data);
    let phase = grid.frequency_field(|k| {
        let ks: f64 = k.iter().zip(s).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, -ks)
    });
    data.iter_mut().zip(&phase).for_each(|(z, p)| *z *= p);
    grid.inverse_in_place(&mut data);
    data
}

/// `exp(i t v.P) state`, i.e. `psi(x) -> psi(x + t v)`.
pub fn translate_boost(state: &WaveFunction, velocity: &[f64], t: f64) -> Result<WaveFunction> {
    if velocity.len() != state.grid().dims() {
        return usage("boost velocity has the wrong dimension");
    }
    let s: Vec<f64> = velocity.iter().map(|v| -t * v).collect();
    let pos = state.to_position();
    let shifted = shift_samples(state.grid(), pos.values(), &s);
    Ok(pos
        .with_values(shifted)
        .into_representation(state.representation()))
}

/// A multiplicative potential `V(x, t)`.
#[derive(Clone)]
pub enum Potential {
    /// Static samples on a grid.
    Sampled {
        grid: Grid,
        values: Arc<Vec<Complex64>>,
    },
    Function {
        f: Arc<PotentialFn>,
        time_dependent: bool,
        real: bool,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Sampled { grid, .. } => write!(f, "Sampled({grid:?})"),
            Potential::Function { time_dependent, real, .. } => {
                write!(f, "Function(time_dependent: {time_dependent}, real: {real})")
            }
        }
    }
}

impl Potential {
    pub fn sampled(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return usage("potential samples do not match the grid");
        }
        Ok(Potential::Sampled {
            grid: grid.clone(),
            values: Arc::new(values),
        })
    }

    /// Static real potential given as a function of position.
    pub fn real(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Function {
            f: Arc::new(move |x, _| Complex64::new(f(x), 0.0)),
            time_dependent: false,
            real: true,
        }
    }

    /// General `V(x, t)`; `real` promises the imaginary part vanishes.
    pub fn function(
        f: impl Fn(&[f64], f64) -> Complex64 + Send + Sync + 'static,
        time_dependent: bool,
        real: bool,
    ) -> Self {
        Potential::Function {
            f: Arc::new(f),
            time_dependent,
            real,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Potential::Function { time_dependent: true, .. })
    }

    pub fn is_real(&self) -> bool {
        match self {
            Potential::Sampled { values, .. } => values.iter().all(|z| z.im == 0.0),
            Potential::Function { real, .. } => *real,
        }
    }

    pub fn field(&self, grid: &Grid, t: f64) -> Result<Vec<Complex64>> {
        self.shifted_field(grid, t, &vec![0.0; grid.dims()])
    }

    /// `V(x - s, t)` on the position lattice.
    pub fn shifted_field(&self, grid: &Grid, t: f64, s: &[f64]) -> Result<Vec<Complex64>> {
        match self {
            Potential::Sampled { grid: g, values } => {
                if g != grid {
                    return usage("sampled potential lives on a different grid");
                }
                let mut out = shift_samples(grid, values, s);
                if self.is_real() {
                    out.iter_mut().for_each(|z| z.im = 0.0);
                }
                Ok(out)
            }
            Potential::Function { f, real, .. } => {
                let axes = grid.axes().to_vec();
                let mut y = vec![0.0; axes.len()];
                Ok(grid.position_field(|x| {
                    for d in 0..axes.len() {
                        y[d] = axes[d].wrap_position(x[d] - s[d]);
                    }
                    let v = f(&y, t);
                    if *real {
                        Complex64::new(v.re, 0.0)
                    } else {
                        v
                    }
                }))
            }
        }
    }
}

/// One moving bump of a charge-transfer potential.
#[derive(Clone, Debug)]
pub struct Mover {
    pub potential: Potential,
    pub velocity: Vec<f64>,
}

/// The interaction `N(x, t, psi) = W(x, t, |psi|) psi`.
#[derive(Clone, Debug)]
pub enum Interaction {
    Free,
    Localized {
        potential: Potential,
        decay: f64,
        /// `max <x>^decay |V|` at construction.
        weighted_sup: f64,
    },
    /// `sum_j V_j(x - t v_j, t)`
    ChargeTransfer { movers: Vec<Mover> },
    /// `c |psi|^m`
    Power { coefficient: Complex64, exponent: f64 },
    /// `sign (K * |psi|^2)`; the kernel is stored in lattice-offset order,
    /// premultiplied by the cell volume.
    Hartree {
        grid: Grid,
        kernel: Arc<Vec<Complex64>>,
        sign: f64,
    },
    Sum(Vec<Interaction>),
}

impl Interaction {
    /// Localized potential with decay tag `delta`. Rejects potentials whose
    /// weighted profile `<x>^delta |V|` peaks in the outer shell of the box.
    pub fn localized(grid: &Grid, potential: Potential, decay: f64) -> Result<Self> {
        let v = potential.field(grid, 1.0)?;
        let axes = grid.axes().to_vec();
        let weight = grid.position_field(|x| {
            let r2: f64 = x.iter().map(|a| a * a).sum();
            let shell = x.iter().zip(&axes).any(|(a, ax)| a.abs() > 0.9 * ax.half_length);
            ((1.0 + r2).powf(0.5 * decay), shell)
        });
        let (mut inner, mut outer) = (0.0f64, 0.0f64);
        for (z, (w, shell)) in v.iter().zip(&weight) {
            let m = z.norm() * w;
            if !m.is_finite() {
                return Err(Error::Config("potential is not finite on the grid".into()));
            }
            if *shell {
                outer = outer.max(m);
            } else {
                inner = inner.max(m);
            }
        }
        if outer > 1.01 * inner {
            return Err(Error::Config(format!(
                "<x>^{decay} |V| grows toward the box edge ({outer:.3e} vs {inner:.3e}); \
                 the decay tag does not hold"
            )));
        }
        Ok(Interaction::Localized {
            potential,
            decay,
            weighted_sup: inner.max(outer),
        })
    }

    pub fn charge_transfer(movers: Vec<Mover>) -> Result<Self> {
        if movers.is_empty() {
            return Err(Error::Config("charge transfer needs at least one mover".into()));
        }
        let dims = movers[0].velocity.len();
        for (j, m) in movers.iter().enumerate() {
            if m.velocity.len() != dims {
                return Err(Error::Config(format!("mover {j} velocity has the wrong dimension")));
            }
            for (l, o) in movers.iter().enumerate().skip(j + 1) {
                if m.velocity == o.velocity {
                    return Err(Error::Config(format!(
                        "movers {j} and {l} share the velocity {:?}",
                        m.velocity
                    )));
                }
            }
        }
        Ok(Interaction::ChargeTransfer { movers })
    }

    pub fn power(coefficient: Complex64, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) {
            return Err(Error::Config(format!("power exponent must be positive, got {exponent}")));
        }
        Ok(Interaction::Power {
            coefficient,
            exponent,
        })
    }

    /// Hartree term with kernel `K(x)`, sampled at the lattice offsets.
    pub fn hartree(grid: &Grid, kernel: impl Fn(&[f64]) -> f64, sign: f64) -> Result<Self> {
        let axes = grid.axes().to_vec();
        let dv = grid.cell_volume();
        let mut y = vec![0.0; axes.len()];
        let k = grid.position_field(|x| {
            for d in 0..axes.len() {
                y[d] = axes[d].wrap_position(x[d] + axes[d].half_length);
            }
            Complex64::new(kernel(&y) * dv, 0.0)
        });
        if k.iter().any(|z| !z.re.is_finite()) {
            return Err(Error::Config("Hartree kernel is not finite on the lattice".into()));
        }
        Ok(Interaction::Hartree {
            grid: grid.clone(),
            kernel: Arc::new(k),
            sign,
        })
    }

    pub fn is_free(&self) -> bool {
        match self {
            Interaction::Free => true,
            Interaction::Sum(parts) => parts.iter().all(Self::is_free),
            _ => false,
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        match self {
            Interaction::Power { .. } | Interaction::Hartree { .. } => true,
            Interaction::Sum(parts) => parts.iter().any(Self::is_state_dependent),
            _ => false,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            Interaction::Localized { potential, .. } => potential.is_time_dependent(),
            Interaction::ChargeTransfer { .. } => true,
            Interaction::Sum(parts) => parts.iter().any(Self::is_time_dependent),
            _ => false,
        }
    }

    /// Whether `W` is real, so that every potential substep is unitary.
    pub fn is_real(&self) -> bool {
        match self {
            Interaction::Free => true,
            Interaction::Localized { potential, .. } => potential.is_real(),
            Interaction::ChargeTransfer { movers } => movers.iter().all(|m| m.potential.is_real()),
            Interaction::Power { coefficient, .. } => coefficient.im == 0.0,
            Interaction::Hartree { kernel, .. } => kernel.iter().all(|z| z.im == 0.0),
            Interaction::Sum(parts) => parts.iter().all(Self::is_real),
        }
    }

    /// The movers' fields `V_j(x - t v_j, t)`; empty for other variants.
    pub fn mover_fields(&self, grid: &Grid, t: f64) -> Result<Vec<Vec<Complex64>>> {
        match self {
            Interaction::ChargeTransfer { movers } => movers
                .iter()
                .map(|m| {
                    let s: Vec<f64> = m.velocity.iter().map(|v| v * t).collect();
                    m.potential.shifted_field(grid, t, &s)
                })
                .collect(),
            _ => Ok(Vec::new()),
        }
    }

    fn accumulate(&self, state: &WaveFunction, t: f64, out: &mut [Complex64]) -> Result<()> {
        let grid = state.grid();
        match self {
            Interaction::Free => {}
            Interaction::Localized { potential, .. } => {
                for (o, v) in out.iter_mut().zip(potential.field(grid, t)?) {
                    *o += v;
                }
            }
            Interaction::ChargeTransfer { .. } => {
                for f in self.mover_fields(grid, t)? {
                    for (o, v) in out.iter_mut().zip(f) {
                        *o += v;
                    }
                }
            }
            Interaction::Power {
                coefficient,
                exponent,
            } => {
                for (o, z) in out.iter_mut().zip(state.values()) {
                    *o += coefficient * z.norm().powf(*exponent);
                }
            }
            Interaction::Hartree {
                grid: g,
                kernel,
                sign,
            } => {
                if g != grid {
                    return usage("Hartree kernel was sampled on a different grid");
                }
                let rho: Vec<Complex64> = state
                    .values()
                    .iter()
                    .map(|z| Complex64::new(z.norm_sqr(), 0.0))
                    .collect();
                let conv = grid.circular_convolution(kernel, &rho);
                let real = kernel.iter().all(|z| z.im == 0.0);
                for (o, c) in out.iter_mut().zip(conv) {
                    *o += *sign * if real { Complex64::new(c.re, 0.0) } else { c };
                }
            }
            Interaction::Sum(parts) => {
                for p in parts {
                    p.accumulate(state, t, out)?;
                }
            }
        }
        Ok(())
    }

    /// The multiplicative field `W` with `N(psi) = W psi` at time `t`.
    pub fn eval(&self, state: &WaveFunction, t: f64) -> Result<Vec<Complex64>> {
        if state.representation() != Representation::Position {
            return usage("interaction evaluated on a state in frequency representation");
        }
        let mut out = vec![Complex64::new(0.0, 0.0); state.grid().len()];
        self.accumulate(state, t, &mut out)?;
        Ok(out)
    }
}

/// Free-function form of [`Interaction::eval`].
pub fn interaction_eval(
    interaction: &Interaction,
    state: &WaveFunction,
    t: f64,
) -> Result<Vec<Complex64>> {
    interaction.eval(state, t)
}

/// `exp(-i h W)` for a possibly complex `W`.
fn potential_phase(w: &[Complex64], h: f64) -> Vec<Complex64> {
    w.iter().map(|v| (-I * h * v).exp()).collect()
}

/// One Strang step: half potential phase, full free flow, half potential
/// phase, with `W` sampled at the midpoint time. Returns a position-space
/// state stamped `t + dt`.
pub fn strang_step(
    state: &WaveFunction,
    interaction: &Interaction,
    dt: f64,
    dispersion: &Dispersion,
) -> Result<WaveFunction> {
    let flow = FreeFlow::new(state.grid(), dispersion)?;
    Stepper::new(flow, interaction, true).step(state.to_position(), dt)
}

/// Split-step integrator with cached phases.
pub struct Stepper<'a> {
    flow: FreeFlow,
    interaction: &'a Interaction,
    midpoint: bool,
    kinetic: Option<(f64, Vec<Complex64>)>,
    static_half: Option<(f64, Vec<Complex64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(flow: FreeFlow, interaction: &'a Interaction, midpoint: bool) -> Self {
        Self {
            flow,
            interaction,
            midpoint,
            kinetic: None,
            static_half: None,
        }
    }

    fn half_phase(&mut self, state: &WaveFunction, t: f64, dt: f64) -> Result<Vec<Complex64>> {
        let cacheable = !self.interaction.is_state_dependent() && !self.interaction.is_time_dependent();
        if cacheable {
            if let Some((h, p)) = &self.static_half {
                if *h == dt {
                    return Ok(p.clone());
                }
            }
        }
        let w = self.interaction.eval(state, t)?;
        let p = potential_phase(&w, 0.5 * dt);
        if cacheable {
            self.static_half = Some((dt, p.clone()));
        }
        Ok(p)
    }

    /// Advances a position-space state by `dt`.
    pub fn step(&mut self, state: WaveFunction, dt: f64) -> Result<WaveFunction> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("step size must be positive, got {dt}")));
        }
        if state.representation() != Representation::Position {
            return usage("stepper expects a position-space state");
        }
        let t = state.time();
        let tw = if self.midpoint { t + 0.5 * dt } else { t };
        let free = self.interaction.is_free();
        let mut s = state;
        let first = if free {
            None
        } else {
            Some(self.half_phase(&s, tw, dt)?)
        };
        if let Some(p) = &first {
            s.values_mut().iter_mut().zip(p).for_each(|(z, q)| *z *= q);
        }
        if !matches!(&self.kinetic, Some((h, _)) if *h == dt) {
            self.kinetic = Some((dt, self.flow.phase(dt)));
        }
        let kin = &self.kinetic.as_ref().expect("kinetic phase cached").1;
        let grid = s.grid().clone();
        grid.forward_in_place(s.values_mut());
        s.values_mut().iter_mut().zip(kin).for_each(|(z, q)| *z *= q);
        grid.inverse_in_place(s.values_mut());
        if let Some(p) = first {
            let second = if self.interaction.is_state_dependent() {
                self.half_phase(&s, tw, dt)?
            } else {
                p
            };
            s.values_mut().iter_mut().zip(&second).for_each(|(z, q)| *z *= q);
        }
        Ok(s.with_time(t + dt))
    }
}

/// Solver settings for [`evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStepConfig {
    pub dt: f64,
    /// Observation times, strictly increasing.
    pub schedule: Vec<f64>,
    #[serde(default = "default_true")]
    pub midpoint: bool,
    /// Abort when the outer-shell mass fraction exceeds this.
    #[serde(default = "default_boundary_threshold")]
    pub boundary_threshold: f64,
    /// Steps between boundary checks (snapshots are always checked).
    #[serde(default = "default_monitor_every")]
    pub monitor_every: usize,
    /// Order `a` of the logged Sobolev norm.
    #[serde(default = "default_sobolev_order")]
    pub sobolev_order: f64,
    /// Warn when the Sobolev norm exceeds this multiple of its initial value.
    #[serde(default = "default_growth_warning")]
    pub growth_warning: f64,
}

fn default_true() -> bool {
    true
}
fn default_boundary_threshold() -> f64 {
    1e-4
}
fn default_monitor_every() -> usize {
    100
}
fn default_sobolev_order() -> f64 {
    1.0
}
fn default_growth_warning() -> f64 {
    2.0
}

/// `{t0, 2 t0, 4 t0, ...}` up to and including `t_max` (appended if it is
/// not itself on the dyadic ladder).
pub fn dyadic_schedule(t0: f64, t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = t0;
    while t <= t_max * (1.0 + 1e-12) {
        out.push(t);
        t *= 2.0;
    }
    if out.last().is_none_or(|l| (l - t_max).abs() > 1e-12 * t_max) {
        out.push(t_max);
    }
    out
}

impl SplitStepConfig {
    pub fn new(dt: f64, schedule: Vec<f64>) -> Result<Self> {
        let c = Self {
            dt,
            schedule,
            midpoint: true,
            boundary_threshold: default_boundary_threshold(),
            monitor_every: default_monitor_every(),
            sobolev_order: default_sobolev_order(),
            growth_warning: default_growth_warning(),
        };
        c.validate()?;
        Ok(c)
    }

    /// Dyadic observation times `1, 2, 4, ..., t_max`.
    pub fn dyadic(dt: f64, t_max: f64) -> Result<Self> {
        Self::new(dt, dyadic_schedule(1.0, t_max))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.schedule.is_empty() {
            return Err(Error::Config("empty observation schedule".into()));
        }
        if self.schedule.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("schedule times must be finite and non-negative".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("schedule times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Receives the solver state after every step (and once at the start).
pub trait StepObserver {
    fn observe(&mut self, state: &WaveFunction) -> Result<()>;
}

impl StepObserver for () {
    fn observe(&mut self, _: &WaveFunction) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverLogEntry {
    pub time: f64,
    pub l2: f64,
    pub ha: f64,
    pub drift: f64,
    pub boundary_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    Aborted { time: f64, boundary_mass: f64 },
}

/// Snapshots of `U(t, t0) psi0` on an observation schedule.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: WaveFunction,
    pub snapshots: Vec<WaveFunction>,
    pub final_state: WaveFunction,
    pub dt: f64,
    pub steps: usize,
    pub log: Vec<SolverLogEntry>,
    pub status: TrajectoryStatus,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.status == TrajectoryStatus::Completed
    }

    /// Snapshot stamped `t` (to relative precision 1e-9).
    pub fn snapshot_at(&self, t: f64) -> Option<&WaveFunction> {
        self.snapshots
            .iter()
            .find(|s| (s.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Writes the solver log as CSV.
    pub fn write_log_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,l2,ha,drift,boundary_mass")?;
        for e in &self.log {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                e.time, e.l2, e.ha, e.drift, e.boundary_mass
            )?;
        }
        Ok(())
    }
}

/// Evolves `psi0` to `t_final` with snapshots at the configured schedule.
pub fn evolve(
    psi0: &WaveFunction,
    interaction: &Interaction,
    dispersion: &Dispersion,
    config: &SplitStepConfig,
    t_final: f64,
) -> Result<Trajectory> {
    evolve_observed(psi0, interaction, dispersion, config, t_final, &mut ())
}

/// [`evolve`] with an observer that sees every solver step.
pub fn evolve_observed(
    psi0: &WaveFunction,
    interaction: &Interaction,
    dispersion: &Dispersion,
    config: &SplitStepConfig,
    t_final: f64,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    config.validate()?;
    let t0 = psi0.time();
    let last = *config.schedule.last().expect("validated schedule");
    if t_final < last {
        return Err(Error::Config(format!(
            "final time {t_final} precedes the last observation time {last}"
        )));
    }
    if config.schedule[0] < t0 {
        return Err(Error::Config(format!(
            "observation time {} precedes the initial time {t0}",
            config.schedule[0]
        )));
    }
    let flow = FreeFlow::new(psi0.grid(), dispersion)?;
    let mut stepper = Stepper::new(flow, interaction, config.midpoint);

    let mut landmarks: Vec<(f64, bool)> = config.schedule.iter().map(|t| (*t, true)).collect();
    if t_final > last {
        landmarks.push((t_final, false));
    }

    let l2_0 = psi0.l2_norm();
    let ha_0 = psi0.norm(NormSpec::Ha(config.sobolev_order))?;
    let mut warnings = Vec::new();
    let mut warned_growth = false;
    let mut log = Vec::new();
    let mut snapshots = Vec::new();
    let mut steps = 0usize;
    let mut status = TrajectoryStatus::Completed;

    let mut state = psi0.to_position();
    observer.observe(&state)?;

    'outer: for (target, is_snapshot) in landmarks {
        let span = target - state.time();
        if span > 0.0 {
            let n = ((span / config.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for i in 0..n {
                state = stepper.step(state, h)?;
                if i + 1 == n {
                    state = state.with_time(target);
                }
                steps += 1;
                observer.observe(&state)?;
                if steps.is_multiple_of(config.monitor_every) {
                    let b = state.boundary_mass_fraction();
                    if b > config.boundary_threshold {
                        status = TrajectoryStatus::Aborted {
                            time: state.time(),
                            boundary_mass: b,
                        };
                        break 'outer;
                    }
                }
            }
        }
        if is_snapshot {
            let l2 = state.l2_norm();
            let ha = state.norm(NormSpec::Ha(config.sobolev_order))?;
            let boundary_mass = state.boundary_mass_fraction();
            log.push(SolverLogEntry {
                time: state.time(),
                l2,
                ha,
                drift: l2 - l2_0,
                boundary_mass,
            });
            if !warned_growth && ha > config.growth_warning * ha_0 {
                let msg = format!(
                    "Sobolev norm grew by a factor {:.3} by t = {}",
                    ha / ha_0,
                    state.time()
                );
                log::warn!("{msg}");
                warnings.push(msg);
                warned_growth = true;
            }
            if boundary_mass > config.boundary_threshold {
                status = TrajectoryStatus::Aborted {
                    time: state.time(),
                    boundary_mass,
                };
                break;
            }
            snapshots.push(state.clone());
        }
    }
    if let TrajectoryStatus::Aborted { time, boundary_mass } = &status {
        let msg = format!("boundary mass {boundary_mass:.3e} exceeded the threshold at t = {time}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(Trajectory {
        initial: psi0.clone(),
        snapshots,
        final_state: state,
        dt: config.dt,
        steps,
        log,
        status,
        warnings,
    })
}

/// Free-particle Gaussian width: `|psi(t)|^2 ~ exp(-x^2 / w^2)` with
/// `w^2 = sigma^2 + 4 t^2 / sigma^2` for `psi(0) = exp(-x^2 / 2 sigma^2)`.
pub fn free_gaussian_width_sq(sigma: f64, t: f64) -> f64 {
    sigma * sigma + 4.0 * t * t / (sigma * sigma)
}
