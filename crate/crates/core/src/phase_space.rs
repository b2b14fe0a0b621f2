//! Phase-space localization: the moving projector `F_c(|x - 2tP| / t^alpha <= 1)`,
//! momentum cutoffs, Sobolev weights and time-translated potentials.
//!
//! The moving projector is defined by conjugating a position cutoff with the
//! free flow, so `e^{itH0} F_c(|x|/t^alpha <= 1) e^{-itH0}` holds exactly on the
//! lattice.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{cutoff_field, CutoffKind, CutoffSpec};
use crate::error::{domain, usage, Result};
use crate::field::{gaussian, Grid, Representation, Space, WaveFunction};
use crate::propagators::FreeFlow;

/// Exponents of the channel projectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorParams {
    /// Position scale exponent, `|x| <= t^alpha`.
    pub alpha: f64,
    /// Momentum scale exponent, `t^b |P| > 1`; 0 disables the momentum cutoff.
    #[serde(default)]
    pub b: f64,
    /// Sobolev weight order.
    #[serde(default)]
    pub a: f64,
}

impl ProjectorParams {
    pub fn new(alpha: f64, b: f64, a: f64) -> Self {
        Self { alpha, b, a }
    }

    /// Weight order actually used: the momentum-cutoff construction runs
    /// without weights.
    pub fn effective_a(&self) -> f64 {
        if self.b > 0.0 {
            0.0
        } else {
            self.a
        }
    }

    /// Range warnings for the momentum-cutoff construction with a potential
    /// decaying like `<x>^-delta`: needs `b in (0, 1 - e)` and
    /// `alpha in (b, 1 - b)` with `e = (1 + 1/delta) / 2`.
    pub fn check_short_range(&self, delta: f64) -> Vec<String> {
        let e = 0.5 * (1.0 + 1.0 / delta);
        let mut w = Vec::new();
        if !(self.b > 0.0 && self.b < 1.0 - e) {
            w.push(format!("b = {} outside (0, {:.4}) for delta = {delta}", self.b, 1.0 - e));
        }
        if !(self.alpha > self.b && self.alpha < 1.0 - self.b) {
            w.push(format!(
                "alpha = {} outside ({}, {})",
                self.alpha,
                self.b,
                1.0 - self.b
            ));
        }
        w
    }

    /// Range warnings for the weighted construction in `n` dimensions:
    /// `alpha in (0, 1 - 2/n)`.
    pub fn check_dispersive(&self, dims: usize) -> Vec<String> {
        let hi = 1.0 - 2.0 / dims as f64;
        let mut w = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < hi) {
            w.push(format!("alpha = {} outside (0, {hi:.4}) in {dims} dimensions", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.a) {
            w.push(format!("weight order a = {} outside [0, 1]", self.a));
        }
        w
    }
}

/// `e^{itH0} psi(t)`; the time stamp of `state` is kept.
pub fn asymptotic_profile(state: &WaveFunction, flow: &FreeFlow) -> Result<WaveFunction> {
    let t = state.time();
    Ok(flow.apply(state, -t)?.with_time(t))
}

/// Multiplies by the cutoff of `spec` at time `t`, in the cutoff's space.
pub fn apply_cutoff(state: &WaveFunction, spec: &CutoffSpec, t: f64) -> Result<WaveFunction> {
    let f = cutoff_field(state.grid(), spec, t)?;
    state.multiply(&f, spec.space)
}

/// `F_c(|x - 2tP| / t^alpha <= 1) state`, realized as free-undo, position
/// cutoff, free-redo.
pub fn apply_moving_cutoff(
    state: &WaveFunction,
    t: f64,
    alpha: f64,
    flow: &FreeFlow,
) -> Result<WaveFunction> {
    let stamp = state.time();
    let undone = flow.apply(state, -t)?;
    let cut = apply_cutoff(&undone, &CutoffSpec::position_leq(alpha), t)?;
    Ok(flow.apply(&cut, t)?.with_time(stamp))
}

/// `F_1(t^b |P| > 1)` or its complement.
pub fn apply_momentum_cutoff(
    state: &WaveFunction,
    t: f64,
    b: f64,
    kind: CutoffKind,
) -> Result<WaveFunction> {
    let spec = match kind {
        CutoffKind::F1Gt => CutoffSpec::momentum_gt(b),
        CutoffKind::F1BarLeq => CutoffSpec::momentum_gt(b).complement(),
        k => return usage(format!("{k:?} is not a momentum cutoff")),
    };
    apply_cutoff(state, &spec, t)
}

/// `(1 + |k|^2)^{s a / 2}` with `s = +1` or `-1`.
pub fn sobolev_weight_field(grid: &Grid, a: f64, sign: f64) -> Vec<f64> {
    grid.frequency_squared()
        .into_iter()
        .map(|k2| (1.0 + k2).powf(0.5 * sign * a))
        .collect()
}

/// `<P>^{+a}` (`sign > 0`) or `<P>^{-a}` (`sign < 0`).
pub fn apply_sobolev_weight(state: &WaveFunction, a: f64, sign: f64) -> Result<WaveFunction> {
    if !(0.0..=1.0).contains(&a) {
        return domain(format!("Sobolev weight order must lie in [0, 1], got {a}"));
    }
    if a == 0.0 {
        return Ok(state.clone());
    }
    let s = if sign >= 0.0 { 1.0 } else { -1.0 };
    state.multiply(&sobolev_weight_field(state.grid(), a, s), Space::Frequency)
}

/// `e^{itH0} V e^{-itH0} state`, the potential translated along the free
/// flow: `V(x + 2tP, t)`.
pub fn tt_apply(
    v_field: &[Complex64],
    state: &WaveFunction,
    t: f64,
    flow: &FreeFlow,
) -> Result<WaveFunction> {
    let stamp = state.time();
    let forward = flow.apply(state, t)?;
    let hit = forward.multiply(v_field, Space::Position)?;
    Ok(flow.apply(&hit, -t)?.with_time(stamp))
}

/// Normalized Gaussian packet `exp(-|x - x0|^2 / 2 sigma^2 + i k0 . x)`.
pub fn coherent_state(grid: &Grid, x0: &[f64], k0: &[f64], sigma: f64) -> Result<WaveFunction> {
    let dims = grid.dims();
    if x0.len() != dims || k0.len() != dims {
        return usage("coherent state centers have the wrong dimension");
    }
    for (d, a) in grid.axes().iter().enumerate() {
        if !(sigma > 0.0) || sigma > a.half_length / 8.0 || x0[d].abs() > a.half_length / 2.0 {
            return usage(format!(
                "packet (x0 = {}, sigma = {sigma}) does not fit axis {d} of half-length {}",
                x0[d], a.half_length
            ));
        }
        if k0[d].abs() > a.nyquist() / 2.0 {
            return usage(format!("momentum {} is too close to the Nyquist limit", k0[d]));
        }
    }
    let g = gaussian(grid, x0, sigma);
    let wave = grid.position_field(|x| {
        Complex64::from_polar(1.0, x.iter().zip(k0).map(|(a, b)| a * b).sum())
    });
    g.multiply(&wave, Representation::Position)
}
