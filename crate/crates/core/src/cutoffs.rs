//! The smooth transition profile `chi` and the cutoff fields built from it.
//!
//! `chi` rises from 0 on `k <= 1/2` to 1 on `k >= 1`. Every cutoff is either
//! `chi(lambda / a)` or its complement, with `lambda` a radius or a signed
//! coordinate in position or frequency space and `a` a fixed or power-law
//! scale.

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};
use crate::field::{Grid, Space};

/// `chi(k) = g(k - 1/2) / (g(k - 1/2) + g(1 - k))` with `g(s) = exp(-1/s)`.
pub fn chi(k: f64) -> f64 {
    if k <= 0.5 {
        return 0.0;
    }
    if k >= 1.0 {
        return 1.0;
    }
    let z = 1.0 / (k - 0.5) - 1.0 / (1.0 - k);
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

pub fn chi_prime(k: f64) -> f64 {
    if k <= 0.5 || k >= 1.0 {
        return 0.0;
    }
    let u = k - 0.5;
    let v = 1.0 - k;
    let z = 1.0 / u - 1.0 / v;
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e)) * (1.0 / (u * u) + 1.0 / (v * v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `F_c(lambda <= a) = 1 - chi(lambda / a)`
    FcLeq,
    /// `F̄_c(lambda > a) = chi(lambda / a)`
    FcBarGt,
    /// `F_1(lambda > a) = chi(lambda / a)`
    F1Gt,
    /// `F̄_1(lambda <= a) = 1 - chi(lambda / a)`
    F1BarLeq,
    /// `F_2(lambda > a) = chi(lambda / a)`
    F2Gt,
    /// `F̄_2(lambda <= a) = 1 - chi(lambda / a)`
    F2BarLeq,
}

impl CutoffKind {
    pub fn is_increasing(self) -> bool {
        matches!(self, Self::FcBarGt | Self::F1Gt | Self::F2Gt)
    }

    pub fn complement(self) -> Self {
        match self {
            Self::FcLeq => Self::FcBarGt,
            Self::FcBarGt => Self::FcLeq,
            Self::F1Gt => Self::F1BarLeq,
            Self::F1BarLeq => Self::F1Gt,
            Self::F2Gt => Self::F2BarLeq,
            Self::F2BarLeq => Self::F2Gt,
        }
    }
}

/// Cutoff scale `a(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scale {
    Fixed { value: f64 },
    /// `coefficient * t^exponent`
    Power { coefficient: f64, exponent: f64 },
}

impl Scale {
    pub fn power(exponent: f64) -> Self {
        Self::Power {
            coefficient: 1.0,
            exponent,
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let a = match *self {
            Scale::Fixed { value } => value,
            Scale::Power {
                coefficient,
                exponent,
            } => {
                if !(t > 0.0) {
                    return domain(format!("time-scaled cutoff evaluated at t = {t}"));
                }
                coefficient * t.powf(exponent)
            }
        };
        if !(a > 0.0) || !a.is_finite() {
            return domain(format!("cutoff scale must be positive and finite, got {a}"));
        }
        Ok(a)
    }

    /// `da/dt`.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Scale::Fixed { .. } => 0.0,
            Scale::Power {
                coefficient,
                exponent,
            } => coefficient * exponent * t.powf(exponent - 1.0),
        }
    }
}

/// The variable `lambda` the profile is applied to. Axis variables measure
/// `y = coord - shift - drift * t` with the periodic minimal image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variable {
    /// Euclidean length of the lattice coordinate.
    Radial,
    /// `sign * y`; on the torus this jumps where `y` wraps around.
    Axis {
        axis: usize,
        sign: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        drift: f64,
    },
    /// `|y|`
    AbsAxis {
        axis: usize,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        drift: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub kind: CutoffKind,
    pub scale: Scale,
    pub variable: Variable,
    pub space: Space,
}

impl CutoffSpec {
    /// `F_c(|x| / t^alpha <= 1)`
    pub fn position_leq(alpha: f64) -> Self {
        Self {
            kind: CutoffKind::FcLeq,
            scale: Scale::power(alpha),
            variable: Variable::Radial,
            space: Space::Position,
        }
    }

    /// `F_1(t^b |P| > 1)`
    pub fn momentum_gt(b: f64) -> Self {
        Self {
            kind: CutoffKind::F1Gt,
            scale: Scale::power(-b),
            variable: Variable::Radial,
            space: Space::Frequency,
        }
    }

    /// Half-space cutoff in `sign * x_axis` (or `sign * k_axis`).
    pub fn half_space(kind: CutoffKind, axis: usize, sign: f64, scale: Scale, space: Space) -> Self {
        Self {
            kind,
            scale,
            variable: Variable::Axis {
                axis,
                sign,
                shift: 0.0,
                drift: 0.0,
            },
            space,
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            kind: self.kind.complement(),
            ..self.clone()
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        let drifting = match self.variable {
            Variable::Radial => false,
            Variable::Axis { drift, .. } | Variable::AbsAxis { drift, .. } => drift != 0.0,
        };
        drifting || matches!(self.scale, Scale::Power { exponent, .. } if exponent != 0.0)
    }

    fn check_axis(&self, grid: &Grid) -> Result<()> {
        match self.variable {
            Variable::Axis { axis, .. } | Variable::AbsAxis { axis, .. } if axis >= grid.dims() => {
                usage(format!("cutoff axis {axis} on a {}-dimensional grid", grid.dims()))
            }
            _ => Ok(()),
        }
    }

    /// `(lambda, d lambda / dt)` over the lattice of `self.space`.
    fn variable_field(&self, grid: &Grid, t: f64) -> Vec<(f64, f64)> {
        let wrap = |axis: usize, y: f64| {
            let a = grid.axis(axis);
            match self.space {
                Space::Position => a.wrap_position(y),
                Space::Frequency => a.wrap_frequency(y),
            }
        };
        let eval = |c: &[f64]| match self.variable {
            Variable::Radial => (c.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
            Variable::Axis {
                axis,
                sign,
                shift,
                drift,
            } => {
                let y = wrap(axis, c[axis] - shift - drift * t);
                (sign * y, -sign * drift)
            }
            Variable::AbsAxis { axis, shift, drift } => {
                let y = wrap(axis, c[axis] - shift - drift * t);
                (y.abs(), -y.signum() * drift)
            }
        };
        match self.space {
            Space::Position => grid.position_field(eval),
            Space::Frequency => grid.frequency_field(eval),
        }
    }
}

/// Samples the cutoff at time `t` over the lattice of `spec.space`.
pub fn cutoff_field(grid: &Grid, spec: &CutoffSpec, t: f64) -> Result<Vec<f64>> {
    spec.check_axis(grid)?;
    let a = spec.scale.at(t)?;
    let up = spec.kind.is_increasing();
    Ok(spec
        .variable_field(grid, t)
        .into_iter()
        .map(|(l, _)| {
            let c = chi(l / a);
            if up {
                c
            } else {
                1.0 - c
            }
        })
        .collect())
}

/// Exact `d/dt` of [`cutoff_field`].
pub fn cutoff_time_derivative_field(grid: &Grid, spec: &CutoffSpec, t: f64) -> Result<Vec<f64>> {
    if !spec.is_time_dependent() {
        return usage("time derivative requested for a time-independent cutoff");
    }
    spec.check_axis(grid)?;
    let a = spec.scale.at(t)?;
    let da = spec.scale.rate(t);
    let sign = if spec.kind.is_increasing() { 1.0 } else { -1.0 };
    Ok(spec
        .variable_field(grid, t)
        .into_iter()
        .map(|(l, dl)| sign * chi_prime(l / a) * (dl * a - l * da) / (a * a))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn profile_endpoints() {
        assert_eq!(chi(0.4), 0.0);
        assert_eq!(chi(0.5), 0.0);
        assert_eq!(chi(1.2), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert!((chi(0.75) - 0.5).abs() < 1e-15);
        assert!(chi(0.6) > 0.0 && chi(0.6) < 1.0);
        assert_eq!(chi(-3.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-4;
        let fd = (chi(0.75 + h) - chi(0.75 - h)) / (2.0 * h);
        assert!((fd - chi_prime(0.75)).abs() < 1e-6 * chi_prime(0.75));
        // five-point stencil across the whole transition
        for i in 1..100 {
            let k = 0.5 + 0.005 * i as f64;
            let fd = (chi(k - 2.0 * h) - 8.0 * chi(k - h) + 8.0 * chi(k + h) - chi(k + 2.0 * h))
                / (12.0 * h);
            assert!((fd - chi_prime(k)).abs() < 1e-6, "k = {k}");
        }
        assert_eq!(chi_prime(0.3), 0.0);
        assert_eq!(chi_prime(1.3), 0.0);
    }

    #[test]
    fn derivative_integrates_to_one() {
        // composite Simpson on [1/2, 1]
        let n = 20_000;
        let h = 0.5 / n as f64;
        let mut s = chi_prime(0.5) + chi_prime(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * chi_prime(0.5 + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn position_leq_support_is_exact() {
        let grid = Grid::new(&[256], &[20.0]).unwrap();
        let t: f64 = 9.0;
        let alpha = 0.5;
        let a = t.powf(alpha);
        let f = cutoff_field(&grid, &CutoffSpec::position_leq(alpha), t).unwrap();
        let xs = grid.position_field(|x| x[0]);
        for (v, x) in f.iter().zip(&xs) {
            if x.abs() <= a / 2.0 {
                assert_eq!(*v, 1.0);
            } else if x.abs() >= a {
                assert_eq!(*v, 0.0);
            }
        }
        let origin = grid.axis(0).points / 2;
        assert_eq!(f[origin], 1.0);
    }

    #[test]
    fn momentum_gt_is_one_above_threshold() {
        let grid = Grid::new(&[128], &[30.0]).unwrap();
        let (t, b): (f64, f64) = (16.0, 0.25);
        let f = cutoff_field(&grid, &CutoffSpec::momentum_gt(b), t).unwrap();
        let ks = grid.frequency_field(|k| k[0]);
        for (v, k) in f.iter().zip(&ks) {
            if k.abs() >= t.powf(-b) {
                assert_eq!(*v, 1.0);
            }
            if k.abs() <= 0.5 * t.powf(-b) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_scale_and_static_derivative() {
        let grid = Grid::new(&[16], &[1.0]).unwrap();
        let mut spec = CutoffSpec::position_leq(0.5);
        spec.scale = Scale::Fixed { value: 0.0 };
        assert!(cutoff_field(&grid, &spec, 1.0).is_err());
        spec.scale = Scale::Fixed { value: 1.0 };
        assert!(cutoff_time_derivative_field(&grid, &spec, 1.0).is_err());
        assert!(cutoff_field(&grid, &CutoffSpec::position_leq(0.5), 0.0).is_err());
        let bad = CutoffSpec::half_space(CutoffKind::F2Gt, 1, 1.0, Scale::power(0.6), Space::Position);
        assert!(cutoff_field(&grid, &bad, 2.0).is_err());
    }

    #[test]
    fn time_derivative_is_supported_on_annulus() {
        let grid = Grid::new(&[512], &[40.0]).unwrap();
        let (t, alpha): (f64, f64) = (20.0, 0.7);
        let a = t.powf(alpha);
        let d = cutoff_time_derivative_field(&grid, &CutoffSpec::position_leq(alpha), t).unwrap();
        let xs = grid.position_field(|x| x[0].abs());
        for (v, r) in d.iter().zip(&xs) {
            assert!(*v >= 0.0);
            if *r <= a / 2.0 || *r >= a {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(d.iter().any(|v| *v > 0.0));
    }

    fn fd_check(grid: &Grid, spec: &CutoffSpec, t: f64) {
        let h = 1e-4 * t;
        let at = |s: f64| cutoff_field(grid, spec, t + s * h).unwrap();
        let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
        let exact = cutoff_time_derivative_field(grid, spec, t).unwrap();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 0.0);
        for i in 0..exact.len() {
            let fd = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            assert!((fd - exact[i]).abs() <= 1e-6 * scale, "fd {fd} exact {}", exact[i]);
        }
    }

    #[test]
    fn time_derivative_matches_finite_difference() {
        let g1 = Grid::new(&[1024], &[50.0]).unwrap();
        let g2 = Grid::new(&[64, 64], &[8.0, 8.0]).unwrap();
        fd_check(&g1, &CutoffSpec::position_leq(0.6), 10.0);
        fd_check(&g2, &CutoffSpec::position_leq(0.4), 30.0);
        fd_check(&g1, &CutoffSpec::momentum_gt(0.3), 12.0);
        let moving = CutoffSpec {
            kind: CutoffKind::F2BarLeq,
            scale: Scale::power(0.6),
            variable: Variable::AbsAxis {
                axis: 0,
                shift: 1.0,
                drift: 0.7,
            },
            space: Space::Position,
        };
        fd_check(&g1, &moving, 6.0);
        let half = CutoffSpec {
            variable: Variable::Axis {
                axis: 1,
                sign: -1.0,
                shift: 0.0,
                drift: -0.23,
            },
            kind: CutoffKind::F2Gt,
            ..moving
        };
        fd_check(&g2, &half, 5.0);
    }

    proptest! {
        #[test]
        fn complements_sum_to_one(alpha in 0.05f64..0.95, t in 1.0f64..500.0, kind_ix in 0usize..6,
                                  freq in any::<bool>()) {
            let kinds = [CutoffKind::FcLeq, CutoffKind::FcBarGt, CutoffKind::F1Gt,
                         CutoffKind::F1BarLeq, CutoffKind::F2Gt, CutoffKind::F2BarLeq];
            let grid = Grid::new(&[64], &[20.0]).unwrap();
            let spec = CutoffSpec {
                kind: kinds[kind_ix],
                scale: Scale::power(alpha),
                variable: Variable::Radial,
                space: if freq { Space::Frequency } else { Space::Position },
            };
            let f = cutoff_field(&grid, &spec, t).unwrap();
            let g = cutoff_field(&grid, &spec.complement(), t).unwrap();
            for (a, b) in f.iter().zip(&g) {
                prop_assert!((0.0..=1.0).contains(a));
                prop_assert_eq!(a + b, 1.0);
            }
        }

        #[test]
        fn moving_cutoff_grows_in_time(alpha in 0.05f64..0.95, t in 1.0f64..200.0, dt in 0.0f64..50.0) {
            let grid = Grid::new(&[32, 32], &[15.0, 15.0]).unwrap();
            let spec = CutoffSpec::position_leq(alpha);
            let early = cutoff_field(&grid, &spec, t).unwrap();
            let late = cutoff_field(&grid, &spec, t + dt).unwrap();
            for (e, l) in early.iter().zip(&late) {
                prop_assert!(l >= e);
            }
            for d in cutoff_time_derivative_field(&grid, &spec, t).unwrap() {
                prop_assert!(d >= 0.0);
            }
            for d in cutoff_time_derivative_field(&grid, &CutoffSpec::momentum_gt(alpha), t).unwrap() {
                prop_assert!(d >= 0.0);
            }
        }
    }
}
