use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{domain, usage, Result};

/// Which lattice the samples of a [`WaveFunction`] live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Position,
    Frequency,
}

/// Space in which a multiplier acts.
pub type Space = Representation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Position to frequency.
    Forward,
    /// Frequency to position.
    Inverse,
}

/// Norms understood by [`WaveFunction::norm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum NormSpec {
    L2,
    /// `p = f64::INFINITY` is the lattice maximum.
    Lp(f64),
    /// Sobolev norm `|| <k>^a psi ||_2`.
    Ha(f64),
    /// `|| <x>^delta psi ||_2`.
    WeightedL2(f64),
}

/// Weights for first spatial moments.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentWeight {
    /// `|x|`
    Abs,
    /// `<x> = sqrt(1 + |x|^2)`
    Bracket,
    /// `|x - c|`, measured with the periodic minimal image.
    AbsFrom(Vec<f64>),
}

/// Scalar field values that can multiply a complex amplitude.
pub trait FieldValue: Copy + Send + Sync {
    fn times(self, z: Complex64) -> Complex64;
    fn conjugate(self) -> Self;
}

impl FieldValue for f64 {
    #[inline]
    fn times(self, z: Complex64) -> Complex64 {
        z * self
    }
    #[inline]
    fn conjugate(self) -> Self {
        self
    }
}

impl FieldValue for Complex64 {
    #[inline]
    fn times(self, z: Complex64) -> Complex64 {
        z * self
    }
    #[inline]
    fn conjugate(self) -> Self {
        self.conj()
    }
}

/// Complex field on a [`Grid`] together with its physical time.
///
/// Values are row-major; in the frequency representation slots follow FFT
/// ordering (see [`super::Axis::frequency`]).
#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<Complex64>,
    time: f64,
    repr: Representation,
}

impl WaveFunction {
    pub fn new(
        grid: Grid,
        values: Vec<Complex64>,
        time: f64,
        repr: Representation,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return usage(format!(
                "{} samples supplied for a grid of {} points",
                values.len(),
                grid.len()
            ));
        }
        Ok(Self {
            grid,
            values,
            time,
            repr,
        })
    }

    pub fn zeros(grid: &Grid, time: f64, repr: Representation) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid: grid.clone(),
            time,
            repr,
        }
    }

    /// Samples `f(x)` on the position lattice.
    pub fn from_position_fn(grid: &Grid, time: f64, f: impl FnMut(&[f64]) -> Complex64) -> Self {
        Self {
            values: grid.position_field(f),
            grid: grid.clone(),
            time,
            repr: Representation::Position,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Same grid, time and representation with new samples.
    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), self.grid.len());
        Self {
            grid: self.grid.clone(),
            values,
            time: self.time,
            repr: self.repr,
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Plancherel-normalized transform; the input must be in the source
    /// representation of `direction`.
    pub fn transform(&self, direction: Direction) -> Result<Self> {
        match (direction, self.repr) {
            (Direction::Forward, Representation::Position) => Ok(self.to_frequency()),
            (Direction::Inverse, Representation::Frequency) => Ok(self.to_position()),
            (d, r) => usage(format!("{d:?} transform applied to a state in {r:?} representation")),
        }
    }

    /// Converts to the frequency representation (no-op if already there).
    pub fn to_frequency(&self) -> Self {
        self.to_representation(Representation::Frequency)
    }

    pub fn to_position(&self) -> Self {
        self.to_representation(Representation::Position)
    }

    pub fn to_representation(&self, repr: Representation) -> Self {
        self.clone().into_representation(repr)
    }

    pub fn into_representation(mut self, repr: Representation) -> Self {
        match (self.repr, repr) {
            (Representation::Position, Representation::Frequency) => {
                self.grid.forward_in_place(&mut self.values);
            }
            (Representation::Frequency, Representation::Position) => {
                self.grid.inverse_in_place(&mut self.values);
            }
            _ => {}
        }
        self.repr = repr;
        self
    }

    fn cell_volume(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.cell_volume(),
            Representation::Frequency => self.grid.frequency_cell_volume(),
        }
    }

    /// `sum |psi|^2` times the cell volume of the current representation.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn norm(&self, spec: NormSpec) -> Result<f64> {
        match spec {
            NormSpec::L2 => Ok(self.l2_norm()),
            NormSpec::Lp(p) => {
                if !(p >= 1.0) {
                    return domain(format!("L^p norm needs p >= 1, got {p}"));
                }
                let pos = self.to_position();
                if p.is_infinite() {
                    Ok(pos.values.iter().map(|z| z.norm()).fold(0.0, f64::max))
                } else {
                    let s: f64 = pos.values.iter().map(|z| z.norm().powf(p)).sum();
                    Ok((s * self.grid.cell_volume()).powf(1.0 / p))
                }
            }
            NormSpec::Ha(a) => {
                let freq = self.to_frequency();
                let k2 = self.grid.frequency_squared();
                let s: f64 = freq
                    .values
                    .iter()
                    .zip(&k2)
                    .map(|(z, k)| z.norm_sqr() * (1.0 + k).powf(a))
                    .sum();
                Ok((s * self.grid.frequency_cell_volume()).sqrt())
            }
            NormSpec::WeightedL2(delta) => {
                let pos = self.to_position();
                let w = self
                    .grid
                    .position_field(|x| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(delta));
                let s: f64 = pos.values.iter().zip(&w).map(|(z, w)| z.norm_sqr() * w).sum();
                Ok((s * self.grid.cell_volume()).sqrt())
            }
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return usage("states live on different grids");
        }
        if self.repr != other.repr {
            return usage(format!(
                "representation mismatch: {:?} vs {:?}",
                self.repr, other.repr
            ));
        }
        Ok(())
    }

    /// `(self, other)`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.cell_volume())
    }

    /// `(psi, w psi)` for a spatial weight `w`.
    pub fn x_moment(&self, weight: &MomentWeight) -> Result<f64> {
        if self.repr != Representation::Position {
            return usage("x_moment needs a state in position representation");
        }
        let axes = self.grid.axes().to_vec();
        let w: Vec<f64> = match weight {
            MomentWeight::Abs => self
                .grid
                .position_field(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()),
            MomentWeight::Bracket => self
                .grid
                .position_field(|x| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()),
            MomentWeight::AbsFrom(c) => {
                if c.len() != axes.len() {
                    return usage("moment center has the wrong dimension");
                }
                self.grid.position_field(|x| {
                    x.iter()
                        .zip(c)
                        .zip(&axes)
                        .map(|((xi, ci), a)| a.wrap_position(xi - ci).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
            }
        };
        let s: f64 = self.values.iter().zip(&w).map(|(z, w)| z.norm_sqr() * w).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Mass-weighted mean position per axis (raw lattice coordinates).
    pub fn position_mean(&self) -> Vec<f64> {
        let pos = self.to_position();
        let mass = pos.mass();
        (0..self.grid.dims())
            .map(|d| {
                let a = *self.grid.axis(d);
                let stride = self.grid.strides()[d];
                let s: f64 = pos
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z.norm_sqr() * a.position((i / stride) % a.points))
                    .sum();
                s * self.grid.cell_volume() / mass
            })
            .collect()
    }

    /// Mean position per axis measured relative to `center` with the periodic
    /// minimal image, returned in absolute coordinates.
    pub fn position_mean_near(&self, center: &[f64]) -> Vec<f64> {
        let pos = self.to_position();
        let mass = pos.mass();
        (0..self.grid.dims())
            .map(|d| {
                let a = *self.grid.axis(d);
                let stride = self.grid.strides()[d];
                let s: f64 = pos
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let x = a.position((i / stride) % a.points);
                        z.norm_sqr() * a.wrap_position(x - center[d])
                    })
                    .sum();
                center[d] + s * self.grid.cell_volume() / mass
            })
            .collect()
    }

    pub fn momentum_mean(&self) -> Vec<f64> {
        let f = self.to_frequency();
        let mass = f.mass();
        (0..self.grid.dims())
            .map(|d| {
                let a = *self.grid.axis(d);
                let stride = self.grid.strides()[d];
                let s: f64 = f
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z.norm_sqr() * a.frequency((i / stride) % a.points))
                    .sum();
                s * self.grid.frequency_cell_volume() / mass
            })
            .collect()
    }

    /// Fraction of the L2 mass in the outer 10% shell of the box
    /// (points with `|x_d| > 0.9 L_d` on some axis).
    pub fn boundary_mass_fraction(&self) -> f64 {
        let pos = self.to_position();
        let axes = self.grid.axes();
        let in_shell = self
            .grid
            .position_field(|x| x.iter().zip(axes).any(|(v, a)| v.abs() > 0.9 * a.half_length));
        let total: f64 = pos.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let shell: f64 = pos
            .values
            .iter()
            .zip(&in_shell)
            .filter(|(_, s)| **s)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        shell / total
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_values(self.values.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// L2 distance, converting `other` to this representation first.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        let other = other.to_representation(self.repr);
        Ok(self.sub(&other)?.l2_norm())
    }

    /// Pointwise product with a field over the lattice of `space`; the
    /// result comes back in the original representation.
    pub fn multiply<F: FieldValue>(&self, field: &[F], space: Space) -> Result<Self> {
        if field.len() != self.grid.len() {
            return usage(format!(
                "multiplier has {} samples, grid has {}",
                field.len(),
                self.grid.len()
            ));
        }
        let original = self.repr;
        let mut s = self.to_representation(space);
        for (z, f) in s.values.iter_mut().zip(field) {
            *z = f.times(*z);
        }
        Ok(s.into_representation(original))
    }
}

/// Free-function form of [`WaveFunction::transform`].
pub fn spectral_transform(state: &WaveFunction, direction: Direction) -> Result<WaveFunction> {
    state.transform(direction)
}

/// Free-function form of [`WaveFunction::multiply`].
pub fn apply_multiplier<F: FieldValue>(
    state: &WaveFunction,
    field: &[F],
    space: Space,
) -> Result<WaveFunction> {
    state.multiply(field, space)
}

pub fn norm(state: &WaveFunction, spec: NormSpec) -> Result<f64> {
    state.norm(spec)
}

pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    a.inner(b)
}

pub fn x_moment(state: &WaveFunction, weight: &MomentWeight) -> Result<f64> {
    state.x_moment(weight)
}
