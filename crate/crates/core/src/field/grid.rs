use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total number of lattice points of a grid.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

/// Smallest admissible number of points along one axis.
pub const MIN_POINTS_PER_AXIS: usize = 16;

/// One axis of the periodic box `[-L, L)` sampled at `N` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub points: usize,
    pub half_length: f64,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_length
    }

    /// Position of lattice index `i`: `-L + i dx`.
    pub fn position(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Signed frequency index of storage slot `i` (FFT ordering).
    pub fn frequency_index(&self, i: usize) -> i64 {
        if i < self.points / 2 {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    /// Frequency of storage slot `i`, on the lattice `(pi/L) {-N/2, ..., N/2-1}`.
    pub fn frequency(&self, i: usize) -> f64 {
        self.frequency_index(i) as f64 * self.frequency_spacing()
    }

    /// Largest representable frequency magnitude, `pi / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Maps `x` to its periodic image in `[-L, L)`.
    pub fn wrap_position(&self, x: f64) -> f64 {
        let l = self.half_length;
        (x + l).rem_euclid(2.0 * l) - l
    }

    /// Maps `k` to its periodic image on the frequency lattice range.
    pub fn wrap_frequency(&self, k: f64) -> f64 {
        let half = self.nyquist();
        (k + half).rem_euclid(2.0 * half) - half
    }
}

struct GridData {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

/// Periodic box discretization with its position and frequency lattices.
///
/// `Grid` is a cheap handle: clones share the same FFT plans. Plans are
/// used through `&self` with caller-provided scratch, so a grid can be used
/// from several threads at once.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("axes", &self.0.axes).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.axes == other.0.axes
    }
}

fn nearest_powers_of_two(n: usize) -> (usize, usize) {
    let hi = n.next_power_of_two();
    (hi / 2, hi)
}

impl Grid {
    /// Builds a grid with one entry of `points` and `half_lengths` per axis.
    pub fn new(points: &[usize], half_lengths: &[f64]) -> Result<Self> {
        Self::with_budget(points, half_lengths, DEFAULT_POINT_BUDGET)
    }

    /// Same number of points and box size along every axis.
    pub fn uniform(dims: usize, points: usize, half_length: f64) -> Result<Self> {
        Self::new(&vec![points; dims], &vec![half_length; dims])
    }

    pub fn with_budget(points: &[usize], half_lengths: &[f64], budget: usize) -> Result<Self> {
        let dims = points.len();
        if !(1..=3).contains(&dims) {
            return Err(Error::Config(format!(
                "grid dimension must be 1, 2 or 3, got {dims}"
            )));
        }
        if half_lengths.len() != dims {
            return Err(Error::Config(format!(
                "{} box half-lengths given for a {dims}-dimensional grid",
                half_lengths.len()
            )));
        }
        let mut total: usize = 1;
        for (d, (&n, &l)) in points.iter().zip(half_lengths).enumerate() {
            if !n.is_power_of_two() || n < MIN_POINTS_PER_AXIS {
                let (lo, hi) = nearest_powers_of_two(n.max(1));
                return Err(Error::Config(format!(
                    "axis {d}: {n} points is not a power of two >= {MIN_POINTS_PER_AXIS}; \
                     use {} or {hi}",
                    lo.max(MIN_POINTS_PER_AXIS)
                )));
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!(
                    "axis {d}: box half-length must be positive and finite, got {l}"
                )));
            }
            total = match total.checked_mul(n) {
                Some(t) if t <= budget => t,
                _ => {
                    return Err(Error::Config(format!(
                        "axis {d} with {n} points pushes the grid past the point budget {budget}"
                    )))
                }
            };
        }

        let axes: Vec<Axis> = points
            .iter()
            .zip(half_lengths)
            .map(|(&points, &half_length)| Axis {
                points,
                half_length,
            })
            .collect();
        let mut strides = vec![1; dims];
        for d in (0..dims.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].points;
        }
        let mut planner = FftPlanner::new();
        let forward = axes.iter().map(|a| planner.plan_fft_forward(a.points)).collect();
        let inverse = axes.iter().map(|a| planner.plan_fft_inverse(a.points)).collect();
        Ok(Grid(Arc::new(GridData {
            axes,
            strides,
            len: total,
            forward,
            inverse,
        })))
    }

    pub fn dims(&self) -> usize {
        self.0.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.0.axes[d]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.axes.iter().map(|a| a.points).collect()
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.0.strides
    }

    /// Volume of one position cell, `prod dx_d`.
    pub fn cell_volume(&self) -> f64 {
        self.0.axes.iter().map(Axis::spacing).product()
    }

    /// Volume of one frequency cell, `prod pi/L_d`.
    pub fn frequency_cell_volume(&self) -> f64 {
        self.0.axes.iter().map(Axis::frequency_spacing).product()
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (d, &s) in self.0.strides.iter().enumerate() {
            out[d] = flat / s;
            flat %= s;
        }
    }

    /// Evaluates `f` at every position lattice point (row-major).
    pub fn position_field<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let axes = &self.0.axes;
        self.lattice_field(|idx, buf| {
            for (d, a) in axes.iter().enumerate() {
                buf[d] = a.position(idx[d]);
            }
            f(buf)
        })
    }

    /// Evaluates `f` at every frequency lattice point (FFT storage order).
    pub fn frequency_field<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let axes = &self.0.axes;
        self.lattice_field(|idx, buf| {
            for (d, a) in axes.iter().enumerate() {
                buf[d] = a.frequency(idx[d]);
            }
            f(buf)
        })
    }

    fn lattice_field<T>(&self, mut f: impl FnMut(&[usize], &mut [f64]) -> T) -> Vec<T> {
        let dims = self.dims();
        let mut idx = [0usize; 3];
        let mut buf = [0.0f64; 3];
        let mut out = Vec::with_capacity(self.len());
        for flat in 0..self.len() {
            self.unravel(flat, &mut idx[..dims]);
            out.push(f(&idx[..dims], &mut buf[..dims]));
        }
        out
    }

    /// `|k|^2` on the frequency lattice.
    pub fn frequency_squared(&self) -> Vec<f64> {
        self.frequency_field(|k| k.iter().map(|v| v * v).sum())
    }

    /// Multiplies sample `i` by `(-1)^{i_1 + ... + i_n}`.
    fn parity_signs(&self, data: &mut [Complex64]) {
        let dims = self.dims();
        if dims == 1 {
            data.iter_mut().skip(1).step_by(2).for_each(|z| *z = -*z);
            return;
        }
        let shape = self.shape();
        let mut idx = [0usize; 3];
        let mut parity = 0usize;
        for z in data.iter_mut() {
            if parity % 2 == 1 {
                *z = -*z;
            }
            for d in (0..dims).rev() {
                idx[d] += 1;
                parity += 1;
                if idx[d] < shape[d] {
                    break;
                }
                parity -= shape[d];
                idx[d] = 0;
            }
        }
    }

    fn fft_all_axes(&self, data: &mut [Complex64], forward: bool) {
        let plans = if forward {
            &self.0.forward
        } else {
            &self.0.inverse
        };
        for (d, plan) in plans.iter().enumerate() {
            let n = self.0.axes[d].points;
            let stride = self.0.strides[d];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for chunk in data.chunks_mut(block) {
                for s in 0..stride {
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = chunk[i * stride + s];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, z) in line.iter().enumerate() {
                        chunk[i * stride + s] = *z;
                    }
                }
            }
        }
    }

    /// Position samples to frequency coefficients, in place.
    ///
    /// Coefficients approximate the unitary continuum transform
    /// `(2 pi)^{-n/2} \int psi(x) e^{-i k x} dx`, so that the lattice sums
    /// `sum |psi|^2 dV` and `sum |c|^2 dK` agree.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.fft_all_axes(data, true);
        self.parity_signs(data);
        let scale: f64 = self
            .axes()
            .iter()
            .map(|a| a.spacing() / (2.0 * PI).sqrt())
            .product();
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Inverse of [`Grid::forward_in_place`].
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.parity_signs(data);
        self.fft_all_axes(data, false);
        let scale: f64 = self
            .axes()
            .iter()
            .map(|a| a.frequency_spacing() / (2.0 * PI).sqrt())
            .product();
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Raw circular convolution `h_i = sum_j a_{i-j} b_j` (indices modulo the
    /// lattice), computed with unnormalized FFTs.
    pub fn circular_convolution(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.fft_all_axes(&mut fa, true);
        self.fft_all_axes(&mut fb, true);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= *y;
        }
        self.fft_all_axes(&mut fa, false);
        let n = self.len() as f64;
        fa.iter_mut().for_each(|z| *z /= n);
        fa
    }
}

/// Convenience constructor with identical axes.
pub fn make_grid(dims: usize, points_per_dim: usize, box_half_length: f64) -> Result<Grid> {
    Grid::uniform(dims, points_per_dim, box_half_length)
}
