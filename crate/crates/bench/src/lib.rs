//! Fixtures shared by the benchmarks.

use freechan_core::cutoffs::CutoffSpec;
use freechan_core::diagnostics::Pipeline;
use freechan_core::phase_space::coherent_state;
use freechan_core::propagators::{Dispersion, FreeFlow, Interaction, Potential};
use freechan_core::{Complex64, Grid, Result, WaveFunction};

/// A 1D grid with a unit coherent state on it.
pub fn packet(points: usize, half_length: f64) -> Result<WaveFunction> {
    let grid = Grid::new(&[points], &[half_length])?;
    coherent_state(&grid, &[0.0], &[1.0], 2.0)
}

/// `<x>^-3` sampled on the grid of `state`.
pub fn bracket_potential(state: &WaveFunction) -> Result<Interaction> {
    let grid = state.grid();
    let values = grid.position_field(|x| Complex64::new((1.0 + x[0] * x[0]).powf(-1.5), 0.0));
    Interaction::localized(grid, Potential::sampled(grid, values)?, 3.0)
}

/// `F1(|x| <= t/2) e^{-itH0} F1(P > t^-0.4 / 50) e^{itH0}` on `points` samples.
pub fn cutoff_pipeline(points: usize, half_length: f64, t: f64) -> Result<Pipeline> {
    let grid = Grid::new(&[points], &[half_length])?;
    let flow = FreeFlow::new(&grid, &Dispersion::Laplacian)?;
    Pipeline::new(&grid)
        .free_flow(&flow, -t)?
        .cutoff(&CutoffSpec::momentum_gt(t.powf(-0.4) / 50.0), 1.0)?
        .free_flow(&flow, t)?
        .cutoff(&CutoffSpec::position_leq(0.5), t)
}
