//! Discretized fields on a periodic box: lattices, spectral transforms,
//! multipliers, norms and checkpoints.

mod checkpoint;
mod grid;
mod wave;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use grid::{make_grid, Axis, Grid, DEFAULT_POINT_BUDGET, MIN_POINTS_PER_AXIS};
pub use wave::{
    apply_multiplier, inner_product, norm, spectral_transform, x_moment, Direction, FieldValue,
    MomentWeight, NormSpec, Representation, Space, WaveFunction,
};

use rustfft::num_complex::Complex64;

/// `<x>^{-delta}` sampled on the position lattice of `grid`.
pub fn bracket_power(grid: &Grid, delta: f64) -> Vec<f64> {
    grid.position_field(|x| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-0.5 * delta))
}

/// Normalized real Gaussian `exp(-|x - c|^2 / 2 sigma^2)` (minimal image).
pub fn gaussian(grid: &Grid, center: &[f64], sigma: f64) -> WaveFunction {
    let axes = grid.axes().to_vec();
    let raw = WaveFunction::from_position_fn(grid, 0.0, |x| {
        let r2: f64 = x
            .iter()
            .zip(center)
            .zip(&axes)
            .map(|((xi, ci), a)| a.wrap_position(xi - ci).powi(2))
            .sum();
        Complex64::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
    });
    let n = raw.l2_norm();
    raw.scaled(Complex64::new(1.0 / n, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(grid: &Grid, seed: u64) -> WaveFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        WaveFunction::new(grid.clone(), values, 0.0, Representation::Position).unwrap()
    }

    fn rel_err(a: &WaveFunction, b: &WaveFunction) -> f64 {
        a.distance(b).unwrap() / b.l2_norm()
    }

    #[test]
    fn round_trip_is_identity() {
        for grid in [
            Grid::new(&[256], &[10.0]).unwrap(),
            Grid::new(&[32, 16], &[4.0, 7.0]).unwrap(),
            Grid::new(&[16, 16, 32], &[2.0, 3.0, 4.0]).unwrap(),
        ] {
            let s = random_state(&grid, 11);
            let back = s.transform(Direction::Forward).unwrap();
            let back = back.transform(Direction::Inverse).unwrap();
            assert!(rel_err(&back, &s) < 1e-12);
        }
    }

    #[test]
    fn transform_rejects_representation_mismatch() {
        let grid = Grid::new(&[16], &[1.0]).unwrap();
        let s = WaveFunction::zeros(&grid, 0.0, Representation::Position);
        assert!(s.transform(Direction::Inverse).is_err());
        assert!(s.to_frequency().transform(Direction::Forward).is_err());
    }

    #[test]
    fn gaussian_transforms_to_reciprocal_gaussian() {
        // (2 pi)^{-1/2} \int e^{-x^2/2s^2} e^{-ikx} dx = s e^{-s^2 k^2 / 2}
        let grid = Grid::new(&[512], &[40.0]).unwrap();
        let s = 1.7;
        let psi =
            WaveFunction::from_position_fn(&grid, 0.0, |x| Complex64::new((-x[0] * x[0] / (2.0 * s * s)).exp(), 0.0));
        let f = psi.to_frequency();
        let a = grid.axis(0);
        for (i, z) in f.values().iter().enumerate() {
            let k = a.frequency(i);
            let exact = s * (-s * s * k * k / 2.0).exp();
            assert!((z - exact).norm() < 1e-10, "k={k} {z} vs {exact}");
        }
    }

    #[test]
    fn plane_wave_occupies_one_bin() {
        let grid = Grid::new(&[64], &[5.0]).unwrap();
        let k0 = grid.axis(0).frequency(7);
        let psi = WaveFunction::from_position_fn(&grid, 0.0, |x| Complex64::from_polar(1.0, k0 * x[0]));
        let f = psi.to_frequency();
        for (i, z) in f.values().iter().enumerate() {
            if i == 7 {
                assert!(z.norm() > 1.0);
            } else {
                assert!(z.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn multiplier_identity_and_contraction() {
        let grid = Grid::new(&[128], &[8.0]).unwrap();
        let s = random_state(&grid, 3);
        let ones = vec![1.0; grid.len()];
        assert!(rel_err(&s.multiply(&ones, Space::Frequency).unwrap(), &s) < 1e-12);
        let half: Vec<f64> = grid.position_field(|x| if x[0] < 0.0 { 1.0 } else { 0.0 });
        assert!(s.multiply(&half, Space::Position).unwrap().l2_norm() <= s.l2_norm());
        assert!(s.multiply(&vec![1.0; 3], Space::Position).is_err());
    }

    #[test]
    fn free_phase_multiplier_matches_closed_form_gaussian() {
        // i psi_t = -psi_xx with psi_0 = e^{-x^2/2s^2} has
        // psi(t) = (s^2/(s^2+2it))^{1/2} e^{-x^2 / 2(s^2 + 2it)}.
        let grid = Grid::new(&[1024], &[60.0]).unwrap();
        let s = 1.3;
        let t = 2.5;
        let psi0 = WaveFunction::from_position_fn(&grid, 0.0, |x| {
            Complex64::new((-x[0] * x[0] / (2.0 * s * s)).exp(), 0.0)
        });
        let phase: Vec<Complex64> = grid
            .frequency_squared()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -t * k2))
            .collect();
        let out = psi0.multiply(&phase, Space::Frequency).unwrap();
        let w = Complex64::new(s * s, 2.0 * t);
        let exact = WaveFunction::from_position_fn(&grid, 0.0, |x| {
            (Complex64::new(s * s, 0.0) / w).sqrt() * (-(x[0] * x[0]) / (2.0 * w)).exp()
        });
        assert!(rel_err(&out, &exact) < 1e-10);
    }

    #[test]
    fn norms_of_gaussians_and_plane_waves() {
        let grid = Grid::new(&[1024], &[30.0]).unwrap();
        let sigma = 1.1;
        let g = gaussian(&grid, &[0.0], sigma);
        assert!((g.norm(NormSpec::L2).unwrap() - 1.0).abs() < 1e-10);

        // \int |psi|^6 = (pi s^2)^{-3/2} s sqrt(pi/3)
        let exact6 = ((PI * sigma * sigma).powf(-1.5) * sigma * (PI / 3.0).sqrt()).powf(1.0 / 6.0);
        assert!((g.norm(NormSpec::Lp(6.0)).unwrap() - exact6).abs() < 1e-10);
        assert!(g.norm(NormSpec::Lp(0.5)).is_err());
        let linf = g.norm(NormSpec::Lp(f64::INFINITY)).unwrap();
        assert!((linf - (PI * sigma * sigma).powf(-0.25)).abs() < 1e-10);

        let k0 = grid.axis(0).frequency(40);
        let pw = WaveFunction::from_position_fn(&grid, 0.0, |x| Complex64::from_polar(0.3, k0 * x[0]));
        let h1 = pw.norm(NormSpec::Ha(1.0)).unwrap();
        assert!((h1 - (1.0 + k0 * k0).sqrt() * pw.l2_norm()).abs() < 1e-10 * h1);
    }

    #[test]
    fn inner_products() {
        let grid = Grid::new(&[128], &[6.0]).unwrap();
        let f = random_state(&grid, 5);
        let g = random_state(&grid, 6);
        assert!((f.inner(&f).unwrap().re - f.mass()).abs() < 1e-12 * f.mass());
        let a = grid.axis(0);
        let (k1, k2) = (a.frequency(3), a.frequency(9));
        let p1 = WaveFunction::from_position_fn(&grid, 0.0, |x| Complex64::from_polar(1.0, k1 * x[0]));
        let p2 = WaveFunction::from_position_fn(&grid, 0.0, |x| Complex64::from_polar(1.0, k2 * x[0]));
        assert!(p1.inner(&p2).unwrap().norm() < 1e-12);
        let pos = f.inner(&g).unwrap();
        let freq = f.to_frequency().inner(&g.to_frequency()).unwrap();
        assert!((pos - freq).norm() < 1e-10 * pos.norm().max(1.0));
        assert!(f.inner(&g.to_frequency()).is_err());
        let other = Grid::new(&[128], &[7.0]).unwrap();
        assert!(f.inner(&random_state(&other, 1)).is_err());
    }

    #[test]
    fn first_absolute_moment_of_gaussian() {
        // |psi|^2 is a normal density with standard deviation sigma / sqrt 2.
        let grid = Grid::new(&[2048], &[40.0]).unwrap();
        let sigma = 2.0;
        let g = gaussian(&grid, &[0.0], sigma);
        let std = sigma / 2f64.sqrt();
        let m = g.x_moment(&MomentWeight::Abs).unwrap();
        // The kink of |x| at the origin leaves a rectangle-rule error of
        // -(dx^2 / 6) rho(0) (Euler-Maclaurin on each half line).
        let dx = grid.axis(0).spacing();
        let rho0 = 1.0 / ((2.0 * PI).sqrt() * std);
        let lattice = std * (2.0 / PI).sqrt() - dx * dx / 6.0 * rho0;
        assert!((m - lattice).abs() < 1e-8);
        assert!((m - std * (2.0 / PI).sqrt()).abs() < dx * dx);

        let shift = 64;
        let d = shift as f64 * grid.axis(0).spacing();
        let mut v = g.values().to_vec();
        v.rotate_right(shift);
        let moved = WaveFunction::new(grid.clone(), v, 0.0, Representation::Position).unwrap();
        let m2 = moved.x_moment(&MomentWeight::AbsFrom(vec![d])).unwrap();
        assert!((m - m2).abs() < 1e-10);

        let zero = WaveFunction::zeros(&grid, 0.0, Representation::Position);
        assert_eq!(zero.x_moment(&MomentWeight::Bracket).unwrap(), 0.0);
        assert!(g.to_frequency().x_moment(&MomentWeight::Abs).is_err());
    }

    #[test]
    fn boundary_mass_of_centered_packet_is_negligible() {
        let grid = Grid::new(&[256], &[20.0]).unwrap();
        assert!(gaussian(&grid, &[0.0], 1.0).boundary_mass_fraction() < 1e-12);
        assert!(gaussian(&grid, &[19.0], 1.0).boundary_mass_fraction() > 0.4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_holds(seed in 0u64..1000, dims in 1usize..=3) {
            let grid = Grid::uniform(dims, 16, 3.0).unwrap();
            let s = random_state(&grid, seed);
            let n2 = s.mass();
            prop_assert!((n2 - s.to_frequency().mass()).abs() <= 1e-10 * n2);
        }

        #[test]
        fn multiplier_composition(seed in 0u64..1000, freq in any::<bool>()) {
            let grid = Grid::new(&[64], &[4.0]).unwrap();
            let space = if freq { Space::Frequency } else { Space::Position };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
            let gh: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a * b).collect();
            let s = random_state(&grid, seed + 1);
            let two = s.multiply(&h, space).unwrap().multiply(&g, space).unwrap();
            let one = s.multiply(&gh, space).unwrap();
            prop_assert!(two.distance(&one).unwrap() <= 1e-12 * s.l2_norm().max(1.0) * 4.0);
        }

        #[test]
        fn bounded_multipliers_contract(seed in 0u64..1000) {
            let grid = Grid::new(&[64], &[4.0]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<Complex64> = (0..64)
                .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.0)))
                .collect();
            let s = random_state(&grid, seed);
            prop_assert!(s.multiply(&g, Space::Frequency).unwrap().l2_norm() <= s.l2_norm() * (1.0 + 1e-14));
        }
    }
}
