//! Example datasets: a circle, periodic and quasiperiodic orbits on a torus, and
//! three Kuramoto-Sivashinsky regimes.

mod ks;
mod shape_phase;

use std::f64::consts::PI;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use ks::{
    ks_series,
    gen_bursting_dynamics_dataset, gen_ks_dataset, ks_initial_condition, ks_simulate,
    BurstingDynamicsData, KsConfig, KsRegime, KsSolver, PerturbationConfig,
};
pub use shape_phase::{
    fourier_mode, phase_deltas, reconstruct_field, shape_phase_series, shape_phase_split,
    ShapePhase,
};

/// Grid `x_j = 2πj/n` used for all sampled fields.
pub fn spatial_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

fn dataset_from_fn(n: usize, dt: f64, point: impl Fn(usize) -> Vec<f64>) -> Result<Dataset> {
    let points: Vec<Vec<f64>> = (0..n).map(&point).collect();
    let successors: Vec<Vec<f64>> = (1..=n).map(&point).collect();
    Dataset::new(Matrix::from_rows(&points)?, Matrix::from_rows(&successors)?, dt)
}

/// `n` points counterclockwise on the unit circle, `θ_i = 2πi/n`.
pub fn gen_circle(n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("circle needs at least 2 points".into()));
    }
    dataset_from_fn(n, 1.0, |i| {
        let theta = 2.0 * PI * (i % n) as f64 / n as f64;
        vec![theta.cos(), theta.sin()]
    })
}

/// Torus embedding used for both torus datasets. Note the `y` component uses
/// `sin θ` rather than the `cos θ` of a standard torus of revolution.
pub fn torus_point(theta: f64, phi: f64) -> [f64; 3] {
    [
        (1.0 + 0.5 * theta.cos()) * phi.cos(),
        (1.0 + 0.5 * theta.sin()) * phi.sin(),
        0.5 * theta.sin(),
    ]
}

/// One toroidal period, winding three times poloidally: `φ_i = 2πi/n`, `θ = 3φ`.
pub fn gen_torus_periodic(n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("torus needs at least 2 points".into()));
    }
    dataset_from_fn(n, 1.0, |i| {
        let phi = 2.0 * PI * (i % n) as f64 / n as f64;
        torus_point(3.0 * phi, phi).to_vec()
    })
}

pub const QUASIPERIODIC_STEP: f64 = 3.0 * PI / 100.0;

/// `φ_i = (3π/100) i`, `θ = √3 φ`; 1000 points cover 15 toroidal periods.
pub fn gen_torus_quasiperiodic(n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("torus needs at least 2 points".into()));
    }
    dataset_from_fn(n, 1.0, |i| {
        let phi = QUASIPERIODIC_STEP * i as f64;
        torus_point(3f64.sqrt() * phi, phi).to_vec()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sq_dist;

    #[test]
    fn circle_of_four() {
        let d = gen_circle(4).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (i, w) in want.iter().enumerate() {
            assert!(sq_dist(d.points().row(i), w) < 1e-30);
            assert_eq!(d.successors().row(i), d.points().row((i + 1) % 4));
        }
    }

    #[test]
    fn circle_of_forty_on_unit_circle() {
        let d = gen_circle(40).unwrap();
        assert_eq!((d.len(), d.ambient_dim()), (40, 2));
        for r in d.points().iter_rows() {
            assert!((r[0].hypot(r[1]) - 1.0).abs() < 1e-15);
        }
        assert_eq!(d.successors().row(39), d.points().row(0));
    }

    #[test]
    fn torus_point_values() {
        let p = torus_point(0.0, 0.0);
        assert_eq!(p, [1.5, 0.0, 0.0]);
        let q = torus_point(PI / 2.0, PI / 2.0);
        assert!(sq_dist(&q, &[0.0, 1.5, 0.5]) < 1e-30);
    }

    #[test]
    fn torus_point_matches_independent_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let t: f64 = rng.random_range(-10.0..10.0);
            let f: f64 = rng.random_range(-10.0..10.0);
            let r = 1.0 + 0.5 * t.cos();
            let s = 1.0 + 0.5 * t.sin();
            let want = [r * f.cos(), s * f.sin(), t.sin() / 2.0];
            assert!(sq_dist(&torus_point(t, f), &want) < 1e-28);
        }
    }

    #[test]
    fn periodic_torus_closes() {
        let d = gen_torus_periodic(100).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.points().row(0), &torus_point(0.0, 0.0));
        assert_eq!(d.successors().row(99), d.points().row(0));
        for i in [0, 17, 50] {
            let phi = 2.0 * PI * i as f64 / 100.0;
            assert_eq!(d.points().row(i), &torus_point(3.0 * phi, phi));
        }
    }

    #[test]
    fn quasiperiodic_torus_spans_fifteen_periods() {
        let d = gen_torus_quasiperiodic(1000).unwrap();
        assert_eq!(d.points().row(0), &torus_point(0.0, 0.0));
        let last_phi = QUASIPERIODIC_STEP * 999.0;
        assert!(last_phi < 30.0 * PI && QUASIPERIODIC_STEP * 1000.0 >= 30.0 * PI - 1e-12);
        let mut min = f64::INFINITY;
        for i in 0..1000 {
            for j in 0..i {
                min = min.min(sq_dist(d.points().row(i), d.points().row(j)));
            }
        }
        assert!(min > 0.0);
        assert_eq!(d.successors().row(10), d.points().row(11));
    }
}
