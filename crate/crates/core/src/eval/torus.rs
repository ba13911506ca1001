//! Angle recovery on the torus embedding and phase-speed comparison.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::eval::period::linear_slope;
use crate::linalg::{sq_dist, Matrix};
use crate::systems::torus_point;

/// Largest surface distance at which angles are still trusted.
pub const ANGLE_RECOVERY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusAngles {
    /// Poloidal angle.
    pub theta: f64,
    /// Toroidal angle.
    pub phi: f64,
    /// Distance from the point to `torus_point(theta, phi)`.
    pub distance: f64,
}

fn jacobian(theta: f64, phi: f64) -> [[f64; 2]; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        [-0.5 * st * cp, -(1.0 + 0.5 * ct) * sp],
        [0.5 * ct * sp, (1.0 + 0.5 * st) * cp],
        [0.5 * ct, 0.0],
    ]
}

/// Gauss-Newton polish of `(θ, φ)` towards the closest surface point.
fn polish(p: &[f64], mut theta: f64, mut phi: f64) -> (f64, f64) {
    for _ in 0..30 {
        let q = torus_point(theta, phi);
        let r = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        let j = jacobian(theta, phi);
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for k in 0..3 {
            for a in 0..2 {
                jtr[a] += j[k][a] * r[k];
                for b in 0..2 {
                    jtj[a][b] += j[k][a] * j[k][b];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let dt = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let dp = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        theta += dt;
        phi += dp;
        if dt.abs() + dp.abs() < 1e-14 {
            break;
        }
    }
    (theta, phi)
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn polished(p: &[f64], theta: f64, phi: f64) -> TorusAngles {
    let (t, f) = polish(p, theta, phi);
    TorusAngles {
        theta: wrap(t),
        phi: wrap(f),
        distance: sq_dist(p, &torus_point(t, f)).sqrt(),
    }
}

/// Closest point of the torus surface to `p`, as angles in `(−π, π]`.
///
/// The embedding folds onto itself along `φ = ±π/2`, where `θ` and `π − θ` give
/// the same point; there the answer is one of the two.
pub fn torus_angles(p: &[f64]) -> Result<TorusAngles> {
    if p.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: p.len() });
    }
    let s = (2.0 * p[2]).clamp(-1.0, 1.0);
    let c_abs = (1.0 - s * s).sqrt();
    let mut starts: Vec<(f64, f64)> = [c_abs, -c_abs]
        .iter()
        .map(|&c| ((s).atan2(c), (p[1] / (1.0 + 0.5 * s)).atan2(p[0] / (1.0 + 0.5 * c))))
        .collect();
    let grid = 16;
    let coarse = (0..grid * grid)
        .map(|k| {
            let t = 2.0 * PI * (k / grid) as f64 / grid as f64;
            let f = 2.0 * PI * (k % grid) as f64 / grid as f64;
            (t, f)
        })
        .min_by(|a, b| sq_dist(p, &torus_point(a.0, a.1)).total_cmp(&sq_dist(p, &torus_point(b.0, b.1))))
        .unwrap_or((0.0, 0.0));
    starts.push(coarse);
    starts
        .into_iter()
        .map(|(t, f)| polished(p, t, f))
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
        .ok_or(Error::EmptyInput("torus point"))
}

/// Unwrapped poloidal and toroidal angles of a trajectory plus the largest
/// surface distance met. Near the fold the solution continuing the previous
/// angular velocity is preferred.
pub fn torus_angle_series(states: &Matrix) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut theta: Vec<f64> = Vec::with_capacity(states.rows());
    let mut phi: Vec<f64> = Vec::with_capacity(states.rows());
    let mut worst = 0.0f64;
    for (i, r) in states.iter_rows().enumerate() {
        let mut a = torus_angles(r)?;
        if i >= 2 {
            let guess_t = 2.0 * theta[i - 1] - theta[i - 2];
            let guess_f = 2.0 * phi[i - 1] - phi[i - 2];
            let c = polished(r, guess_t, guess_f);
            if c.distance <= a.distance + 1e-9 {
                a = c;
            }
        }
        if a.distance > ANGLE_RECOVERY_TOLERANCE {
            return Err(Error::Data(format!(
                "state {i} lies {:.3} from the torus surface; angles cannot be recovered",
                a.distance
            )));
        }
        worst = worst.max(a.distance);
        let follow = |prev: Option<&f64>, a: f64| match prev {
            Some(&q) => q + (a - q + PI).rem_euclid(2.0 * PI) - PI,
            None => a,
        };
        theta.push(follow(theta.last(), a.theta));
        phi.push(follow(phi.last(), a.phi));
    }
    Ok((theta, phi, worst))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpeedError {
    /// `speed_rollout / speed_reference − 1` in the poloidal direction.
    pub poloidal: f64,
    pub toroidal: f64,
    pub max_surface_distance: f64,
}

/// Signed relative errors of the mean angular speeds of `rollout` against `reference`.
pub fn phase_speed_error(rollout: &Matrix, reference: &Matrix) -> Result<PhaseSpeedError> {
    let (rt, rp, d1) = torus_angle_series(rollout)?;
    let (et, ep, d2) = torus_angle_series(reference)?;
    let rel = |a: &[f64], b: &[f64]| -> Result<f64> { Ok(linear_slope(a)? / linear_slope(b)? - 1.0) };
    Ok(PhaseSpeedError {
        poloidal: rel(&rt, &et)?,
        toroidal: rel(&rp, &ep)?,
        max_surface_distance: d1.max(d2),
    })
}
