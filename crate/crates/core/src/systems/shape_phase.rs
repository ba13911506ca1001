//! Factor a periodic field into a phase (translation) and a phase-aligned shape.
//!
//! With `û_k = Σ_j u_j e^{−2πijk/n}`, the phase is `arg(û_1)`, so `u = cos(x − a)`
//! has phase `−a`. The shape has coefficients `û_k e^{−ik·phase}` and therefore a
//! real, positive first mode. The Nyquist coefficient cannot be rotated by a
//! fractional shift and still describe a real field, so it passes through unchanged
//! in both directions.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapePhase {
    pub shape: Vec<f64>,
    pub phase: f64,
}

fn spectrum(u: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(u.len()).process(&mut buf);
    buf
}

fn field(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn rotate(u: &[f64], phase: f64, sign: f64) -> Vec<f64> {
    let n = u.len();
    let mut uh = spectrum(u);
    for (j, c) in uh.iter_mut().enumerate() {
        if 2 * j == n {
            continue;
        }
        let k = if 2 * j < n { j as f64 } else { j as f64 - n as f64 };
        *c *= Complex64::from_polar(1.0, sign * k * phase);
    }
    field(uh)
}

/// Fourier coefficient `û_k` (unnormalized forward transform).
pub fn fourier_mode(u: &[f64], k: usize) -> Complex64 {
    spectrum(u)[k]
}

pub fn shape_phase_split(u: &[f64]) -> Result<ShapePhase> {
    if u.len() < 4 {
        return Err(Error::InvalidArgument("field needs at least 4 points".into()));
    }
    let u1 = fourier_mode(u, 1);
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())) * u.len() as f64;
    if u1.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::UndefinedPhase);
    }
    let phase = u1.arg();
    Ok(ShapePhase {
        shape: rotate(u, phase, -1.0),
        phase,
    })
}

/// Inverse of [`shape_phase_split`] for any phase, wrapped or not.
pub fn reconstruct_field(shape: &[f64], phase: f64) -> Vec<f64> {
    rotate(shape, phase, 1.0)
}

/// Split every row; phases are unwrapped so consecutive samples differ by less than π.
pub fn shape_phase_series(fields: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let mut shapes = Vec::with_capacity(fields.rows());
    let mut phases: Vec<f64> = Vec::with_capacity(fields.rows());
    for row in fields.iter_rows() {
        let sp = shape_phase_split(row)?;
        let phase = match phases.last() {
            None => sp.phase,
            Some(&prev) => {
                let d = (sp.phase - prev).rem_euclid(2.0 * PI);
                prev + if d > PI { d - 2.0 * PI } else { d }
            }
        };
        shapes.push(sp.shape);
        phases.push(phase);
    }
    Ok((Matrix::from_rows(&shapes)?, phases))
}

/// Smallest-magnitude representative of `b − a` modulo 2π.
pub fn phase_deltas(from: &[f64], to: &[f64]) -> Vec<f64> {
    from.iter()
        .zip(to)
        .map(|(a, b)| {
            let d = (b - a).rem_euclid(2.0 * PI);
            if d > PI {
                d - 2.0 * PI
            } else {
                d
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::spatial_grid;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn cosine_has_zero_phase() {
        let u: Vec<f64> = spatial_grid(64).iter().map(|x| x.cos()).collect();
        let sp = shape_phase_split(&u).unwrap();
        assert!(sp.phase.abs() < 1e-14);
        assert!(close(&sp.shape, &u, 1e-13));
    }

    #[test]
    fn shifted_cosine() {
        let a = 0.7;
        let grid = spatial_grid(64);
        let u: Vec<f64> = grid.iter().map(|x| (x - a).cos()).collect();
        let sp = shape_phase_split(&u).unwrap();
        assert!((sp.phase + a).abs() < 1e-13);
        let want: Vec<f64> = grid.iter().map(|x| x.cos()).collect();
        assert!(close(&sp.shape, &want, 1e-13));
    }

    #[test]
    fn vanishing_first_mode() {
        let u: Vec<f64> = spatial_grid(64).iter().map(|x| (2.0 * x).cos()).collect();
        assert!(matches!(shape_phase_split(&u), Err(Error::UndefinedPhase)));
    }

    #[test]
    fn unwrapping_is_continuous() {
        let grid = spatial_grid(32);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|t| grid.iter().map(|x| (x + 0.4 * t as f64).sin()).collect())
            .collect();
        let (_, phases) = shape_phase_series(&Matrix::from_rows(&rows).unwrap()).unwrap();
        for w in phases.windows(2) {
            assert!((w[1] - w[0] - 0.4).abs() < 1e-12);
        }
        assert!((phase_deltas(&[3.0], &[-3.0])[0] - (2.0 * PI - 6.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_band_limited(
            coef in proptest::collection::vec(-1.0f64..1.0, 20),
            a1 in 0.1f64..2.0,
        ) {
            let grid = spatial_grid(64);
            let u: Vec<f64> = grid
                .iter()
                .map(|x| {
                    let mut v = coef[0] + a1 * (x + coef[1]).cos();
                    for k in 2..10 {
                        v += coef[2 * k] * (k as f64 * x).cos() + coef[2 * k + 1] * (k as f64 * x).sin();
                    }
                    v
                })
                .collect();
            let sp = shape_phase_split(&u).unwrap();
            let m1 = fourier_mode(&sp.shape, 1);
            prop_assert!(m1.im.abs() < 1e-10 * m1.norm() && m1.re > 0.0);
            prop_assert!(close(&reconstruct_field(&sp.shape, sp.phase), &u, 1e-10));
            prop_assert!(close(&reconstruct_field(&sp.shape, sp.phase + 4.0 * PI), &u, 1e-10));
        }
    }
}
