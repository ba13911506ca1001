//! Recurrence-based period estimation.
//!
//! `S(ℓ) = mean_i ‖x_{i+ℓ} − x_i‖²` is scanned over integer lags. The smallest
//! lag at which `S` has a local minimum whose refinement falls below
//! `(threshold · rms)²` is taken as the period, provided the recurrence also
//! holds at twice and three times that lag without growing. `rms` is the
//! root-mean-square distance of the states from their mean. The multiples matter
//! for quasiperiodic series, which come back close to themselves at some lags: a
//! near-return with error `ε` at lag `ℓ` has error about `kε` at `kℓ`, whereas a
//! true period recurs at every multiple with the same (interpolation-limited)
//! error.
//!
//! The refinement measures, for each sample, the squared distance to the nearest
//! point of the cubic (Catmull-Rom) interpolant of the orbit within one sample of
//! lag `ℓ`; the period is the mean lag of those nearest points.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodOptions {
    /// Recurrence threshold as a fraction of the RMS amplitude.
    pub threshold: f64,
    /// Largest lag examined; defaults to just under a third of the series.
    pub max_lag: Option<usize>,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            max_lag: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodEstimate {
    /// Period in time units (`period_steps · dt`).
    pub period: f64,
    pub period_steps: f64,
    /// Half a lag cell, in time units.
    pub uncertainty: f64,
    /// Refined recurrence distance relative to the RMS amplitude.
    pub relative_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Periodicity {
    Periodic(PeriodEstimate),
    /// No lag recurs below the threshold; the closest approach is reported.
    Aperiodic { best_lag_steps: f64, relative_distance: f64 },
    /// All states coincide.
    Constant,
}

impl Periodicity {
    pub fn period(&self) -> Option<f64> {
        match self {
            Periodicity::Periodic(p) => Some(p.period),
            _ => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Periodicity::Periodic(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Periodicity::Periodic(_) => "periodic",
            Periodicity::Aperiodic { .. } => "aperiodic",
            Periodicity::Constant => "constant",
        }
    }
}

fn lag_distance(series: &Matrix, lag: usize) -> f64 {
    let n = series.rows() - lag;
    (0..n).map(|i| sq_dist(series.row(i + lag), series.row(i))).sum::<f64>() / n as f64
}

/// Point at fractional index `s` of the Catmull-Rom spline through the rows.
/// Needs `1 ≤ ⌊s⌋` and `⌊s⌋ + 2 < rows`.
fn spline_point(series: &Matrix, s: f64, out: &mut [f64]) {
    let b = s.floor() as usize;
    let t = s - b as f64;
    let (t2, t3) = (t * t, t * t * t);
    let w = [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ];
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, wj) in w.iter().enumerate() {
        for (v, x) in out.iter_mut().zip(series.row(b + j - 1)) {
            *v += wj * x;
        }
    }
}

/// Golden-section search for the point of the spline nearest to row `i` with
/// index offset in `[l − 1, l + 1]`. Returns the offset and squared distance.
fn nearest_on_curve(series: &Matrix, i: usize, l: usize, buf: &mut [f64]) -> (f64, f64) {
    let target = series.row(i);
    let mut f = |tau: f64| {
        spline_point(series, (i + l) as f64 + tau, buf);
        sq_dist(buf, target)
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-1.0, 1.0 - 1e-9);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..30 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (tau, v) = if fc < fd { (c, fc) } else { (d, fd) };
    (l as f64 + tau, v)
}

/// Refine an integer lag: every sample is compared with the nearest point of the
/// interpolated orbit about `l` samples later. Returns the mean fractional lag of
/// those points and the mean squared distance to them.
///
/// Comparing against the nearest point rather than the point at a common
/// fractional lag keeps maps with an uneven advance per step (a learned circle
/// map, say) from looking aperiodic because of interpolation in the index.
fn refine(series: &Matrix, l: usize) -> Option<(f64, f64)> {
    let n = series.rows();
    if l < 2 || l + 4 >= n {
        return None;
    }
    let count = n - l - 3;
    let parts: Vec<(f64, f64)> = (0..count)
        .collect::<Vec<_>>()
        .par_chunks(256)
        .map(|chunk| {
            let mut buf = vec![0.0; series.cols()];
            chunk.iter().fold((0.0, 0.0), |acc, &i| {
                let (lag, v) = nearest_on_curve(series, i, l, &mut buf);
                (acc.0 + lag, acc.1 + v)
            })
        })
        .collect();
    let (lags, dist) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    Some((lags / count as f64, dist / count as f64))
}

pub fn estimate_period(series: &Matrix, dt: f64) -> Result<Periodicity> {
    estimate_period_with(series, dt, &PeriodOptions::default())
}

pub fn estimate_period_with(series: &Matrix, dt: f64, opts: &PeriodOptions) -> Result<Periodicity> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let n = series.rows();
    if n < 16 {
        return Err(Error::InvalidArgument(format!("{n} samples are too few for a period estimate")));
    }
    let mean = series.column_means();
    let ms = series.iter_rows().map(|r| sq_dist(r, &mean)).sum::<f64>() / n as f64;
    if ms == 0.0 {
        return Ok(Periodicity::Constant);
    }
    let max_lag = opts.max_lag.unwrap_or((n - 6) / 3).clamp(2, n - 6);
    let s: Vec<f64> = (0..=max_lag + 1)
        .into_par_iter()
        .map(|l| if l == 0 { 0.0 } else { lag_distance(series, l) })
        .collect();
    let limit = (opts.threshold * opts.threshold) * ms;
    // A recurrence within the threshold at a fractional lag lies within half a
    // step of some integer lag.
    let screen = (limit.sqrt() + 0.6 * s[1].sqrt()).powi(2);
    let mut best = (0.0, f64::INFINITY);
    for l in 2..=max_lag {
        if !(s[l] <= s[l - 1] && s[l] <= s[l + 1]) || s[l] > screen {
            continue;
        }
        let Some((lag, v)) = refine(series, l) else { continue };
        if v < best.1 {
            best = (lag, v);
        }
        if v > limit {
            continue;
        }
        let at = |k: f64| refine(series, (k * lag).round() as usize).map(|(_, v)| v.sqrt());
        let confirmed = match (at(2.0), at(3.0)) {
            (Some(d2), Some(d3)) => {
                d2 * d2 <= limit && d3 * d3 <= limit && d3 <= 2.0 * v.sqrt() + 0.1 * limit.sqrt()
            }
            _ => false,
        };
        if confirmed {
            return Ok(Periodicity::Periodic(PeriodEstimate {
                period: lag * dt,
                period_steps: lag,
                uncertainty: 0.5 * dt,
                relative_distance: (v / ms).sqrt(),
            }));
        }
    }
    if best.1.is_infinite() {
        let l = (2..=max_lag).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
        best = (l as f64, s[l]);
    }
    Ok(Periodicity::Aperiodic {
        best_lag_steps: best.0,
        relative_distance: (best.1 / ms).sqrt(),
    })
}

/// Least-squares slope of `values` against sample index.
pub fn linear_slope(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two values for a slope".into()));
    }
    let tm = (n - 1) as f64 / 2.0;
    let vm = values.iter().sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let t = i as f64 - tm;
        num += t * (v - vm);
        den += t * t;
    }
    Ok(num / den)
}

/// Time for the (unwrapped) phase to advance by 2π, from its mean drift.
pub fn travelling_period(phases: &[f64], dt: f64) -> Result<f64> {
    let slope = linear_slope(phases)?;
    if slope == 0.0 {
        return Err(Error::InvalidArgument("phase does not drift".into()));
    }
    Ok(2.0 * std::f64::consts::PI * dt / slope.abs())
}
