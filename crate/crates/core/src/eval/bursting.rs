//! Long-time behaviour of bursting trajectories.
//!
//! The two saddles of the bursting attractor sit at opposite signs of `Re û₂`, so a
//! burst shows up as a crossing between the bands `Re û₂ > h` and `Re û₂ < −h`,
//! with `h` half the typical quiescent level. Which of the heteroclinic orbits was
//! taken is read from the direction of `û₁` during the crossing, quantised to one
//! of four quadrants; the symbol of a burst is that quadrant together with the
//! crossing direction. Cycles are then found in the symbol sequence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::eval::period::{estimate_period, Periodicity};
use crate::linalg::{sq_dist, Matrix};
use crate::systems::fourier_mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BurstingVerdict {
    Aperiodic,
    OneCycle,
    TwoCycles,
    LongCycle,
    FixedPoint,
}

impl BurstingVerdict {
    pub fn label(self) -> &'static str {
        match self {
            BurstingVerdict::Aperiodic => "aperiodic",
            BurstingVerdict::OneCycle => "one-cycle",
            BurstingVerdict::TwoCycles => "two-cycles",
            BurstingVerdict::LongCycle => "long-cycle",
            BurstingVerdict::FixedPoint => "fixed-point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstingOptions {
    /// Fraction of the trajectory, at its end, checked for a fixed point.
    pub trailing_fraction: f64,
    /// Relative variance below which the trailing window counts as stationary.
    pub fixed_point_tolerance: f64,
    /// Band half-width as a fraction of the median `|Re û₂|`.
    pub band_fraction: f64,
    /// Leading bursts ignored as transient.
    pub skip_bursts: usize,
    /// A symbol cycle must repeat this many times to be accepted.
    pub min_repeats: usize,
    /// Below this many bursts the verdict falls back on a recurrence test.
    pub min_bursts: usize,
}

impl Default for BurstingOptions {
    fn default() -> Self {
        Self {
            trailing_fraction: 0.25,
            fixed_point_tolerance: 1e-6,
            band_fraction: 0.5,
            skip_bursts: 1,
            min_repeats: 3,
            min_bursts: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstEvent {
    /// Last sample in the band being left.
    pub departure: usize,
    /// First sample in the band being entered.
    pub arrival: usize,
    /// `true` when `Re û₂` goes from negative to positive.
    pub upward: bool,
    /// Quadrant of `û₁` during the crossing, `0..4`.
    pub quadrant: u8,
    pub symbol: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstingAnalysis {
    pub verdict: BurstingVerdict,
    pub events: Vec<BurstEvent>,
    /// Symbol cycle in canonical rotation, when one was found.
    pub cycle: Option<Vec<u8>>,
    /// Quiescent durations between an arrival and the next departure, in time units.
    pub dwell_times: Vec<f64>,
}

fn quadrant(c: Complex64) -> u8 {
    ((c.arg() / (PI / 2.0)).round() as i64).rem_euclid(4) as u8
}

/// Burst crossings of a field trajectory (rows are 64-point fields).
pub fn burst_events(fields: &Matrix, opts: &BurstingOptions) -> Vec<BurstEvent> {
    let re2: Vec<f64> = fields.iter_rows().map(|r| fourier_mode(r, 2).re).collect();
    let mut mags: Vec<f64> = re2.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let level = mags.get(mags.len() / 2).copied().unwrap_or(0.0);
    let h = opts.band_fraction * level;
    if !(h > 0.0) {
        return Vec::new();
    }
    let mut events = Vec::new();
    let mut state: Option<(bool, usize)> = None;
    for (i, &v) in re2.iter().enumerate() {
        let band = if v > h {
            Some(true)
        } else if v < -h {
            Some(false)
        } else {
            None
        };
        match (band, state) {
            (Some(b), None) => state = Some((b, i)),
            (Some(b), Some((prev, _))) if b == prev => state = Some((b, i)),
            (Some(b), Some((_, last))) => {
                let u1: Complex64 = (last..=i).map(|k| fourier_mode(fields.row(k), 1)).sum();
                let q = quadrant(u1);
                events.push(BurstEvent {
                    departure: last,
                    arrival: i,
                    upward: b,
                    quadrant: q,
                    symbol: 2 * q + u8::from(b),
                });
                state = Some((b, i));
            }
            (None, _) => {}
        }
    }
    events
}

/// Smallest period of `symbols` repeated at least `min_repeats` times.
pub fn symbol_period(symbols: &[u8], min_repeats: usize) -> Option<usize> {
    let n = symbols.len();
    (1..=n / min_repeats.max(1)).find(|&p| (0..n - p).all(|i| symbols[i] == symbols[i + p]))
}

/// Lexicographically smallest rotation, so equal cycles compare equal.
pub fn canonical_cycle(cycle: &[u8]) -> Vec<u8> {
    (0..cycle.len())
        .map(|s| cycle[s..].iter().chain(&cycle[..s]).copied().collect::<Vec<u8>>())
        .min()
        .unwrap_or_default()
}

/// Verdict for a symbol sequence alone: period 1 or 2 is a single simple cycle.
pub fn classify_symbols(symbols: &[u8], min_repeats: usize) -> (BurstingVerdict, Option<Vec<u8>>) {
    match symbol_period(symbols, min_repeats) {
        Some(p) => {
            let cycle = canonical_cycle(&symbols[symbols.len() - p..]);
            let v = if p <= 2 {
                BurstingVerdict::OneCycle
            } else {
                BurstingVerdict::LongCycle
            };
            (v, Some(cycle))
        }
        None => (BurstingVerdict::Aperiodic, None),
    }
}

fn is_stationary(window: &Matrix, tol: f64) -> bool {
    let mean = window.column_means();
    let n = window.rows() as f64;
    let var = window.iter_rows().map(|r| sq_dist(r, &mean)).sum::<f64>() / n;
    let scale = window.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n;
    var <= tol * scale.max(f64::MIN_POSITIVE)
}

pub fn classify_bursting_behavior(fields: &Matrix, dt: f64, opts: &BurstingOptions) -> Result<BurstingAnalysis> {
    let n = fields.rows();
    if n < 16 {
        return Err(Error::InvalidArgument(format!("{n} samples are too few to classify")));
    }
    let start = n - ((n as f64 * opts.trailing_fraction).ceil() as usize).clamp(4, n);
    let trailing = fields.select_rows(&(start..n).collect::<Vec<_>>());
    let events = if is_stationary(&trailing, opts.fixed_point_tolerance) {
        Vec::new()
    } else {
        burst_events(fields, opts)
    };
    let dwell_times = events
        .windows(2)
        .map(|w| (w[1].departure - w[0].arrival) as f64 * dt)
        .collect();
    let (verdict, cycle) = if is_stationary(&trailing, opts.fixed_point_tolerance) {
        (BurstingVerdict::FixedPoint, None)
    } else if events.len() >= opts.min_bursts + opts.skip_bursts {
        let symbols: Vec<u8> = events[opts.skip_bursts..].iter().map(|e| e.symbol).collect();
        classify_symbols(&symbols, opts.min_repeats)
    } else {
        let half = fields.select_rows(&(n / 2..n).collect::<Vec<_>>());
        match estimate_period(&half, dt)? {
            Periodicity::Periodic(_) => (BurstingVerdict::OneCycle, None),
            Periodicity::Constant => (BurstingVerdict::FixedPoint, None),
            Periodicity::Aperiodic { .. } => (BurstingVerdict::Aperiodic, None),
        }
    };
    Ok(BurstingAnalysis {
        verdict,
        events,
        cycle,
        dwell_times,
    })
}

/// Combine trajectories of one model started from different states: two or more
/// distinct cycles mean coexisting stable cycles; otherwise the most common
/// verdict wins, ties going to the richer behaviour.
pub fn classify_bursting_ensemble(analyses: &[BurstingAnalysis]) -> Option<BurstingVerdict> {
    let mut cycles: Vec<Option<&Vec<u8>>> = analyses
        .iter()
        .filter(|a| matches!(a.verdict, BurstingVerdict::OneCycle | BurstingVerdict::LongCycle))
        .map(|a| a.cycle.as_ref())
        .collect();
    cycles.sort();
    cycles.dedup();
    if cycles.len() >= 2 {
        return Some(BurstingVerdict::TwoCycles);
    }
    let mut counts: BTreeMap<BurstingVerdict, usize> = BTreeMap::new();
    for a in analyses {
        *counts.entry(a.verdict).or_default() += 1;
    }
    counts.into_iter().fold(None, |best: Option<(BurstingVerdict, usize)>, (v, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((v, c)),
    })
    .map(|(v, _)| v)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::systems::spatial_grid;

    /// Fields with a prescribed `Re û₂` level and a `û₁` burst in a given direction.
    pub(crate) fn synthetic_bursts(pattern: &[u8], quiet: usize, burst: usize) -> Matrix {
        let grid = spatial_grid(64);
        let mut rows = Vec::new();
        let mut level = 1.0;
        for &q in pattern.iter().cycle().take(pattern.len() * 8) {
            let angle = q as f64 * PI / 2.0 + 0.2;
            for _ in 0..quiet {
                rows.push(grid.iter().map(|x| level * (2.0 * x).cos() + 0.01 * (x - 0.3).sin()).collect::<Vec<f64>>());
            }
            for k in 0..burst {
                let s = (k as f64 + 0.5) / burst as f64;
                let a2 = level * (PI * s).cos();
                let amp = 2.0 * (PI * s).sin();
                rows.push(grid.iter().map(|x| a2 * (2.0 * x).cos() + amp * (x + angle).cos()).collect());
            }
            level = -level;
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let rows = vec![spatial_grid(64).iter().map(|x| x.cos()).collect::<Vec<f64>>(); 200];
        let a = classify_bursting_behavior(&Matrix::from_rows(&rows).unwrap(), 0.05, &Default::default()).unwrap();
        assert_eq!(a.verdict, BurstingVerdict::FixedPoint);
    }

    #[test]
    fn symbol_sequences() {
        assert_eq!(classify_symbols(&[0, 1, 0, 1, 0, 1], 3).0, BurstingVerdict::OneCycle);
        assert_eq!(classify_symbols(&[0, 1, 2, 0, 1, 2, 0, 1, 2], 3).0, BurstingVerdict::LongCycle);
        let seq = [2, 1, 0, 3, 0, 1, 2, 3, 2, 1, 2, 1, 0, 1, 0, 3];
        assert_eq!(classify_symbols(&seq, 3).0, BurstingVerdict::Aperiodic);
        assert_eq!(canonical_cycle(&[3, 1, 2]), vec![1, 2, 3]);
    }

    #[test]
    fn synthetic_one_cycle_and_offset_invariance() {
        let f = synthetic_bursts(&[2, 1], 60, 20);
        let a = classify_bursting_behavior(&f, 0.05, &Default::default()).unwrap();
        assert_eq!(a.verdict, BurstingVerdict::OneCycle);
        assert_eq!(a.events.len(), 16);
        assert!(a.dwell_times.iter().all(|&d| (d - a.dwell_times[0]).abs() < 1e-9));
        let shifted = f.select_rows(&(110..f.rows()).collect::<Vec<_>>());
        let b = classify_bursting_behavior(&shifted, 0.05, &Default::default()).unwrap();
        assert_eq!((b.verdict, &b.cycle), (a.verdict, &a.cycle));
    }

    #[test]
    fn synthetic_long_cycle_and_two_cycles() {
        let long = classify_bursting_behavior(&synthetic_bursts(&[2, 1, 0, 3], 60, 20), 0.05, &Default::default()).unwrap();
        assert_eq!(long.verdict, BurstingVerdict::LongCycle);
        let a = classify_bursting_behavior(&synthetic_bursts(&[2, 1], 60, 20), 0.05, &Default::default()).unwrap();
        let b = classify_bursting_behavior(&synthetic_bursts(&[0, 3], 60, 20), 0.05, &Default::default()).unwrap();
        assert_eq!(classify_bursting_ensemble(&[a.clone(), b]), Some(BurstingVerdict::TwoCycles));
        assert_eq!(classify_bursting_ensemble(&[a.clone(), a]), Some(BurstingVerdict::OneCycle));
    }
}
