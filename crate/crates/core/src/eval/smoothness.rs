//! Size of the first and second differences of a decoded trajectory at chart
//! transitions, compared with their typical size inside a chart.

use crate::dynamics::Trajectory;
use crate::linalg::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionJump {
    /// First record in the new chart.
    pub step: usize,
    pub from: usize,
    pub to: usize,
    /// `‖x_s − x_{s−1}‖`.
    pub first: f64,
    /// `‖x_{s+1} − 2x_s + x_{s−1}‖`, when `x_{s+1}` exists.
    pub second: Option<f64>,
    pub first_ratio: f64,
    pub second_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoothnessReport {
    pub median_first: f64,
    pub median_second: f64,
    pub jumps: Vec<TransitionJump>,
}

impl SmoothnessReport {
    pub fn max_first_ratio(&self) -> Option<f64> {
        self.jumps.iter().map(|j| j.first_ratio).reduce(f64::max)
    }

    pub fn max_second_ratio(&self) -> Option<f64> {
        self.jumps.iter().filter_map(|j| j.second_ratio).reduce(f64::max)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn second_diff(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((a, b), c)| (c - 2.0 * b + a).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn transition_smoothness(traj: &Trajectory) -> SmoothnessReport {
    let recs = &traj.records;
    if traj.transitions.is_empty() || recs.len() < 3 {
        return SmoothnessReport {
            jumps: Vec::new(),
            ..Default::default()
        };
    }
    let is_transition = |s: usize| traj.transitions.iter().any(|t| t.0 == s);
    let mut firsts = Vec::new();
    let mut seconds = Vec::new();
    for s in 1..recs.len() {
        if is_transition(s) {
            continue;
        }
        firsts.push(sq_dist(&recs[s].x, &recs[s - 1].x).sqrt());
        if s + 1 < recs.len() && !is_transition(s + 1) {
            seconds.push(second_diff(&recs[s - 1].x, &recs[s].x, &recs[s + 1].x));
        }
    }
    let median_first = median(firsts);
    let median_second = median(seconds);
    let jumps = traj
        .transitions
        .iter()
        .filter(|t| t.0 >= 1 && t.0 < recs.len())
        .map(|&(s, from, to)| {
            let first = sq_dist(&recs[s].x, &recs[s - 1].x).sqrt();
            let second = (s + 1 < recs.len()).then(|| second_diff(&recs[s - 1].x, &recs[s].x, &recs[s + 1].x));
            TransitionJump {
                step: s,
                from,
                to,
                first,
                second,
                first_ratio: first / median_first,
                second_ratio: second.map(|v| v / median_second),
            }
        })
        .collect();
    SmoothnessReport {
        median_first,
        median_second,
        jumps,
    }
}
