use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Inertia after each assignment step, starting with the seeded centroids.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn nearest_centroid(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then proportional to squared distance.
fn seed_centroids(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            // All remaining points coincide with a centre.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Lloyd iterations from k-means++ seeding until the assignment stops changing.
///
/// A cluster left empty is re-seeded at the point farthest from its current
/// centroid (lowest index on ties) that does not leave another cluster empty.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    let n = points.rows();
    if n == 0 {
        return Err(Error::EmptyInput("k-means input"));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} with {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut changed = false;
        let mut total = 0.0;
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter_rows().enumerate() {
            let (c, d) = nearest_centroid(p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dist[i] = d;
            total += d;
        }
        inertia.push(total);
        if !changed {
            converged = true;
            break;
        }
        if iterations == max_iters {
            break;
        }
        iterations += 1;
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = donor {
                counts[labels[i]] -= 1;
                counts[c] += 1;
                labels[i] = c;
                dist[i] = 0.0;
            }
        }
        let mut sums = Matrix::zeros(k, points.cols());
        for (i, p) in points.iter_rows().enumerate() {
            sums.row_mut(labels[i]).iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
            } else {
                sums.row_mut(c).copy_from_slice(centroids.row(c));
            }
        }
        centroids = sums;
    }
    Ok(KMeans {
        labels,
        centroids,
        inertia,
        iterations,
        converged,
    })
}
