use crate::error::{check_dim, Error, Result};
use crate::linalg::{pca, Matrix};

/// Centre, rotate onto principal axes and scale each axis to unit variance.
/// No dimensions are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener {
    pub mean: Vec<f64>,
    /// Row `i` is the `i`-th principal axis.
    pub rotation: Matrix,
    pub scales: Vec<f64>,
}

/// Relative variance below which a principal direction counts as degenerate.
const DEGENERATE_RATIO: f64 = 1e-12;

pub fn fit_whitener(latent: &Matrix) -> Result<Whitener> {
    if latent.rows() < 2 {
        return Err(Error::EmptyInput("whitening needs at least two points"));
    }
    let p = pca(latent)?;
    let top = p.variances.first().copied().unwrap_or(0.0);
    for (axis, &v) in p.variances.iter().enumerate() {
        if !(v > DEGENERATE_RATIO * top.max(f64::MIN_POSITIVE)) || v <= 0.0 {
            return Err(Error::DegenerateDirection { axis, variance: v });
        }
    }
    Ok(Whitener {
        mean: p.mean,
        rotation: p.components,
        scales: p.variances.iter().map(|v| v.sqrt()).collect(),
    })
}

impl Whitener {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        let c: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.dim())
            .map(|i| crate::linalg::dot(self.rotation.row(i), &c) / self.scales[i])
            .collect())
    }

    pub fn invert(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        let mut z = self.mean.clone();
        for i in 0..self.dim() {
            let s = w[i] * self.scales[i];
            z.iter_mut().zip(self.rotation.row(i)).for_each(|(a, r)| *a += s * r);
        }
        Ok(z)
    }

    pub fn apply_batch(&self, zs: &Matrix) -> Result<Matrix> {
        Matrix::from_rows(&zs.iter_rows().map(|z| self.apply(z)).collect::<Result<Vec<_>>>()?)
    }
}
