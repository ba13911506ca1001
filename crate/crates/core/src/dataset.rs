use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Pairs `(p_i, p_i')` of ambient states one sampling interval apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Matrix,
    successors: Matrix,
    dt: f64,
}

impl Dataset {
    pub fn new(points: Matrix, successors: Matrix, dt: f64) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::EmptyInput("dataset"));
        }
        if points.rows() != successors.rows() || points.cols() != successors.cols() {
            return Err(Error::Data(format!(
                "points are {}x{} but successors are {}x{}",
                points.rows(),
                points.cols(),
                successors.rows(),
                successors.cols()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !points.all_finite() || !successors.all_finite() {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Dataset {
            points,
            successors,
            dt,
        })
    }

    /// Consecutive samples of one trajectory: `n` rows give `n - 1` pairs.
    pub fn from_series(series: &Matrix, dt: f64) -> Result<Self> {
        if series.rows() < 2 {
            return Err(Error::EmptyInput("time series needs at least two samples"));
        }
        let n = series.rows() - 1;
        let points = series.select_rows(&(0..n).collect::<Vec<_>>());
        let successors = series.select_rows(&(1..=n).collect::<Vec<_>>());
        Dataset::new(points, successors, dt)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn successors(&self) -> &Matrix {
        &self.successors
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.cols()
    }

    /// Same pairs with every ambient vector passed through `f`.
    pub fn map_states(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        let map = |m: &Matrix, f: &mut dyn FnMut(&[f64]) -> Vec<f64>| {
            Matrix::from_rows(&m.iter_rows().map(&mut *f).collect::<Vec<_>>())
        };
        let points = map(&self.points, &mut f)?;
        let successors = map(&self.successors, &mut f)?;
        Dataset::new(points, successors, self.dt)
    }
}
