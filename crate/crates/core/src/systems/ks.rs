//! Kuramoto-Sivashinsky equation `u_t + u u_x + u_xx + ν u_xxxx = 0` on `[0, 2π)`.
//!
//! Pseudo-spectral in Fourier space. The linear part `(k² − νk⁴) û` is advanced by
//! Crank-Nicolson, the nonlinear part `−(ik/2) FFT(u²)` by second-order
//! Adams-Bashforth, with a single RK4 step to start the two-step scheme. The
//! nonlinear term is dealiased with the 2/3 rule; the Nyquist derivative is zero.

use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::systems::spatial_grid;

pub const BLOW_UP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsConfig {
    pub nu: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_modes() -> usize {
    64
}

fn default_dt() -> f64 {
    1e-4
}

impl KsConfig {
    pub fn new(nu: f64) -> Self {
        KsConfig {
            nu,
            n_modes: default_modes(),
            dt: default_dt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if self.n_modes < 4 || self.n_modes % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "n_modes must be even and at least 4, got {}",
                self.n_modes
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    /// Number of solver steps in `time`, which must be a whole multiple of `dt`.
    pub fn steps_for(&self, time: f64) -> Result<usize> {
        let steps = (time / self.dt).round();
        if steps < 0.0 || ((steps * self.dt) - time).abs() > 1e-9 * time.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time {time} is not a whole number of steps of {}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Rounding in a complex FFT of real data leaves a tiny anti-Hermitian part. The
/// linearly unstable modes amplify it without bound, and once it is large its
/// rounding error leaks into the real field, so it is removed at every transform.
fn hermitian_project(uh: &mut [Complex64]) {
    let n = uh.len();
    uh[0].im = 0.0;
    uh[n / 2].im = 0.0;
    for j in 1..n / 2 {
        let avg = 0.5 * (uh[j] + uh[n - j].conj());
        uh[j] = avg;
        uh[n - j] = avg.conj();
    }
}

pub struct KsSolver {
    config: KsConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `i k` for the first derivative, zero at the Nyquist mode.
    ik: Vec<Complex64>,
    lin: Vec<f64>,
    dealias: Vec<bool>,
    nonlinear: bool,
}

impl KsSolver {
    pub fn new(config: KsConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_modes;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumber = |j: usize| -> f64 {
            if j <= n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            }
        };
        let ik = (0..n)
            .map(|j| {
                if j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, wavenumber(j))
                }
            })
            .collect();
        let lin = (0..n)
            .map(|j| {
                let k2 = wavenumber(j).powi(2);
                k2 - config.nu * k2 * k2
            })
            .collect();
        let cutoff = n as f64 / 3.0;
        let dealias = (0..n).map(|j| wavenumber(j).abs() < cutoff).collect();
        Ok(KsSolver {
            config,
            forward,
            inverse,
            ik,
            lin,
            dealias,
            nonlinear: true,
        })
    }

    /// Turn the 2/3-rule truncation of the nonlinear term on or off.
    pub fn with_dealiasing(mut self, enabled: bool) -> Self {
        let n = self.config.n_modes;
        for j in 0..n {
            let k = if j <= n / 2 { j as f64 } else { n as f64 - j as f64 };
            self.dealias[j] = !enabled || k < n as f64 / 3.0;
        }
        self
    }

    pub fn config(&self) -> &KsConfig {
        &self.config
    }

    /// Drop the `u u_x` term, leaving the linear equation.
    pub fn with_nonlinearity(mut self, enabled: bool) -> Self {
        self.nonlinear = enabled;
        self
    }

    /// Forward transform, symmetrized so the spectrum describes a real field exactly.
    pub fn to_spectral(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        hermitian_project(&mut buf);
        buf
    }

    /// Inverse transform, returning the real part and the largest imaginary residue.
    pub fn to_physical(&self, uh: &[Complex64]) -> (Vec<f64>, f64) {
        let mut buf = uh.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.config.n_modes as f64;
        let imag = buf.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
        (buf.iter().map(|c| c.re * scale).collect(), imag)
    }

    fn nonlinear_term(&self, uh: &[Complex64], step: usize) -> Result<Vec<Complex64>> {
        let n = self.config.n_modes;
        let (u, _) = self.to_physical(uh);
        let max_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(max_abs <= BLOW_UP_THRESHOLD) {
            return Err(Error::Instability { step, max_abs });
        }
        if !self.nonlinear {
            return Ok(vec![Complex64::new(0.0, 0.0); n]);
        }
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        let mut out = self.to_spectral(&sq);
        for j in 0..n {
            out[j] = if self.dealias[j] {
                -0.5 * self.ik[j] * out[j]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        Ok(out)
    }

    fn rhs(&self, uh: &[Complex64], step: usize) -> Result<Vec<Complex64>> {
        let mut r = self.nonlinear_term(uh, step)?;
        for (j, v) in r.iter_mut().enumerate() {
            *v += self.lin[j] * uh[j];
        }
        Ok(r)
    }

    fn rk4_step(&self, uh: &[Complex64]) -> Result<Vec<Complex64>> {
        let dt = self.config.dt;
        let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        let k1 = self.rhs(uh, 1)?;
        let k2 = self.rhs(&axpy(uh, dt / 2.0, &k1), 1)?;
        let k3 = self.rhs(&axpy(uh, dt / 2.0, &k2), 1)?;
        let k4 = self.rhs(&axpy(uh, dt, &k3), 1)?;
        Ok((0..uh.len())
            .map(|j| uh[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect())
    }

    /// Advance `n_steps` steps from `u0`, returning the fields at steps
    /// `0, store_every, 2·store_every, …` up to `n_steps`.
    pub fn simulate(&self, u0: &[f64], n_steps: usize, store_every: usize) -> Result<Vec<Vec<f64>>> {
        check_dim(self.config.n_modes, u0.len())?;
        if store_every == 0 {
            return Err(Error::InvalidArgument("store_every must be positive".into()));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("initial field is not finite".into()));
        }
        let dt = self.config.dt;
        let mut out = vec![u0.to_vec()];
        if n_steps == 0 {
            return Ok(out);
        }
        let mut uh = self.to_spectral(u0);
        let mut n_prev = self.nonlinear_term(&uh, 1)?;
        uh = self.rk4_step(&uh)?;
        let store = |uh: &[Complex64], out: &mut Vec<Vec<f64>>, step: usize| -> Result<()> {
            let (u, _) = self.to_physical(uh);
            let max_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(max_abs <= BLOW_UP_THRESHOLD) {
                return Err(Error::Instability { step, max_abs });
            }
            out.push(u);
            Ok(())
        };
        if store_every == 1 {
            store(&uh, &mut out, 1)?;
        }
        let cn_plus: Vec<f64> = self.lin.iter().map(|l| 1.0 + 0.5 * dt * l).collect();
        let cn_minus: Vec<f64> = self.lin.iter().map(|l| 1.0 - 0.5 * dt * l).collect();
        for step in 2..=n_steps {
            let n_cur = self.nonlinear_term(&uh, step - 1)?;
            for j in 0..uh.len() {
                uh[j] = (cn_plus[j] * uh[j] + dt * (1.5 * n_cur[j] - 0.5 * n_prev[j])) / cn_minus[j];
            }
            n_prev = n_cur;
            if step % store_every == 0 {
                store(&uh, &mut out, step)?;
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper building a solver for one run.
pub fn ks_simulate(config: KsConfig, u0: &[f64], n_steps: usize, store_every: usize) -> Result<Vec<Vec<f64>>> {
    KsSolver::new(config)?.simulate(u0, n_steps, store_every)
}

/// `u(x, 0) = −sin x + 2 cos 2x + 3 cos 3x − 4 sin 4x`.
pub fn ks_initial_condition(n_modes: usize) -> Vec<f64> {
    spatial_grid(n_modes)
        .into_iter()
        .map(|x| -x.sin() + 2.0 * (2.0 * x).cos() + 3.0 * (3.0 * x).cos() - 4.0 * (4.0 * x).sin())
        .collect()
}

/// The three dynamical regimes and their dataset recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsRegime {
    Beating,
    BeatingTravelling,
    Bursting,
}

impl KsRegime {
    pub fn nu(self) -> f64 {
        match self {
            KsRegime::Beating => 16.0 / 337.0,
            KsRegime::BeatingTravelling => 4.0 / 87.0,
            KsRegime::Bursting => 16.0 / 71.0,
        }
    }

    pub fn sample_spacing(self) -> f64 {
        match self {
            KsRegime::Beating | KsRegime::BeatingTravelling => 0.01,
            KsRegime::Bursting => 0.05,
        }
    }

    pub fn n_samples(self) -> usize {
        match self {
            KsRegime::Beating | KsRegime::BeatingTravelling => 100,
            KsRegime::Bursting => 6565,
        }
    }

    /// At 50 time units the beating-travelling run is still drifting toward its
    /// attractor (beating period 0.452 instead of 0.456), so it gets 200.
    pub fn transient_time(self) -> f64 {
        match self {
            KsRegime::Beating => 50.0,
            KsRegime::BeatingTravelling | KsRegime::Bursting => 200.0,
        }
    }
}

/// Simulate from the standard initial condition, drop `transient_time`, then take
/// `n_samples` pairs spaced `sample_spacing` apart.
pub fn gen_ks_dataset(
    config: KsConfig,
    sample_spacing: f64,
    n_samples: usize,
    transient_time: f64,
) -> Result<Dataset> {
    let series = ks_series(config, sample_spacing, n_samples + 1, transient_time)?;
    Dataset::from_series(&series, sample_spacing)
}

/// `n` consecutive samples after the transient, as rows.
pub fn ks_series(config: KsConfig, sample_spacing: f64, n: usize, transient_time: f64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::EmptyInput("sample count"));
    }
    let solver = KsSolver::new(config)?;
    let every = config.steps_for(sample_spacing)?;
    if every == 0 {
        return Err(Error::InvalidArgument("sample spacing below one step".into()));
    }
    let transient = config.steps_for(transient_time)?;
    let u0 = ks_initial_condition(config.n_modes);
    let start = if transient == 0 {
        u0
    } else {
        solver.simulate(&u0, transient, transient)?.pop().unwrap()
    };
    let fields = solver.simulate(&start, every * (n - 1), every)?;
    Matrix::from_rows(&fields)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Use every `stride`-th point of the source dataset as an initial field.
    pub stride: usize,
    /// Perturbation coefficients are drawn from `U[−amplitude, amplitude]`.
    pub amplitude: f64,
    pub sim_time: f64,
    pub keep_time: f64,
    pub sample_spacing: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            stride: 3,
            amplitude: 0.05,
            sim_time: 1.5,
            keep_time: 1.0,
            sample_spacing: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BurstingDynamicsData {
    pub dataset: Dataset,
    /// Number of short trajectories that made it into `dataset`.
    pub n_trajectories: usize,
    pub samples_per_trajectory: usize,
    pub n_skipped: usize,
    /// Drawn `(a1, a2, a3)` for every attempted trajectory.
    pub coefficients: Vec<[f64; 3]>,
}

fn trajectory_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Off-attractor dynamics data: perturb every `stride`-th field by
/// `a1 cos 2x + a2 cos x + a3 sin x`, simulate, and keep the tail. Pairs never span
/// two trajectories. Unstable runs are skipped with a warning.
pub fn gen_bursting_dynamics_dataset(
    source: &Dataset,
    config: KsConfig,
    perturbation: PerturbationConfig,
    seed: u64,
) -> Result<BurstingDynamicsData> {
    check_dim(config.n_modes, source.ambient_dim())?;
    if perturbation.stride == 0 || perturbation.keep_time > perturbation.sim_time {
        return Err(Error::InvalidArgument("bad perturbation settings".into()));
    }
    let solver = KsSolver::new(config)?;
    let every = config.steps_for(perturbation.sample_spacing)?;
    let total = config.steps_for(perturbation.sim_time)?;
    let keep = config.steps_for(perturbation.keep_time)?;
    if every == 0 || total % every != 0 || keep % every != 0 {
        return Err(Error::InvalidArgument(
            "simulation and kept times must be whole multiples of the sample spacing".into(),
        ));
    }
    let n_keep = keep / every + 1;
    let grid = spatial_grid(config.n_modes);
    let starts: Vec<usize> = (0..source.len()).step_by(perturbation.stride).collect();

    let runs: Vec<([f64; 3], Result<Vec<Vec<f64>>>)> = starts
        .par_iter()
        .enumerate()
        .map(|(t, &row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(seed, t));
            let amp = perturbation.amplitude;
            let mut draw = || if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
            let a = [draw(), draw(), draw()];
            let u0: Vec<f64> = source
                .points()
                .row(row)
                .iter()
                .zip(&grid)
                .map(|(u, &x)| u + a[0] * (2.0 * x).cos() + a[1] * x.cos() + a[2] * x.sin())
                .collect();
            let fields = solver.simulate(&u0, total, every).map(|f| f[f.len() - n_keep..].to_vec());
            (a, fields)
        })
        .collect();

    let mut points = Vec::new();
    let mut successors = Vec::new();
    let mut coefficients = Vec::with_capacity(runs.len());
    let mut n_skipped = 0;
    for (t, (a, fields)) in runs.into_iter().enumerate() {
        coefficients.push(a);
        match fields {
            Ok(f) => {
                for w in f.windows(2) {
                    points.push(w[0].clone());
                    successors.push(w[1].clone());
                }
            }
            Err(e) => {
                warn!("perturbed trajectory {t} skipped: {e}");
                n_skipped += 1;
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Data("every perturbed trajectory was unstable".into()));
    }
    let n_trajectories = coefficients.len() - n_skipped;
    Ok(BurstingDynamicsData {
        dataset: Dataset::new(
            Matrix::from_rows(&points)?,
            Matrix::from_rows(&successors)?,
            perturbation.sample_spacing,
        )?,
        n_trajectories,
        samples_per_trajectory: n_keep,
        n_skipped,
        coefficients,
    })
}
