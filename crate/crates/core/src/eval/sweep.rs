//! Reconstruction error as a function of chart count and latent dimension.

use rayon::prelude::*;

use crate::atlas::{build_atlas, AtlasConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neuralnet::Architecture;
use crate::seed::derive_seed;

/// How architectures are sized across cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArchPolicy {
    /// Every chart uses the base architecture (with the cell's bottleneck).
    SameAsCharts,
    /// Cells with fewer than `reference_charts` charts widen their hidden layers
    /// until their total trainable parameters approach those of
    /// `reference_charts` base-sized charts at the same latent dimension.
    ParameterMatched { reference_charts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_charts: usize,
    pub latent_dim: usize,
    pub trial: usize,
    pub seed: u64,
    /// Trainable parameters summed over charts.
    pub params: usize,
    /// `None` when training failed; see `error`.
    pub mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MseSweepResult {
    pub rows: Vec<SweepRow>,
}

impl MseSweepResult {
    /// Median over successful trials of one cell.
    pub fn median(&self, n_charts: usize, latent_dim: usize) -> Option<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n_charts == n_charts && r.latent_dim == latent_dim)
            .filter_map(|r| r.mse)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut c: Vec<(usize, usize)> = self.rows.iter().map(|r| (r.n_charts, r.latent_dim)).collect();
        c.sort();
        c.dedup();
        c
    }
}

/// Replace the bottleneck of an encoder/decoder pair.
pub fn with_latent_dim(encoder: &Architecture, decoder: &Architecture, d: usize) -> Result<(Architecture, Architecture)> {
    let mut e = encoder.clone();
    let mut dec = decoder.clone();
    *e.dims.last_mut().ok_or(Error::EmptyInput("encoder"))? = d;
    *dec.dims.first_mut().ok_or(Error::EmptyInput("decoder"))? = d;
    e.validate()?;
    dec.validate()?;
    Ok((e, dec))
}

/// Scale every hidden width by `factor`, rounding and keeping at least one unit.
pub fn widen(arch: &Architecture, factor: f64) -> Architecture {
    let n = arch.dims.len();
    let dims = arch
        .dims
        .iter()
        .enumerate()
        .map(|(i, &d)| if i == 0 || i == n - 1 { d } else { ((d as f64 * factor).round() as usize).max(1) })
        .collect();
    Architecture {
        dims,
        activations: arch.activations.clone(),
    }
}

/// Widening factor whose parameter count is closest to `target`.
pub fn match_parameters(encoder: &Architecture, decoder: &Architecture, target: usize) -> (Architecture, Architecture) {
    let count = |f: f64| widen(encoder, f).param_count() + widen(decoder, f).param_count();
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while count(hi) < target && hi < 1e4 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pick = if target.abs_diff(count(lo)) <= target.abs_diff(count(hi)) { lo } else { hi };
    (widen(encoder, pick), widen(decoder, pick))
}

/// The atlas config used for one sweep cell.
pub fn cell_config(base: &AtlasConfig, n_charts: usize, latent_dim: usize, policy: ArchPolicy) -> Result<AtlasConfig> {
    let (enc, dec) = with_latent_dim(&base.encoder, &base.decoder, latent_dim)?;
    let (enc, dec) = match policy {
        ArchPolicy::ParameterMatched { reference_charts } if n_charts < reference_charts => {
            let target = reference_charts * (enc.param_count() + dec.param_count()) / n_charts;
            match_parameters(&enc, &dec, target)
        }
        _ => (enc, dec),
    };
    Ok(AtlasConfig {
        n_charts,
        latent_dim,
        encoder: enc,
        decoder: dec,
        ..base.clone()
    })
}

/// Train `trials` fresh atlases for every (chart count, latent dimension) cell and
/// record the reconstruction MSE over the whole point set. Failed trials are kept
/// with their error.
pub fn mse_sweep(
    points: &Matrix,
    base: &AtlasConfig,
    chart_counts: &[usize],
    dims: &[usize],
    trials: usize,
    policy: ArchPolicy,
) -> Result<MseSweepResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for &k in chart_counts {
        for &d in dims {
            let cfg = cell_config(base, k, d, policy)?;
            for t in 0..trials {
                jobs.push((k, d, t, cfg.clone()));
            }
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|(k, d, t, mut cfg)| {
            let key = ((k as u64) << 40) | ((d as u64) << 20) | t as u64;
            cfg.seed = derive_seed(base.seed, "sweep", key);
            let params = k * (cfg.encoder.param_count() + cfg.decoder.param_count());
            let outcome = build_atlas(points, &cfg).and_then(|(atlas, _)| atlas.reconstruction_mse());
            let (mse, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => {
                    log::warn!("sweep cell ({k} charts, d = {d}) trial {t} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            SweepRow {
                n_charts: k,
                latent_dim: d,
                trial: t,
                seed: cfg.seed,
                params,
                mse,
                error,
            }
        })
        .collect();
    Ok(MseSweepResult { rows })
}
