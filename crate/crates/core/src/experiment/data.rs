//! Dataset generation from a config, and the on-disk dataset directory.
//!
//! ```text
//! <dir>/manifest.toml          config, dt, sizes and a fingerprint of points.csv
//! <dir>/points.csv             one sample per row, no header
//! <dir>/successors.csv         the sample one interval later
//! <dir>/phases.csv             phase of the point and of its successor (shape/phase runs)
//! <dir>/dynamics_points.csv    separate dynamics pairs (bursting)
//! <dir>/dynamics_successors.csv
//! ```

use std::fs;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::atlas::fingerprint;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, SystemId};
use crate::linalg::Matrix;
use crate::neuralnet::io::format_f64;
use crate::systems::{
    gen_bursting_dynamics_dataset, gen_circle, gen_torus_periodic, gen_torus_quasiperiodic, ks_series,
    phase_deltas, shape_phase_series,
};

pub const DATA_FORMAT: &str = "candyman-data 1";

/// Everything a training run reads.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    /// Atlas training pairs; shapes when the phase is split off.
    pub data: Dataset,
    /// Unwrapped phases of the points and of their successors.
    pub phases: Option<(Vec<f64>, Vec<f64>)>,
    /// Pairs used for the dynamics nets when they differ from `data`.
    pub dynamics: Option<Dataset>,
}

impl DataBundle {
    pub fn dynamics_data(&self) -> &Dataset {
        self.dynamics.as_ref().unwrap_or(&self.data)
    }

    pub fn phase_deltas(&self) -> Option<Vec<f64>> {
        self.phases.as_ref().map(|(a, b)| phase_deltas(a, b))
    }

    /// Full fields of the training points (shapes rotated back by their phase).
    pub fn fields(&self) -> Result<Matrix> {
        match &self.phases {
            None => Ok(self.data.points().clone()),
            Some((ph, _)) => Matrix::from_rows(
                &self
                    .data
                    .points()
                    .iter_rows()
                    .zip(ph)
                    .map(|(s, &p)| crate::systems::reconstruct_field(s, p))
                    .collect::<Vec<_>>(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataManifest {
    pub format: String,
    pub system: SystemId,
    pub seed: u64,
    pub dt: f64,
    pub n_points: usize,
    pub ambient_dim: usize,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dynamics_pairs: Option<usize>,
    pub config: ExperimentConfig,
}

pub fn generate_data(config: &ExperimentConfig) -> Result<DataBundle> {
    config.validate()?;
    let n = config.n_samples();
    let data = match config.system {
        SystemId::Circle => gen_circle(n)?,
        SystemId::TorusPeriodic => gen_torus_periodic(n)?,
        SystemId::TorusQuasiperiodic => gen_torus_quasiperiodic(n)?,
        _ => {
            let ks = config.data.ks.as_ref().expect("validated");
            info!("simulating {} (nu = {})", config.system.name(), ks.nu);
            let series = ks_series(ks.solver(), ks.sample_spacing, n + 1, ks.transient_time)?;
            if ks.shape_phase {
                let (shapes, phases) = shape_phase_series(&series)?;
                let data = Dataset::from_series(&shapes, ks.sample_spacing)?;
                let phases = (phases[..n].to_vec(), phases[1..].to_vec());
                return Ok(DataBundle {
                    data,
                    phases: Some(phases),
                    dynamics: None,
                });
            }
            Dataset::from_series(&series, ks.sample_spacing)?
        }
    };
    let dynamics = match (&config.data.perturbation, &config.data.ks) {
        (Some(p), Some(ks)) => {
            info!("simulating perturbed trajectories for the dynamics data");
            let d = gen_bursting_dynamics_dataset(&data, ks.solver(), *p, config.perturbation_seed())?;
            info!(
                "{} trajectories, {} pairs, {} skipped",
                d.n_trajectories,
                d.dataset.len(),
                d.n_skipped
            );
            Some(d.dataset)
        }
        _ => None,
    };
    Ok(DataBundle {
        data,
        phases: None,
        dynamics,
    })
}

pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    for row in m.iter_rows() {
        w.write_record(row.iter().map(|v| format_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("{}: row {}: bad number {s:?}", path.display(), i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    Matrix::from_rows(&rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// Refuses to reuse an existing path unless `force`.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::InvalidArgument(format!(
                "{} already exists (use --force to overwrite)",
                dir.display()
            )));
        }
        if dir.is_dir() {
            fs::remove_dir_all(dir)?;
        } else {
            fs::remove_file(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_dataset_dir(dir: &Path, config: &ExperimentConfig, bundle: &DataBundle, force: bool) -> Result<()> {
    prepare_output_dir(dir, force)?;
    write_matrix_csv(bundle.data.points(), &dir.join("points.csv"))?;
    write_matrix_csv(bundle.data.successors(), &dir.join("successors.csv"))?;
    if let Some((a, b)) = &bundle.phases {
        let rows: Vec<[f64; 2]> = a.iter().zip(b).map(|(x, y)| [*x, *y]).collect();
        write_matrix_csv(&Matrix::from_rows(&rows)?, &dir.join("phases.csv"))?;
    }
    if let Some(d) = &bundle.dynamics {
        write_matrix_csv(d.points(), &dir.join("dynamics_points.csv"))?;
        write_matrix_csv(d.successors(), &dir.join("dynamics_successors.csv"))?;
    }
    let manifest = DataManifest {
        format: DATA_FORMAT.into(),
        system: config.system,
        seed: config.seed,
        dt: bundle.data.dt(),
        n_points: bundle.data.len(),
        ambient_dim: bundle.data.ambient_dim(),
        fingerprint: fingerprint(bundle.data.points()),
        n_dynamics_pairs: bundle.dynamics.as_ref().map(Dataset::len),
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

pub fn read_dataset_dir(dir: &Path) -> Result<(DataManifest, DataBundle)> {
    let text = fs::read_to_string(dir.join("manifest.toml"))
        .map_err(|e| Error::Data(format!("{}: {e}", dir.join("manifest.toml").display())))?;
    let manifest: DataManifest =
        toml::from_str(&text).map_err(|e| Error::Data(format!("dataset manifest: {e}")))?;
    if manifest.format != DATA_FORMAT {
        return Err(Error::Data(format!("unsupported dataset format {:?}", manifest.format)));
    }
    let points = read_matrix_csv(&dir.join("points.csv"))?;
    if fingerprint(&points) != manifest.fingerprint {
        return Err(Error::Data("points.csv does not match the manifest fingerprint".into()));
    }
    let successors = read_matrix_csv(&dir.join("successors.csv"))?;
    let data = Dataset::new(points, successors, manifest.dt)?;
    let phases = if dir.join("phases.csv").exists() {
        let m = read_matrix_csv(&dir.join("phases.csv"))?;
        if m.cols() != 2 || m.rows() != data.len() {
            return Err(Error::Data("phases.csv must have two columns and one row per point".into()));
        }
        Some((m.iter_rows().map(|r| r[0]).collect(), m.iter_rows().map(|r| r[1]).collect()))
    } else {
        None
    };
    let dynamics = if dir.join("dynamics_points.csv").exists() {
        Some(Dataset::new(
            read_matrix_csv(&dir.join("dynamics_points.csv"))?,
            read_matrix_csv(&dir.join("dynamics_successors.csv"))?,
            manifest.dt,
        )?)
    } else {
        None
    };
    if manifest.config.tracks_phase() != phases.is_some() {
        return Err(Error::Data("phases.csv presence disagrees with the config".into()));
    }
    Ok((
        manifest,
        DataBundle {
            data,
            phases,
            dynamics,
        },
    ))
}
