//! Trained models: atlas plus chart dynamics, and their directory format.
//!
//! ```text
//! <dir>/manifest.toml         config, seeds, final losses, data fingerprint
//! <dir>/points.csv            atlas training points
//! <dir>/phases.csv            phase of every training point (shape/phase models)
//! <dir>/labels.txt            interior chart of every point
//! <dir>/centroids.csv
//! <dir>/chart_<c>/interior.txt, border.txt
//! <dir>/chart_<c>/encoder.mlp, decoder.mlp, dynamics.mlp[, phase.mlp]
//! <dir>/chart_<c>/anchor.csv      PCA mean then basis rows (pca_anchored)
//! <dir>/chart_<c>/whitener.csv    mean, scales, then rotation rows
//! <dir>/chart_<c>/*_loss.csv      loss at the start of every epoch
//! ```
//!
//! The kNN graph is rebuilt from the points on load.

use std::fs;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::atlas::{build_atlas, build_knn_graph, fingerprint, Atlas, Chart, Domain, Whitener};
use crate::dynamics::{rollout, train_all_dynamics, ChartDynamics, Trajectory};
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::data::{prepare_output_dir, read_matrix_csv, write_matrix_csv, DataBundle};
use crate::linalg::Matrix;
use crate::neuralnet::io::{format_f64, load_mlp, save_mlp};
use crate::neuralnet::{Autoencoder, AutoencoderMode, LossReport, PcaAnchor};
use crate::seed::derive_seed;

pub const MODEL_FORMAT: &str = "candyman-model 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSummary {
    pub id: usize,
    pub interior: usize,
    pub border: usize,
    pub autoencoder_seed: u64,
    pub autoencoder_loss: f64,
    pub reconstruction_mse: f64,
    pub dynamics_seed: u64,
    pub dynamics_pairs: usize,
    pub dynamics_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format: String,
    pub data_fingerprint: String,
    pub dt: f64,
    pub n_points: usize,
    pub reconstruction_mse: f64,
    pub config: ExperimentConfig,
    pub charts: Vec<ChartSummary>,
}

/// Loss histories are kept in memory after training and on disk afterwards.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistories {
    pub autoencoder: Vec<LossReport>,
    pub dynamics: Vec<LossReport>,
    pub phase: Vec<Option<LossReport>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub manifest: ModelManifest,
    pub atlas: Atlas,
    pub dynamics: Vec<ChartDynamics>,
    /// Phase of every atlas point, for shape/phase models.
    pub phases: Option<Vec<f64>>,
    pub losses: LossHistories,
}

pub fn train_model(config: &ExperimentConfig, bundle: &DataBundle) -> Result<Model> {
    config.validate()?;
    if bundle.data.ambient_dim() != config.ambient_dim() {
        return Err(Error::Data(format!(
            "data are {}-dimensional, config expects {}",
            bundle.data.ambient_dim(),
            config.ambient_dim()
        )));
    }
    if config.tracks_phase() != bundle.phases.is_some() {
        return Err(Error::Data("config and dataset disagree about phase tracking".into()));
    }
    let (atlas, ae_reports) = build_atlas(bundle.data.points(), &config.atlas_config()?)?;
    info!("atlas reconstruction mse {:.3e}", atlas.reconstruction_mse()?);
    let deltas = bundle.phase_deltas();
    let (dynamics, dyn_reports) =
        train_all_dynamics(&atlas, bundle.dynamics_data(), deltas.as_deref(), &config.dynamics_config()?)?;
    let charts = atlas
        .charts
        .iter()
        .zip(&ae_reports)
        .zip(&dyn_reports)
        .map(|((c, a), d)| ChartSummary {
            id: c.id,
            interior: c.domain.interior.len(),
            border: c.domain.border.len(),
            autoencoder_seed: derive_seed(config.seed, "autoencoder", c.id as u64),
            autoencoder_loss: a.final_loss,
            reconstruction_mse: c.reconstruction_mse,
            dynamics_seed: derive_seed(config.seed, "dynamics", c.id as u64),
            dynamics_pairs: d.n_pairs,
            dynamics_loss: d.dynamics.final_loss,
            phase_seed: d.phase.as_ref().map(|_| derive_seed(config.seed, "phase", c.id as u64)),
            phase_loss: d.phase.as_ref().map(|r| r.final_loss),
        })
        .collect();
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        data_fingerprint: fingerprint(bundle.data.points()),
        dt: bundle.data.dt(),
        n_points: bundle.data.len(),
        reconstruction_mse: atlas.reconstruction_mse()?,
        config: config.clone(),
        charts,
    };
    let losses = LossHistories {
        autoencoder: ae_reports,
        phase: dyn_reports.iter().map(|r| r.phase.clone()).collect(),
        dynamics: dyn_reports.into_iter().map(|r| r.dynamics).collect(),
    };
    Ok(Model {
        manifest,
        atlas,
        dynamics,
        phases: bundle.phases.as_ref().map(|(p, _)| p.clone()),
        losses,
    })
}

impl Model {
    pub fn config(&self) -> &ExperimentConfig {
        &self.manifest.config
    }

    pub fn dt(&self) -> f64 {
        self.manifest.dt
    }

    /// Roll out `steps` steps from training point `start`.
    pub fn rollout_from_row(&self, start: usize, steps: usize) -> Result<Trajectory> {
        if start >= self.atlas.len() {
            return Err(Error::InvalidArgument(format!(
                "start row {start} is past the {} training points",
                self.atlas.len()
            )));
        }
        let phase0 = self.phases.as_ref().map(|p| p[start]);
        rollout(
            &self.atlas,
            &self.dynamics,
            self.atlas.points().row(start),
            phase0,
            steps,
            self.config().rollout.init,
        )
    }

    /// The rollout described by the config.
    pub fn default_rollout(&self) -> Result<Trajectory> {
        let r = &self.config().rollout;
        self.rollout_from_row(r.start, r.steps)
    }

    pub fn save(&self, dir: &Path, force: bool) -> Result<()> {
        prepare_output_dir(dir, force)?;
        let text = toml::to_string(&self.manifest).map_err(|e| Error::Data(e.to_string()))?;
        fs::write(dir.join("manifest.toml"), text)?;
        write_matrix_csv(self.atlas.points(), &dir.join("points.csv"))?;
        if let Some(p) = &self.phases {
            write_matrix_csv(&Matrix::from_vec(p.len(), 1, p.clone())?, &dir.join("phases.csv"))?;
        }
        write_indices(&self.atlas.labels, &dir.join("labels.txt"))?;
        write_matrix_csv(&self.atlas.centroids, &dir.join("centroids.csv"))?;
        for (c, chart) in self.atlas.charts.iter().enumerate() {
            let cd = dir.join(format!("chart_{c}"));
            fs::create_dir(&cd)?;
            write_indices(&chart.domain.interior, &cd.join("interior.txt"))?;
            write_indices(&chart.domain.border, &cd.join("border.txt"))?;
            save_mlp(chart.autoencoder.encoder(), &cd.join("encoder.mlp"))?;
            save_mlp(chart.autoencoder.decoder(), &cd.join("decoder.mlp"))?;
            if let Some(a) = chart.autoencoder.anchor() {
                let mut rows = vec![a.mean.clone()];
                rows.extend(a.basis.iter_rows().map(<[f64]>::to_vec));
                write_matrix_csv(&Matrix::from_rows(&rows)?, &cd.join("anchor.csv"))?;
            }
            if let Some(w) = &chart.whitener {
                let mut rows = vec![w.mean.clone(), w.scales.clone()];
                rows.extend(w.rotation.iter_rows().map(<[f64]>::to_vec));
                write_matrix_csv(&Matrix::from_rows(&rows)?, &cd.join("whitener.csv"))?;
            }
            let d = &self.dynamics[c];
            save_mlp(&d.f, &cd.join("dynamics.mlp"))?;
            if let Some(p) = &d.phase_net {
                save_mlp(p, &cd.join("phase.mlp"))?;
            }
            if let Some(r) = self.losses.autoencoder.get(c) {
                write_losses(r, &cd.join("autoencoder_loss.csv"))?;
            }
            if let Some(r) = self.losses.dynamics.get(c) {
                write_losses(r, &cd.join("dynamics_loss.csv"))?;
            }
            if let Some(Some(r)) = self.losses.phase.get(c) {
                write_losses(r, &cd.join("phase_loss.csv"))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Model> {
        let path = dir.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let manifest: ModelManifest =
            toml::from_str(&text).map_err(|e| Error::Data(format!("model manifest: {e}")))?;
        if manifest.format != MODEL_FORMAT {
            return Err(Error::Data(format!("unsupported model format {:?}", manifest.format)));
        }
        let points = read_matrix_csv(&dir.join("points.csv"))?;
        if fingerprint(&points) != manifest.data_fingerprint {
            return Err(Error::Data("points.csv does not match the model manifest".into()));
        }
        let phases = if dir.join("phases.csv").exists() {
            Some(read_matrix_csv(&dir.join("phases.csv"))?.as_slice().to_vec())
        } else {
            None
        };
        let labels = read_indices(&dir.join("labels.txt"))?;
        let centroids = read_matrix_csv(&dir.join("centroids.csv"))?;
        let mode = manifest.config.autoencoder.mode;
        let mut charts = Vec::new();
        let mut dynamics = Vec::new();
        for c in 0..manifest.charts.len() {
            let cd = dir.join(format!("chart_{c}"));
            let load_chart = || -> Result<(Chart, ChartDynamics)> {
                let domain = Domain {
                    interior: read_indices(&cd.join("interior.txt"))?,
                    border: read_indices(&cd.join("border.txt"))?,
                };
                let encoder = load_mlp(&cd.join("encoder.mlp"))?;
                let decoder = load_mlp(&cd.join("decoder.mlp"))?;
                let ae = match mode {
                    AutoencoderMode::Plain => Autoencoder::Plain { encoder, decoder },
                    AutoencoderMode::PcaAnchored { alpha } => {
                        let m = read_matrix_csv(&cd.join("anchor.csv"))?;
                        let basis = m.select_rows(&(1..m.rows()).collect::<Vec<_>>());
                        Autoencoder::PcaAnchored {
                            anchor: PcaAnchor {
                                mean: m.row(0).to_vec(),
                                basis,
                            },
                            encoder,
                            decoder,
                            alpha,
                        }
                    }
                };
                let whitener = if cd.join("whitener.csv").exists() {
                    let m = read_matrix_csv(&cd.join("whitener.csv"))?;
                    if m.rows() != m.cols() + 2 {
                        return Err(Error::Data("whitener.csv has the wrong shape".into()));
                    }
                    Some(Whitener {
                        mean: m.row(0).to_vec(),
                        scales: m.row(1).to_vec(),
                        rotation: m.select_rows(&(2..m.rows()).collect::<Vec<_>>()),
                    })
                } else {
                    None
                };
                let f = load_mlp(&cd.join("dynamics.mlp"))?;
                let phase_net = if cd.join("phase.mlp").exists() {
                    Some(load_mlp(&cd.join("phase.mlp"))?)
                } else {
                    None
                };
                let chart = Chart::from_parts(c, domain, ae, whitener, &points)?;
                Ok((
                    chart,
                    ChartDynamics {
                        chart_id: c,
                        f,
                        phase_net,
                    },
                ))
            };
            let (chart, d) = load_chart().map_err(|e| e.in_chart(c))?;
            charts.push(chart);
            dynamics.push(d);
        }
        let graph = build_knn_graph(&points, manifest.config.atlas.knn)?;
        let atlas = Atlas::from_parts(points, charts, centroids, labels, graph)?;
        let read_hist = |name: &str| -> Result<Vec<Option<LossReport>>> {
            (0..atlas.charts.len())
                .map(|c| {
                    let p = dir.join(format!("chart_{c}")).join(name);
                    p.exists().then(|| read_losses(&p)).transpose()
                })
                .collect()
        };
        let losses = LossHistories {
            autoencoder: read_hist("autoencoder_loss.csv")?.into_iter().flatten().collect(),
            dynamics: read_hist("dynamics_loss.csv")?.into_iter().flatten().collect(),
            phase: read_hist("phase_loss.csv")?,
        };
        Ok(Model {
            manifest,
            atlas,
            dynamics,
            phases,
            losses,
        })
    }
}

fn write_indices(ix: &[usize], path: &Path) -> Result<()> {
    let mut s: String = ix.iter().map(|i| format!("{i}\n")).collect();
    if s.is_empty() {
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::Data(format!("{}: bad index {l:?}", path.display())))
        })
        .collect()
}

fn write_losses(r: &LossReport, path: &Path) -> Result<()> {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in r.history.iter().enumerate() {
        s.push_str(&format!("{e},{}\n", format_f64(*l)));
    }
    s.push_str(&format!("final,{}\n", format_f64(r.final_loss)));
    fs::write(path, s)?;
    Ok(())
}

fn read_losses(path: &Path) -> Result<LossReport> {
    let text = fs::read_to_string(path)?;
    let mut report = LossReport::default();
    for line in text.lines().skip(1) {
        let (tag, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Data(format!("{}: bad line {line:?}", path.display())))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad loss {v:?}", path.display())))?;
        if tag == "final" {
            report.final_loss = v;
        } else {
            report.history.push(v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::data::generate_data;

    fn quick_circle() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("s1").unwrap();
        cfg.autoencoder.epochs = 60;
        cfg.dynamics.epochs = 40;
        cfg.rollout.steps = 50;
        cfg
    }

    #[test]
    fn save_load_gives_identical_rollouts() {
        let cfg = quick_circle();
        let bundle = generate_data(&cfg).unwrap();
        let model = train_model(&cfg, &bundle).unwrap();
        assert_eq!(model.atlas.charts.len(), 3);
        assert!(model.atlas.charts.iter().all(|c| c.latent_dim() == 1));
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("m");
        model.save(&dir, false).unwrap();
        let back = Model::load(&dir).unwrap();
        assert_eq!(back.manifest, model.manifest);
        assert_eq!(back.losses, model.losses);
        let (a, b) = (model.default_rollout().unwrap(), back.default_rollout().unwrap());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), a);
        assert_eq!(model.rollout_from_row(0, 0).unwrap().len(), 1);
        assert!(model.rollout_from_row(40, 1).is_err());
    }

    #[test]
    fn anchored_whitened_model_round_trips() {
        let mut cfg = quick_circle();
        cfg.autoencoder.mode = AutoencoderMode::PcaAnchored { alpha: 1.0 };
        cfg.atlas.whiten = true;
        let bundle = generate_data(&cfg).unwrap();
        let model = train_model(&cfg, &bundle).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        model.save(tmp.path().join("m").as_path(), false).unwrap();
        let back = Model::load(&tmp.path().join("m")).unwrap();
        for (a, b) in model.atlas.charts.iter().zip(&back.atlas.charts) {
            assert_eq!(a.autoencoder, b.autoencoder);
            assert_eq!(a.whitener, b.whitener);
        }
        assert_eq!(model.default_rollout().unwrap(), back.default_rollout().unwrap());
    }

    #[test]
    fn mismatched_data_are_rejected() {
        let cfg = quick_circle();
        let other = generate_data(&ExperimentConfig::preset("s2").unwrap()).unwrap();
        assert!(matches!(train_model(&cfg, &other), Err(Error::Data(_))));
    }
}
