//! Experiment configuration files and the built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atlas::AtlasConfig;
use crate::dynamics::{DynamicsConfig, InitStrategy, NetSpec};
use crate::error::{Error, Result};
use crate::neuralnet::{Architecture, AutoencoderMode, LrSchedule, TrainConfig};
use crate::seed::derive_seed;
use crate::systems::{KsConfig, PerturbationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Circle,
    TorusPeriodic,
    TorusQuasiperiodic,
    KsBeating,
    KsBeatingTravelling,
    KsBursting,
}

impl SystemId {
    pub fn is_ks(self) -> bool {
        matches!(self, SystemId::KsBeating | SystemId::KsBeatingTravelling | SystemId::KsBursting)
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Circle => "circle",
            SystemId::TorusPeriodic => "torus_periodic",
            SystemId::TorusQuasiperiodic => "torus_quasiperiodic",
            SystemId::KsBeating => "ks_beating",
            SystemId::KsBeatingTravelling => "ks_beating_travelling",
            SystemId::KsBursting => "ks_bursting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsDataConfig {
    pub nu: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_ks_dt")]
    pub dt: f64,
    pub sample_spacing: f64,
    pub n_samples: usize,
    pub transient_time: f64,
    /// Train on phase-aligned shapes and model the phase separately.
    #[serde(default)]
    pub shape_phase: bool,
}

fn default_modes() -> usize {
    64
}

fn default_ks_dt() -> f64 {
    1e-4
}

impl KsDataConfig {
    pub fn solver(&self) -> KsConfig {
        KsConfig {
            nu: self.nu,
            n_modes: self.n_modes,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Number of samples for the circle and torus systems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsDataConfig>,
    /// Separate off-attractor data for the dynamics nets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasSection {
    pub n_charts: usize,
    pub knn: usize,
    pub rounds: usize,
    pub latent_dim: usize,
    #[serde(default)]
    pub whiten: bool,
    #[serde(default = "one")]
    pub overlap_weight: f64,
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_max_iters: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_kmeans_iters() -> usize {
    300
}

/// Staircase schedule `lr · decay_rate^⌊epoch / decay_every⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub learning_rate: f64,
    #[serde(default = "one")]
    pub decay_rate: f64,
    #[serde(default = "one_usize")]
    pub decay_every: usize,
}

impl ScheduleSection {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::staircase(self.learning_rate, self.decay_rate, self.decay_every)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSection {
    pub encoder: String,
    pub encoder_activations: String,
    pub decoder: String,
    pub decoder_activations: String,
    pub mode: AutoencoderMode,
    pub epochs: usize,
    pub schedule: ScheduleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub shape: String,
    pub activations: String,
    pub epochs: usize,
    pub schedule: ScheduleSection,
}

impl NetSection {
    pub fn spec(&self) -> Result<NetSpec> {
        Ok(NetSpec {
            arch: Architecture::parse(&self.shape, &self.activations).map_err(config_err)?,
            train: TrainConfig::new(self.epochs, self.schedule.schedule(), 0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    pub steps: usize,
    /// Dataset row the rollout starts from.
    #[serde(default)]
    pub start: usize,
    #[serde(default)]
    pub init: InitStrategy,
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection {
            steps: 1000,
            start: 0,
            init: InitStrategy::NearestPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemId,
    pub seed: u64,
    pub data: DataConfig,
    pub atlas: AtlasSection,
    pub autoencoder: AutoencoderSection,
    pub dynamics: NetSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<NetSection>,
    #[serde(default)]
    pub rollout: RolloutSection,
}

pub const PRESET_NAMES: [&str; 6] = ["s1", "s2", "s3", "s4", "s5", "s6"];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "s1" => include_str!("../../../../presets/s1.toml"),
        "s2" => include_str!("../../../../presets/s2.toml"),
        "s3" => include_str!("../../../../presets/s3.toml"),
        "s4" => include_str!("../../../../presets/s4.toml"),
        "s5" => include_str!("../../../../presets/s5.toml"),
        "s6" => include_str!("../../../../presets/s6.toml"),
        _ => return None,
    })
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| {
            Error::Config(format!("unknown preset {name:?} (have {})", PRESET_NAMES.join(", ")))
        })?;
        Self::from_toml_str(text)
    }

    /// A preset name, or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if preset_text(name_or_path).is_some() {
            return Self::preset(name_or_path);
        }
        let text = std::fs::read_to_string(Path::new(name_or_path))
            .map_err(|e| Error::Config(format!("{name_or_path}: {e}")))?;
        Self::from_toml_str(&text)
    }

    /// Replace the seed and/or the number of charts.
    pub fn with_overrides(mut self, seed: Option<u64>, charts: Option<usize>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(c) = charts {
            self.atlas.n_charts = c;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn ambient_dim(&self) -> usize {
        match self.system {
            SystemId::Circle => 2,
            SystemId::TorusPeriodic | SystemId::TorusQuasiperiodic => 3,
            _ => self.data.ks.as_ref().map_or(0, |k| k.n_modes),
        }
    }

    /// Sampling interval of the training data.
    pub fn dt(&self) -> f64 {
        self.data.ks.as_ref().map_or(1.0, |k| k.sample_spacing)
    }

    pub fn tracks_phase(&self) -> bool {
        self.data.ks.as_ref().is_some_and(|k| k.shape_phase)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let sys = self.system.name();
        if self.system.is_ks() {
            let Some(ks) = &self.data.ks else {
                return bad(format!("{sys} needs a [data.ks] section"));
            };
            if self.data.n_points.is_some() {
                return bad(format!("{sys} takes its sample count from data.ks.n_samples"));
            }
            ks.solver().validate().map_err(config_err)?;
            if ks.n_samples < 2 {
                return bad("data.ks.n_samples must be at least 2".into());
            }
            if !(ks.sample_spacing > 0.0) || !(ks.transient_time >= 0.0) {
                return bad("data.ks sample_spacing must be positive and transient_time non-negative".into());
            }
        } else {
            if self.data.ks.is_some() {
                return bad(format!("{sys} does not take a [data.ks] section"));
            }
            match self.data.n_points {
                Some(n) if n >= 2 => {}
                _ => return bad(format!("{sys} needs data.n_points of at least 2")),
            }
        }
        if self.data.perturbation.is_some() && self.system != SystemId::KsBursting {
            return bad("[data.perturbation] is only used by ks_bursting".into());
        }
        if self.tracks_phase() != self.phase.is_some() {
            return bad("a [phase] section goes with data.ks.shape_phase = true and only then".into());
        }
        if self.rollout.start >= self.n_samples() {
            return bad(format!("rollout.start {} is past the dataset", self.rollout.start));
        }
        let dim = self.atlas.latent_dim;
        if self.dynamics.spec()?.arch.input_dim() != dim || self.dynamics.spec()?.arch.output_dim() != dim {
            return bad(format!("dynamics net must map {dim} -> {dim}"));
        }
        if let Some(p) = &self.phase {
            let arch = p.spec()?.arch;
            if arch.input_dim() != dim || arch.output_dim() != 1 {
                return bad(format!("phase net must map {dim} -> 1"));
            }
        }
        self.atlas_config()?.validate(self.ambient_dim()).map_err(config_err)?;
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        match &self.data.ks {
            Some(k) => k.n_samples,
            None => self.data.n_points.unwrap_or(0),
        }
    }

    pub fn atlas_config(&self) -> Result<AtlasConfig> {
        let ae = &self.autoencoder;
        Ok(AtlasConfig {
            n_charts: self.atlas.n_charts,
            knn: self.atlas.knn,
            rounds: self.atlas.rounds,
            latent_dim: self.atlas.latent_dim,
            encoder: Architecture::parse(&ae.encoder, &ae.encoder_activations).map_err(config_err)?,
            decoder: Architecture::parse(&ae.decoder, &ae.decoder_activations).map_err(config_err)?,
            mode: ae.mode,
            train: TrainConfig::new(ae.epochs, ae.schedule.schedule(), 0),
            whiten: self.atlas.whiten,
            overlap_weight: self.atlas.overlap_weight,
            kmeans_max_iters: self.atlas.kmeans_max_iters,
            seed: self.seed,
        })
    }

    pub fn dynamics_config(&self) -> Result<DynamicsConfig> {
        Ok(DynamicsConfig {
            dynamics: self.dynamics.spec()?,
            phase: self.phase.as_ref().map(NetSection::spec).transpose()?,
            seed: self.seed,
        })
    }

    /// Seed of the random perturbations in the bursting dynamics data.
    pub fn perturbation_seed(&self) -> u64 {
        derive_seed(self.seed, "perturbation", 0)
    }
}
