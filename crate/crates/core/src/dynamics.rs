//! Per-chart latent dynamics and the global chart-switching rollout.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::Atlas;
use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::neuralnet::io::format_f64;
use crate::neuralnet::{train, Activation, Architecture, LossReport, Mlp, TrainConfig};
use crate::seed::derive_seed;
use crate::systems::reconstruct_field;

/// Latent map `f_α` of one chart and, optionally, its phase-increment network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDynamics {
    pub chart_id: usize,
    pub f: Mlp,
    pub phase_net: Option<Mlp>,
}

/// Training pairs of one chart in its local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPairs {
    pub chart_id: usize,
    /// Dataset rows the pairs came from.
    pub rows: Vec<usize>,
    pub z: Matrix,
    pub z_next: Matrix,
    pub phase_deltas: Option<Vec<f64>>,
}

impl ChartPairs {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Atlas training point nearest to each state of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLocations {
    pub points: Vec<usize>,
    pub successors: Vec<usize>,
}

/// Map every state of `data` to its nearest atlas training point. States that
/// coincide with a training point at the same or the next row are resolved
/// without a search.
pub fn locate_pairs(atlas: &Atlas, data: &Dataset) -> Result<PairLocations> {
    check_dim(atlas.ambient_dim(), data.ambient_dim())?;
    let n_atlas = atlas.len();
    let find = |p: &[f64], guess: usize| -> Result<usize> {
        if guess < n_atlas && atlas.points().row(guess) == p {
            Ok(guess)
        } else {
            Ok(atlas.locate(p)?.index)
        }
    };
    let points = (0..data.len())
        .into_par_iter()
        .map(|i| find(data.points().row(i), i))
        .collect::<Result<Vec<_>>>()?;
    let successors = (0..data.len())
        .into_par_iter()
        .map(|i| find(data.successors().row(i), i + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairLocations { points, successors })
}

/// Pairs whose two states both lie in the chart's domain, in local coordinates.
pub fn assemble_chart_pairs(
    atlas: &Atlas,
    chart_id: usize,
    data: &Dataset,
    locations: &PairLocations,
    phase_deltas: Option<&[f64]>,
) -> Result<ChartPairs> {
    let chart = atlas.chart(chart_id)?;
    check_dim(data.len(), locations.points.len())?;
    if let Some(d) = phase_deltas {
        check_dim(data.len(), d.len())?;
    }
    let rows: Vec<usize> = (0..data.len())
        .filter(|&i| chart.contains(locations.points[i]) && chart.contains(locations.successors[i]))
        .collect();
    if rows.is_empty() {
        return Err(Error::NoDynamicsData { chart: chart_id });
    }
    let z = chart.encode_batch(&data.points().select_rows(&rows))?;
    let z_next = chart.encode_batch(&data.successors().select_rows(&rows))?;
    Ok(ChartPairs {
        chart_id,
        z,
        z_next,
        phase_deltas: phase_deltas.map(|d| rows.iter().map(|&i| d[i]).collect()),
        rows,
    })
}

pub fn fit_dynamics(pairs: &ChartPairs, arch: &Architecture, config: &TrainConfig) -> Result<(Mlp, LossReport)> {
    check_dim(pairs.z.cols(), arch.input_dim())?;
    check_dim(pairs.z.cols(), arch.output_dim())?;
    train(Mlp::glorot(arch, config.seed), &pairs.z, &pairs.z_next, config)
}

/// Regress the per-step phase increment on the local shape coordinates.
///
/// Increments are tiny (order 1e-3 rad) next to what a freshly initialised
/// network outputs, so the network is trained on standardized increments
/// `(Δ − mean)/std` and the affine map is then folded into its linear output
/// layer. The returned network predicts raw increments; the reported losses are
/// in standardized units.
pub fn fit_phase_dynamics(
    shape_coords: &Matrix,
    phase_deltas: &[f64],
    arch: &Architecture,
    config: &TrainConfig,
) -> Result<(Mlp, LossReport)> {
    check_dim(shape_coords.rows(), phase_deltas.len())?;
    check_dim(shape_coords.cols(), arch.input_dim())?;
    check_dim(1, arch.output_dim())?;
    if phase_deltas.is_empty() {
        return Err(Error::EmptyInput("phase increments"));
    }
    if arch.activations.last() != Some(&Activation::Linear) {
        return Err(Error::InvalidArchitecture("phase network needs a linear output layer".into()));
    }
    let n = phase_deltas.len() as f64;
    let mean = phase_deltas.iter().sum::<f64>() / n;
    let std = (phase_deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    let unit = if std > 0.0 { std } else { 1.0 };
    let standardized: Vec<f64> = phase_deltas.iter().map(|d| (d - mean) / unit).collect();
    let targets = Matrix::from_vec(phase_deltas.len(), 1, standardized)?;
    let (mut net, report) = train(Mlp::glorot(arch, config.seed), shape_coords, &targets, config)?;
    let last = net.weights.len() - 1;
    net.weights[last].iter_mut().for_each(|w| *w *= std);
    net.biases[last][0] = net.biases[last][0] * std + mean;
    Ok((net, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub arch: Architecture,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dynamics: NetSpec,
    pub phase: Option<NetSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    pub chart_id: usize,
    pub n_pairs: usize,
    pub dynamics: LossReport,
    pub phase: Option<LossReport>,
}

/// Fit `f_α` (and phase nets when configured) for every chart, in parallel.
pub fn train_all_dynamics(
    atlas: &Atlas,
    data: &Dataset,
    phase_deltas: Option<&[f64]>,
    config: &DynamicsConfig,
) -> Result<(Vec<ChartDynamics>, Vec<DynamicsReport>)> {
    if config.phase.is_some() != phase_deltas.is_some() {
        return Err(Error::Config(
            "phase networks need phase data and phase data need phase networks".into(),
        ));
    }
    let locations = locate_pairs(atlas, data)?;
    let out = (0..atlas.charts.len())
        .into_par_iter()
        .map(|c| -> Result<(ChartDynamics, DynamicsReport)> {
            let pairs = assemble_chart_pairs(atlas, c, data, &locations, phase_deltas)?;
            let train_cfg = config
                .dynamics
                .train
                .clone()
                .with_seed(derive_seed(config.seed, "dynamics", c as u64));
            let (f, rep) = fit_dynamics(&pairs, &config.dynamics.arch, &train_cfg)?;
            let (phase_net, phase_rep) = match (&config.phase, &pairs.phase_deltas) {
                (Some(spec), Some(deltas)) => {
                    let cfg = spec.train.clone().with_seed(derive_seed(config.seed, "phase", c as u64));
                    let (net, r) = fit_phase_dynamics(&pairs.z, deltas, &spec.arch, &cfg)?;
                    (Some(net), Some(r))
                }
                _ => (None, None),
            };
            Ok((
                ChartDynamics {
                    chart_id: c,
                    f,
                    phase_net,
                },
                DynamicsReport {
                    chart_id: c,
                    n_pairs: pairs.len(),
                    dynamics: rep,
                    phase: phase_rep,
                },
            ))
        })
        .enumerate()
        .map(|(c, r)| r.map_err(|e| e.in_chart(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Interior chart of the nearest training point.
    #[default]
    NearestPoint,
    /// Chart whose k-means centroid is nearest.
    NearestCentroid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutState {
    pub chart_id: usize,
    pub z: Vec<f64>,
    pub phase: Option<f64>,
    pub step: usize,
}

/// The only ambient-space search of a rollout: pick a chart and encode `p`.
pub fn assign_initial(atlas: &Atlas, p: &[f64], strategy: InitStrategy) -> Result<(usize, Vec<f64>)> {
    check_dim(atlas.ambient_dim(), p.len())?;
    let chart = match strategy {
        InitStrategy::NearestPoint => atlas.labels[atlas.locate(p)?.index],
        InitStrategy::NearestCentroid => atlas.nearest_centroid(p)?,
    };
    Ok((chart, atlas.charts[chart].encode(p)?))
}

fn check_dynamics(atlas: &Atlas, dynamics: &[ChartDynamics]) -> Result<()> {
    if dynamics.len() != atlas.charts.len() {
        return Err(Error::Data(format!(
            "{} dynamics networks for {} charts",
            dynamics.len(),
            atlas.charts.len()
        )));
    }
    for (c, d) in dynamics.iter().enumerate() {
        let n = atlas.charts[c].latent_dim();
        if d.chart_id != c || d.f.input_dim() != n || d.f.output_dim() != n {
            return Err(Error::Data(format!("dynamics of chart {c} do not match its latent dimension")));
        }
    }
    Ok(())
}

/// Advance one step in the current chart, then hand over to the interior chart
/// of the nearest member if that member is a border point.
pub fn step(
    atlas: &Atlas,
    dynamics: &[ChartDynamics],
    state: &RolloutState,
) -> Result<(RolloutState, Option<(usize, usize)>)> {
    let alpha = state.chart_id;
    let chart = atlas.chart(alpha)?;
    let dyn_a = dynamics
        .get(alpha)
        .ok_or_else(|| Error::Data(format!("no dynamics for chart {alpha}")))?;
    let next_step = state.step + 1;
    let diverged = || Error::RolloutDiverged { step: next_step };
    let mut z = dyn_a.f.forward(&state.z)?;
    let phase = match (state.phase, &dyn_a.phase_net) {
        (Some(ph), Some(net)) => Some(ph + net.forward(&state.z)?[0]),
        (ph, _) => ph,
    };
    if z.iter().any(|v| !v.is_finite()) || phase.is_some_and(|p| !p.is_finite()) {
        return Err(diverged());
    }
    let nearest = chart.nearest_member(&z)?;
    let owner = atlas.labels[nearest.index];
    let mut event = None;
    let mut chart_id = alpha;
    if owner != alpha {
        z = atlas.transition(alpha, owner, &z)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(diverged());
        }
        event = Some((alpha, owner));
        chart_id = owner;
    }
    Ok((
        RolloutState {
            chart_id,
            z,
            phase,
            step: next_step,
        },
        event,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub chart_id: usize,
    pub z: Vec<f64>,
    pub phase: Option<f64>,
    /// Decoded ambient state (shifted by the phase when one is tracked).
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// `(step, from, to)` for every chart change; `step` is the record that
    /// starts in the new chart.
    pub transitions: Vec<(usize, usize, usize)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Decoded ambient states as rows.
    pub fn states(&self) -> Result<Matrix> {
        Matrix::from_rows(&self.records.iter().map(|r| r.x.as_slice()).collect::<Vec<_>>())
    }

    pub fn phases(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.phase).collect()
    }

    pub fn chart_ids(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.chart_id).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let Some(first) = self.records.first() else {
            return Ok(());
        };
        let mut header = vec!["step".to_string(), "chart_id".to_string()];
        header.extend((0..first.z.len()).map(|i| format!("z_{i}")));
        header.push("phase".into());
        header.extend((0..first.x.len()).map(|i| format!("x_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), r.chart_id.to_string()];
            row.extend(r.z.iter().map(|v| format_f64(*v)));
            row.push(r.phase.map_or_else(|| "nan".to_string(), format_f64));
            row.extend(r.x.iter().map(|v| format_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl Trajectory {
    /// Parse the output of [`Trajectory::write_csv`]; transitions are recovered
    /// from changes of `chart_id`.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Trajectory> {
        let mut rd = csv::Reader::from_reader(r);
        let bad = |m: String| Error::Data(format!("trajectory csv: {m}"));
        let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
        let nz = header.iter().filter(|h| h.starts_with("z_")).count();
        let nx = header.iter().filter(|h| h.starts_with("x_")).count();
        if header.len() != 3 + nz + nx || header.get(0) != Some("step") || header.get(2 + nz) != Some("phase") {
            return Err(bad("unexpected header".into()));
        }
        let mut traj = Trajectory::default();
        for rec in rd.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad value in column {i}")))
            };
            let int = |i: usize| -> Result<usize> {
                rec.get(i)
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .ok_or_else(|| bad(format!("bad integer in column {i}")))
            };
            let phase = num(2 + nz)?;
            let r = TrajectoryRecord {
                step: int(0)?,
                chart_id: int(1)?,
                z: (0..nz).map(|i| num(2 + i)).collect::<Result<_>>()?,
                phase: (!phase.is_nan()).then_some(phase),
                x: (0..nx).map(|i| num(3 + nz + i)).collect::<Result<_>>()?,
            };
            if let Some(prev) = traj.records.last() {
                if prev.chart_id != r.chart_id {
                    traj.transitions.push((r.step, prev.chart_id, r.chart_id));
                }
            }
            traj.records.push(r);
        }
        Ok(traj)
    }
}

fn record(atlas: &Atlas, state: &RolloutState) -> Result<TrajectoryRecord> {
    let decoded = atlas.charts[state.chart_id].decode(&state.z)?;
    let x = match state.phase {
        Some(ph) => reconstruct_field(&decoded, ph),
        None => decoded,
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RolloutDiverged { step: state.step });
    }
    Ok(TrajectoryRecord {
        step: state.step,
        chart_id: state.chart_id,
        z: state.z.clone(),
        phase: state.phase,
        x,
    })
}

/// Assign `p0` to a chart and take `n_steps` steps. `phase0` starts the phase
/// variable when the model tracks one; `p0` is then the shape.
pub fn rollout(
    atlas: &Atlas,
    dynamics: &[ChartDynamics],
    p0: &[f64],
    phase0: Option<f64>,
    n_steps: usize,
    strategy: InitStrategy,
) -> Result<Trajectory> {
    check_dynamics(atlas, dynamics)?;
    let has_phase = dynamics.iter().any(|d| d.phase_net.is_some());
    if has_phase != phase0.is_some() {
        return Err(Error::InvalidArgument(if has_phase {
            "model tracks a phase; an initial phase is required".into()
        } else {
            "model has no phase dynamics; no initial phase expected".into()
        }));
    }
    let (chart_id, z) = assign_initial(atlas, p0, strategy)?;
    let mut state = RolloutState {
        chart_id,
        z,
        phase: phase0,
        step: 0,
    };
    let mut traj = Trajectory {
        records: vec![record(atlas, &state)?],
        transitions: Vec::new(),
    };
    for _ in 0..n_steps {
        let (next, event) = step(atlas, dynamics, &state)?;
        if let Some((from, to)) = event {
            traj.transitions.push((next.step, from, to));
        }
        traj.records.push(record(atlas, &next)?);
        state = next;
    }
    Ok(traj)
}
