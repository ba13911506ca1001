//! Atlas construction: k-means clusters grown along a kNN graph into overlapping
//! coordinate domains, each with its own autoencoder chart.

mod graph;
mod kmeans;
mod whiten;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, sq_dist, Matrix};
use crate::neighbor::{Neighbor, NeighborIndex};
use crate::neuralnet::{train_autoencoder, Architecture, Autoencoder, AutoencoderMode, LossReport, TrainConfig};
use crate::seed::derive_seed;

pub use graph::{build_knn_graph, expand_clusters, knn_graph_from_index, Domain, KnnGraph};
pub use kmeans::{kmeans, KMeans};
pub use whiten::{fit_whitener, Whitener};

/// Everything needed to turn a point set into an atlas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    pub n_charts: usize,
    /// Neighbours per point in the kNN graph.
    pub knn: usize,
    pub rounds: usize,
    pub latent_dim: usize,
    pub encoder: Architecture,
    pub decoder: Architecture,
    pub mode: AutoencoderMode,
    pub train: TrainConfig,
    pub whiten: bool,
    /// Loss weight of points lying in more than one domain (1 = unweighted).
    pub overlap_weight: f64,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl AtlasConfig {
    pub fn validate(&self, ambient_dim: usize) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_charts == 0 {
            return bad("n_charts must be positive".into());
        }
        if self.encoder.input_dim() != ambient_dim || self.decoder.output_dim() != ambient_dim {
            return bad(format!(
                "autoencoder maps {} -> {} -> {}, data are {ambient_dim}-dimensional",
                self.encoder.input_dim(),
                self.encoder.output_dim(),
                self.decoder.output_dim()
            ));
        }
        if self.encoder.output_dim() != self.latent_dim || self.decoder.input_dim() != self.latent_dim {
            return bad(format!("autoencoder bottleneck does not match latent_dim {}", self.latent_dim));
        }
        if !(self.overlap_weight > 0.0 && self.overlap_weight.is_finite()) {
            return bad("overlap_weight must be positive".into());
        }
        self.train.schedule.validate()
    }
}

/// One coordinate domain with its coordinate map.
#[derive(Debug, Clone)]
pub struct Chart {
    pub id: usize,
    pub domain: Domain,
    pub autoencoder: Autoencoder,
    pub whitener: Option<Whitener>,
    members: Vec<usize>,
    local: NeighborIndex,
    /// Mean squared reconstruction error per coordinate over the members.
    pub reconstruction_mse: f64,
    /// Largest reconstruction error (Euclidean) over the members.
    pub max_reconstruction_error: f64,
}

impl Chart {
    /// Assemble a chart from trained maps; local coordinates of the members are
    /// recomputed from `points`.
    pub fn from_parts(
        id: usize,
        domain: Domain,
        autoencoder: Autoencoder,
        whitener: Option<Whitener>,
        points: &Matrix,
    ) -> Result<Self> {
        if domain.interior.is_empty() {
            return Err(Error::Data(format!("chart {id} has an empty interior")));
        }
        check_dim(autoencoder.ambient_dim(), points.cols())?;
        let members = domain.members();
        if let Some(&i) = members.iter().find(|&&i| i >= points.rows()) {
            return Err(Error::Data(format!("chart {id} refers to point {i} of {}", points.rows())));
        }
        let xs = points.select_rows(&members);
        let mut latent = autoencoder.encode_batch(&xs)?;
        if let Some(w) = &whitener {
            check_dim(autoencoder.latent_dim(), w.dim())?;
            latent = w.apply_batch(&latent)?;
        }
        let recon = autoencoder.reconstruct_batch(&xs)?;
        let mut sum = 0.0;
        let mut max_err: f64 = 0.0;
        for (a, b) in recon.iter_rows().zip(xs.iter_rows()) {
            let e = sq_dist(a, b);
            sum += e;
            max_err = max_err.max(e.sqrt());
        }
        Ok(Chart {
            id,
            domain,
            autoencoder,
            whitener,
            members,
            local: NeighborIndex::build(latent)?,
            reconstruction_mse: sum / (xs.rows() * xs.cols()) as f64,
            max_reconstruction_error: max_err,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.autoencoder.latent_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.autoencoder.ambient_dim()
    }

    /// Dataset indices of interior then border points.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Local coordinates of [`Chart::members`], row for row.
    pub fn local_points(&self) -> &Matrix {
        self.local.points()
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.domain.interior.binary_search(&i).is_ok()
    }

    pub fn is_border(&self, i: usize) -> bool {
        self.domain.border.binary_search(&i).is_ok()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.is_interior(i) || self.is_border(i)
    }

    /// Ambient point to local (whitened, when configured) coordinates.
    pub fn encode(&self, p: &[f64]) -> Result<Vec<f64>> {
        let h = self.autoencoder.encode(p)?;
        match &self.whitener {
            Some(w) => w.apply(&h),
            None => Ok(h),
        }
    }

    pub fn encode_batch(&self, ps: &Matrix) -> Result<Matrix> {
        let h = self.autoencoder.encode_batch(ps)?;
        match &self.whitener {
            Some(w) => w.apply_batch(&h),
            None => Ok(h),
        }
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.whitener {
            Some(w) => self.autoencoder.decode(&w.invert(z)?),
            None => self.autoencoder.decode(z),
        }
    }

    /// Nearest member in local coordinates; `index` is a dataset index.
    pub fn nearest_member(&self, z: &[f64]) -> Result<Neighbor> {
        let nb = self.local.nearest(z)?;
        Ok(Neighbor {
            index: self.members[nb.index],
            dist_sq: nb.dist_sq,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Atlas {
    pub charts: Vec<Chart>,
    pub centroids: Matrix,
    /// Interior chart of every training point.
    pub labels: Vec<usize>,
    pub graph: KnnGraph,
    pub fingerprint: String,
    points: NeighborIndex,
}

/// Hex SHA-256 of the shape and little-endian bytes of a matrix.
pub fn fingerprint(points: &Matrix) -> String {
    let mut h = Sha256::new();
    h.update((points.rows() as u64).to_le_bytes());
    h.update((points.cols() as u64).to_le_bytes());
    for v in points.as_slice() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Membership and clustering, before any network is trained.
#[derive(Debug, Clone)]
pub struct Partition {
    pub kmeans: KMeans,
    pub graph: KnnGraph,
    pub domains: Vec<Domain>,
}

pub fn partition(points: &Matrix, config: &AtlasConfig) -> Result<Partition> {
    let km = kmeans(points, config.n_charts, derive_seed(config.seed, "kmeans", 0), config.kmeans_max_iters)?;
    let graph = build_knn_graph(points, config.knn)?;
    let domains = expand_clusters(&km.labels, config.n_charts, &graph, config.rounds)?;
    Ok(Partition {
        kmeans: km,
        graph,
        domains,
    })
}

/// Train one chart on its members.
pub fn fit_chart(
    points: &Matrix,
    domain: Domain,
    id: usize,
    config: &AtlasConfig,
    overlap_count: &[usize],
) -> Result<(Chart, LossReport)> {
    let members = domain.members();
    if members.len() <= config.latent_dim {
        return Err(Error::Data(format!(
            "chart {id} has {} members for latent dimension {}",
            members.len(),
            config.latent_dim
        )));
    }
    let xs = points.select_rows(&members);
    let mut train = config.train.clone().with_seed(derive_seed(config.seed, "autoencoder", id as u64));
    if config.overlap_weight != 1.0 {
        let w = members
            .iter()
            .map(|&i| if overlap_count[i] > 1 { config.overlap_weight } else { 1.0 })
            .collect();
        train = train.with_weights(w);
    }
    let ae = Autoencoder::build(config.mode, &xs, &config.encoder, &config.decoder, train.seed)?;
    let (ae, report) = train_autoencoder(ae, &xs, &train)?;
    let whitener = if config.whiten {
        Some(fit_whitener(&ae.encode_batch(&xs)?)?)
    } else {
        None
    };
    let chart = Chart::from_parts(id, domain, ae, whitener, points)?;
    Ok((chart, report))
}

/// Cluster, expand and train every chart (charts in parallel on the current
/// rayon pool). Returns the per-chart training reports alongside.
pub fn build_atlas(points: &Matrix, config: &AtlasConfig) -> Result<(Atlas, Vec<LossReport>)> {
    config.validate(points.cols())?;
    let part = partition(points, config)?;
    let mut overlap_count = vec![0usize; points.rows()];
    for d in &part.domains {
        for i in d.members() {
            overlap_count[i] += 1;
        }
    }
    let fitted: Vec<(Chart, LossReport)> = part
        .domains
        .clone()
        .into_par_iter()
        .enumerate()
        .map(|(id, dom)| {
            let out = fit_chart(points, dom, id, config, &overlap_count).map_err(|e| e.in_chart(id));
            if let Ok((c, r)) = &out {
                info!(
                    "chart {id}: {} interior, {} border, final loss {:.3e}",
                    c.domain.interior.len(),
                    c.domain.border.len(),
                    r.final_loss
                );
            }
            out
        })
        .collect::<Result<Vec<_>>>()?;
    let (charts, reports): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let atlas = Atlas::from_parts(points.clone(), charts, part.kmeans.centroids, part.kmeans.labels, part.graph)?;
    Ok((atlas, reports))
}

impl Atlas {
    pub fn from_parts(
        points: Matrix,
        charts: Vec<Chart>,
        centroids: Matrix,
        labels: Vec<usize>,
        graph: KnnGraph,
    ) -> Result<Self> {
        check_dim(points.rows(), labels.len())?;
        let n = points.rows();
        let mut owners = vec![usize::MAX; n];
        for (c, chart) in charts.iter().enumerate() {
            if chart.id != c {
                return Err(Error::Data(format!("chart at position {c} has id {}", chart.id)));
            }
            for &i in &chart.domain.interior {
                if owners[i] != usize::MAX {
                    return Err(Error::Data(format!("point {i} is interior to charts {} and {c}", owners[i])));
                }
                owners[i] = c;
            }
        }
        if owners != labels {
            return Err(Error::Data("chart interiors disagree with cluster labels".into()));
        }
        Ok(Atlas {
            fingerprint: fingerprint(&points),
            points: NeighborIndex::build(points)?,
            charts,
            centroids,
            labels,
            graph,
        })
    }

    pub fn points(&self) -> &Matrix {
        self.points.points()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.points().cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.charts[0].latent_dim()
    }

    /// Nearest training point to an ambient vector (lower index on ties).
    pub fn locate(&self, p: &[f64]) -> Result<Neighbor> {
        self.points.nearest(p)
    }

    /// Index of the chart whose centroid is nearest to `p`.
    pub fn nearest_centroid(&self, p: &[f64]) -> Result<usize> {
        check_dim(self.centroids.cols(), p.len())?;
        let mut best = (0, f64::INFINITY);
        for (c, row) in self.centroids.iter_rows().enumerate() {
            let d = sq_dist(p, row);
            if d < best.1 {
                best = (c, d);
            }
        }
        Ok(best.0)
    }

    /// `φ_to(φ_from⁻¹(z))`, including whitening on both sides. Only meaningful on
    /// the overlap of the two domains.
    pub fn transition(&self, from: usize, to: usize, z: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = (self.chart(from)?, self.chart(to)?);
        b.encode(&a.decode(z)?)
    }

    pub fn chart(&self, id: usize) -> Result<&Chart> {
        self.charts
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no chart {id} (atlas has {})", self.charts.len())))
    }

    /// Reconstruction of every training point through its interior chart.
    pub fn reconstruction_mse(&self) -> Result<f64> {
        let mut total = 0.0;
        for chart in &self.charts {
            let xs = self.points().select_rows(&chart.domain.interior);
            let r = chart.autoencoder.reconstruct_batch(&xs)?;
            total += r
                .iter_rows()
                .zip(xs.iter_rows())
                .map(|(a, b)| sq_dist(a, b))
                .sum::<f64>();
        }
        Ok(total / (self.len() * self.ambient_dim()) as f64)
    }

    /// Every (point, chart a, chart b) with the point in both domains, with
    /// `‖D_a E_a p − D_b E_b p‖` and the bound `‖D_a E_a p − p‖ + ‖D_b E_b p − p‖`.
    pub fn overlap_consistency(&self) -> Result<Vec<OverlapCheck>> {
        let mut recon: Vec<std::collections::HashMap<usize, Vec<f64>>> = Vec::new();
        for chart in &self.charts {
            let xs = self.points().select_rows(chart.members());
            let r = chart.autoencoder.reconstruct_batch(&xs)?;
            recon.push(chart.members().iter().copied().zip(r.iter_rows().map(<[f64]>::to_vec)).collect());
        }
        let mut out = Vec::new();
        for i in 0..self.len() {
            let p = self.points().row(i);
            let owners: Vec<usize> = (0..self.charts.len()).filter(|&c| recon[c].contains_key(&i)).collect();
            for (x, &a) in owners.iter().enumerate() {
                for &b in &owners[x + 1..] {
                    let (ra, rb) = (&recon[a][&i], &recon[b][&i]);
                    let diff: Vec<f64> = ra.iter().zip(rb).map(|(u, v)| u - v).collect();
                    out.push(OverlapCheck {
                        point: i,
                        charts: (a, b),
                        discrepancy: norm(&diff),
                        bound: sq_dist(ra, p).sqrt() + sq_dist(rb, p).sqrt(),
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapCheck {
    pub point: usize,
    pub charts: (usize, usize),
    pub discrepancy: f64,
    pub bound: f64,
}
