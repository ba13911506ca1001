//! Chart coordinate maps: an encoder `ℝᵐ → ℝⁿ` and an approximate inverse.
//!
//! Two variants are supported:
//!
//! - `Plain`: two free networks, `h = E(u)`, `û = D(h)`.
//! - `PcaAnchored`: the networks only learn corrections to a rank-`n` PCA of the
//!   chart data, `h = P(u − ū) + E(u − ū)` and `û = ū + Pᵀh + D(h)`. The loss adds
//!   `α · mean(E(u − ū)²)`, which keeps the encoder correction from duplicating
//!   the linear part. That penalty is this crate's reading of the anchored
//!   formulation; the reference work it comes from states the weighting
//!   (`α = 1`) but not the exact term.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{matmul, matmul_nt, pca, Matrix};
use crate::neuralnet::mlp::{loss_weighted_mse, mse_output_gradient, Architecture, Mlp};
use crate::neuralnet::train::{Adam, LossReport, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AutoencoderMode {
    Plain,
    PcaAnchored { alpha: f64 },
}

/// Mean and leading principal directions (rows) of a chart's data.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaAnchor {
    pub mean: Vec<f64>,
    pub basis: Matrix,
}

impl PcaAnchor {
    pub fn fit(data: &Matrix, d: usize) -> Result<Self> {
        let m = data.cols();
        if d >= m {
            return Err(Error::InvalidArgument(format!(
                "latent dimension {d} must be below ambient dimension {m}"
            )));
        }
        if data.rows() < d + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot anchor a {d}-dimensional PCA",
                data.rows()
            )));
        }
        let p = pca(data)?;
        let basis = p.components.select_rows(&(0..d).collect::<Vec<_>>());
        Ok(Self {
            mean: p.mean,
            basis,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.rows()
    }

    fn center(&self, xs: &Matrix) -> Matrix {
        let mut c = xs.clone();
        for r in 0..c.rows() {
            c.row_mut(r)
                .iter_mut()
                .zip(&self.mean)
                .for_each(|(v, m)| *v -= m);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Autoencoder {
    Plain {
        encoder: Mlp,
        decoder: Mlp,
    },
    PcaAnchored {
        anchor: PcaAnchor,
        encoder: Mlp,
        decoder: Mlp,
        alpha: f64,
    },
}

impl Autoencoder {
    pub fn plain(encoder_arch: &Architecture, decoder_arch: &Architecture, seed: u64) -> Result<Self> {
        check_dim(encoder_arch.output_dim(), decoder_arch.input_dim())?;
        check_dim(encoder_arch.input_dim(), decoder_arch.output_dim())?;
        Ok(Autoencoder::Plain {
            encoder: Mlp::glorot(encoder_arch, seed),
            decoder: Mlp::glorot(decoder_arch, seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
        })
    }

    /// Anchors on the PCA of `data` and initialises the two correction networks.
    pub fn pca_anchored(
        data: &Matrix,
        encoder_arch: &Architecture,
        decoder_arch: &Architecture,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        check_dim(encoder_arch.output_dim(), decoder_arch.input_dim())?;
        check_dim(data.cols(), encoder_arch.input_dim())?;
        check_dim(data.cols(), decoder_arch.output_dim())?;
        let anchor = PcaAnchor::fit(data, encoder_arch.output_dim())?;
        Ok(Autoencoder::PcaAnchored {
            anchor,
            encoder: Mlp::glorot(encoder_arch, seed),
            decoder: Mlp::glorot(decoder_arch, seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
            alpha,
        })
    }

    pub fn build(
        mode: AutoencoderMode,
        data: &Matrix,
        encoder_arch: &Architecture,
        decoder_arch: &Architecture,
        seed: u64,
    ) -> Result<Self> {
        match mode {
            AutoencoderMode::Plain => Self::plain(encoder_arch, decoder_arch, seed),
            AutoencoderMode::PcaAnchored { alpha } => {
                Self::pca_anchored(data, encoder_arch, decoder_arch, alpha, seed)
            }
        }
    }

    pub fn mode(&self) -> AutoencoderMode {
        match self {
            Autoencoder::Plain { .. } => AutoencoderMode::Plain,
            Autoencoder::PcaAnchored { alpha, .. } => AutoencoderMode::PcaAnchored { alpha: *alpha },
        }
    }

    pub fn encoder(&self) -> &Mlp {
        match self {
            Autoencoder::Plain { encoder, .. } | Autoencoder::PcaAnchored { encoder, .. } => encoder,
        }
    }

    pub fn decoder(&self) -> &Mlp {
        match self {
            Autoencoder::Plain { decoder, .. } | Autoencoder::PcaAnchored { decoder, .. } => decoder,
        }
    }

    pub fn anchor(&self) -> Option<&PcaAnchor> {
        match self {
            Autoencoder::Plain { .. } => None,
            Autoencoder::PcaAnchored { anchor, .. } => Some(anchor),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.encoder().input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder().output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder().param_count() + self.decoder().param_count()
    }

    pub fn encode(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim(), u.len())?;
        Ok(match self {
            Autoencoder::Plain { encoder, .. } => encoder.forward_unchecked(u),
            Autoencoder::PcaAnchored { anchor, encoder, .. } => {
                let c: Vec<f64> = u.iter().zip(&anchor.mean).map(|(a, b)| a - b).collect();
                let mut h = encoder.forward_unchecked(&c);
                for (k, hk) in h.iter_mut().enumerate() {
                    *hk += crate::linalg::dot(anchor.basis.row(k), &c);
                }
                h
            }
        })
    }

    pub fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.latent_dim(), h.len())?;
        Ok(match self {
            Autoencoder::Plain { decoder, .. } => decoder.forward_unchecked(h),
            Autoencoder::PcaAnchored { anchor, decoder, .. } => {
                let mut u = decoder.forward_unchecked(h);
                for (j, uj) in u.iter_mut().enumerate() {
                    *uj += anchor.mean[j];
                    for (k, hk) in h.iter().enumerate() {
                        *uj += hk * anchor.basis.get(k, j);
                    }
                }
                u
            }
        })
    }

    pub fn encode_batch(&self, xs: &Matrix) -> Result<Matrix> {
        check_dim(self.ambient_dim(), xs.cols())?;
        match self {
            Autoencoder::Plain { encoder, .. } => encoder.forward_batch(xs),
            Autoencoder::PcaAnchored { anchor, encoder, .. } => {
                let c = anchor.center(xs);
                let mut h = encoder.forward_batch(&c)?;
                let lin = matmul_nt(&c, &anchor.basis)?;
                add_assign(&mut h, &lin);
                Ok(h)
            }
        }
    }

    pub fn decode_batch(&self, hs: &Matrix) -> Result<Matrix> {
        check_dim(self.latent_dim(), hs.cols())?;
        match self {
            Autoencoder::Plain { decoder, .. } => decoder.forward_batch(hs),
            Autoencoder::PcaAnchored { anchor, decoder, .. } => {
                let mut u = decoder.forward_batch(hs)?;
                let lin = matmul(hs, &anchor.basis)?;
                add_assign(&mut u, &lin);
                add_row(&mut u, &anchor.mean);
                Ok(u)
            }
        }
    }

    pub fn reconstruct_batch(&self, xs: &Matrix) -> Result<Matrix> {
        self.decode_batch(&self.encode_batch(xs)?)
    }

    /// Plain MSE between `xs` and their reconstructions.
    pub fn reconstruction_mse(&self, xs: &Matrix) -> Result<f64> {
        loss_weighted_mse(&self.reconstruct_batch(xs)?, xs, None)
    }

    /// Total training loss (reconstruction plus any anchoring penalty) and its
    /// gradient for the encoder and decoder parameters.
    fn loss_and_gradients(
        &self,
        xs: &Matrix,
        weights: Option<&[f64]>,
    ) -> Result<(f64, crate::neuralnet::Gradients, crate::neuralnet::Gradients)> {
        match self {
            Autoencoder::Plain { encoder, decoder } => {
                let enc = encoder.forward_cached(xs)?;
                let dec = decoder.forward_cached(enc.output())?;
                let loss = loss_weighted_mse(dec.output(), xs, weights)?;
                let g_r = mse_output_gradient(dec.output(), xs, weights)?;
                let (g_dec, g_h) = decoder.backward(&dec, &g_r)?;
                let (g_enc, _) = encoder.backward(&enc, &g_h)?;
                Ok((loss, g_enc, g_dec))
            }
            Autoencoder::PcaAnchored {
                anchor,
                encoder,
                decoder,
                alpha,
            } => {
                let c = anchor.center(xs);
                let enc = encoder.forward_cached(&c)?;
                let mut h = matmul_nt(&c, &anchor.basis)?;
                add_assign(&mut h, enc.output());
                let dec = decoder.forward_cached(&h)?;
                let mut r = matmul(&h, &anchor.basis)?;
                add_assign(&mut r, dec.output());
                add_row(&mut r, &anchor.mean);

                let zeros = Matrix::zeros(xs.rows(), anchor.latent_dim());
                let mut loss = loss_weighted_mse(&r, xs, weights)?;
                if *alpha != 0.0 {
                    loss += alpha * loss_weighted_mse(enc.output(), &zeros, weights)?;
                }

                let g_r = mse_output_gradient(&r, xs, weights)?;
                let (g_dec, g_h_nonlinear) = decoder.backward(&dec, &g_r)?;
                let mut g_h = matmul_nt(&g_r, &anchor.basis)?;
                add_assign(&mut g_h, &g_h_nonlinear);
                if *alpha != 0.0 {
                    let mut g_pen = mse_output_gradient(enc.output(), &zeros, weights)?;
                    g_pen.as_mut_slice().iter_mut().for_each(|v| *v *= alpha);
                    add_assign(&mut g_h, &g_pen);
                }
                let (g_enc, _) = encoder.backward(&enc, &g_h)?;
                Ok((loss, g_enc, g_dec))
            }
        }
    }

    fn networks_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        match self {
            Autoencoder::Plain { encoder, decoder } => (encoder, decoder),
            Autoencoder::PcaAnchored { encoder, decoder, .. } => (encoder, decoder),
        }
    }
}

fn add_assign(a: &mut Matrix, b: &Matrix) {
    a.as_mut_slice()
        .iter_mut()
        .zip(b.as_slice())
        .for_each(|(x, y)| *x += y);
}

fn add_row(a: &mut Matrix, row: &[f64]) {
    for r in 0..a.rows() {
        a.row_mut(r).iter_mut().zip(row).for_each(|(x, y)| *x += y);
    }
}

/// Trains encoder and decoder jointly, full batch, on reconstruction of `xs`.
pub fn train_autoencoder(
    mut ae: Autoencoder,
    xs: &Matrix,
    config: &TrainConfig,
) -> Result<(Autoencoder, LossReport)> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput("autoencoder training set"));
    }
    check_dim(ae.ambient_dim(), xs.cols())?;
    let weights = config.sample_weights.as_deref();
    if let Some(w) = weights {
        check_dim(xs.rows(), w.len())?;
    }
    let mut adam = Adam::for_networks(&[ae.encoder(), ae.decoder()]);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, g_enc, g_dec) = ae.loss_and_gradients(xs, weights)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        history.push(loss);
        let lr = config.schedule.lr_at(adam.steps());
        let (enc, dec) = ae.networks_mut();
        let mut params = enc.param_slices_mut();
        params.extend(dec.param_slices_mut());
        let mut grads = g_enc.slices();
        grads.extend(g_dec.slices());
        adam.step(params, grads, lr)?;
        if !ae.encoder().all_finite() || !ae.decoder().all_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: f64::NAN,
            });
        }
    }
    let (final_loss, _, _) = ae.loss_and_gradients(xs, weights)?;
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok((ae, LossReport { history, final_loss }))
}

/// PCA-anchored autoencoder of latent dimension `d` trained on `data`.
/// The architectures must map `m → d` and `d → m`.
pub fn pca_anchored_autoencoder(
    data: &Matrix,
    d: usize,
    alpha: f64,
    encoder_arch: &Architecture,
    decoder_arch: &Architecture,
    config: &TrainConfig,
) -> Result<(Autoencoder, LossReport)> {
    if d >= data.cols() {
        return Err(Error::InvalidArgument(format!(
            "latent dimension {d} must be below ambient dimension {}",
            data.cols()
        )));
    }
    check_dim(d, encoder_arch.output_dim())?;
    let ae = Autoencoder::pca_anchored(data, encoder_arch, decoder_arch, alpha, config.seed)?;
    train_autoencoder(ae, data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::train::LrSchedule;

    fn plane_data() -> Matrix {
        // points on a 2-plane in ℝ⁴
        let rows: Vec<[f64; 4]> = (0..30)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 0.11).cos();
                [a + b, a - b, 2.0 * a, 0.5 * b + 1.0]
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn pca_anchor_exact_on_linear_subspace() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 5, 2]).unwrap();
        let dec = Architecture::elu_linear(&[2, 5, 4]).unwrap();
        let ae = Autoencoder::PcaAnchored {
            anchor: PcaAnchor::fit(&data, 2).unwrap(),
            encoder: Mlp::zeros(&enc),
            decoder: Mlp::zeros(&dec),
            alpha: 1.0,
        };
        assert!(ae.reconstruction_mse(&data).unwrap() < 1e-25);
        let single = ae.decode(&ae.encode(data.row(3)).unwrap()).unwrap();
        for (a, b) in single.iter().zip(data.row(3)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn latent_dim_must_be_below_ambient() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 4]).unwrap();
        let dec = Architecture::elu_linear(&[4, 4]).unwrap();
        let cfg = TrainConfig::new(1, LrSchedule::constant(0.01), 0);
        assert!(pca_anchored_autoencoder(&data, 4, 1.0, &enc, &dec, &cfg).is_err());
    }

    #[test]
    fn alpha_zero_penalty_vanishes() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 6, 2]).unwrap();
        let dec = Architecture::elu_linear(&[2, 6, 4]).unwrap();
        let with = Autoencoder::pca_anchored(&data, &enc, &dec, 0.0, 3).unwrap();
        let (loss, _, _) = with.loss_and_gradients(&data, None).unwrap();
        assert!((loss - with.reconstruction_mse(&data).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn batch_and_single_paths_agree() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 6, 2]).unwrap();
        let dec = Architecture::elu_linear(&[2, 6, 4]).unwrap();
        for ae in [
            Autoencoder::pca_anchored(&data, &enc, &dec, 1.0, 3).unwrap(),
            Autoencoder::plain(&enc, &dec, 3).unwrap(),
        ] {
            let hb = ae.encode_batch(&data).unwrap();
            let rb = ae.decode_batch(&hb).unwrap();
            for i in [0, 7, 29] {
                let h = ae.encode(data.row(i)).unwrap();
                let r = ae.decode(&h).unwrap();
                assert!(h.iter().zip(hb.row(i)).all(|(a, b)| (a - b).abs() < 1e-12));
                assert!(r.iter().zip(rb.row(i)).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    fn finite_difference_check(ae: &mut Autoencoder, data: &Matrix) {
        let (_, g_enc, g_dec) = ae.loss_and_gradients(data, None).unwrap();
        let h = 1e-6;
        for which in 0..2 {
            let analytic = if which == 0 { g_enc.clone() } else { g_dec.clone() };
            let flat: Vec<f64> = analytic.slices().concat();
            let n = flat.len();
            for idx in (0..n).step_by(7) {
                let eval = |ae: &mut Autoencoder, delta: f64| {
                    let (e, d) = ae.networks_mut();
                    let net = if which == 0 { e } else { d };
                    let mut k = idx;
                    for s in net.param_slices_mut() {
                        if k < s.len() {
                            s[k] += delta;
                            break;
                        }
                        k -= s.len();
                    }
                };
                eval(ae, h);
                let (lp, _, _) = ae.loss_and_gradients(data, None).unwrap();
                eval(ae, -2.0 * h);
                let (lm, _, _) = ae.loss_and_gradients(data, None).unwrap();
                eval(ae, h);
                let fd = (lp - lm) / (2.0 * h);
                let denom = fd.abs().max(flat[idx].abs()).max(1e-4);
                assert!(
                    (fd - flat[idx]).abs() / denom < 1e-5,
                    "net {which} param {idx}: fd {fd} vs {}",
                    flat[idx]
                );
            }
        }
    }

    #[test]
    fn anchored_gradients_match_finite_differences() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 5, 2]).unwrap();
        let dec = Architecture::elu_linear(&[2, 5, 4]).unwrap();
        let mut ae = Autoencoder::pca_anchored(&data, &enc, &dec, 1.0, 9).unwrap();
        finite_difference_check(&mut ae, &data);
        let mut plain = Autoencoder::plain(&enc, &dec, 9).unwrap();
        finite_difference_check(&mut plain, &data);
    }

    #[test]
    fn training_reduces_loss() {
        let data = plane_data();
        let enc = Architecture::elu_linear(&[4, 8, 2]).unwrap();
        let dec = Architecture::elu_linear(&[2, 8, 4]).unwrap();
        let cfg = TrainConfig::new(300, LrSchedule::constant(0.01), 1);
        let ae = Autoencoder::plain(&enc, &dec, 1).unwrap();
        let (_, report) = train_autoencoder(ae, &data, &cfg).unwrap();
        assert!(report.final_loss < 0.1 * report.history[0]);
    }
}
