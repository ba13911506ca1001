use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gemm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z >= 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Linear => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z >= 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Linear => 1.0,
        }
    }

    /// Derivative recovered from the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            // elu(z) >= 0 iff z >= 0, and for z < 0 the slope e^z is elu(z) + 1
            Activation::Elu => {
                if a >= 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Elu => "elu",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "elu" => Ok(Activation::Elu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidArchitecture(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

/// Layer widths plus the activation applied after each affine map, written the
/// way the training tables are: `"2:32:32:16:4:1"` and `"elu:elu:elu:elu:linear"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let arch = Self { dims, activations };
        arch.validate()?;
        Ok(arch)
    }

    pub fn parse(dims: &str, activations: &str) -> Result<Self> {
        let dims = dims
            .split(':')
            .map(|d| {
                d.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArchitecture(format!("bad layer width `{}`", d.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let activations = activations
            .split(':')
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims, activations)
    }

    /// Hidden layers use elu, the last map is linear.
    pub fn elu_linear(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArchitecture(
                "need at least two layer widths".into(),
            ));
        }
        let mut acts = vec![Activation::Elu; dims.len() - 2];
        acts.push(Activation::Linear);
        Self::new(dims.to_vec(), acts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::InvalidArchitecture(
                "need at least two layer widths".into(),
            ));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArchitecture("zero layer width".into()));
        }
        if self.activations.len() != self.dims.len() - 1 {
            return Err(Error::InvalidArchitecture(format!(
                "{} layer gaps but {} activations",
                self.dims.len() - 1,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn dims_string(&self) -> String {
        self.dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(":")
    }

    pub fn activations_string(&self) -> String {
        self.activations
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(":")
    }
}

/// Fully connected feedforward network. Weight matrix `l` is row-major with shape
/// `layer_dims[l + 1] × layer_dims[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) layer_dims: Vec<usize>,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) activations: Vec<Activation>,
}

/// Gradient of a scalar loss with respect to every parameter of an [`Mlp`],
/// laid out exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Flat views in the same order as [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .map(Vec::as_slice)
            .chain(self.biases.iter().map(Vec::as_slice))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Layer outputs kept from a batched forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `outputs[0]` is the input batch, `outputs[l + 1]` the activation of layer `l`.
    pub outputs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().unwrap()
    }
}

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
pub fn glorot_init(layer_dims: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
    let arch = Architecture::new(layer_dims.to_vec(), activations.to_vec())?;
    Ok(Mlp::glorot(&arch, seed))
}

impl Mlp {
    pub fn glorot(arch: &Architecture, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(arch.dims.len() - 1);
        let mut biases = Vec::with_capacity(arch.dims.len() - 1);
        for w in arch.dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            layer_dims: arch.dims.clone(),
            weights,
            biases,
            activations: arch.activations.clone(),
        }
    }

    /// Network with every parameter zero.
    pub fn zeros(arch: &Architecture) -> Mlp {
        Mlp {
            layer_dims: arch.dims.clone(),
            weights: arch.dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: arch.dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            activations: arch.activations.clone(),
        }
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        activations: Vec<Activation>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Mlp> {
        Architecture::new(layer_dims.clone(), activations.clone())?;
        check_dim(layer_dims.len() - 1, weights.len())?;
        check_dim(layer_dims.len() - 1, biases.len())?;
        for (l, w) in layer_dims.windows(2).enumerate() {
            check_dim(w[0] * w[1], weights[l].len())?;
            check_dim(w[1], biases[l].len())?;
        }
        Ok(Mlp {
            layer_dims,
            weights,
            biases,
            activations,
        })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            dims: self.layer_dims.clone(),
            activations: self.activations.clone(),
        }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flat mutable views: all weight matrices, then all bias vectors.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .map(Vec::as_mut_slice)
            .chain(self.biases.iter_mut().map(Vec::as_mut_slice))
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .map(Vec::as_slice)
            .chain(self.biases.iter().map(Vec::as_slice))
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Single-sample evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let act = self.activations[l];
            let next: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = self.biases[l][o] + row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
                    act.apply(z)
                })
                .collect();
            a = next;
        }
        a
    }

    /// Batched evaluation; rows of `xs` are samples.
    pub fn forward_batch(&self, xs: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(xs)?.outputs.pop().unwrap())
    }

    pub fn forward_cached(&self, xs: &Matrix) -> Result<ForwardCache> {
        check_dim(self.input_dim(), xs.cols())?;
        let batch = xs.rows();
        let mut outputs = Vec::with_capacity(self.n_layers() + 1);
        outputs.push(xs.clone());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let mut z = Matrix::zeros(batch, n_out);
            for r in 0..batch {
                z.row_mut(r).copy_from_slice(&self.biases[l]);
            }
            let input = outputs.last().unwrap();
            // z = x wᵀ + b
            gemm(
                batch,
                n_in,
                n_out,
                1.0,
                input.as_slice(),
                n_in,
                1,
                &self.weights[l],
                1,
                n_in,
                1.0,
                z.as_mut_slice(),
            );
            let act = self.activations[l];
            if act != Activation::Linear {
                z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            outputs.push(z);
        }
        Ok(ForwardCache { outputs })
    }

    /// Backpropagates `d_output = ∂loss/∂output` through a cached forward pass.
    /// Returns parameter gradients and `∂loss/∂input`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> Result<(Gradients, Matrix)> {
        let batch = cache.outputs[0].rows();
        check_dim(batch, d_output.rows())?;
        check_dim(self.output_dim(), d_output.cols())?;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_output.clone();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let act = self.activations[l];
            if act != Activation::Linear {
                let out = &cache.outputs[l + 1];
                delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(out.as_slice())
                    .for_each(|(d, &a)| *d *= act.derivative_from_output(a));
            }
            let input = &cache.outputs[l];
            // dW = δᵀ x
            gemm(
                n_out,
                batch,
                n_in,
                1.0,
                delta.as_slice(),
                1,
                n_out,
                input.as_slice(),
                n_in,
                1,
                0.0,
                &mut grads.weights[l],
            );
            let gb = &mut grads.biases[l];
            for r in delta.iter_rows() {
                gb.iter_mut().zip(r).for_each(|(g, d)| *g += d);
            }
            // δ_prev = δ w
            let mut prev = Matrix::zeros(batch, n_in);
            gemm(
                batch,
                n_out,
                n_in,
                1.0,
                delta.as_slice(),
                n_out,
                1,
                &self.weights[l],
                n_in,
                1,
                0.0,
                prev.as_mut_slice(),
            );
            delta = prev;
        }
        Ok((grads, delta))
    }
}

/// `Σ wᵢ‖predᵢ − targetᵢ‖² / (Σ wᵢ · dim)`; `None` means uniform weights.
pub fn loss_weighted_mse(preds: &Matrix, targets: &Matrix, weights: Option<&[f64]>) -> Result<f64> {
    check_dim(preds.rows(), targets.rows())?;
    check_dim(preds.cols(), targets.cols())?;
    let dim = preds.cols() as f64;
    match weights {
        None => {
            if preds.rows() == 0 {
                return Err(Error::ZeroWeightSum);
            }
            let sse: f64 = preds
                .as_slice()
                .iter()
                .zip(targets.as_slice())
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            Ok(sse / (preds.rows() as f64 * dim))
        }
        Some(w) => {
            check_dim(preds.rows(), w.len())?;
            if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "sample weights must be finite and nonnegative".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroWeightSum);
            }
            let mut acc = 0.0;
            for (i, wi) in w.iter().enumerate() {
                let e: f64 = preds
                    .row(i)
                    .iter()
                    .zip(targets.row(i))
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum();
                acc += wi * e;
            }
            Ok(acc / (total * dim))
        }
    }
}

/// `∂ loss_weighted_mse / ∂ preds`.
pub(crate) fn mse_output_gradient(
    preds: &Matrix,
    targets: &Matrix,
    weights: Option<&[f64]>,
) -> Result<Matrix> {
    let dim = preds.cols() as f64;
    let mut g = Matrix::zeros(preds.rows(), preds.cols());
    let total = match weights {
        Some(w) => w.iter().sum::<f64>(),
        None => preds.rows() as f64,
    };
    if total <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let scale = 2.0 / (total * dim);
    for i in 0..preds.rows() {
        let wi = weights.map_or(1.0, |w| w[i]);
        for ((gv, p), t) in g.row_mut(i).iter_mut().zip(preds.row(i)).zip(targets.row(i)) {
            *gv = scale * wi * (p - t);
        }
    }
    Ok(g)
}

/// Exact gradient of [`loss_weighted_mse`] of `mlp(xs)` against `targets`.
/// Also returns the loss value.
pub fn backprop(
    mlp: &Mlp,
    xs: &Matrix,
    targets: &Matrix,
    weights: Option<&[f64]>,
) -> Result<(Gradients, f64)> {
    check_dim(xs.rows(), targets.rows())?;
    check_dim(mlp.output_dim(), targets.cols())?;
    let cache = mlp.forward_cached(xs)?;
    let loss = loss_weighted_mse(cache.output(), targets, weights)?;
    let d_out = mse_output_gradient(cache.output(), targets, weights)?;
    let (grads, _) = mlp.backward(&cache, &d_out)?;
    Ok((grads, loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_s1_encoder_shapes() {
        let arch = Architecture::parse("2:32:32:16:4:1", "elu:elu:elu:elu:linear").unwrap();
        let mlp = Mlp::glorot(&arch, 7);
        let shapes: Vec<usize> = mlp.weights.iter().map(Vec::len).collect();
        assert_eq!(shapes, vec![32 * 2, 32 * 32, 16 * 32, 4 * 16, 4]);
        assert_eq!(mlp.n_layers(), 5);
        assert!(mlp.biases.iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn glorot_limits_and_determinism() {
        let a = glorot_init(&[1, 1], &[Activation::Linear], 3).unwrap();
        let w = a.weights[0][0];
        assert!(w.abs() <= 3f64.sqrt());
        assert_eq!(a.biases[0][0], 0.0);
        let b = glorot_init(&[1, 1], &[Activation::Linear], 3).unwrap();
        assert_eq!(a, b);
        let big = glorot_init(&[10, 30], &[Activation::Elu], 1).unwrap();
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(big.weights[0].iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn bad_architectures_rejected() {
        assert!(glorot_init(&[3], &[], 0).is_err());
        assert!(glorot_init(&[3, 0, 1], &[Activation::Elu, Activation::Linear], 0).is_err());
        assert!(glorot_init(&[3, 2], &[Activation::Elu, Activation::Linear], 0).is_err());
        assert!(Architecture::parse("2:x", "linear").is_err());
        assert!(Architecture::parse("2:1", "relu").is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let arch = Architecture::elu_linear(&[3, 5, 2]).unwrap();
        let mlp = Mlp::zeros(&arch);
        assert_eq!(mlp.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let mlp = Mlp::from_parts(
            vec![2, 2],
            vec![Activation::Linear],
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![vec![0.5, -0.5]],
        )
        .unwrap();
        assert_eq!(mlp.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mlp = Mlp::zeros(&Architecture::elu_linear(&[3, 2]).unwrap());
        assert!(matches!(
            mlp.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn elu_continuous_at_zero() {
        let e = Activation::Elu;
        assert_eq!(e.apply(0.0), 0.0);
        assert!(e.apply(-1e-12).abs() < 1e-11);
        assert_eq!(e.derivative(0.0), 1.0);
        assert!((e.derivative(-1e-12) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn mse_examples() {
        let p = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(loss_weighted_mse(&p, &t, Some(&[1.0])).unwrap(), 12.5);
        assert_eq!(loss_weighted_mse(&p, &p, None).unwrap(), 0.0);
        assert!(matches!(
            loss_weighted_mse(&p, &t, Some(&[0.0])),
            Err(Error::ZeroWeightSum)
        ));
        // (1·1 + 3·(4+4)) / (4 · 2)
        let p2 = Matrix::from_rows(&[[1.0, 0.0], [2.0, 2.0]]).unwrap();
        let t2 = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let l = loss_weighted_mse(&p2, &t2, Some(&[1.0, 3.0])).unwrap();
        assert!((l - 25.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn linear_scalar_gradient_closed_form() {
        let (w, b, x, t) = (0.7, -0.2, 1.5, 0.4);
        let mlp = Mlp::from_parts(
            vec![1, 1],
            vec![Activation::Linear],
            vec![vec![w]],
            vec![vec![b]],
        )
        .unwrap();
        let xs = Matrix::from_rows(&[[x]]).unwrap();
        let ts = Matrix::from_rows(&[[t]]).unwrap();
        let (g, _) = backprop(&mlp, &xs, &ts, None).unwrap();
        let r = w * x + b - t;
        assert!((g.weights[0][0] - 2.0 * r * x).abs() < 1e-14);
        assert!((g.biases[0][0] - 2.0 * r).abs() < 1e-14);
    }

    #[test]
    fn zero_error_zero_gradient() {
        let arch = Architecture::elu_linear(&[2, 4, 3]).unwrap();
        let mlp = Mlp::glorot(&arch, 11);
        let xs = Matrix::from_rows(&[[0.3, -0.1], [1.0, 2.0]]).unwrap();
        let ys = mlp.forward_batch(&xs).unwrap();
        let (g, loss) = backprop(&mlp, &xs, &ys, None).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn batch_forward_matches_single() {
        let arch = Architecture::elu_linear(&[3, 6, 5, 2]).unwrap();
        let mlp = Mlp::glorot(&arch, 5);
        let xs = Matrix::from_rows(&[[0.1, 0.2, -0.3], [-1.0, 0.5, 2.0]]).unwrap();
        let batch = mlp.forward_batch(&xs).unwrap();
        for i in 0..2 {
            let single = mlp.forward(xs.row(i)).unwrap();
            for (a, b) in single.iter().zip(batch.row(i)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
