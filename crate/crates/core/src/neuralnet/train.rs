//! Full-batch Adam training with a staircase exponential learning-rate schedule.
//!
//! One optimizer step per epoch: every epoch uses the whole training set, so the
//! schedule's `decay_every` counts epochs.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::neuralnet::mlp::{backprop, Mlp};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update with bias correction. `step_index` starts at 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    step_index: u64,
    lr: f64,
) -> Result<()> {
    check_dim(params.len(), grads.len())?;
    check_dim(params.len(), moments.m.len())?;
    check_dim(params.len(), moments.v.len())?;
    if step_index == 0 {
        return Err(Error::InvalidArgument("adam step index starts at 1".into()));
    }
    let t = step_index as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

/// Adam state for a fixed list of parameter buffers.
#[derive(Debug, Clone)]
pub struct Adam {
    moments: Vec<Moments>,
    steps: u64,
}

impl Adam {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            moments: sizes.iter().map(|&n| Moments::zeros(n)).collect(),
            steps: 0,
        }
    }

    pub fn for_networks(nets: &[&Mlp]) -> Self {
        let sizes: Vec<usize> = nets
            .iter()
            .flat_map(|n| n.param_slices().into_iter().map(<[f64]>::len).collect::<Vec<_>>())
            .collect();
        Self::new(&sizes)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) -> Result<()> {
        check_dim(self.moments.len(), params.len())?;
        check_dim(self.moments.len(), grads.len())?;
        self.steps += 1;
        for ((p, g), m) in params.into_iter().zip(grads).zip(self.moments.iter_mut()) {
            adam_step(p, g, m, self.steps, lr)?;
        }
        Ok(())
    }
}

/// `lr(s) = lr_init · decay_rate^⌊s / decay_every⌋` (or the continuous exponent when
/// not staircased). `s` counts optimizer steps from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_init: f64,
    pub decay_rate: f64,
    pub decay_every: usize,
    pub staircase: bool,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            lr_init: lr,
            decay_rate: 1.0,
            decay_every: 1,
            staircase: true,
        }
    }

    pub fn staircase(lr_init: f64, decay_rate: f64, decay_every: usize) -> Self {
        Self {
            lr_init,
            decay_rate,
            decay_every,
            staircase: true,
        }
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        let every = self.decay_every.max(1) as f64;
        let exponent = if self.staircase {
            (step / self.decay_every.max(1) as u64) as f64
        } else {
            step as f64 / every
        };
        self.lr_init * self.decay_rate.powf(exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0) || !self.lr_init.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::Config("decay rate must lie in (0, 1]".into()));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: LrSchedule,
    /// Per-sample loss weights; uniform when absent.
    #[serde(skip)]
    pub sample_weights: Option<Vec<f64>>,
    /// Seeds the initial weights of networks built for this training run.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, schedule: LrSchedule, seed: u64) -> Self {
        Self {
            epochs,
            schedule,
            sample_weights: None,
            seed,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.sample_weights = Some(weights);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    /// Loss at the start of each epoch, before that epoch's update.
    pub history: Vec<f64>,
    /// Loss of the returned parameters.
    pub final_loss: f64,
}

/// Trains `mlp` to map `xs` onto `targets` under weighted MSE.
pub fn train(mut mlp: Mlp, xs: &Matrix, targets: &Matrix, config: &TrainConfig) -> Result<(Mlp, LossReport)> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    check_dim(xs.rows(), targets.rows())?;
    check_dim(mlp.input_dim(), xs.cols())?;
    check_dim(mlp.output_dim(), targets.cols())?;
    let weights = config.sample_weights.as_deref();
    let mut adam = Adam::for_networks(&[&mlp]);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (grads, loss) = backprop(&mlp, xs, targets, weights)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        history.push(loss);
        let lr = config.schedule.lr_at(adam.steps());
        adam.step(mlp.param_slices_mut(), grads.slices(), lr)?;
        if !mlp.all_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: f64::NAN,
            });
        }
    }
    let preds = mlp.forward_batch(xs)?;
    let final_loss = crate::neuralnet::loss_weighted_mse(&preds, targets, weights)?;
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok((mlp, LossReport { history, final_loss }))
}
