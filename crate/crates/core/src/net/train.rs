use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::Strain2D;
use crate::net::branch::BranchNet;
use crate::net::mlp::{Normalizer, Trace};

/// What the learning-rate decay counter `t` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecayUnit {
    /// Optimizer updates.
    Step,
    /// Completed epochs (`batches_per_epoch` updates each).
    #[default]
    Epoch,
}

/// How POD-coefficient targets are scaled before the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputScaling {
    /// Per-coefficient mean removal, one common scale (the RMS of the
    /// per-coefficient standard deviations). Keeps the relative weight of
    /// the modes, so the loss tracks the field error.
    #[default]
    Uniform,
    /// Zero mean and unit variance per coefficient.
    PerFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_step: f64,
    pub decay_rate: f64,
    pub decay_unit: DecayUnit,
    pub output_scaling: OutputScaling,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Pin the prediction at zero strain to the exact zero field (see
    /// [`BranchNet::anchor`]). Applied by the caller, which knows the basis.
    pub zero_anchor: bool,
    /// Add the exact small-strain response `S eps` to the output (see
    /// [`BranchNet::slope`]). Applied by the caller, which knows the cell.
    pub linear_prior: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay_step: 1000.0,
            decay_rate: 0.2,
            decay_unit: DecayUnit::Epoch,
            output_scaling: OutputScaling::Uniform,
            batches_per_epoch: 10,
            epochs: 2000,
            validation_fraction: 0.2,
            seed: 0,
            zero_anchor: true,
            linear_prior: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay_step > 0.0) {
            return bad(format!("decay_step must be positive, got {}", self.decay_step));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad(format!("decay_rate must lie in (0, 1], got {}", self.decay_rate));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.batches_per_epoch == 0 || self.epochs == 0 {
            return bad("batches_per_epoch and epochs must be at least 1".into());
        }
        Ok(())
    }

    /// Learning rate after `step` optimizer updates.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let t = match self.decay_unit {
            DecayUnit::Step => step as f64,
            DecayUnit::Epoch => (step / self.batches_per_epoch) as f64,
        };
        self.lr0 * self.decay_rate.powf(t / self.decay_step)
    }
}

/// Decorrelates the split shuffle from the minibatch shuffle of the same seed.
const SPLIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
}

/// `(1 / (N m)) sum |pred - target|^2` over equally shaped row sets.
pub fn mse_loss(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: p.len(),
            });
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += t.len();
    }
    if count == 0 {
        return Err(Error::InvalidArgument("empty loss input".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub net: BranchNet,
    /// Mean minibatch loss of each epoch (standardized coefficient space).
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch; empty when there is no validation split.
    pub val_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub steps: usize,
}

/// Seeded train/validation split. Fewer than two samples leave the
/// validation set empty.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if n < 2 {
        return (idx, Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM);
    idx.shuffle(&mut rng);
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    train.sort_unstable();
    let mut val_sorted = val;
    val_sorted.sort_unstable();
    (train, val_sorted)
}

fn eval_loss(net: &BranchNet, xs: &[Vec<f64>], ys: &[Vec<f64>], idx: &[usize]) -> f64 {
    let shift = net.output_shift();
    let mut sum = 0.0;
    for &i in idx {
        let mut y = net.mlp.forward(&xs[i]);
        if let Some(s) = &shift {
            y.iter_mut().zip(s).for_each(|(v, s)| *v += s);
        }
        sum += y.iter().zip(&ys[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    sum / (idx.len() * ys[0].len()) as f64
}

/// Fits the branch network to coefficient targets with Adam and the
/// exponentially decaying learning rate; returns the parameters with the
/// lowest validation loss.
pub fn train(
    inputs: &[Strain2D],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    init: BranchNet,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching nonempty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let p = init.p();
    if targets.iter().any(|t| t.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: targets.iter().map(|t| t.len()).find(|&l| l != p).unwrap_or(0),
        });
    }
    let (train_idx, val_idx) = split_indices(inputs.len(), cfg.validation_fraction, cfg.seed);

    let raw_x: Vec<Vec<f64>> = inputs.iter().map(|e| e.to_voigt().to_vec()).collect();
    let fit_rows = |rows: &[Vec<f64>]| -> Normalizer {
        let subset: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
        Normalizer::fit(&subset)
    };
    let input_norm = fit_rows(&raw_x);
    // The network fits what the linear term leaves over.
    let targets: Vec<Vec<f64>> = match &init.slope {
        Some(_) => inputs
            .iter()
            .zip(targets)
            .map(|(e, y)| y.iter().zip(init.linear_part(&e.to_voigt())).map(|(a, l)| a - l).collect())
            .collect(),
        None => targets.to_vec(),
    };
    let mut output_norm = fit_rows(&targets);
    if cfg.output_scaling == OutputScaling::Uniform {
        let rms = (output_norm.scale.iter().map(|s| s * s).sum::<f64>() / p as f64).sqrt();
        output_norm.scale.iter_mut().for_each(|s| *s = rms);
    }
    let xs: Vec<Vec<f64>> = raw_x.iter().map(|x| input_norm.normalize(x)).collect();
    let ys: Vec<Vec<f64>> = targets.iter().map(|y| output_norm.normalize(y)).collect();

    let (anchor, slope) = (init.anchor, init.slope);
    let mut net = BranchNet::new(init.mlp, input_norm, output_norm)?;
    if let Some(a) = anchor {
        net = net.with_anchor(a)?;
    }
    if let Some(s) = slope {
        net = net.with_slope(s)?;
    }
    let anchor_target = net.anchor.as_ref().map(|a| net.output_norm.normalize(a));
    let zero_input = net.zero_input();
    let mut zero_trace = Trace::default();
    let mut zero_grad = vec![0.0; p];
    let n_params = net.mlp.params.len();
    let mut adam = Adam::new(n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = train_idx.clone();
    let n_batches = cfg.batches_per_epoch.min(order.len());
    let mut grad = vec![0.0; n_params];
    let mut trace = Trace::default();

    let mut report = TrainReport {
        net: net.clone(),
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        learning_rate: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        train_indices: train_idx.clone(),
        val_indices: val_idx.clone(),
        steps: 0,
    };
    let mut best = f64::INFINITY;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        let lr_epoch = cfg.learning_rate(step);
        for b in 0..n_batches {
            let lo = b * order.len() / n_batches;
            let hi = (b + 1) * order.len() / n_batches;
            let batch = &order[lo..hi];
            grad.iter_mut().for_each(|g| *g = 0.0);
            let norm = 1.0 / (batch.len() * p) as f64;
            let mut batch_sum = 0.0;
            // With an anchor the prediction is f(x) - f(0) + anchor.
            let shift: Option<Vec<f64>> = anchor_target.as_ref().map(|t| {
                let z = net.mlp.forward_traced(&zero_input, &mut zero_trace);
                t.iter().zip(&z).map(|(a, b)| a - b).collect()
            });
            zero_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let mut y = net.mlp.forward_traced(&xs[i], &mut trace);
                if let Some(s) = &shift {
                    y.iter_mut().zip(s).for_each(|(v, s)| *v += s);
                }
                let d: Vec<f64> = y
                    .iter()
                    .zip(&ys[i])
                    .map(|(a, t)| {
                        batch_sum += (a - t) * (a - t);
                        2.0 * (a - t) * norm
                    })
                    .collect();
                net.mlp.backward(&trace, &d, &mut grad);
                zero_grad.iter_mut().zip(&d).for_each(|(g, v)| *g -= v);
            }
            if shift.is_some() {
                net.mlp.backward(&zero_trace, &zero_grad, &mut grad);
            }
            let batch_loss = batch_sum * norm;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    detail: format!("training loss became {batch_loss} in epoch {epoch}"),
                });
            }
            epoch_sum += batch_loss * batch.len() as f64;
            adam.step(&mut net.mlp.params, &grad, cfg.learning_rate(step));
            step += 1;
        }
        let train_loss = epoch_sum / order.len() as f64;
        report.train_loss.push(train_loss);
        report.learning_rate.push(lr_epoch);
        let monitor = if val_idx.is_empty() {
            train_loss
        } else {
            let v = eval_loss(&net, &xs, &ys, &val_idx);
            report.val_loss.push(v);
            v
        };
        if !monitor.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("validation loss became {monitor} in epoch {epoch}"),
            });
        }
        if monitor < best {
            best = monitor;
            report.best_epoch = epoch;
            report.net = net.clone();
        }
    }
    report.steps = step;
    Ok(report)
}
