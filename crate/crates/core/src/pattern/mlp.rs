//! Single-hidden-layer MLP regressor trained by full-batch gradient descent.
//!
//! Inputs are z-scored with training statistics; the target stays in raw
//! count units so predictions, deviations and thresholds share one unit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MeanModel, Schema};
use crate::error::{Error, Result};
use crate::event::EventId;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Heavy-ball momentum.
    Momentum,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "momentum" | "sgd" => Ok(Optimizer::Momentum),
            "adam" => Ok(Optimizer::Adam),
            other => Err(format!("unknown optimizer {other:?} (expected adam|momentum)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyperParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Momentum coefficient, or Adam's first-moment decay.
    pub momentum: f64,
    /// Fewer than `min_rows_per_input * |MB|` training rows falls back to a
    /// mean model.
    pub min_rows_per_input: usize,
}

impl Default for MlpHyperParams {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 1000,
            learning_rate: 1e-2,
            optimizer: Optimizer::Adam,
            momentum: 0.9,
            min_rows_per_input: 10,
        }
    }
}

impl MlpHyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden layer needs at least one unit".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Weights of an `n_in -> hidden -> 1` network, flattened as
/// `[w1 (hidden x n_in, row-major) | b1 (hidden) | w2 (hidden) | b2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub n_in: usize,
    pub hidden: usize,
    pub params: Vec<T>,
}

impl<T: Scalar> Network<T> {
    pub fn param_count(n_in: usize, hidden: usize) -> usize {
        hidden * n_in + 2 * hidden + 1
    }

    /// Glorot-uniform weights, zero hidden biases, output bias `out_bias`.
    pub fn init(n_in: usize, hidden: usize, out_bias: T, rng: &mut ChaCha8Rng) -> Self {
        let mut params = Vec::with_capacity(Self::param_count(n_in, hidden));
        let a1 = (6.0 / (n_in + hidden) as f64).sqrt();
        for _ in 0..hidden * n_in {
            params.push(T::lit(rng.gen_range(-a1..a1)));
        }
        params.extend(std::iter::repeat_n(T::zero(), hidden));
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        for _ in 0..hidden {
            params.push(T::lit(rng.gen_range(-a2..a2)));
        }
        params.push(out_bias);
        Self { n_in, hidden, params }
    }

    fn split(&self) -> (&[T], &[T], &[T], T) {
        let (h, k) = (self.hidden, self.n_in);
        let (w1, rest) = self.params.split_at(h * k);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }

    pub fn forward(&self, z: &[T]) -> T {
        let (w1, b1, w2, b2) = self.split();
        let k = self.n_in;
        let mut y = b2;
        for u in 0..self.hidden {
            let pre = w1[u * k..(u + 1) * k].iter().zip(z).fold(b1[u], |acc, (&w, &x)| acc + w * x);
            y += w2[u] * pre.tanh();
        }
        y
    }

    /// Weighted mean squared error over `inputs` (row-major, `n_in` wide) and
    /// its gradient, written into `grad`. Weights are row multiplicities.
    pub fn loss_and_gradient(&self, inputs: &[T], targets: &[T], weights: &[T], grad: &mut [T]) -> T {
        let (h, k) = (self.hidden, self.n_in);
        let (w1, b1, w2, b2) = self.split();
        grad.iter_mut().for_each(|g| *g = T::zero());
        let total: T = weights.iter().copied().sum();
        let mut loss = T::zero();
        let mut act = vec![T::zero(); h];
        let (gw1, rest) = grad.split_at_mut(h * k);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        for (r, (&y, &w)) in targets.iter().zip(weights).enumerate() {
            let z = &inputs[r * k..(r + 1) * k];
            let mut out = b2;
            for u in 0..h {
                let pre = w1[u * k..(u + 1) * k].iter().zip(z).fold(b1[u], |acc, (&a, &b)| acc + a * b);
                act[u] = pre.tanh();
                out += w2[u] * act[u];
            }
            let err = out - y;
            loss += w * err * err;
            let g = T::lit(2.0) * w * err / total;
            gb2[0] += g;
            for u in 0..h {
                gw2[u] += g * act[u];
                let d = g * w2[u] * (T::one() - act[u] * act[u]);
                gb1[u] += d;
                for (gw, &x) in gw1[u * k..(u + 1) * k].iter_mut().zip(z) {
                    *gw += d * x;
                }
            }
        }
        loss / total
    }

    pub fn loss(&self, inputs: &[T], targets: &[T], weights: &[T]) -> T {
        let k = self.n_in;
        let total: T = weights.iter().copied().sum();
        targets
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(r, (&y, &w))| {
                let e = self.forward(&inputs[r * k..(r + 1) * k]) - y;
                w * e * e
            })
            .sum::<T>()
            / total
    }
}

/// Expected count of one event from its related events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor<T> {
    pub event_id: EventId,
    /// Related events used as inputs, ascending.
    pub inputs: Vec<EventId>,
    /// Related events dropped for having zero training variance.
    pub dropped_inputs: Vec<EventId>,
    pub input_mean: Vec<T>,
    pub input_std: Vec<T>,
    pub activation: Activation,
    pub network: Network<T>,
    pub seed: u64,
    pub epochs_trained: usize,
    pub learning_rate: f64,
    pub training_loss: T,
}

impl<T: Scalar> MlpRegressor<T> {
    pub fn standardize(&self, raw: &[T]) -> Vec<T> {
        raw.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    /// Prediction from raw (unstandardized) input counts, in `inputs` order.
    pub fn predict_raw(&self, raw: &[T]) -> T {
        self.network.forward(&self.standardize(raw))
    }

    pub fn predict(&self, row: &[T], schema: &Schema) -> Result<T> {
        let raw = self
            .inputs
            .iter()
            .map(|&e| schema.column(e).map(|j| row[j]).ok_or(Error::UnknownEvent(e)))
            .collect::<Result<Vec<T>>>()?;
        Ok(self.predict_raw(&raw))
    }
}

/// Why a dependent event ended up with a mean model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Fallback {
    InsufficientData { rows: usize, required: usize },
    ConstantInputs,
    NonFiniteLoss,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MlpTraining<T> {
    Trained(MlpRegressor<T>),
    Fallback { model: MeanModel<T>, reason: Fallback },
}

/// Training rows with identical (inputs, target) collapsed into one weighted
/// row, in order of first appearance. The loss and its gradient are the
/// same as over the expanded rows.
struct Batch<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    weights: Vec<T>,
}

fn compress<T: Scalar>(rows: &[Vec<u32>], targets: &[u32], k: usize, mean: &[T], std: &[T]) -> Batch<T> {
    let mut seen: std::collections::HashMap<(&[u32], u32), usize> = std::collections::HashMap::new();
    let mut batch = Batch {
        inputs: Vec::new(),
        targets: Vec::new(),
        weights: Vec::new(),
    };
    for (row, &y) in rows.iter().zip(targets) {
        match seen.get(&(row.as_slice(), y)) {
            Some(&slot) => batch.weights[slot] += T::one(),
            None => {
                seen.insert((row.as_slice(), y), batch.targets.len());
                for c in 0..k {
                    batch.inputs.push((T::from_count(row[c]) - mean[c]) / std[c]);
                }
                batch.targets.push(T::from_count(y));
                batch.weights.push(T::one());
            }
        }
    }
    batch
}

fn run_optimizer<T: Scalar>(net: &mut Network<T>, batch: &Batch<T>, hp: &MlpHyperParams, lr: f64) -> Option<T> {
    let p = net.params.len();
    let mut grad = vec![T::zero(); p];
    let mut m1 = vec![T::zero(); p];
    let mut m2 = vec![T::zero(); p];
    let lr = T::lit(lr);
    let beta1 = T::lit(hp.momentum);
    let beta2 = T::lit(0.999);
    let eps = T::lit(1e-8);
    let (mut b1t, mut b2t) = (T::one(), T::one());
    for _ in 0..hp.epochs {
        let loss = net.loss_and_gradient(&batch.inputs, &batch.targets, &batch.weights, &mut grad);
        if !loss.is_finite() {
            return None;
        }
        match hp.optimizer {
            Optimizer::Momentum => {
                for ((w, v), &g) in net.params.iter_mut().zip(m1.iter_mut()).zip(&grad) {
                    *v = beta1 * *v - lr * g;
                    *w += *v;
                }
            }
            Optimizer::Adam => {
                b1t *= beta1;
                b2t *= beta2;
                for i in 0..p {
                    let g = grad[i];
                    m1[i] = beta1 * m1[i] + (T::one() - beta1) * g;
                    m2[i] = beta2 * m2[i] + (T::one() - beta2) * g * g;
                    let mh = m1[i] / (T::one() - b1t);
                    let vh = m2[i] / (T::one() - b2t);
                    net.params[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
    let loss = net.loss(&batch.inputs, &batch.targets, &batch.weights);
    loss.is_finite().then_some(loss)
}

/// Trains the dependency model of column `focused` on columns `related`.
pub fn train_mlp<T: Scalar>(
    x: &crate::sequencer::EventCountMatrix,
    focused: usize,
    related: &[usize],
    hp: &MlpHyperParams,
    seed: u64,
) -> MlpTraining<T> {
    let ids = x.event_ids();
    let event_id = ids[focused];
    let n = x.n_rows();
    let fallback = |reason| MlpTraining::Fallback {
        model: super::train_mean(x, focused),
        reason,
    };
    let required = hp.min_rows_per_input * related.len();
    if related.is_empty() || n < required || n == 0 {
        return fallback(Fallback::InsufficientData { rows: n, required });
    }

    let mut inputs = Vec::new();
    let mut dropped = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    let mut cols = Vec::new();
    for &c in related {
        let col: Vec<T> = x.column(c);
        let mu = col.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
        let var = col.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / T::from_usize(n).unwrap();
        if var > T::zero() {
            inputs.push(ids[c]);
            mean.push(mu);
            std.push(var.sqrt());
            cols.push(c);
        } else {
            dropped.push(ids[c]);
        }
    }
    if cols.is_empty() {
        return fallback(Fallback::ConstantInputs);
    }

    let k = cols.len();
    let rows: Vec<Vec<u32>> = x.rows().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    let targets: Vec<u32> = x.rows().map(|r| r[focused]).collect();
    let batch = compress(&rows, &targets, k, &mean, &std);
    let target_mean = targets.iter().map(|&y| T::from_count(y)).sum::<T>() / T::from_usize(n).unwrap();

    let mut lr = hp.learning_rate;
    for _attempt in 0..2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut network = Network::init(k, hp.hidden, target_mean, &mut rng);
        if let Some(training_loss) = run_optimizer(&mut network, &batch, hp, lr) {
            return MlpTraining::Trained(MlpRegressor {
                event_id,
                inputs,
                dropped_inputs: dropped,
                input_mean: mean,
                input_std: std,
                activation: Activation::Tanh,
                network,
                seed,
                epochs_trained: hp.epochs,
                learning_rate: lr,
                training_loss,
            });
        }
        lr /= 2.0;
    }
    fallback(Fallback::NonFiniteLoss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Label;
    use crate::sequencer::EventCountMatrix;

    fn sum_data(n: usize, seed: u64) -> EventCountMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EventCountMatrix::from_rows(
            (0..3).map(EventId).collect(),
            "t",
            (0..n).map(|i| {
                let a = rng.gen_range(0..10u32);
                let b = rng.gen_range(0..10u32);
                (i.to_string(), Label::Normal, vec![a, b, a + b])
            }),
        )
        .unwrap()
    }

    fn trained(x: &EventCountMatrix, hp: &MlpHyperParams, seed: u64) -> MlpRegressor<f64> {
        match train_mlp(x, 2, &[0, 1], hp, seed) {
            MlpTraining::Trained(m) => m,
            other => panic!("unexpected fallback: {other:?}"),
        }
    }

    #[test]
    fn learns_exact_sum() {
        let train = sum_data(500, 1);
        let val = sum_data(200, 2);
        let model = trained(&train, &MlpHyperParams::default(), 7);
        let schema = Schema::new(train.event_ids().to_vec());
        let mse: f64 = (0..val.n_rows())
            .map(|i| {
                let row = val.row_as::<f64>(i);
                (model.predict(&row, &schema).unwrap() - row[2]).powi(2)
            })
            .sum::<f64>()
            / val.n_rows() as f64;
        assert!(mse < 0.1, "validation mse {mse}");
        let p = model.predict_raw(&[3.0, 4.0]);
        assert!((p - 7.0).abs() < 0.5, "predicted {p}");
    }

    #[test]
    fn zero_epochs_is_seed_determined() {
        let x = sum_data(100, 1);
        let hp = MlpHyperParams { epochs: 0, ..Default::default() };
        let a = trained(&x, &hp, 11);
        let b = trained(&x, &hp, 11);
        assert_eq!(a, b);
        let c = trained(&x, &hp, 12);
        assert_ne!(a.network.params, c.network.params);
    }

    #[test]
    fn insufficient_rows_fall_back() {
        let x = sum_data(15, 1);
        match train_mlp::<f64>(&x, 2, &[0, 1], &MlpHyperParams::default(), 1) {
            MlpTraining::Fallback { reason, model } => {
                assert_eq!(reason, Fallback::InsufficientData { rows: 15, required: 20 });
                assert_eq!(model.event_id, EventId(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_inputs_dropped_or_fall_back() {
        let x = EventCountMatrix::from_rows(
            (0..3).map(EventId).collect(),
            "t",
            (0..50u32).map(|i| (i.to_string(), Label::Normal, vec![1, i % 5, i % 5 + 1])),
        )
        .unwrap();
        let hp = MlpHyperParams { epochs: 10, ..Default::default() };
        match train_mlp::<f64>(&x, 2, &[0, 1], &hp, 1) {
            MlpTraining::Trained(m) => {
                assert_eq!(m.inputs, vec![EventId(1)]);
                assert_eq!(m.dropped_inputs, vec![EventId(0)]);
                assert!(m.input_std.iter().all(|&s| s > 0.0));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            train_mlp::<f64>(&x, 2, &[0], &hp, 1),
            MlpTraining::Fallback { reason: Fallback::ConstantInputs, .. }
        ));
    }

    #[test]
    fn exploding_rate_falls_back_after_retry() {
        let x = sum_data(100, 1);
        let hp = MlpHyperParams {
            optimizer: Optimizer::Momentum,
            learning_rate: 1e6,
            epochs: 200,
            ..Default::default()
        };
        assert!(matches!(
            train_mlp::<f64>(&x, 2, &[0, 1], &hp, 1),
            MlpTraining::Fallback { reason: Fallback::NonFiniteLoss, .. }
        ));
    }

    #[test]
    fn compressed_batch_matches_expanded_loss() {
        let x = sum_data(300, 5);
        let hp = MlpHyperParams { epochs: 0, ..Default::default() };
        let m = trained(&x, &hp, 3);
        let expanded: f64 = (0..x.n_rows())
            .map(|i| {
                let r = x.row_as::<f64>(i);
                (m.predict_raw(&r[..2]) - r[2]).powi(2)
            })
            .sum::<f64>()
            / x.n_rows() as f64;
        assert!((expanded - m.training_loss).abs() < 1e-9 * expanded.max(1.0));
    }

    #[test]
    fn trains_in_f32() {
        let x = sum_data(300, 1);
        match train_mlp::<f32>(&x, 2, &[0, 1], &MlpHyperParams::default(), 7) {
            MlpTraining::Trained(m) => assert!((m.predict_raw(&[3.0, 4.0]) - 7.0).abs() < 0.5),
            other => panic!("{other:?}"),
        }
    }
}
