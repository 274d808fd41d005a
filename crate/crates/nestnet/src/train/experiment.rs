use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spiral::Dataset;
use super::trainable::TrainableNet;
use super::TrainError;
use crate::ir::{Activation, AffineMap, NestNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    /// ReLU at every hidden unit.
    Standard,
    /// One shared scalar sub-network at every hidden unit.
    Nested,
}

/// The shared activation `t ↦ w1·σ(t·w0 + b0) + b1` with three hidden units.
pub fn rho_net(w0: [f64; 3], b0: [f64; 3], w1: [f64; 3], b1: f64) -> NestNet {
    NestNet::build(
        vec![AffineMap::float(3, 1, w0.to_vec(), b0.to_vec()), AffineMap::float(1, 3, w1.to_vec(), vec![b1])],
        vec![vec![Activation::ReLU; 3]],
        &[],
    )
    .expect("fixed shape")
}

pub fn rho_initial() -> NestNet {
    rho_net([1.0, 1.0, 1.0], [-0.2, -0.1, 0.0], [1.0, 1.0, -1.0], 0.0)
}

/// `2 → width → … → width → 2` with `depth` hidden layers; weights uniform in `±√(6/fan_in)`,
/// biases uniform in `±1/√fan_in`.
pub fn build_experiment_nets(width: usize, depth: usize, kind: NetKind, seed: u64) -> Result<TrainableNet, TrainError> {
    build_classifier(2, width, depth, 2, kind, seed)
}

pub fn build_classifier(
    input: usize,
    width: usize,
    depth: usize,
    classes: usize,
    kind: NetKind,
    seed: u64,
) -> Result<TrainableNet, TrainError> {
    if width == 0 || depth == 0 || input == 0 || classes == 0 {
        return Err(TrainError::InvalidConfig("width, depth, input and class count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth + 1);
    let mut fan_in = input;
    for l in 0..=depth {
        let rows = if l == depth { classes } else { width };
        let a = (6.0 / fan_in as f64).sqrt();
        let c = 1.0 / (fan_in as f64).sqrt();
        let w = (0..rows * fan_in).map(|_| rng.gen_range(-a..a)).collect();
        let b = (0..rows).map(|_| rng.gen_range(-c..c)).collect();
        layers.push(AffineMap::float(rows, fan_in, w, b));
        fan_in = rows;
    }
    let net = match kind {
        NetKind::Standard => NestNet::build(layers, vec![vec![Activation::ReLU; width]; depth], &[])?,
        NetKind::Nested => {
            let rho = rho_initial();
            NestNet::build(layers, vec![vec![Activation::SubNet(rho.id()); width]; depth], &[&rho])?
        }
    };
    TrainableNet::from_net(&net)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub lr: f64,
    /// Learning-rate factor for sub-network slots.
    pub sub_lr_mult: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 512,
            optimizer: Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            lr: 0.002,
            sub_lr_mult: 0.2,
            decay: 0.9,
            decay_every: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.lr > 0.0
            && self.sub_lr_mult > 0.0
            && self.decay > 0.0
            && self.decay <= 1.0
            && self.decay_every > 0
            && self.batch_size > 0;
        if !ok {
            return Err(TrainError::InvalidConfig(
                "learning rates must be positive, decay in (0,1], batch size and decay period nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate of ordinary slots in 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay.powi(((epoch.max(1) - 1) / self.decay_every) as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

/// Argmax accuracy; ties go to the lower class index.
pub fn evaluate_accuracy(net: &TrainableNet, data: &Dataset) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let hits = data.x.iter().zip(&data.y).filter(|(x, y)| net.predict(x) == **y).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Mini-batch training; the sample order is reshuffled every epoch from `cfg.seed`.
pub fn train(
    net: &mut TrainableNet,
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>, TrainError> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = train_set.pairs();
    let mult: Vec<f64> =
        (0..net.param_count()).map(|s| if net.is_shared_slot(s) { cfg.sub_lr_mult } else { 1.0 }).collect();
    let mut m = vec![0.0; net.param_count()];
    let mut v = vec![0.0; net.param_count()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr_at(epoch);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|i| pairs[*i]).collect();
            let (loss, grad) =
                net.forward_backward(&batch).map_err(|_| TrainError::NonFinite { epoch: Some(epoch) })?;
            total += loss * chunk.len() as f64;
            step += 1;
            let params = net.params_mut();
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for ((p, g), k) in params.iter_mut().zip(&grad).zip(&mult) {
                        *p -= lr * k * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for i in 0..params.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        params[i] -= lr * mult[i] * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        let train_loss = total / pairs.len() as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::NonFinite { epoch: Some(epoch) });
        }
        let test_accuracy = if test_set.is_empty() { f64::NAN } else { evaluate_accuracy(net, test_set)? };
        history.push(EpochRecord { epoch, train_loss, test_accuracy });
    }
    Ok(history)
}
