use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stack::accumulate_chain_grad;
use super::{Arch, BuParams, Dims, InputMode, StackModel, DEFAULT_HIDDEN, NUM_UNITS};
use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::pipeline::ExtractConfig;

/// Mixed into the seed so sample order and initialization use separate streams.
const ORDER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Mini-batch gradient descent with momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplier on the `1/sqrt(fan_in)` initialization bound.
    pub init_scale: f64,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            seed: 42,
            init_scale: 1.0,
            hidden1: DEFAULT_HIDDEN,
            hidden2: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return bad("hidden sizes must be >= 1".into());
        }
        if self.init_scale.is_nan() || self.init_scale <= 0.0 {
            return bad(format!("init_scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }
}

/// One training example: the five (normalized) unit inputs and the label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub inputs: Vec<Vec<f64>>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: StackModel,
    /// Mean training loss of each epoch, measured during the epoch.
    pub loss_curve: Vec<f64>,
}

/// Trains a freshly initialized stack on `samples`.
///
/// Each epoch visits the samples in an order shuffled by a generator seeded
/// from `config.seed`; gradients are summed over a batch in that order and
/// averaged, so results are bit-reproducible.
pub fn train(
    samples: &[TrainSample],
    num_classes: usize,
    arch: Arch,
    input_mode: InputMode,
    normalizer: Normalizer,
    extract: ExtractConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let first = samples.first().ok_or(Error::Empty("training set"))?;
    let dims = Dims {
        input: first.inputs.first().map_or(0, Vec::len),
        hidden1: config.hidden1,
        hidden2: config.hidden2,
        classes: num_classes,
    };
    for s in samples {
        if s.inputs.len() != NUM_UNITS {
            return Err(Error::DimensionMismatch {
                context: "training sample unit inputs",
                expected: NUM_UNITS,
                got: s.inputs.len(),
            });
        }
        if let Some(x) = s.inputs.iter().find(|x| x.len() != dims.input) {
            return Err(Error::DimensionMismatch {
                context: "training sample input vector",
                expected: dims.input,
                got: x.len(),
            });
        }
        if s.label >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "training label {} outside [0, {num_classes})",
                s.label
            )));
        }
    }

    let mut model = StackModel::random(dims, arch, input_mode, normalizer, extract, *config)?;
    let bidirectional = arch == Arch::Brnn;
    let mut grads: Vec<BuParams> = (0..NUM_UNITS).map(|_| BuParams::zeros(dims, bidirectional)).collect();
    let mut velocity = grads.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ORDER_STREAM);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(BuParams::fill_zero);
            for &i in batch {
                let s = &samples[i];
                epoch_loss += accumulate_chain_grad(&model.units, arch, &s.inputs, s.label, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for ((unit, g), v) in model.units.iter_mut().zip(&grads).zip(velocity.iter_mut()) {
                for ((p, g), v) in unit.slices_mut().into_iter().zip(g.slices()).zip(v.slices_mut()) {
                    for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *v = config.momentum * *v - config.learning_rate * g * scale;
                        *p += *v;
                    }
                }
            }
        }
        let mean = epoch_loss / samples.len() as f64;
        if !mean.is_finite() || model.units.iter().any(|u| u.validate().is_err()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        loss_curve.push(mean);
    }
    Ok(TrainOutcome { model, loss_curve })
}
