use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, loss, predict_sequence};
use super::params::{LstmConfig, LstmParams};
use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::eval::{confusion, f1_score};

/// Optimizer state. Velocity has the shape of the parameters and starts at
/// zero.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: LstmParams,
    pub velocity: LstmParams,
    pub epoch: usize,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(config: &LstmConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = LstmParams::init(config.input_dim, config.hidden_units, &mut rng);
        let velocity = LstmParams::zeros(config.input_dim, config.hidden_units);
        TrainState { params, velocity, epoch: 0, rng }
    }

    pub fn from_params(params: LstmParams, seed: u64) -> Self {
        let velocity = LstmParams::zeros(params.input_dim(), params.hidden());
        TrainState { params, velocity, epoch: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// One update on one sequence: evaluate the gradient at noise-perturbed
    /// weights, then take a momentum step from the clean weights. Returns the
    /// loss at the perturbed weights.
    pub fn step(&mut self, config: &LstmConfig, sequence: &Sequence, batch: usize) -> Result<f64> {
        let mut probe = self.params.clone();
        if config.weight_noise_std > 0.0 {
            probe.add_gaussian_noise(config.weight_noise_std, config.noise_on_biases, &mut self.rng);
        }
        let cache = match forward(&probe, sequence.features.view()) {
            Err(Error::Numeric(_)) => return Err(Error::Diverged { epoch: self.epoch, batch, loss: f64::NAN }),
            other => other?,
        };
        let l = loss(cache.probs.view(), &sequence.labels)?;
        if !l.is_finite() {
            return Err(Error::Diverged { epoch: self.epoch, batch, loss: l });
        }
        let mut grad = backward(&probe, &cache, &sequence.labels)?;
        if let Some(limit) = config.clip_norm {
            let n = grad.norm();
            if n > limit {
                grad.scale(limit / n);
            }
        }
        self.velocity.momentum_step(config.momentum, config.learning_rate, &grad);
        self.params.scaled_add(1.0, &self.velocity);
        if !self.params.is_finite() {
            return Err(Error::Diverged { epoch: self.epoch, batch, loss: f64::NAN });
        }
        Ok(l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Mean per-batch loss of each epoch.
    pub loss_history: Vec<f64>,
    /// Frame-level F1 on the validation sequences after each epoch.
    pub validation_f1: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept.
    pub selected_epoch: usize,
}

pub struct Trained {
    pub params: LstmParams,
    pub outcome: TrainOutcome,
}

fn sequence_f1(params: &LstmParams, sequences: &[Sequence]) -> Result<f64> {
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for s in sequences {
        preds.extend(predict_sequence(params, s.features.view())?.present);
        labels.extend_from_slice(&s.labels);
    }
    Ok(f1_score(&confusion(&preds, &labels)?))
}

/// Trains with one sequence per batch, visiting sequences in a freshly
/// shuffled order each epoch. With `validation` sequences, the parameters
/// of the epoch with the best validation F1 are returned (earliest on ties);
/// otherwise those of the last epoch.
pub fn train(
    sequences: &[Sequence],
    config: &LstmConfig,
    validation: Option<&[Sequence]>,
) -> Result<Trained> {
    config.validate()?;
    if sequences.is_empty() {
        return Err(Error::InsufficientData("no training sequences".into()));
    }
    if let Some(s) = sequences
        .iter()
        .chain(validation.unwrap_or(&[]))
        .find(|s| s.features.ncols() != config.input_dim || s.labels.len() != s.features.nrows())
    {
        return Err(Error::Shape(format!(
            "sequence {}@{} is {}x{} with {} labels; network expects D={}",
            s.subject,
            s.start_frame,
            s.features.nrows(),
            s.features.ncols(),
            s.labels.len(),
            config.input_dim
        )));
    }
    let validation = validation.filter(|v| !v.is_empty());

    let mut state = TrainState::new(config);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut outcome = TrainOutcome { loss_history: Vec::new(), validation_f1: Vec::new(), selected_epoch: 0 };
    let mut best: Option<(f64, LstmParams)> = None;

    for epoch in 0..config.epochs {
        state.epoch = epoch;
        order.shuffle(&mut state.rng);
        let mut total = 0.0;
        for (batch, &k) in order.iter().enumerate() {
            total += state.step(config, &sequences[k], batch)?;
        }
        outcome.loss_history.push(total / order.len() as f64);

        if let Some(val) = validation {
            let f1 = sequence_f1(&state.params, val)?;
            outcome.validation_f1.push(f1);
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, state.params.clone()));
                outcome.selected_epoch = epoch + 1;
            }
        }
    }

    let params = match best {
        Some((_, p)) => p,
        None => {
            outcome.selected_epoch = config.epochs;
            state.params
        }
    };
    Ok(Trained { params, outcome })
}
