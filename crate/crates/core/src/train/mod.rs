//! Full-batch training over the labeled nodes and batched inference.

mod adam;
mod grad;
pub mod loss;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use adam::{adam_step, OptimizerState};
pub use grad::{backward_gradients, loss_value, Gradients};
pub use loss::{bce_loss, compute_beta, fpg_loss, total_loss, DEFAULT_CLAMP_EPS};

use crate::dataset::{write_with, Label, SplitSet};
use crate::error::{Error, Result};
use crate::eval::average_precision;
use crate::model::{Mode, ModelConfig, ModelInputs, ModelState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub eps: f64,
    /// Seeds the dropout masks.
    pub seed: u64,
    /// Replaces the computed anomaly/normal ratio in both losses.
    pub beta_override: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 0.0,
            max_epochs: 1000,
            patience: 50,
            batch_size: 8192,
            eps: DEFAULT_CLAMP_EPS,
            seed: 0,
            beta_override: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::Config(format!("eps must lie in (0, 0.5), got {}", self.eps)));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) exceeds max epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if let Some(b) = self.beta_override {
            if b.is_nan() || b <= 0.0 {
                return Err(Error::Config(format!("beta override must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auprc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUPRC.
    pub state: ModelState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub beta: f64,
}

fn targets(ids: &[usize], labels: &[Label]) -> Result<Vec<f64>> {
    ids.iter()
        .map(|&i| {
            labels
                .get(i)
                .ok_or(Error::NodeOutOfRange {
                    id: i,
                    num_nodes: labels.len(),
                })?
                .target()
                .ok_or(Error::UnlabeledNode(i))
        })
        .collect()
}

/// Trains from a seeded initialization with Adam and early stopping on
/// validation AUPRC. Training stops once `patience` consecutive epochs pass
/// without improvement, so `patience = 0` runs exactly one epoch.
///
/// Only rows of the train and validation nodes are read from the caches.
pub fn train(
    inputs: &ModelInputs<'_>,
    labels: &[Label],
    model_config: &ModelConfig,
    config: &TrainConfig,
    split: &SplitSet,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::invalid("empty train set"));
    }
    if split.val.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    let beta = match config.beta_override {
        Some(b) => b,
        None => compute_beta(split, labels)?,
    };
    let train_y = targets(&split.train, labels)?;
    let val_y: Vec<bool> = targets(&split.val, labels)?.iter().map(|&y| y > 0.5).collect();
    if !val_y.iter().any(|&y| y) {
        return Err(Error::EmptyClass("anomaly"));
    }

    let mut state = ModelState::init(*model_config, inputs.basis.dim())?;
    state.check_inputs(inputs)?;
    let mut params = state.parameters();
    let mut opt = OptimizerState::new(params.len());
    let mut best_state = state.clone();
    let mut best_auprc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::with_capacity(config.max_epochs);

    for epoch in 0..config.max_epochs {
        let mode = Mode::Train {
            seed: config.seed,
            step: epoch as u64,
        };
        let g = backward_gradients(&state, inputs, &split.train, &train_y, beta, config.eps, mode)?;
        adam_step(&mut params, &g.grad, &mut opt, config.lr, config.weight_decay)?;
        state.set_parameters(&params)?;

        let val = state.predict(inputs, &split.val)?;
        let auprc = average_precision(val.probs.as_slice().expect("contiguous"), &val_y)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: g.loss,
            val_auprc: auprc,
        });
        if auprc > best_auprc {
            best_auprc = auprc;
            best_state.clone_from(&state);
            best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        state: best_state,
        history,
        best_epoch,
        beta,
    })
}

/// Eval-mode probabilities for every node, computed in batches of
/// `batch_size`. The result does not depend on the batch size.
pub fn score_all(state: &ModelState, inputs: &ModelInputs<'_>, batch_size: usize) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    state.check_inputs(inputs)?;
    let n = inputs.basis.num_nodes();
    let starts: Vec<usize> = (0..n).step_by(batch_size).collect();
    let parts = starts
        .into_par_iter()
        .map(|s| {
            let ids: Vec<usize> = (s..(s + batch_size).min(n)).collect();
            state.predict(inputs, &ids).map(|p| p.probs.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

pub fn write_history(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "epoch,train_loss,val_auprc")?;
        for r in history {
            writeln!(w, "{},{},{}", r.epoch, r.train_loss, r.val_auprc)?;
        }
        Ok(())
    })
}
