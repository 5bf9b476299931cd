//! Classification and frequency-preference losses.

use crate::dataset::{Label, SplitSet};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Prediction};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

/// Ratio of anomalies to normals over the train and validation nodes.
pub fn compute_beta(split: &SplitSet, labels: &[Label]) -> Result<f64> {
    let (mut anomalies, mut normals) = (0usize, 0usize);
    for &id in split.train.iter().chain(&split.val) {
        match labels.get(id) {
            Some(Label::Anomaly) => anomalies += 1,
            Some(Label::Normal) => normals += 1,
            Some(Label::Unknown) => return Err(Error::UnlabeledNode(id)),
            None => {
                return Err(Error::NodeOutOfRange {
                    id,
                    num_nodes: labels.len(),
                })
            }
        }
    }
    if anomalies == 0 {
        return Err(Error::EmptyClass("anomaly"));
    }
    if normals == 0 {
        return Err(Error::EmptyClass("normal"));
    }
    Ok(anomalies as f64 / normals as f64)
}

fn clamp(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// Weighted binary cross-entropy; anomaly terms are scaled by `beta`.
pub fn bce_loss(probs: &[f64], targets: &[f64], beta: f64, eps: f64) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let sum: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = clamp(p, eps);
            beta * y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    -sum / probs.len() as f64
}

/// Cross-entropy pulling each node's mean fusion coefficient toward `p_a`
/// for anomalies and `p_n` for normals.
pub fn fpg_loss(mean_coeff: &[f64], targets: &[f64], beta: f64, p_a: f64, p_n: f64, eps: f64) -> f64 {
    if mean_coeff.is_empty() {
        return 0.0;
    }
    let sum: f64 = mean_coeff
        .iter()
        .zip(targets)
        .map(|(&c, &y)| {
            let c = clamp(c, eps);
            let (w, p) = if y > 0.5 { (beta, p_a) } else { (1.0, p_n) };
            w * (p * c.ln() + (1.0 - p) * (1.0 - c).ln())
        })
        .sum();
    -sum / mean_coeff.len() as f64
}

/// BCE plus the frequency-preference term when enabled and the model
/// produces fusion coefficients.
pub fn total_loss(pred: &Prediction, targets: &[f64], beta: f64, config: &ModelConfig, eps: f64) -> f64 {
    let probs = pred.probs.as_slice().expect("contiguous");
    let bce = bce_loss(probs, targets, beta, eps);
    match (&pred.mean_coeff, config.use_fpg) {
        (Some(c), true) => {
            bce + fpg_loss(
                c.as_slice().expect("contiguous"),
                targets,
                beta,
                config.p_a,
                config.p_n,
                eps,
            )
        }
        _ => bce,
    }
}

/// `∂/∂logit` of one BCE term (before the `1/N` factor).
pub(crate) fn bce_logit_grad(p: f64, y: f64, beta: f64, eps: f64) -> f64 {
    if p < eps || p > 1.0 - eps {
        return 0.0;
    }
    (1.0 - y) * p - beta * y * (1.0 - p)
}

/// `∂/∂c̄` of one FPG term (before the `1/N` factor).
pub(crate) fn fpg_coeff_grad(c: f64, y: f64, beta: f64, p_a: f64, p_n: f64, eps: f64) -> f64 {
    if c < eps || c > 1.0 - eps {
        return 0.0;
    }
    let (w, p) = if y > 0.5 { (beta, p_a) } else { (1.0, p_n) };
    -w * (p / c - (1.0 - p) / (1.0 - c))
}
