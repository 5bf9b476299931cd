//! Reverse-mode gradients of the total loss.

use ndarray::Array2;

use super::loss::{bce_logit_grad, fpg_coeff_grad, total_loss};
use crate::error::{Error, Result};
use crate::model::filter::{interpolation_matrix, low_pass_arguments, sigmoid};
use crate::model::{split_concat, FilterMode, FusionMode, Mode, ModelInputs, ModelState, Prediction};

/// Loss value and its gradient with respect to [`ModelState::parameters`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Exact gradient of the total loss over the labeled batch `ids`.
///
/// Clamped probabilities and clamped low-pass values contribute zero
/// gradient. Weight decay is not included; see [`super::adam_step`].
pub fn backward_gradients(
    state: &ModelState,
    inputs: &ModelInputs<'_>,
    ids: &[usize],
    targets: &[f64],
    beta: f64,
    eps: f64,
    mode: Mode,
) -> Result<Gradients> {
    if ids.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} ids but {} targets",
            ids.len(),
            targets.len()
        )));
    }
    if ids.is_empty() {
        return Err(Error::invalid("empty labeled batch"));
    }
    let cfg = &state.config;
    let t = state.forward_traced(inputs, ids, mode)?;
    let pred = Prediction {
        probs: t.probs.clone(),
        mean_coeff: t.mean_coeff.clone(),
    };
    let loss = total_loss(&pred, targets, beta, cfg, eps);

    let n = ids.len() as f64;
    let mut grad = vec![0.0; state.num_params()];

    let dlogit = Array2::from_shape_fn((ids.len(), 1), |(i, _)| {
        bce_logit_grad(t.probs[i], targets[i], beta, eps) / n
    });
    let dz = state
        .classifier
        .backward(&t.classifier_trace, dlogit, &mut grad[state.classifier_offset()..]);

    let dim = state.dim;
    let (dzl, dzh) = match (cfg.filter_mode, cfg.fusion_mode) {
        (FilterMode::LowOnly, _) => (dz, Array2::zeros((ids.len(), dim))),
        (FilterMode::HighOnly, _) => (Array2::zeros((ids.len(), dim)), dz),
        (FilterMode::Dual, FusionMode::Mean) => {
            let half = dz * 0.5;
            (half.clone(), half)
        }
        (FilterMode::Dual, FusionMode::Concat) => split_concat(&dz, dim),
        (FilterMode::Dual, FusionMode::Adaptive) => {
            let c = t.coeff.as_ref().expect("adaptive fusion keeps coefficients");
            let mut dc = &dz * &(&t.zl - &t.zh);
            if cfg.use_fpg {
                let cbar = t.mean_coeff.as_ref().expect("coefficients imply means");
                for (i, mut row) in dc.outer_iter_mut().enumerate() {
                    let g = fpg_coeff_grad(cbar[i], targets[i], beta, cfg.p_a, cfg.p_n, eps) / n;
                    row.mapv_inplace(|v| v + g / dim as f64);
                }
            }
            let dpre = &dc * &c.mapv(|v| v * (1.0 - v));
            let fusion_trace = t.fusion_trace.as_ref().expect("adaptive fusion keeps a trace");
            let off = state.fusion_offset();
            let end = state.classifier_offset();
            state.fusion.backward(fusion_trace, dpre, &mut grad[off..end]);
            (&dz * c, &dz * &c.mapv(|v| 1.0 - v))
        }
    };

    filter_backward(state, &t.blocks, &dzl, &dzh, &mut grad);
    Ok(Gradients { loss, grad })
}

fn filter_backward(state: &ModelState, blocks: &[Array2<f64>], dzl: &Array2<f64>, dzh: &Array2<f64>, grad: &mut [f64]) {
    let m = blocks.len();
    let mat = interpolation_matrix(m - 1);
    let dw = |dz: &Array2<f64>| -> Vec<f64> { blocks.iter().map(|b| (dz * b).sum()).collect() };
    let to_values =
        |dw: Vec<f64>| -> Vec<f64> { (0..m).map(|c| (0..m).map(|r| mat[r * m + c] * dw[r]).sum()).collect() };
    let dvl = to_values(dw(dzl));
    let dvh = to_values(dw(dzh));

    let (gl, _) = state.filter.gammas();
    let mut dgl = vec![0.0; m];
    dgl[0] += dvl[0];
    for (i, &arg) in low_pass_arguments(&gl).iter().enumerate().skip(1) {
        if arg > 0.0 {
            dgl[0] += dvl[i];
            for g in &mut dgl[1..=i] {
                *g -= dvl[i];
            }
        }
    }
    let mut dgh = vec![0.0; m];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        acc += dvh[j];
        dgh[j] = acc;
    }

    let raw = &state.filter.raw;
    match &state.filter.raw_high {
        None => {
            for j in 0..m {
                grad[j] += (dgl[j] + dgh[j]) * sigmoid(raw[j]);
            }
        }
        Some(raw_high) => {
            for j in 0..m {
                grad[j] += dgl[j] * sigmoid(raw[j]);
                grad[m + j] += dgh[j] * sigmoid(raw_high[j]);
            }
        }
    }
}

/// Total loss at the current parameters, matching [`backward_gradients`].
pub fn loss_value(
    state: &ModelState,
    inputs: &ModelInputs<'_>,
    ids: &[usize],
    targets: &[f64],
    beta: f64,
    eps: f64,
    mode: Mode,
) -> Result<f64> {
    let t = state.forward_traced(inputs, ids, mode)?;
    let pred = Prediction {
        probs: t.probs,
        mean_coeff: t.mean_coeff,
    };
    Ok(total_loss(&pred, targets, beta, &state.config, eps))
}
