//! Small dense MLPs with a hand-written backward pass.
//!
//! Row outputs are computed one row at a time with a fixed summation order,
//! so a node's output does not depend on which batch it was scored in.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(x > 0.0)),
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Per-row layer normalization without learned scale or shift.
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub depth: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub normalization: Normalization,
    pub dropout: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            hidden: 64,
            activation: Activation::Relu,
            normalization: Normalization::None,
            dropout: 0.0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.depth) {
            return Err(Error::Config(format!(
                "MLP depth must be 1, 2 or 3, got {}",
                self.depth
            )));
        }
        if self.depth > 1 && self.hidden == 0 {
            return Err(Error::Config("MLP hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(self.hidden, self.depth - 1));
        w.push(output);
        w
    }
}

/// `weight` is `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// `out[r] = b + a[r]·W`, summing over inputs in index order.
    fn apply(&self, a: ArrayView2<'_, f64>) -> Array2<f64> {
        let (rows, input) = a.dim();
        let output = self.bias.len();
        let w = self.weight.as_standard_layout();
        let w = w.as_slice().expect("standard layout");
        let bias = self.bias.as_slice().expect("contiguous bias");
        let mut out = Array2::zeros((rows, output));
        for (row, mut dst) in a.outer_iter().zip(out.outer_iter_mut()) {
            let dst = dst.as_slice_mut().expect("fresh array");
            dst.copy_from_slice(bias);
            for k in 0..input {
                let x = row[k];
                if x == 0.0 {
                    continue;
                }
                for (d, &wv) in dst.iter_mut().zip(&w[k * output..(k + 1) * output]) {
                    *d += x * wv;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Linear>,
    pub config: MlpConfig,
}

/// Values retained from a forward pass for [`MlpParams::backward`].
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Array2<f64>>,
    /// Per hidden layer: activation input, activation output, optional
    /// inverse std of the layer norm, optional dropout scale mask.
    hidden: Vec<HiddenTrace>,
}

#[derive(Debug, Clone)]
struct HiddenTrace {
    pre_act: Array2<f64>,
    post_act: Array2<f64>,
    inv_std: Option<Array1<f64>>,
    mask: Option<Array2<f64>>,
}

impl MlpParams {
    pub fn zeros(input: usize, output: usize, config: MlpConfig) -> Self {
        let widths = config.widths(input, output);
        let layers = widths.windows(2).map(|p| Linear::zeros(p[0], p[1])).collect();
        Self { layers, config }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(input: usize, output: usize, config: MlpConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut mlp = Self::zeros(input, output, config);
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.weight.nrows().max(1) as f64).sqrt();
            layer.weight.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        mlp
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().bias.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weight.dim()).collect()
    }

    /// Appends parameters: each layer's weight row-major, then its bias.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
    }

    /// Reads parameters in [`flatten_into`](Self::flatten_into) order and
    /// returns how many were consumed.
    pub fn load_from(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for layer in &mut self.layers {
            for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *v = src[at];
                at += 1;
            }
        }
        at
    }

    /// Forward pass. Dropout is applied after every hidden layer when `rng`
    /// is given and the rate is positive.
    pub fn forward(&self, x: ArrayView2<'_, f64>, mut rng: Option<&mut ChaCha8Rng>) -> (Array2<f64>, MlpTrace) {
        let mut trace = MlpTrace {
            inputs: Vec::with_capacity(self.layers.len()),
            hidden: Vec::with_capacity(self.layers.len() - 1),
        };
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(a.view());
            trace.inputs.push(a);
            if i == last {
                return (z, trace);
            }
            let inv_std = match self.config.normalization {
                Normalization::None => None,
                Normalization::Layer => Some(layer_norm_inplace(&mut z)),
            };
            let post = z.mapv(|v| self.config.activation.apply(v));
            let mask = match rng.as_deref_mut() {
                Some(r) if self.config.dropout > 0.0 => {
                    let p = self.config.dropout;
                    let keep = 1.0 / (1.0 - p);
                    Some(post.mapv(|_| if r.random::<f64>() < p { 0.0 } else { keep }))
                }
                _ => None,
            };
            a = match &mask {
                Some(m) => &post * m,
                None => post.clone(),
            };
            trace.hidden.push(HiddenTrace {
                pre_act: z,
                post_act: post,
                inv_std,
                mask,
            });
        }
        unreachable!("the last layer returns")
    }

    /// Eval-mode forward without a trace.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            if self.config.normalization == Normalization::Layer {
                layer_norm_inplace(&mut a);
            }
            a.mapv_inplace(|v| self.config.activation.apply(v));
            a = layer.apply(a.view());
        }
        a
    }

    /// Accumulates parameter gradients in flatten order into `grad` and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, grad_out: Array2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            offsets.push(at);
            at += layer.num_params();
        }
        let mut dz = grad_out;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let a = &trace.inputs[i];
            let dw = a.t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            let off = offsets[i];
            for (g, v) in grad[off..].iter_mut().zip(dw.iter().chain(db.iter())) {
                *g += v;
            }
            let mut da = dz.dot(&layer.weight.t());
            if i == 0 {
                return da;
            }
            let h = &trace.hidden[i - 1];
            if let Some(m) = &h.mask {
                da *= m;
            }
            let act = self.config.activation;
            ndarray::Zip::from(&mut da)
                .and(&h.pre_act)
                .and(&h.post_act)
                .for_each(|g, &x, &y| *g *= act.derivative(x, y));
            if let Some(inv_std) = &h.inv_std {
                layer_norm_backward(&mut da, &h.pre_act, inv_std);
            }
            dz = da;
        }
        unreachable!("loop returns at the first layer")
    }
}

/// Normalizes each row to zero mean and unit variance; returns `1/σ` per row.
fn layer_norm_inplace(z: &mut Array2<f64>) -> Array1<f64> {
    let width = z.ncols() as f64;
    let mut inv = Array1::zeros(z.nrows());
    for (mut row, s) in z.outer_iter_mut().zip(inv.iter_mut()) {
        let mean = row.sum() / width;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let si = *s;
        row.mapv_inplace(|v| (v - mean) * si);
    }
    inv
}

/// Maps the gradient w.r.t. normalized values `n` to the pre-norm input.
fn layer_norm_backward(dn: &mut Array2<f64>, n: &Array2<f64>, inv_std: &Array1<f64>) {
    let width = n.ncols() as f64;
    for ((mut g, nrow), &s) in dn.outer_iter_mut().zip(n.outer_iter()).zip(inv_std) {
        let mean_g = g.sum() / width;
        let mean_gn = g.iter().zip(nrow.iter()).map(|(a, b)| a * b).sum::<f64>() / width;
        for (gv, &nv) in g.iter_mut().zip(nrow.iter()) {
            *gv = s * (*gv - mean_g - nv * mean_gn);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use ndarray::array;

    #[test]
    fn widths_follow_depth() {
        let cfg = MlpConfig {
            depth: 3,
            hidden: 5,
            ..Default::default()
        };
        assert_eq!(cfg.widths(4, 2), vec![4, 5, 5, 2]);
        let mlp = MlpParams::zeros(4, 2, cfg);
        assert_eq!(mlp.shapes(), vec![(4, 5), (5, 5), (5, 2)]);
        assert_eq!(mlp.num_params(), 25 + 30 + 12);
    }

    #[test]
    fn invalid_configs() {
        let bad_depth = MlpConfig {
            depth: 4,
            ..Default::default()
        };
        assert!(bad_depth.validate().is_err());
        let bad_drop = MlpConfig {
            dropout: 1.0,
            ..Default::default()
        };
        assert!(bad_drop.validate().is_err());
    }

    #[test]
    fn linear_matches_dot() {
        let mut rng = stream(3, Stream::Init, 0);
        let cfg = MlpConfig {
            depth: 1,
            ..Default::default()
        };
        let mlp = MlpParams::init(3, 4, cfg, &mut rng);
        let x = array![[0.5, -1.0, 2.0], [0.0, 0.25, -0.75]];
        let expected = x.dot(&mlp.layers[0].weight);
        let got = mlp.predict(x.view());
        for (a, b) in got.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn predict_matches_traced_forward() {
        let mut rng = stream(5, Stream::Init, 0);
        let cfg = MlpConfig {
            depth: 3,
            hidden: 6,
            activation: Activation::Elu,
            normalization: Normalization::Layer,
            dropout: 0.3,
        };
        let mlp = MlpParams::init(4, 2, cfg, &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let (y, _) = mlp.forward(x.view(), None);
        assert_eq!(y, mlp.predict(x.view()));
    }

    #[test]
    fn rows_independent_of_batch() {
        let mut rng = stream(9, Stream::Init, 0);
        let mlp = MlpParams::init(7, 3, MlpConfig::default(), &mut rng);
        let x = Array2::from_shape_fn((9, 7), |(i, j)| ((i * 7 + j) as f64).sin());
        let whole = mlp.predict(x.view());
        for r in 0..9 {
            let single = mlp.predict(x.slice(ndarray::s![r..r + 1, ..]));
            assert_eq!(single.row(0), whole.row(r));
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = stream(1, Stream::Init, 0);
        let mlp = MlpParams::init(3, 2, MlpConfig::default(), &mut rng);
        let mut flat = Vec::new();
        mlp.flatten_into(&mut flat);
        assert_eq!(flat.len(), mlp.num_params());
        let mut other = MlpParams::zeros(3, 2, MlpConfig::default());
        assert_eq!(other.load_from(&flat), flat.len());
        assert_eq!(other, mlp);
    }
}
