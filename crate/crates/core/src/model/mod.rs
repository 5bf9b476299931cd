//! Dual-pass Chebyshev filters, context-driven fusion and the classifier.

pub mod checkpoint;
pub mod filter;
pub mod mlp;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cheb::ChebBasisCache;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::rq::ContextCache;

pub use filter::{cheb_weights, chebyshev_nodes, filter_response, reparam_filter_values};
pub use mlp::{Activation, MlpConfig, MlpParams, MlpTrace, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Adaptive,
    Mean,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    Rq,
    FullKhop,
    FeaturesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    Dual,
    LowOnly,
    HighOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "K")]
    pub order: usize,
    pub p_a: f64,
    pub p_n: f64,
    pub fusion_mode: FusionMode,
    pub context_mode: ContextMode,
    pub filter_mode: FilterMode,
    pub use_fpg: bool,
    pub share_gamma: bool,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            order: 2,
            p_a: 0.1,
            p_n: 0.9,
            fusion_mode: FusionMode::Adaptive,
            context_mode: ContextMode::Rq,
            filter_mode: FilterMode::Dual,
            use_fpg: true,
            share_gamma: true,
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        for (name, p) in [("p_a", self.p_a), ("p_n", self.p_n)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_a > self.p_n {
            return Err(Error::Config(format!(
                "p_a ({}) must not exceed p_n ({})",
                self.p_a, self.p_n
            )));
        }
        self.mlp.validate()
    }

    /// Whether the model produces fusion coefficients `C`.
    pub fn has_coefficients(&self) -> bool {
        self.filter_mode == FilterMode::Dual && self.fusion_mode == FusionMode::Adaptive
    }

    fn classifier_input(&self, dim: usize) -> usize {
        if self.filter_mode == FilterMode::Dual && self.fusion_mode == FusionMode::Concat {
            2 * dim
        } else {
            dim
        }
    }

    fn fusion_input(&self, dim: usize) -> usize {
        match self.context_mode {
            ContextMode::FeaturesOnly => dim,
            _ => 2 * dim,
        }
    }
}

/// Unconstrained filter parameters; `γ = softplus(raw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Drives both filters, or only the low-pass filter when unshared.
    pub raw: Vec<f64>,
    /// Present when the high-pass filter has its own parameters.
    pub raw_high: Option<Vec<f64>>,
}

impl FilterParams {
    /// Every `γ_j` starts at `1/(K+1)`.
    pub fn init(order: usize, share_gamma: bool) -> Self {
        let v = filter::softplus_inverse(1.0 / (order + 1) as f64);
        Self {
            raw: vec![v; order + 1],
            raw_high: (!share_gamma).then(|| vec![v; order + 1]),
        }
    }

    pub fn num_params(&self) -> usize {
        self.raw.len() + self.raw_high.as_ref().map_or(0, Vec::len)
    }

    /// `(γ feeding the low-pass filter, γ feeding the high-pass filter)`.
    pub fn gammas(&self) -> (Vec<f64>, Vec<f64>) {
        let low: Vec<f64> = self.raw.iter().map(|&r| filter::softplus(r)).collect();
        let high = match &self.raw_high {
            Some(r) => r.iter().map(|&v| filter::softplus(v)).collect(),
            None => low.clone(),
        };
        (low, high)
    }

    /// `(γ^L, γ^H)`.
    pub fn values(&self) -> (Vec<f64>, Vec<f64>) {
        let (gl, gh) = self.gammas();
        (filter::low_pass_values(&gl), filter::high_pass_values(&gh))
    }

    /// Chebyshev weights `(w^L, w^H)`.
    pub fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        let (l, h) = self.values();
        (cheb_weights(&l), cheb_weights(&h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub dim: usize,
    pub filter: FilterParams,
    pub fusion: MlpParams,
    pub classifier: MlpParams,
}

/// Precomputed per-node inputs to the model.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs<'a> {
    pub basis: &'a ChebBasisCache,
    /// Required unless the context mode is `features_only`.
    pub context: Option<&'a ContextCache>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks are drawn from the `(seed, step)` stream.
    Train {
        seed: u64,
        step: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Array1<f64>,
    /// Per-node mean of the fusion coefficients, when the model has them.
    pub mean_coeff: Option<Array1<f64>>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    pub blocks: Vec<Array2<f64>>,
    pub zl: Array2<f64>,
    pub zh: Array2<f64>,
    pub coeff: Option<Array2<f64>>,
    pub fusion_trace: Option<MlpTrace>,
    pub classifier_trace: MlpTrace,
    pub probs: Array1<f64>,
    pub mean_coeff: Option<Array1<f64>>,
}

impl ModelState {
    /// Seeded initialization for feature dimension `dim`.
    pub fn init(config: ModelConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, Stream::Init, 0);
        let fusion = MlpParams::init(config.fusion_input(dim), dim, config.mlp, &mut rng);
        let classifier = MlpParams::init(config.classifier_input(dim), 1, config.mlp, &mut rng);
        Ok(Self {
            config,
            dim,
            filter: FilterParams::init(config.order, config.share_gamma),
            fusion,
            classifier,
        })
    }

    /// Same shapes as [`init`](Self::init) with every MLP parameter zero.
    pub fn zeros(config: ModelConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            dim,
            filter: FilterParams::init(config.order, config.share_gamma),
            fusion: MlpParams::zeros(config.fusion_input(dim), dim, config.mlp),
            classifier: MlpParams::zeros(config.classifier_input(dim), 1, config.mlp),
        })
    }

    pub fn num_params(&self) -> usize {
        self.filter.num_params() + self.fusion.num_params() + self.classifier.num_params()
    }

    /// Flat parameter vector: filter raw values (low/shared then high),
    /// fusion MLP, classifier MLP.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(&self.filter.raw);
        if let Some(h) = &self.filter.raw_high {
            out.extend(h);
        }
        self.fusion.flatten_into(&mut out);
        self.classifier.flatten_into(&mut out);
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let m = self.filter.raw.len();
        self.filter.raw.copy_from_slice(&params[..m]);
        let mut at = m;
        if let Some(h) = &mut self.filter.raw_high {
            h.copy_from_slice(&params[at..at + m]);
            at += m;
        }
        at += self.fusion.load_from(&params[at..]);
        self.classifier.load_from(&params[at..]);
        Ok(())
    }

    pub(crate) fn fusion_offset(&self) -> usize {
        self.filter.num_params()
    }

    pub(crate) fn classifier_offset(&self) -> usize {
        self.filter.num_params() + self.fusion.num_params()
    }

    pub fn check_inputs(&self, inputs: &ModelInputs<'_>) -> Result<()> {
        let basis = inputs.basis;
        if basis.order() != self.config.order {
            return Err(Error::Dimension(format!(
                "basis cache has K={}, model expects K={}",
                basis.order(),
                self.config.order
            )));
        }
        if basis.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "basis cache has d={}, model expects d={}",
                basis.dim(),
                self.dim
            )));
        }
        match (self.config.context_mode, inputs.context) {
            (ContextMode::FeaturesOnly, _) => Ok(()),
            (_, None) => Err(Error::invalid("context cache required for this context mode")),
            (_, Some(ctx)) if ctx.num_nodes() != basis.num_nodes() || ctx.dim() != self.dim => {
                Err(Error::Dimension(format!(
                    "context cache is {}x{}, basis cache is {}x{}",
                    ctx.num_nodes(),
                    ctx.dim(),
                    basis.num_nodes(),
                    self.dim
                )))
            }
            _ => Ok(()),
        }
    }

    /// Probabilities and mean fusion coefficients for `ids`.
    pub fn forward(&self, inputs: &ModelInputs<'_>, ids: &[usize], mode: Mode) -> Result<Prediction> {
        if mode == Mode::Eval {
            return self.predict(inputs, ids);
        }
        let t = self.forward_traced(inputs, ids, mode)?;
        Ok(Prediction {
            probs: t.probs,
            mean_coeff: t.mean_coeff,
        })
    }

    /// Eval-mode forward that keeps no intermediate values.
    pub fn predict(&self, inputs: &ModelInputs<'_>, ids: &[usize]) -> Result<Prediction> {
        self.check_inputs(inputs)?;
        let (wl, wh) = self.filter.weights();
        let (zl, zh) = dual_embed(inputs.basis, &wl, &wh, ids)?;
        let coeff = if self.config.has_coefficients() {
            let u = fusion_input(&self.config, inputs, ids)?;
            Some(self.fusion.predict(u.view()).mapv(filter::sigmoid))
        } else {
            None
        };
        let z = self.fused(zl, zh, coeff.as_ref())?;
        let logits = self.classifier.predict(z.view()).column(0).to_owned();
        Ok(Prediction {
            probs: logits.mapv(filter::sigmoid),
            mean_coeff: coeff.map(|c| c.mean_axis(Axis(1)).unwrap()),
        })
    }

    pub(crate) fn forward_traced(&self, inputs: &ModelInputs<'_>, ids: &[usize], mode: Mode) -> Result<ForwardTrace> {
        self.check_inputs(inputs)?;
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed, step } => Some(stream(seed, Stream::Dropout, step)),
        };
        let blocks = gather_blocks(inputs.basis, ids)?;
        let (wl, wh) = self.filter.weights();
        let zl = combine(&blocks, &wl);
        let zh = combine(&blocks, &wh);
        let (coeff, fusion_trace) = if self.config.has_coefficients() {
            let u = fusion_input(&self.config, inputs, ids)?;
            let (pre, tr) = self.fusion.forward(u.view(), rng.as_mut());
            (Some(pre.mapv(filter::sigmoid)), Some(tr))
        } else {
            (None, None)
        };
        let z = self.fused(zl.clone(), zh.clone(), coeff.as_ref())?;
        let (out, classifier_trace) = self.classifier.forward(z.view(), rng.as_mut());
        let probs = out.column(0).mapv(filter::sigmoid);
        let mean_coeff = coeff.as_ref().map(|c| c.mean_axis(Axis(1)).unwrap());
        Ok(ForwardTrace {
            blocks,
            zl,
            zh,
            coeff,
            fusion_trace,
            classifier_trace,
            probs,
            mean_coeff,
        })
    }

    fn fused(&self, zl: Array2<f64>, zh: Array2<f64>, coeff: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        match self.config.filter_mode {
            FilterMode::LowOnly => Ok(zl),
            FilterMode::HighOnly => Ok(zh),
            FilterMode::Dual => fuse(zl.view(), zh.view(), coeff.map(|c| c.view()), self.config.fusion_mode),
        }
    }
}

/// Rows `ids` of every basis block, widened to f64.
pub(crate) fn gather_blocks(basis: &ChebBasisCache, ids: &[usize]) -> Result<Vec<Array2<f64>>> {
    check_ids(basis.num_nodes(), ids)?;
    Ok(basis
        .blocks()
        .iter()
        .map(|b| Array2::from_shape_fn((ids.len(), basis.dim()), |(r, c)| f64::from(b[[ids[r], c]])))
        .collect())
}

fn check_ids(n: usize, ids: &[usize]) -> Result<()> {
    match ids.iter().find(|&&i| i >= n) {
        Some(&id) => Err(Error::NodeOutOfRange { id, num_nodes: n }),
        None => Ok(()),
    }
}

fn combine(blocks: &[Array2<f64>], weights: &[f64]) -> Array2<f64> {
    let mut z = Array2::zeros(blocks[0].raw_dim());
    for (b, &w) in blocks.iter().zip(weights) {
        z.scaled_add(w, b);
    }
    z
}

/// Low- and high-pass embeddings of the rows `ids`, touching only those
/// cache rows.
pub fn dual_embed(
    basis: &ChebBasisCache,
    low_weights: &[f64],
    high_weights: &[f64],
    ids: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_ids(basis.num_nodes(), ids)?;
    let k1 = basis.order() + 1;
    if low_weights.len() != k1 || high_weights.len() != k1 {
        return Err(Error::Dimension(format!(
            "expected {k1} filter weights, got {} and {}",
            low_weights.len(),
            high_weights.len()
        )));
    }
    let d = basis.dim();
    let mut zl = Array2::zeros((ids.len(), d));
    let mut zh = Array2::zeros((ids.len(), d));
    for (r, &id) in ids.iter().enumerate() {
        for (k, block) in basis.blocks().iter().enumerate() {
            let row = block.row(id);
            let (a, b) = (low_weights[k], high_weights[k]);
            for c in 0..d {
                let v = f64::from(row[c]);
                zl[[r, c]] += a * v;
                zh[[r, c]] += b * v;
            }
        }
    }
    Ok((zl, zh))
}

/// Fusion MLP input rows: `[context ‖ features]`, or features alone.
pub(crate) fn fusion_input(config: &ModelConfig, inputs: &ModelInputs<'_>, ids: &[usize]) -> Result<Array2<f64>> {
    let x = inputs.basis.block(0);
    let d = inputs.basis.dim();
    check_ids(inputs.basis.num_nodes(), ids)?;
    let feats = Array2::from_shape_fn((ids.len(), d), |(r, c)| f64::from(x[[ids[r], c]]));
    if config.context_mode == ContextMode::FeaturesOnly {
        return Ok(feats);
    }
    let ctx = inputs
        .context
        .ok_or_else(|| Error::invalid("context cache required for this context mode"))?;
    let ctxr = Array2::from_shape_fn((ids.len(), d), |(r, c)| f64::from(ctx.context[[ids[r], c]]));
    Ok(concatenate![Axis(1), ctxr, feats])
}

/// `σ(MLP(input))` for aligned input rows.
pub fn fusion_coefficients(
    state: &ModelState,
    context: Option<ArrayView2<'_, f64>>,
    features: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let u = match (state.config.context_mode, context) {
        (ContextMode::FeaturesOnly, _) => features.to_owned(),
        (_, Some(c)) => {
            if c.dim() != features.dim() {
                return Err(Error::Dimension(format!(
                    "context rows {:?} do not match feature rows {:?}",
                    c.dim(),
                    features.dim()
                )));
            }
            concatenate![Axis(1), c, features]
        }
        (_, None) => return Err(Error::invalid("context rows required for this context mode")),
    };
    if u.ncols() != state.fusion.input_dim() {
        return Err(Error::Dimension(format!(
            "fusion input width {} does not match model width {}",
            u.ncols(),
            state.fusion.input_dim()
        )));
    }
    Ok(state.fusion.predict(u.view()).mapv(filter::sigmoid))
}

pub fn fuse(
    zl: ArrayView2<'_, f64>,
    zh: ArrayView2<'_, f64>,
    coeff: Option<ArrayView2<'_, f64>>,
    mode: FusionMode,
) -> Result<Array2<f64>> {
    if zl.dim() != zh.dim() {
        return Err(Error::Dimension(format!("Z_L {:?} vs Z_H {:?}", zl.dim(), zh.dim())));
    }
    match mode {
        FusionMode::Adaptive => {
            let c = coeff.ok_or_else(|| Error::invalid("adaptive fusion needs coefficients"))?;
            if c.dim() != zl.dim() {
                return Err(Error::Dimension(format!("C {:?} vs Z {:?}", c.dim(), zl.dim())));
            }
            Ok(ndarray::Zip::from(&c)
                .and(&zl)
                .and(&zh)
                .map_collect(|&c, &l, &h| c * l + (1.0 - c) * h))
        }
        FusionMode::Mean => Ok((&zl + &zh) * 0.5),
        FusionMode::Concat => Ok(concatenate![Axis(1), zl, zh]),
    }
}

/// Splits a gradient with respect to the classifier input back into the
/// `Z_L` / `Z_H` parts for non-adaptive dual fusion.
pub(crate) fn split_concat(grad: &Array2<f64>, dim: usize) -> (Array2<f64>, Array2<f64>) {
    (
        grad.slice(s![.., ..dim]).to_owned(),
        grad.slice(s![.., dim..]).to_owned(),
    )
}
