//! Run configuration: a JSON file overlaid with `--key=value` flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::csbm::{CsbmParams, ExperimentOptions, FilterAssignment, GadParams, PriorCorrection};
use crate::dataset::read_json;
use crate::error::{Error, Result};
use crate::model::{Activation, ContextMode, FilterMode, FusionMode, MlpConfig, ModelConfig, Normalization};
use crate::rq::{SamplerConfig, SearchStrategy};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Auto,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset directory.
    pub dataset: Option<PathBuf>,
    /// Every artifact of a run is written here.
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/cheb.bin`.
    pub cheb_cache: Option<PathBuf>,
    /// Defaults to `<out_dir>/context_rq.bin` or `context_khop.bin`.
    pub context_cache: Option<PathBuf>,
    pub seed: u64,

    #[serde(rename = "K")]
    pub order: usize,
    pub self_loops: bool,
    pub p_a: f64,
    pub p_n: f64,
    pub fusion_mode: FusionMode,
    pub context_mode: ContextMode,
    pub filter_mode: FilterMode,
    pub use_fpg: bool,
    pub share_gamma: bool,
    pub mlp_depth: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub normalization: Normalization,
    pub dropout: f64,

    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub eps: f64,
    /// Replaces the anomaly/normal ratio of the labeled set in the losses.
    pub beta: Option<f64>,
    /// Split indices to train and evaluate; all when absent.
    pub splits: Option<Vec<usize>>,

    pub hop: usize,
    pub candidate_cap: usize,
    pub search: SearchMode,

    pub csbm_d: usize,
    pub csbm_n: usize,
    pub pi_a: f64,
    pub mean_distance: f64,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub hetero_frac_anomaly: f64,
    pub hetero_frac_normal: f64,
    pub num_splits: usize,
    pub train_anomalies: usize,
    pub train_normals: usize,
    pub prior_correction: PriorCorrection,
    pub filter_assignment: FilterAssignment,
    pub sweep_dims: Vec<usize>,
    pub sweep_sizes: Vec<usize>,
    pub sweep_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let mlp = MlpConfig::default();
        let train = TrainConfig::default();
        let gad = GadParams::smoke(3000, 0);
        Self {
            dataset: None,
            out_dir: PathBuf::from("run"),
            cheb_cache: None,
            context_cache: None,
            seed: 0,
            order: model.order,
            self_loops: false,
            p_a: model.p_a,
            p_n: model.p_n,
            fusion_mode: model.fusion_mode,
            context_mode: model.context_mode,
            filter_mode: model.filter_mode,
            use_fpg: model.use_fpg,
            share_gamma: model.share_gamma,
            mlp_depth: mlp.depth,
            hidden: mlp.hidden,
            activation: mlp.activation,
            normalization: mlp.normalization,
            dropout: mlp.dropout,
            lr: train.lr,
            weight_decay: train.weight_decay,
            max_epochs: train.max_epochs,
            patience: train.patience,
            batch_size: train.batch_size,
            eps: train.eps,
            beta: None,
            splits: None,
            hop: 1,
            candidate_cap: crate::rq::DEFAULT_CANDIDATE_CAP,
            search: SearchMode::Auto,
            csbm_d: gad.csbm.dim(),
            csbm_n: gad.csbm.num_nodes(),
            pi_a: 0.03,
            mean_distance: gad.csbm.mean_distance(),
            p1: gad.csbm.p1,
            q1: gad.csbm.q1,
            p2: gad.csbm.p2,
            q2: gad.csbm.q2,
            theta_min: gad.csbm.theta_min,
            theta_max: gad.csbm.theta_max,
            hetero_frac_anomaly: gad.csbm.hetero_frac_anomaly,
            hetero_frac_normal: gad.csbm.hetero_frac_normal,
            num_splits: gad.num_splits,
            train_anomalies: gad.train_anomalies,
            train_normals: gad.train_normals,
            prior_correction: PriorCorrection::Lda,
            filter_assignment: FilterAssignment::NodeAdaptive,
            sweep_dims: vec![16, 32, 64, 128],
            sweep_sizes: vec![4000],
            sweep_seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl RunConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            order: self.order,
            p_a: self.p_a,
            p_n: self.p_n,
            fusion_mode: self.fusion_mode,
            context_mode: self.context_mode,
            filter_mode: self.filter_mode,
            use_fpg: self.use_fpg,
            share_gamma: self.share_gamma,
            mlp: MlpConfig {
                depth: self.mlp_depth,
                hidden: self.hidden,
                activation: self.activation,
                normalization: self.normalization,
                dropout: self.dropout,
            },
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            eps: self.eps,
            seed: self.seed,
            beta_override: self.beta,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            hop: self.hop,
            cap: self.candidate_cap,
            seed: self.seed,
            strategy: match self.search {
                SearchMode::Auto => SearchStrategy::Auto,
                SearchMode::Exhaustive => SearchStrategy::Exhaustive,
                SearchMode::Greedy => SearchStrategy::Greedy,
            },
        }
    }

    /// CSBM parameters with means `∓(mean_distance/2)·e₁`.
    pub fn csbm_params(&self) -> CsbmParams {
        let n_anomaly = (self.pi_a * self.csbm_n as f64).round() as usize;
        let mut mu = vec![0.0; self.csbm_d.max(1)];
        let mut nu = mu.clone();
        mu[0] = -self.mean_distance / 2.0;
        nu[0] = self.mean_distance / 2.0;
        CsbmParams {
            n_anomaly,
            n_normal: self.csbm_n.saturating_sub(n_anomaly),
            mu,
            nu,
            p1: self.p1,
            q1: self.q1,
            p2: self.p2,
            q2: self.q2,
            theta_min: self.theta_min,
            theta_max: self.theta_max,
            hetero_frac_anomaly: self.hetero_frac_anomaly,
            hetero_frac_normal: self.hetero_frac_normal,
            seed: self.seed,
        }
    }

    pub fn gad_params(&self) -> GadParams {
        GadParams {
            csbm: self.csbm_params(),
            num_splits: self.num_splits,
            train_anomalies: self.train_anomalies,
            train_normals: self.train_normals,
            val_anomalies: self.train_anomalies,
            val_normals: self.train_normals,
        }
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            r: 1.0,
            correction: self.prior_correction,
            assignment: self.filter_assignment,
        }
    }

    pub fn cheb_path(&self) -> PathBuf {
        self.cheb_cache.clone().unwrap_or_else(|| self.out_dir.join("cheb.bin"))
    }

    /// `None` under `features_only`.
    pub fn context_path(&self) -> Option<PathBuf> {
        let default = match self.context_mode {
            ContextMode::Rq => "context_rq.bin",
            ContextMode::FullKhop => "context_khop.bin",
            ContextMode::FeaturesOnly => return None,
        };
        Some(self.context_cache.clone().unwrap_or_else(|| self.out_dir.join(default)))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        self.train_config().validate()?;
        if self.hop != 1 {
            return Err(Error::Config(format!("only hop=1 is supported, got {}", self.hop)));
        }
        if self.candidate_cap == 0 {
            return Err(Error::Config("candidate_cap must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pi_a) {
            return Err(Error::Config(format!("pi_a must lie in [0, 1], got {}", self.pi_a)));
        }
        Ok(())
    }
}

/// Parses `--key=value` / `--key value` pairs. Dashes in keys become
/// underscores.
pub fn parse_flags(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(Error::Config(format!("unexpected argument {arg:?}")));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag --{flag} needs a value")))?;
                (flag.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

/// Loads `file` (if any), applies `overrides` on top and validates.
/// Override values are read as JSON when they parse, else as strings.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map = match file {
        Some(path) => match read_json::<Value>(path)? {
            Value::Object(m) => m,
            _ => return Err(Error::Config(format!("{} must hold a JSON object", path.display()))),
        },
        None => Map::new(),
    };
    for (key, raw) in overrides {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        map.insert(key.clone(), value);
    }
    let config: RunConfig = serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
