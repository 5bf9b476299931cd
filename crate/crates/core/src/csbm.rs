//! Degree-corrected contextual stochastic block models with mixed
//! homophilic/heterophilic connectivity regimes, and the linear
//! separability experiment on node-adaptively filtered features.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_with, GraphDataset, Label, SplitSet};
use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
use crate::rng::{stream, Stream};

const FEATURE_STREAMS: u64 = 1 << 32;
const NODE_STREAM: u64 = 1 << 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Homophilic,
    Heterophilic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsbmParams {
    pub n_anomaly: usize,
    pub n_normal: usize,
    /// Anomaly feature mean.
    pub mu: Vec<f64>,
    /// Normal feature mean.
    pub nu: Vec<f64>,
    /// Homophilic regime: same-class `p1` > cross-class `q1`.
    pub p1: f64,
    pub q1: f64,
    /// Heterophilic regime: same-class `p2` < cross-class `q2`.
    pub p2: f64,
    pub q2: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Probability that an anomaly uses the heterophilic regime.
    pub hetero_frac_anomaly: f64,
    /// Probability that a normal node uses the heterophilic regime.
    pub hetero_frac_normal: f64,
    pub seed: u64,
}

impl CsbmParams {
    /// Means `∓e₁/2`, so `‖μ−ν‖ = 1`; anomalies heterophilic, normals
    /// homophilic; `θ ≡ 1`.
    pub fn strong_separation(d: usize, n: usize, pi_a: f64, seed: u64) -> Self {
        let n_anomaly = (pi_a * n as f64).round() as usize;
        let mut mu = vec![0.0; d];
        let mut nu = vec![0.0; d];
        mu[0] = -0.5;
        nu[0] = 0.5;
        Self {
            n_anomaly,
            n_normal: n - n_anomaly,
            mu,
            nu,
            p1: 0.1,
            q1: 0.02,
            p2: 0.02,
            q2: 0.1,
            theta_min: 1.0,
            theta_max: 1.0,
            hetero_frac_anomaly: 1.0,
            hetero_frac_normal: 0.0,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n_anomaly + self.n_normal
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn pi_a(&self) -> f64 {
        self.n_anomaly as f64 / self.num_nodes() as f64
    }

    pub fn pi_n(&self) -> f64 {
        self.n_normal as f64 / self.num_nodes() as f64
    }

    /// Expected share of nodes in the heterophilic regime.
    pub fn regime_frac(&self) -> f64 {
        self.pi_a() * self.hetero_frac_anomaly + self.pi_n() * self.hetero_frac_normal
    }

    pub fn mean_distance(&self) -> f64 {
        self.mu
            .iter()
            .zip(&self.nu)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_nodes() < 2 {
            return bad("a CSBM needs at least two nodes".into());
        }
        if self.mu.is_empty() || self.mu.len() != self.nu.len() {
            return bad(format!(
                "mu ({}) and nu ({}) need equal positive length",
                self.mu.len(),
                self.nu.len()
            ));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm(&self.mu) > 1.0 + 1e-12 || norm(&self.nu) > 1.0 + 1e-12 {
            return bad("feature means must have norm at most 1".into());
        }
        for (name, p) in [("p1", self.p1), ("q1", self.q1), ("p2", self.p2), ("q2", self.q2)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p1 <= self.q1 {
            return bad(format!(
                "homophilic regime needs p1 > q1, got {} <= {}",
                self.p1, self.q1
            ));
        }
        if self.p2 >= self.q2 {
            return bad(format!(
                "heterophilic regime needs p2 < q2, got {} >= {}",
                self.p2, self.q2
            ));
        }
        if !(self.theta_min > 0.0 && self.theta_min <= self.theta_max) {
            return bad("degree parameters need 0 < theta_min <= theta_max".into());
        }
        for (name, f) in [
            ("hetero_frac_anomaly", self.hetero_frac_anomaly),
            ("hetero_frac_normal", self.hetero_frac_normal),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        Ok(())
    }

    /// Block connectivity `B^{(h)}[y_i][y_j]`.
    fn block(&self, regime: Regime, same_class: bool) -> f64 {
        match (regime, same_class) {
            (Regime::Homophilic, true) => self.p1,
            (Regime::Homophilic, false) => self.q1,
            (Regime::Heterophilic, true) => self.p2,
            (Regime::Heterophilic, false) => self.q2,
        }
    }
}

/// Minimum of the four prior-weighted connectivities.
pub fn kappa_eff(params: &CsbmParams) -> f64 {
    let (pa, pn) = (params.pi_a(), params.pi_n());
    [
        pa * params.p1 + pn * params.q1,
        pa * params.q1 + pn * params.p1,
        pa * params.p2 + pn * params.q2,
        pa * params.q2 + pn * params.p2,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// `‖μ−ν‖·√(d·n·κ_eff)/log n`.
pub fn margin_value(params: &CsbmParams) -> f64 {
    let n = params.num_nodes() as f64;
    params.mean_distance() * (params.dim() as f64 * n * kappa_eff(params)).sqrt() / n.ln()
}

#[derive(Debug, Clone)]
pub struct CsbmSample {
    pub dataset: GraphDataset,
    pub regimes: Vec<Regime>,
    pub theta: Vec<f64>,
    /// Pairs whose edge probability exceeded 1 before clipping.
    pub clipped_pairs: u64,
}

/// Samples every unordered pair once with probability
/// `clip(θ_iθ_j(B^{(h_i)} + B^{(h_j)})/2, 0, 1)`.
pub fn generate_csbm(params: &CsbmParams) -> Result<CsbmSample> {
    params.validate()?;
    let n = params.num_nodes();
    let d = params.dim();
    let mut node_rng = stream(params.seed, Stream::Generator, NODE_STREAM);

    let mut is_anomaly: Vec<bool> = (0..n).map(|i| i < params.n_anomaly).collect();
    is_anomaly.shuffle(&mut node_rng);
    let regimes: Vec<Regime> = is_anomaly
        .iter()
        .map(|&a| {
            let f = if a {
                params.hetero_frac_anomaly
            } else {
                params.hetero_frac_normal
            };
            if node_rng.random::<f64>() < f {
                Regime::Heterophilic
            } else {
                Regime::Homophilic
            }
        })
        .collect();
    let mut theta: Vec<f64> = (0..n)
        .map(|_| {
            if params.theta_min == params.theta_max {
                params.theta_min
            } else {
                node_rng.random_range(params.theta_min..=params.theta_max)
            }
        })
        .collect();
    for class in [true, false] {
        let members: Vec<usize> = (0..n).filter(|&i| is_anomaly[i] == class).collect();
        let mean = members.iter().map(|&i| theta[i]).sum::<f64>() / members.len().max(1) as f64;
        for &i in &members {
            theta[i] /= mean;
        }
    }

    let rows: Vec<(Vec<(usize, usize)>, u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(params.seed, Stream::Generator, i as u64);
            let mut edges = Vec::new();
            let mut clipped = 0;
            for j in i + 1..n {
                let same = is_anomaly[i] == is_anomaly[j];
                let b = 0.5 * (params.block(regimes[i], same) + params.block(regimes[j], same));
                let p = theta[i] * theta[j] * b;
                if p > 1.0 {
                    clipped += 1;
                }
                if rng.random::<f64>() < p.clamp(0.0, 1.0) {
                    edges.push((i, j));
                }
            }
            (edges, clipped)
        })
        .collect();
    let clipped_pairs = rows.iter().map(|r| r.1).sum();
    let adjacency = SparseAdjacency::from_edges(n, rows.into_iter().flat_map(|r| r.0))?;

    let noise = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive std");
    let feature_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(params.seed, Stream::Generator, FEATURE_STREAMS + i as u64);
            let mean = if is_anomaly[i] { &params.mu } else { &params.nu };
            mean.iter().map(|m| m + noise.sample(&mut rng)).collect()
        })
        .collect();
    let features = Array2::from_shape_vec((n, d), feature_rows.concat()).expect("n rows of width d");
    let labels = is_anomaly
        .iter()
        .map(|&a| if a { Label::Anomaly } else { Label::Normal })
        .collect();
    let dataset = GraphDataset::new("csbm", adjacency, features, labels, Vec::new())?;
    Ok(CsbmSample {
        dataset,
        regimes,
        theta,
        clipped_pairs,
    })
}

/// Random-walk filtered features, `+(SX)_i` for homophilic nodes and
/// `−(SX)_i` for heterophilic ones, with `S = D⁻¹A`. Isolated rows are zero
/// and flagged in the returned mask.
pub fn random_walk_filter(dataset: &GraphDataset, regimes: &[Regime]) -> (Array2<f64>, Vec<bool>) {
    let n = dataset.num_nodes();
    let mut out = Array2::zeros((n, dataset.num_features()));
    let mut isolated = vec![false; n];
    for i in 0..n {
        let nbrs = dataset.adjacency.neighbors(i);
        if nbrs.is_empty() {
            isolated[i] = true;
            continue;
        }
        let sign = match regimes[i] {
            Regime::Homophilic => 1.0,
            Regime::Heterophilic => -1.0,
        };
        let mut row = out.row_mut(i);
        for &j in nbrs {
            row.scaled_add(1.0, &dataset.features.row(j));
        }
        row.mapv_inplace(|v| sign * v / nbrs.len() as f64);
    }
    (out, isolated)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatorSpec {
    pub w_star: Vec<f64>,
    pub b_star: f64,
    pub r: f64,
    pub tau_pi: f64,
}

impl SeparatorSpec {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        x.iter().zip(&self.w_star).map(|(a, b)| a * b).sum::<f64>() + self.b_star
    }

    /// Anomaly when the score is negative.
    pub fn predicts_anomaly(&self, x: ArrayView1<'_, f64>) -> bool {
        self.score(x) < 0.0
    }
}

/// `w* = R(ν−μ)/‖μ−ν‖`, `τ_π = R·log(π_a/π_n)/‖μ−ν‖`,
/// `b* = −⟨μ+ν, w*⟩/2 + τ_π`.
pub fn theoretical_separator(params: &CsbmParams, r: f64) -> Result<SeparatorSpec> {
    separator_with_tau(params, r, |dist| r * (params.pi_a() / params.pi_n()).ln() / dist)
}

fn separator_with_tau(params: &CsbmParams, r: f64, tau: impl FnOnce(f64) -> f64) -> Result<SeparatorSpec> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::invalid(format!("separator scale must be positive, got {r}")));
    }
    let dist = params.mean_distance();
    if dist == 0.0 {
        return Err(Error::invalid("separator undefined when mu equals nu"));
    }
    let w_star: Vec<f64> = params
        .nu
        .iter()
        .zip(&params.mu)
        .map(|(v, m)| r * (v - m) / dist)
        .collect();
    let center: f64 = params
        .mu
        .iter()
        .zip(&params.nu)
        .zip(&w_star)
        .map(|((m, v), w)| (m + v) * w)
        .sum();
    let tau_pi = tau(dist);
    Ok(SeparatorSpec {
        w_star,
        b_star: -center / 2.0 + tau_pi,
        r,
        tau_pi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorCorrection {
    /// `τ_π = R·log(π_a/π_n)/‖μ−ν‖` exactly as stated.
    Literal,
    /// Linear discriminant correction for spherical filtered noise of
    /// variance `σ²`: `τ = σ²·R·log(π_n/π_a)/‖μ−ν‖`, with `σ²` the mean of
    /// `1/(d·deg_i)` over evaluated nodes.
    Lda,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterAssignment {
    /// Low-pass on homophilic nodes, high-pass on heterophilic ones.
    NodeAdaptive,
    /// Low-pass everywhere.
    AllLowPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentOptions {
    pub r: f64,
    pub correction: PriorCorrection,
    pub assignment: FilterAssignment,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            r: 1.0,
            correction: PriorCorrection::Lda,
            assignment: FilterAssignment::NodeAdaptive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub accuracy: f64,
    pub acc_anomaly: f64,
    pub acc_normal: f64,
    pub kappa_eff: f64,
    pub margin_value: f64,
    /// Smallest signed distance to the decision boundary over evaluated
    /// nodes; positive exactly when every node is classified correctly.
    pub empirical_margin: f64,
    pub tau_pi: f64,
    pub evaluated: usize,
    pub isolated: usize,
    pub clipped_pairs: u64,
}

/// Classifies a generated sample with the prior-aware linear separator.
pub fn evaluate_separability(
    params: &CsbmParams,
    sample: &CsbmSample,
    options: &ExperimentOptions,
) -> Result<ExperimentResult> {
    let ds = &sample.dataset;
    let regimes: Vec<Regime> = match options.assignment {
        FilterAssignment::NodeAdaptive => sample.regimes.clone(),
        FilterAssignment::AllLowPass => vec![Regime::Homophilic; ds.num_nodes()],
    };
    let (filtered, isolated) = random_walk_filter(ds, &regimes);
    let evaluated: Vec<usize> = (0..ds.num_nodes()).filter(|&i| !isolated[i]).collect();

    let separator = if params.mean_distance() == 0.0 {
        None
    } else {
        Some(match options.correction {
            PriorCorrection::Literal => theoretical_separator(params, options.r)?,
            PriorCorrection::None => separator_with_tau(params, options.r, |_| 0.0)?,
            PriorCorrection::Lda => {
                let d = params.dim() as f64;
                let sigma2 = evaluated
                    .iter()
                    .map(|&i| 1.0 / (d * ds.adjacency.degree(i) as f64))
                    .sum::<f64>()
                    / evaluated.len().max(1) as f64;
                let log_ratio = (params.pi_n() / params.pi_a()).ln();
                separator_with_tau(params, options.r, |dist| sigma2 * options.r * log_ratio / dist)?
            }
        })
    };

    let (mut hit_a, mut tot_a, mut hit_n, mut tot_n) = (0usize, 0usize, 0usize, 0usize);
    let mut empirical_margin = f64::INFINITY;
    for &i in &evaluated {
        let anomaly = ds.labels[i] == Label::Anomaly;
        let (pred_anomaly, signed) = match &separator {
            Some(sep) => {
                let s = sep.score(filtered.row(i));
                (s < 0.0, if anomaly { -s } else { s })
            }
            // Without a feature signal, predict the majority class.
            None => {
                let majority_anomaly = params.pi_a() > params.pi_n();
                (majority_anomaly, 0.0)
            }
        };
        empirical_margin = empirical_margin.min(signed);
        if anomaly {
            tot_a += 1;
            hit_a += usize::from(pred_anomaly);
        } else {
            tot_n += 1;
            hit_n += usize::from(!pred_anomaly);
        }
    }
    let ratio = |h: usize, t: usize| if t == 0 { f64::NAN } else { h as f64 / t as f64 };
    Ok(ExperimentResult {
        accuracy: ratio(hit_a + hit_n, tot_a + tot_n),
        acc_anomaly: ratio(hit_a, tot_a),
        acc_normal: ratio(hit_n, tot_n),
        kappa_eff: kappa_eff(params),
        margin_value: margin_value(params),
        empirical_margin,
        tau_pi: separator.as_ref().map_or(0.0, |s| s.tau_pi),
        evaluated: evaluated.len(),
        isolated: ds.num_nodes() - evaluated.len(),
        clipped_pairs: sample.clipped_pairs,
    })
}

/// Generates a graph and evaluates the separator on it.
pub fn separability_experiment(params: &CsbmParams, options: &ExperimentOptions) -> Result<ExperimentResult> {
    let sample = generate_csbm(params)?;
    evaluate_separability(params, &sample, options)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    pub pi_a: f64,
    pub regime_frac: f64,
    pub kappa_eff: f64,
    pub margin_value: f64,
    pub accuracy: f64,
    pub acc_anomaly: f64,
    pub acc_normal: f64,
}

/// Runs the experiment over every `(d, n, seed)` combination. The means of
/// `base` are rescaled to each dimension by keeping their first coordinates.
pub fn csbm_sweep(
    base: &CsbmParams,
    dims: &[usize],
    sizes: &[usize],
    seeds: &[u64],
    options: &ExperimentOptions,
) -> Result<Vec<SweepRow>> {
    let pi_a = base.pi_a();
    let mut jobs = Vec::new();
    for &d in dims {
        for &n in sizes {
            for &seed in seeds {
                jobs.push((d, n, seed));
            }
        }
    }
    jobs.into_iter()
        .map(|(d, n, seed)| {
            let mut p = base.clone();
            p.n_anomaly = (pi_a * n as f64).round() as usize;
            p.n_normal = n - p.n_anomaly;
            p.mu.resize(d, 0.0);
            p.nu.resize(d, 0.0);
            p.seed = seed;
            let r = separability_experiment(&p, options)?;
            Ok(SweepRow {
                seed,
                d,
                n,
                p1: p.p1,
                q1: p.q1,
                p2: p.p2,
                q2: p.q2,
                pi_a: p.pi_a(),
                regime_frac: p.regime_frac(),
                kappa_eff: r.kappa_eff,
                margin_value: r.margin_value,
                accuracy: r.accuracy,
                acc_anomaly: r.acc_anomaly,
                acc_normal: r.acc_normal,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(
            w,
            "seed,d,n,p1,q1,p2,q2,pi_a,regime_frac,kappa_eff,margin_value,accuracy,acc_anomaly,acc_normal"
        )?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.d,
                r.n,
                r.p1,
                r.q1,
                r.p2,
                r.q2,
                r.pi_a,
                r.regime_frac,
                r.kappa_eff,
                r.margin_value,
                r.accuracy,
                r.acc_anomaly,
                r.acc_normal
            )?;
        }
        Ok(())
    })
}

/// Labeled-split protocol for generated anomaly detection datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GadParams {
    pub csbm: CsbmParams,
    pub num_splits: usize,
    pub train_anomalies: usize,
    pub train_normals: usize,
    pub val_anomalies: usize,
    pub val_normals: usize,
}

impl GadParams {
    /// `n` nodes with 3% anomalies, 16 features, 20/80 labeled splits.
    pub fn smoke(n: usize, seed: u64) -> Self {
        let d = 16;
        let n_anomaly = (0.03 * n as f64).round() as usize;
        let mut mu = vec![0.0; d];
        let mut nu = vec![0.0; d];
        mu[0] = -0.3;
        nu[0] = 0.3;
        Self {
            csbm: CsbmParams {
                n_anomaly,
                n_normal: n - n_anomaly,
                mu,
                nu,
                p1: 0.01,
                q1: 0.002,
                p2: 0.002,
                q2: 0.01,
                theta_min: 0.5,
                theta_max: 1.5,
                hetero_frac_anomaly: 0.8,
                hetero_frac_normal: 0.1,
                seed,
            },
            num_splits: 3,
            train_anomalies: 20,
            train_normals: 80,
            val_anomalies: 20,
            val_normals: 80,
        }
    }
}

/// Generated graph plus `num_splits` random labeled splits; every node not
/// in train or validation is a test node.
pub fn generate_gad_dataset(params: &GadParams) -> Result<CsbmSample> {
    let mut sample = generate_csbm(&params.csbm)?;
    let ds = &mut sample.dataset;
    let anomalies: Vec<usize> = (0..ds.num_nodes())
        .filter(|&i| ds.labels[i] == Label::Anomaly)
        .collect();
    let normals: Vec<usize> = (0..ds.num_nodes()).filter(|&i| ds.labels[i] == Label::Normal).collect();
    let need_a = params.train_anomalies + params.val_anomalies;
    let need_n = params.train_normals + params.val_normals;
    if anomalies.len() <= need_a || normals.len() <= need_n {
        return Err(Error::Config(format!(
            "labeled split needs more than {need_a} anomalies and {need_n} normals, have {} and {}",
            anomalies.len(),
            normals.len()
        )));
    }
    let mut splits = Vec::with_capacity(params.num_splits);
    for s in 0..params.num_splits {
        let mut rng = stream(params.csbm.seed, Stream::Split, s as u64);
        let mut a = anomalies.clone();
        let mut n = normals.clone();
        a.shuffle(&mut rng);
        n.shuffle(&mut rng);
        let mut train: Vec<usize> = a[..params.train_anomalies]
            .iter()
            .chain(&n[..params.train_normals])
            .copied()
            .collect();
        let mut val: Vec<usize> = a[params.train_anomalies..need_a]
            .iter()
            .chain(&n[params.train_normals..need_n])
            .copied()
            .collect();
        let mut test: Vec<usize> = a[need_a..].iter().chain(&n[need_n..]).copied().collect();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        splits.push(SplitSet { train, val, test });
    }
    ds.name = "csbm-gad".into();
    ds.splits = splits;
    ds.validate()?;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn small(seed: u64) -> CsbmParams {
        let mut p = CsbmParams::strong_separation(8, 200, 0.1, seed);
        p.hetero_frac_anomaly = 0.5;
        p.hetero_frac_normal = 0.5;
        p
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = small(0);
        p.p1 = 0.01;
        assert!(p.validate().is_err());
        let mut p = small(0);
        p.mu[0] = 2.0;
        assert!(p.validate().is_err());
        let mut p = small(0);
        p.q2 = 0.01;
        assert!(p.validate().is_err());
    }

    #[test]
    fn generated_graph_is_simple_and_deterministic() {
        let a = generate_csbm(&small(4)).unwrap();
        let b = generate_csbm(&small(4)).unwrap();
        assert_eq!(a.dataset.adjacency, b.dataset.adjacency);
        assert_eq!(a.dataset.features, b.dataset.features);
        let adj = &a.dataset.adjacency;
        for (u, v) in adj.edges() {
            assert_ne!(u, v);
            assert!(adj.has_edge(v, u));
        }
        let anomalies = a.dataset.labels.iter().filter(|&&l| l == Label::Anomaly).count();
        assert_eq!(anomalies, 20);
        assert_eq!(a.clipped_pairs, 0);
    }

    #[test]
    fn certain_edges_and_clip_counts() {
        let mut p = small(1);
        p.n_anomaly = 0;
        p.n_normal = 2;
        p.p1 = 1.0;
        p.q1 = 0.0;
        p.hetero_frac_normal = 0.0;
        let s = generate_csbm(&p).unwrap();
        assert_eq!(s.dataset.adjacency.num_edges(), 1);
        p.theta_min = 0.5;
        p.theta_max = 1.5;
        p.n_normal = 60;
        let s = generate_csbm(&p).unwrap();
        assert!(s.clipped_pairs > 0);
    }

    #[test]
    fn filter_examples() {
        let adj = SparseAdjacency::from_edges(2, [(0, 1)]).unwrap();
        let ds = GraphDataset::new("t", adj, array![[1.0], [3.0]], vec![Label::Normal; 2], vec![]).unwrap();
        let (f, iso) = random_walk_filter(&ds, &[Regime::Homophilic; 2]);
        assert_eq!(f, array![[3.0], [1.0]]);
        assert_eq!(iso, vec![false, false]);
        let (f, _) = random_walk_filter(&ds, &[Regime::Heterophilic, Regime::Homophilic]);
        assert_eq!(f[[0, 0]], -3.0);

        let adj = SparseAdjacency::from_edges(4, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let ds = GraphDataset::new(
            "t",
            adj,
            array![[0.0], [3.0], [6.0], [1.0]],
            vec![Label::Normal; 4],
            vec![],
        )
        .unwrap();
        let (f, iso) = random_walk_filter(&ds, &[Regime::Homophilic; 4]);
        assert_eq!(f[[0, 0]], 4.5);
        assert!(iso[3]);
    }

    #[test]
    fn separator_examples() {
        let mut p = small(0);
        p.mu = vec![0.5, 0.0];
        p.nu = vec![-0.5, 0.0];
        p.n_anomaly = 100;
        p.n_normal = 100;
        let s = theoretical_separator(&p, 1.0).unwrap();
        assert_abs_diff_eq!(s.w_star.as_slice(), [-1.0, 0.0].as_slice(), epsilon = 1e-15);
        assert_eq!(s.tau_pi, 0.0);
        assert_abs_diff_eq!(s.b_star, 0.0, epsilon = 1e-15);

        p.n_anomaly = 20;
        p.n_normal = 180;
        let s = theoretical_separator(&p, 1.0).unwrap();
        assert_abs_diff_eq!(s.tau_pi, (1.0f64 / 9.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.b_star, -2.19722, epsilon = 1e-5);
        let s2 = theoretical_separator(&p, 2.0).unwrap();
        assert_abs_diff_eq!(s2.b_star, 2.0 * s.b_star, epsilon = 1e-12);
        let x = array![0.3, -0.7];
        assert_eq!(s.predicts_anomaly(x.view()), s2.predicts_anomaly(x.view()));

        p.nu = p.mu.clone();
        assert!(theoretical_separator(&p, 1.0).is_err());
    }

    #[test]
    fn kappa_is_min_connectivity() {
        let p = CsbmParams::strong_separation(4, 1000, 0.1, 0);
        let expected = (0.1f64 * 0.1 + 0.9 * 0.02).min(0.1 * 0.02 + 0.9 * 0.1);
        assert_abs_diff_eq!(kappa_eff(&p), expected, epsilon = 1e-15);
    }

    #[test]
    fn equal_means_predict_majority() {
        let mut p = small(2);
        p.nu = p.mu.clone();
        let r = separability_experiment(&p, &ExperimentOptions::default()).unwrap();
        assert_abs_diff_eq!(r.accuracy, p.pi_n(), epsilon = 0.02);
    }

    #[test]
    fn gad_splits_are_disjoint_and_sized() {
        let g = generate_gad_dataset(&GadParams::smoke(2000, 1)).unwrap();
        let s = &g.dataset.splits[0];
        assert_eq!(s.train.len(), 100);
        assert_eq!(s.val.len(), 100);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 2000);
        let a = s
            .train
            .iter()
            .filter(|&&i| g.dataset.labels[i] == Label::Anomaly)
            .count();
        assert_eq!(a, 20);
    }
}
