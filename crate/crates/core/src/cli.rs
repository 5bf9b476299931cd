//! The `sagad` command-line surface.
//!
//! Every command resolves a [`RunConfig`] from an optional JSON file
//! (`--config path`) overlaid with `--key=value` flags, echoes it to stdout
//! and stores it as `<out_dir>/<command>.config.json` beside its outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::cheb::{build_cheb_basis_with, read_cache, write_cache, ChebBasisCache};
use crate::config::{parse_config, parse_flags, RunConfig};
use crate::csbm::{csbm_sweep, generate_gad_dataset, write_sweep_csv, Regime};
use crate::dataset::{load_dataset, write_dataset, write_json, write_with, GraphDataset};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, gather, quartile_report, write_quartiles_csv, write_report_csv, QuartileMetrics, QuartileReport,
    ReportRow, TIE_ORDER,
};
use crate::homophily::homophily_report;
use crate::model::checkpoint::{read_checkpoint, write_checkpoint};
use crate::model::{ContextMode, ModelInputs, ModelState};
use crate::rq::{build_context_cache, build_khop_context, read_context_cache, write_context_cache, ContextCache};
use crate::train::{score_all, train, write_history};

pub const THREADS_ENV: &str = "SAGAD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check a dataset directory and print its summary.
    Validate,
    /// Build the Chebyshev basis cache.
    Preprocess,
    /// Build the context cache for the configured context mode.
    SampleContext,
    /// Train one model per selected split.
    Train,
    /// Score the test nodes of every split and write report.csv.
    Eval,
    /// Write every node's anomaly probability per split.
    Score,
    /// Generate a CSBM anomaly detection dataset.
    SynthCsbm,
    /// Run the separability sweep over dimensions, sizes and seeds.
    CsbmSweep,
    /// Edge, class and node homophily of a dataset.
    Homophily,
    /// Per-homophily-quartile metrics of the trained models.
    Quartiles,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Preprocess => "preprocess",
            Command::SampleContext => "sample-context",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Score => "score",
            Command::SynthCsbm => "synth-csbm",
            Command::CsbmSweep => "csbm-sweep",
            Command::Homophily => "homophily",
            Command::Quartiles => "quartiles",
        }
    }

    fn default_threads(self) -> Option<usize> {
        match self {
            Command::Train => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sagad",
    version,
    about = "Spectral graph anomaly detection pipeline",
    after_help = "Overrides: any config key as --key=value or --key value (dashes and underscores are interchangeable); \
                  --config <file> loads a JSON config first. Set SAGAD_THREADS to cap worker threads."
)]
pub struct Cli {
    pub command: Command,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    pub overrides: Vec<String>,
}

/// Parses `args` (without the program name), resolves the configuration and
/// runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("sagad".to_string()).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            std::process::exit(0)
        }
        _ => Error::Config(e.to_string()),
    })?;
    let mut flags = parse_flags(&cli.overrides)?;
    let mut file = None;
    flags.retain(|(k, v)| {
        if k == "config" {
            file = Some(PathBuf::from(v));
            false
        } else {
            true
        }
    });
    let config = parse_config(file.as_deref(), &flags)?;
    dispatch(cli.command, &config)
}

/// Runs `command` inside a thread pool sized by `SAGAD_THREADS`.
pub fn dispatch(command: Command, config: &RunConfig) -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => command.default_threads(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| execute(command, config))
}

fn execute(command: Command, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let resolved = serde_json::to_string(config).map_err(|source| Error::Json {
        context: "resolved config".into(),
        source,
    })?;
    println!("{resolved}");
    write_json(&config.out_dir.join(format!("{}.config.json", command.name())), config)?;
    match command {
        Command::Validate => validate(config),
        Command::Preprocess => preprocess(config),
        Command::SampleContext => sample_context(config),
        Command::Train => train_splits(config),
        Command::Eval => eval_splits(config),
        Command::Score => score_splits(config),
        Command::SynthCsbm => synth_csbm(config),
        Command::CsbmSweep => sweep(config),
        Command::Homophily => homophily(config),
        Command::Quartiles => quartiles(config),
    }
}

fn dataset(config: &RunConfig) -> Result<GraphDataset> {
    let dir = config
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("`dataset` must name a dataset directory".into()))?;
    let ds = load_dataset(dir)?;
    ds.validate()?;
    Ok(ds)
}

fn require(path: &Path, command: Command) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite {
            path: path.to_path_buf(),
            command: command.name().into(),
        })
    }
}

fn split_indices(config: &RunConfig, ds: &GraphDataset) -> Result<Vec<usize>> {
    let all = ds.splits.len();
    if all == 0 {
        return Err(Error::invalid(format!("dataset {} defines no splits", ds.name)));
    }
    match &config.splits {
        None => Ok((0..all).collect()),
        Some(ids) => {
            if let Some(&bad) = ids.iter().find(|&&i| i >= all) {
                return Err(Error::Config(format!("split {bad} requested, dataset has {all}")));
            }
            Ok(ids.clone())
        }
    }
}

fn checkpoint_path(config: &RunConfig, split: usize) -> PathBuf {
    config.out_dir.join(format!("model_split{split}.ckpt"))
}

fn load_basis(config: &RunConfig) -> Result<ChebBasisCache> {
    let path = config.cheb_path();
    require(&path, Command::Preprocess)?;
    read_cache(path)
}

fn load_context(config: &RunConfig, mode: ContextMode) -> Result<Option<ContextCache>> {
    let config = RunConfig {
        context_mode: mode,
        ..config.clone()
    };
    match config.context_path() {
        None => Ok(None),
        Some(path) => {
            require(&path, Command::SampleContext)?;
            read_context_cache(path).map(Some)
        }
    }
}

/// Checkpoints of the selected splits with the caches they were trained on.
fn trained_models(config: &RunConfig, ds: &GraphDataset) -> Result<Vec<(usize, ModelState)>> {
    split_indices(config, ds)?
        .into_iter()
        .map(|s| {
            let path = checkpoint_path(config, s);
            require(&path, Command::Train)?;
            Ok((s, read_checkpoint(path)?))
        })
        .collect()
}

fn scores_for(config: &RunConfig, basis: &ChebBasisCache, state: &ModelState) -> Result<Vec<f64>> {
    let context = load_context(config, state.config.context_mode)?;
    let inputs = ModelInputs {
        basis,
        context: context.as_ref(),
    };
    score_all(state, &inputs, config.batch_size)
}

fn validate(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let anomalies = ds
        .labels
        .iter()
        .filter(|l| **l == crate::dataset::Label::Anomaly)
        .count();
    let labeled = ds.labels.iter().filter(|l| l.is_known()).count();
    println!(
        "dataset {}: {} nodes, {} edges, {} features, {} labeled, {} anomalies, {} splits",
        ds.name,
        ds.num_nodes(),
        ds.adjacency.num_edges(),
        ds.num_features(),
        labeled,
        anomalies,
        ds.splits.len()
    );
    Ok(())
}

fn preprocess(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let cache = build_cheb_basis_with(&ds, config.order, config.self_loops)?;
    let path = config.cheb_path();
    write_cache(&cache, &path)?;
    println!(
        "wrote {} (K={}, n={}, d={})",
        path.display(),
        cache.order(),
        cache.num_nodes(),
        cache.dim()
    );
    Ok(())
}

fn sample_context(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let Some(path) = config.context_path() else {
        println!("context_mode features_only needs no context cache");
        return Ok(());
    };
    let cache = match config.context_mode {
        ContextMode::Rq => build_context_cache(&ds, &config.sampler_config())?,
        _ => build_khop_context(&ds),
    };
    write_context_cache(&cache, &path)?;
    let mean_size = cache.subgraph_size.iter().map(|&s| s as f64).sum::<f64>() / cache.num_nodes().max(1) as f64;
    println!("wrote {} (mean subgraph size {mean_size:.3})", path.display());
    Ok(())
}

fn train_splits(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let basis = load_basis(config)?;
    let context = load_context(config, config.context_mode)?;
    let inputs = ModelInputs {
        basis: &basis,
        context: context.as_ref(),
    };
    let model_config = config.model_config();
    let train_config = config.train_config();
    for s in split_indices(config, &ds)? {
        let out = train(&inputs, &ds.labels, &model_config, &train_config, &ds.splits[s])?;
        write_checkpoint(&out.state, checkpoint_path(config, s))?;
        write_history(&out.history, config.out_dir.join(format!("history_split{s}.csv")))?;
        let best = out.history[out.best_epoch - 1];
        println!(
            "split {s}: {} epochs, best epoch {} (val AUPRC {:.4}), beta {:.4}",
            out.history.len(),
            out.best_epoch,
            best.val_auprc,
            out.beta
        );
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Serialize)]
struct ReportMeta<'a> {
    tie_order: &'a str,
    rec_at_k: &'a str,
    std: &'a str,
    splits: Vec<usize>,
    k_used: Vec<usize>,
    seed: u64,
}

fn eval_splits(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let basis = load_basis(config)?;
    let models = trained_models(config, &ds)?;
    let mut rows = Vec::new();
    let mut per_metric: [Vec<f64>; 3] = Default::default();
    let mut k_used = Vec::new();
    for (s, state) in &models {
        let scores = scores_for(config, &basis, state)?;
        let (sc, y) = gather(&scores, &ds.labels, &ds.splits[*s].test)?;
        let report = evaluate(&sc, &y)?;
        for (i, (metric, value)) in [
            ("auroc", report.auroc),
            ("auprc", report.auprc),
            ("rec_at_k", report.rec_at_k),
        ]
        .into_iter()
        .enumerate()
        {
            per_metric[i].push(value);
            rows.push(ReportRow {
                split: s.to_string(),
                metric: metric.into(),
                value,
            });
        }
        k_used.push(report.k_used);
        println!(
            "split {s}: AUROC {:.4}  AUPRC {:.4}  Rec@K {:.4} (K={})",
            report.auroc, report.auprc, report.rec_at_k, report.k_used
        );
    }
    for (metric, values) in ["auroc", "auprc", "rec_at_k"].iter().zip(&per_metric) {
        let (mean, std) = mean_std(values);
        rows.push(ReportRow {
            split: "mean".into(),
            metric: (*metric).into(),
            value: mean,
        });
        rows.push(ReportRow {
            split: "std".into(),
            metric: (*metric).into(),
            value: std,
        });
        println!("{metric}: {mean:.4} ± {std:.4}");
    }
    write_report_csv(&rows, config.out_dir.join("report.csv"))?;
    write_json(
        &config.out_dir.join("report_meta.json"),
        &ReportMeta {
            tie_order: TIE_ORDER,
            rec_at_k: "K = number of test anomalies",
            std: "population standard deviation over splits",
            splits: models.iter().map(|m| m.0).collect(),
            k_used,
            seed: config.seed,
        },
    )
}

fn score_splits(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let basis = load_basis(config)?;
    for (s, state) in trained_models(config, &ds)? {
        let scores = scores_for(config, &basis, &state)?;
        let path = config.out_dir.join(format!("scores_split{s}.csv"));
        write_with(&path, |w| {
            writeln!(w, "node,score")?;
            for (i, p) in scores.iter().enumerate() {
                writeln!(w, "{i},{p}")?;
            }
            Ok(())
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthMeta {
    clipped_pairs: u64,
    num_anomalies: usize,
    heterophilic_nodes: usize,
    seed: u64,
}

fn synth_csbm(config: &RunConfig) -> Result<()> {
    let sample = generate_gad_dataset(&config.gad_params())?;
    let dir = config.dataset.clone().unwrap_or_else(|| config.out_dir.join("dataset"));
    write_dataset(&sample.dataset, &dir)?;
    let meta = SynthMeta {
        clipped_pairs: sample.clipped_pairs,
        num_anomalies: config.csbm_params().n_anomaly,
        heterophilic_nodes: sample.regimes.iter().filter(|r| **r == Regime::Heterophilic).count(),
        seed: config.seed,
    };
    write_json(&dir.join("csbm_meta.json"), &meta)?;
    if meta.clipped_pairs > 0 {
        log::warn!("{} pair probabilities were clipped to 1", meta.clipped_pairs);
    }
    println!(
        "wrote {} ({} nodes, {} edges, {} anomalies)",
        dir.display(),
        sample.dataset.num_nodes(),
        sample.dataset.adjacency.num_edges(),
        meta.num_anomalies
    );
    Ok(())
}

fn sweep(config: &RunConfig) -> Result<()> {
    let rows = csbm_sweep(
        &config.csbm_params(),
        &config.sweep_dims,
        &config.sweep_sizes,
        &config.sweep_seeds,
        &config.experiment_options(),
    )?;
    let path = config.out_dir.join("csbm_sweep.csv");
    write_sweep_csv(&rows, &path)?;
    for r in &rows {
        println!("seed {} d {} n {}: accuracy {:.4}", r.seed, r.d, r.n, r.accuracy);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn homophily(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let report = homophily_report(&ds)?;
    write_json(&config.out_dir.join("homophily.json"), &report)?;
    write_with(&config.out_dir.join("node_homophily.csv"), |w| {
        writeln!(w, "node,homophily")?;
        for (i, h) in report.node_homophily.iter().enumerate() {
            match h {
                Some(h) => writeln!(w, "{i},{h}")?,
                None => writeln!(w, "{i},")?,
            }
        }
        Ok(())
    })?;
    println!("h = {:.6}", report.edge_homophily);
    println!("h^a = {:.6}", report.class_homophily_abnormal);
    println!("h^n = {:.6}", report.class_homophily_normal);
    Ok(())
}

fn quartiles(config: &RunConfig) -> Result<()> {
    let ds = dataset(config)?;
    let basis = load_basis(config)?;
    let node_h = homophily_report(&ds)?.node_homophily;
    let mut reports = Vec::new();
    for (s, state) in trained_models(config, &ds)? {
        let scores = scores_for(config, &basis, &state)?;
        let report = quartile_report(&scores, &ds.labels, &node_h, &ds.splits[s].test)?;
        write_quartiles_csv(&report, config.out_dir.join(format!("quartiles_split{s}.csv")))?;
        reports.push(report);
    }
    let mean = mean_quartiles(&reports);
    write_quartiles_csv(&mean, config.out_dir.join("quartiles.csv"))?;
    for q in &mean.quartiles {
        println!("Q{}: AUPRC {:.4}  AUROC {:.4}", q.quartile, q.auprc, q.auroc);
    }
    for (label, ap, roc) in &mean.gaps {
        println!("{label}: AUPRC {ap:.4}  AUROC {roc:.4}");
    }
    Ok(())
}

/// Split-averaged quartile metrics; membership lists are left empty.
fn mean_quartiles(reports: &[QuartileReport]) -> QuartileReport {
    let n = reports.len() as f64;
    let quartiles = (0..4)
        .map(|q| QuartileMetrics {
            quartile: q + 1,
            anomalies: Vec::new(),
            auprc: reports.iter().map(|r| r.quartiles[q].auprc).sum::<f64>() / n,
            auroc: reports.iter().map(|r| r.quartiles[q].auroc).sum::<f64>() / n,
        })
        .collect();
    let gaps = (0..3)
        .map(|j| {
            (
                reports[0].gaps[j].0.clone(),
                reports.iter().map(|r| r.gaps[j].1).sum::<f64>() / n,
                reports.iter().map(|r| r.gaps[j].2).sum::<f64>() / n,
            )
        })
        .collect();
    QuartileReport { quartiles, gaps }
}
