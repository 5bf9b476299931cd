//! Rayleigh-quotient guided context sampling.
//!
//! For every node we pick the subset of its closed 1-hop neighborhood that
//! maximizes the multi-channel Rayleigh quotient
//! `trace(XᵀL_S X) / trace(XᵀX)` of the induced subgraph, then mean-pool the
//! feature rows of that subset into a context row.
//!
//! Context file layout (little endian): magic `SGCTX001`, u64 n, u64 d,
//! n·d f32 row-major context, n u32 subgraph sizes.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::index;
use rayon::prelude::*;

use crate::binio::Reader;
use crate::dataset::{write_with, GraphDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub const CONTEXT_MAGIC: &[u8; 8] = b"SGCTX001";
pub const DEFAULT_CANDIDATE_CAP: usize = 64;
/// Candidate sets up to this size are searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 10;
const EXHAUSTIVE_HARD_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    /// Exhaustive for small candidate sets, greedy otherwise.
    Auto,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub hop: usize,
    pub cap: usize,
    pub seed: u64,
    pub strategy: SearchStrategy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            hop: 1,
            cap: DEFAULT_CANDIDATE_CAP,
            seed: 0,
            strategy: SearchStrategy::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    /// Sorted node ids, always containing the root.
    pub nodes: Vec<usize>,
    pub rq: f64,
}

fn sq_norm(x: ArrayView1<'_, f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Rayleigh quotient of the subgraph induced by `nodes`, using the
/// unnormalized Laplacian. Zero when every selected feature row is zero.
pub fn rayleigh_quotient(dataset: &GraphDataset, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::invalid("Rayleigh quotient of an empty node set"));
    }
    let n = dataset.num_nodes();
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&id) = sorted.last().filter(|&&id| id >= n) {
        return Err(Error::NodeOutOfRange { id, num_nodes: n });
    }
    let x = &dataset.features;
    let mut num = 0.0;
    for (a, &u) in sorted.iter().enumerate() {
        for &v in &sorted[a + 1..] {
            if dataset.adjacency.has_edge(u, v) {
                num += sq_dist(x.row(u), x.row(v));
            }
        }
    }
    let den: f64 = sorted.iter().map(|&u| sq_norm(x.row(u))).sum();
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Neighbors considered for `node`: all of them, or a seeded uniform sample
/// of `cap` when the degree exceeds it. Sorted ascending.
pub fn candidate_neighbors(dataset: &GraphDataset, node: usize, cap: usize, seed: u64) -> Vec<usize> {
    let nbrs = dataset.adjacency.neighbors(node);
    if nbrs.len() <= cap {
        return nbrs.to_vec();
    }
    let mut rng = stream(seed, Stream::Sampler, node as u64);
    let mut picked: Vec<usize> = index::sample(&mut rng, nbrs.len(), cap)
        .into_iter()
        .map(|i| nbrs[i])
        .collect();
    picked.sort_unstable();
    picked
}

pub fn max_rq_subgraph(dataset: &GraphDataset, node: usize, config: &SamplerConfig) -> Result<Subgraph> {
    let n = dataset.num_nodes();
    if node >= n {
        return Err(Error::NodeOutOfRange { id: node, num_nodes: n });
    }
    if config.hop != 1 {
        return Err(Error::invalid(format!(
            "only 1-hop context subgraphs are supported, got hop={}",
            config.hop
        )));
    }
    let cands = candidate_neighbors(dataset, node, config.cap, config.seed);
    let exhaustive = match config.strategy {
        SearchStrategy::Auto => cands.len() <= EXHAUSTIVE_LIMIT,
        SearchStrategy::Exhaustive => {
            if cands.len() > EXHAUSTIVE_HARD_LIMIT {
                return Err(Error::invalid(format!(
                    "exhaustive search over {} candidates is not supported",
                    cands.len()
                )));
            }
            true
        }
        SearchStrategy::Greedy => false,
    };
    if exhaustive {
        Ok(exhaustive_search(dataset, node, &cands))
    } else {
        greedy_search(dataset, node, &cands)
    }
}

/// Enumerates every subset of `{root} ∪ cands` containing the root. Ties go
/// to the smaller subset, then to the lexicographically smaller id list.
fn exhaustive_search(dataset: &GraphDataset, root: usize, cands: &[usize]) -> Subgraph {
    let x = &dataset.features;
    // Local indexing in ascending global id order so sums follow the same
    // order as `rayleigh_quotient`.
    let mut local: Vec<usize> = cands.to_vec();
    local.push(root);
    local.sort_unstable();
    let m = local.len();
    let root_bit = 1u32 << local.iter().position(|&u| u == root).unwrap();
    let norms: Vec<f64> = local.iter().map(|&u| sq_norm(x.row(u))).collect();
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if dataset.adjacency.has_edge(local[a], local[b]) {
                edges.push((a, b, sq_dist(x.row(local[a]), x.row(local[b]))));
            }
        }
    }

    let members = |mask: u32| -> Vec<usize> { (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| local[i]).collect() };
    let mut best_mask = root_bit;
    let mut best_rq = 0.0;
    for mask in 0u32..(1 << m) {
        if mask & root_bit == 0 {
            continue;
        }
        let mut num = 0.0;
        for &(a, b, w) in &edges {
            if mask & (1 << a) != 0 && mask & (1 << b) != 0 {
                num += w;
            }
        }
        let den: f64 = (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| norms[i]).sum();
        let rq = if den == 0.0 { 0.0 } else { num / den };
        let better = rq > best_rq
            || (rq == best_rq
                && (mask.count_ones() < best_mask.count_ones()
                    || (mask.count_ones() == best_mask.count_ones() && members(mask) < members(best_mask))));
        if better {
            best_mask = mask;
            best_rq = rq;
        }
    }
    Subgraph {
        nodes: members(best_mask),
        rq: best_rq,
    }
}

/// Adds the neighbor with the largest resulting quotient until no addition
/// strictly increases it. Ties go to the smallest node id.
fn greedy_search(dataset: &GraphDataset, root: usize, cands: &[usize]) -> Result<Subgraph> {
    let x = &dataset.features;
    let mut chosen = vec![root];
    let mut in_set = vec![false; cands.len()];
    let mut num = 0.0;
    let mut den = sq_norm(x.row(root));
    let mut current = 0.0;
    loop {
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (ci, &c) in cands.iter().enumerate() {
            if in_set[ci] {
                continue;
            }
            let gain: f64 = chosen
                .iter()
                .filter(|&&u| dataset.adjacency.has_edge(u, c))
                .map(|&u| sq_dist(x.row(u), x.row(c)))
                .sum();
            let new_num = num + gain;
            let new_den = den + sq_norm(x.row(c));
            let rq = if new_den == 0.0 { 0.0 } else { new_num / new_den };
            if best.is_none_or(|(_, b, _, _)| rq > b) {
                best = Some((ci, rq, new_num, new_den));
            }
        }
        match best {
            Some((ci, rq, new_num, new_den)) if rq > current => {
                in_set[ci] = true;
                chosen.push(cands[ci]);
                num = new_num;
                den = new_den;
                current = rq;
            }
            _ => break,
        }
    }
    chosen.sort_unstable();
    let rq = rayleigh_quotient(dataset, &chosen)?;
    Ok(Subgraph { nodes: chosen, rq })
}

/// Mean-pooled context rows plus the size of the subset behind each row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextCache {
    pub context: Array2<f32>,
    pub subgraph_size: Vec<u32>,
}

impl ContextCache {
    pub fn num_nodes(&self) -> usize {
        self.context.nrows()
    }

    pub fn dim(&self) -> usize {
        self.context.ncols()
    }
}

fn mean_row(dataset: &GraphDataset, nodes: &[usize]) -> Vec<f32> {
    let d = dataset.num_features();
    let mut acc = vec![0.0f64; d];
    for &u in nodes {
        for (a, &v) in acc.iter_mut().zip(dataset.features.row(u).iter()) {
            *a += v;
        }
    }
    let k = nodes.len() as f64;
    acc.into_iter().map(|v| (v / k) as f32).collect()
}

fn assemble(rows: Vec<(Vec<f32>, u32)>, d: usize) -> ContextCache {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * d);
    let mut sizes = Vec::with_capacity(n);
    for (row, size) in rows {
        flat.extend_from_slice(&row);
        sizes.push(size);
    }
    ContextCache {
        context: Array2::from_shape_vec((n, d), flat).expect("row widths are d"),
        subgraph_size: sizes,
    }
}

/// Context rows from the max-RQ subgraph of every node. Deterministic for a
/// fixed seed regardless of thread count.
pub fn build_context_cache(dataset: &GraphDataset, config: &SamplerConfig) -> Result<ContextCache> {
    let rows = (0..dataset.num_nodes())
        .into_par_iter()
        .map(|v| {
            let sub = max_rq_subgraph(dataset, v, config)?;
            Ok((mean_row(dataset, &sub.nodes), sub.nodes.len() as u32))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(rows, dataset.num_features()))
}

/// Context rows from the full closed 1-hop neighborhood.
pub fn build_khop_context(dataset: &GraphDataset) -> ContextCache {
    let rows = (0..dataset.num_nodes())
        .into_par_iter()
        .map(|v| {
            let mut nodes = dataset.adjacency.neighbors(v).to_vec();
            nodes.push(v);
            (mean_row(dataset, &nodes), nodes.len() as u32)
        })
        .collect();
    assemble(rows, dataset.num_features())
}

pub fn write_context_cache(cache: &ContextCache, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        w.write_all(CONTEXT_MAGIC)?;
        w.write_all(&(cache.num_nodes() as u64).to_le_bytes())?;
        w.write_all(&(cache.dim() as u64).to_le_bytes())?;
        for &v in cache.context.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &s in &cache.subgraph_size {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn read_context_cache(path: impl AsRef<Path>) -> Result<ContextCache> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(CONTEXT_MAGIC)?;
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    r.require_len(24 + (n * d * 4 + n * 4) as u64)?;
    let context = Array2::from_shape_vec((n, d), r.f32s(n * d)?).expect("shape from header");
    let subgraph_size = r.u32s(n)?;
    Ok(ContextCache { context, subgraph_size })
}
