//! Chebyshev basis precomputation `T_k(L̂)X` over a sparse graph.
//!
//! With the spectrum bound fixed at 2 the scaled Laplacian is
//! `L̂ = L̃ - I = -D^{-1/2} A D^{-1/2}`, so every basis step is one sparse
//! product. Blocks follow `B_0 = X`, `B_1 = L̂X`, `B_{k+1} = 2L̂B_k - B_{k-1}`.
//!
//! Cache file layout (little endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `SGCHEB01` |
//! | 8     | u64 n |
//! | 8     | u64 d |
//! | 4     | u32 K |
//! | 4     | u32 dtype code (0 = f32) |
//! | (K+1)·n·d·4 | blocks in k order, each row-major n×d f32 |

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use crate::binio::Reader;
use crate::dataset::{write_with, GraphDataset};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, normalized_adjacency_with_self_loops, SparseOperator};

pub const CHEB_MAGIC: &[u8; 8] = b"SGCHEB01";
pub const CHEB_HEADER_BYTES: u64 = 32;
pub const LAMBDA_MAX: f64 = 2.0;
const DTYPE_F32: u32 = 0;
/// Largest graph the dense eigendecomposition oracle accepts.
pub const ORACLE_MAX_NODES: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebBasisCache {
    order: usize,
    num_nodes: usize,
    dim: usize,
    blocks: Vec<Array2<f32>>,
}

impl ChebBasisCache {
    pub fn from_blocks(blocks: Vec<Array2<f32>>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::invalid("a Chebyshev cache needs at least two blocks (K >= 1)"));
        }
        let (n, d) = blocks[0].dim();
        if blocks.iter().any(|b| b.dim() != (n, d)) {
            return Err(Error::Dimension("Chebyshev blocks differ in shape".into()));
        }
        Ok(Self {
            order: blocks.len() - 1,
            num_nodes: n,
            dim: d,
            blocks,
        })
    }

    /// Polynomial order K; the cache holds K+1 blocks.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_max(&self) -> f64 {
        LAMBDA_MAX
    }

    pub fn blocks(&self) -> &[Array2<f32>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> ArrayView2<'_, f32> {
        self.blocks[k].view()
    }

    /// Size in bytes of the serialized payload: `(K+1)·n·d·4`.
    pub fn payload_bytes(&self) -> u64 {
        ((self.order + 1) * self.num_nodes * self.dim * 4) as u64
    }
}

/// The propagation operator `Ã` used for `L̂ = -Ã`.
pub fn propagation_operator(dataset: &GraphDataset, add_self_loops: bool) -> SparseOperator {
    if add_self_loops {
        normalized_adjacency_with_self_loops(&dataset.adjacency)
    } else {
        normalized_adjacency(&dataset.adjacency)
    }
}

/// Runs the three-term recurrence in f64, handing each block to `visit` in
/// k order. Only three n×d buffers are alive at any time.
pub fn for_each_cheb_block<F>(op: &SparseOperator, x: &Array2<f64>, order: usize, mut visit: F)
where
    F: FnMut(usize, &Array2<f64>),
{
    let mut prev = x.clone();
    visit(0, &prev);
    if order == 0 {
        return;
    }
    let mut cur = Array2::zeros(x.dim());
    op.spmm_into(prev.view(), -1.0, cur.view_mut());
    visit(1, &cur);
    let mut next = Array2::zeros(x.dim());
    for k in 2..=order {
        op.spmm_into(cur.view(), -2.0, next.view_mut());
        next -= &prev;
        visit(k, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
}

pub fn build_cheb_basis(dataset: &GraphDataset, order: usize) -> Result<ChebBasisCache> {
    build_cheb_basis_with(dataset, order, false)
}

pub fn build_cheb_basis_with(dataset: &GraphDataset, order: usize, add_self_loops: bool) -> Result<ChebBasisCache> {
    if order < 1 {
        return Err(Error::invalid(format!("Chebyshev order must be >= 1, got {order}")));
    }
    let op = propagation_operator(dataset, add_self_loops);
    let mut blocks = Vec::with_capacity(order + 1);
    for_each_cheb_block(&op, &dataset.features, order, |_, b| {
        blocks.push(b.mapv(|v| v as f32));
    });
    ChebBasisCache::from_blocks(blocks)
}

/// `Σ_k w_k T_k(L̂) X` through the sparse recurrence, entirely in f64.
pub fn cheb_filter(op: &SparseOperator, x: &Array2<f64>, weights: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros(x.dim());
    if weights.is_empty() {
        return out;
    }
    for_each_cheb_block(op, x, weights.len() - 1, |k, b| out.scaled_add(weights[k], b));
    out
}

/// Dense reference: `U · diag(Σ_k w_k T_k(λ̂_i)) · Uᵀ · X` from a full
/// eigendecomposition of `L̂`.
pub fn dense_spectral_oracle(op: &SparseOperator, x: &Array2<f64>, weights: &[f64]) -> Result<Array2<f64>> {
    let n = op.num_nodes();
    if n > ORACLE_MAX_NODES {
        return Err(Error::invalid(format!(
            "dense oracle limited to {ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    let dense = op.to_dense();
    let scaled = DMatrix::from_fn(n, n, |i, j| -dense[[i, j]]);
    let eig = SymmetricEigen::new(scaled);
    let response: Vec<f64> = eig.eigenvalues.iter().map(|&t| chebyshev_series(weights, t)).collect();
    let u = &eig.eigenvectors;
    let xm = DMatrix::from_fn(n, x.ncols(), |i, j| x[[i, j]]);
    let mut spectral = u.transpose() * xm;
    for (i, mut row) in spectral.row_iter_mut().enumerate() {
        row *= response[i];
    }
    let filtered = u * spectral;
    Ok(Array2::from_shape_fn((n, x.ncols()), |(i, j)| filtered[(i, j)]))
}

/// Eigenvalues of `L̂` (ascending), for spectrum checks on small graphs.
pub fn scaled_laplacian_spectrum(op: &SparseOperator) -> Result<Vec<f64>> {
    let n = op.num_nodes();
    if n > ORACLE_MAX_NODES {
        return Err(Error::invalid(format!("spectrum limited to {ORACLE_MAX_NODES} nodes")));
    }
    let dense = op.to_dense();
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| -dense[[i, j]]));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn chebyshev_series(weights: &[f64], t: f64) -> f64 {
    let (mut t_prev, mut t_cur) = (1.0, t);
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        let tk = match k {
            0 => 1.0,
            1 => t,
            _ => {
                let next = 2.0 * t * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
                next
            }
        };
        acc += w * tk;
    }
    acc
}

pub fn write_cache(cache: &ChebBasisCache, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_with(path, |w| {
        w.write_all(CHEB_MAGIC)?;
        w.write_all(&(cache.num_nodes as u64).to_le_bytes())?;
        w.write_all(&(cache.dim as u64).to_le_bytes())?;
        w.write_all(&(cache.order as u32).to_le_bytes())?;
        w.write_all(&DTYPE_F32.to_le_bytes())?;
        for block in &cache.blocks {
            for &v in block.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<ChebBasisCache> {
    let path = path.as_ref();
    let mut r = Reader::open(path)?;
    r.magic(CHEB_MAGIC)?;
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    let order = r.u32()? as usize;
    let dtype = r.u32()?;
    if dtype != DTYPE_F32 {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            detail: format!("unsupported dtype code {dtype}"),
        });
    }
    r.require_len(CHEB_HEADER_BYTES + ((order + 1) * n * d * 4) as u64)?;
    let blocks = (0..=order)
        .map(|_| {
            r.f32s(n * d)
                .map(|v| Array2::from_shape_vec((n, d), v).expect("shape from header"))
        })
        .collect::<Result<Vec<_>>>()?;
    ChebBasisCache::from_blocks(blocks)
}
