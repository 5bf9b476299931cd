//! Sparse symmetric adjacency in CSR form and the normalized propagation
//! operator built from it.

use ndarray::{ArrayView2, ArrayViewMut2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Undirected simple graph stored as a symmetric CSR matrix.
///
/// Every undirected edge appears twice (once per endpoint row). Rows are
/// sorted, duplicate-free and never contain the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    /// Builds the adjacency from an unordered edge list. Direction is ignored,
    /// duplicates collapse to a single unit-weight edge and self-loops are
    /// dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &pairs {
            row_offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices: Vec<usize> = pairs.iter().map(|&(_, v)| v).collect();
        let values = vec![1.0; col_indices.len()];
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges (half the stored entries).
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[node]..self.row_offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_offsets[node + 1] - self.row_offsets[node]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }
}

/// Real-valued CSR operator sharing the sparsity pattern of an adjacency
/// (optionally plus the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        match self.col_indices[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `out = scale * (self · x)`. Rows of `out` are written in parallel.
    pub fn spmm_into(&self, x: ArrayView2<'_, f64>, scale: f64, mut out: ArrayViewMut2<'_, f64>) {
        assert_eq!(x.nrows(), self.num_nodes);
        assert_eq!(out.dim(), x.dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out_row)| {
                out_row.fill(0.0);
                for (j, a) in self.row(i) {
                    out_row.scaled_add(scale * a, &x.row(j));
                }
            });
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut dense = ndarray::Array2::zeros((self.num_nodes, self.num_nodes));
        for i in 0..self.num_nodes {
            for (j, a) in self.row(i) {
                dense[[i, j]] = a;
            }
        }
        dense
    }
}

/// `D^{-1/2} A D^{-1/2}`. Isolated nodes get all-zero rows and columns.
pub fn normalized_adjacency(adj: &SparseAdjacency) -> SparseOperator {
    build_normalized(adj, false)
}

/// Normalized adjacency of `A + I`, for configurations that reinsert unit
/// self-loops before propagation.
pub fn normalized_adjacency_with_self_loops(adj: &SparseAdjacency) -> SparseOperator {
    build_normalized(adj, true)
}

fn build_normalized(adj: &SparseAdjacency, self_loops: bool) -> SparseOperator {
    let n = adj.num_nodes();
    let extra = if self_loops { 1.0 } else { 0.0 };
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let row = adj.row_offsets[i]..adj.row_offsets[i + 1];
            let deg: f64 = adj.values[row].iter().sum::<f64>() + extra;
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(adj.col_indices.len() + if self_loops { n } else { 0 });
    let mut values = Vec::with_capacity(col_indices.capacity());
    row_offsets.push(0);
    for i in 0..n {
        let mut diag_pending = self_loops;
        for k in adj.row_offsets[i]..adj.row_offsets[i + 1] {
            let j = adj.col_indices[k];
            if diag_pending && j > i {
                col_indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                diag_pending = false;
            }
            col_indices.push(j);
            // Product order is fixed by (min, max) so both mirrored entries
            // round identically.
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            values.push(adj.values[k] * inv_sqrt[lo] * inv_sqrt[hi]);
        }
        if diag_pending {
            col_indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        row_offsets.push(col_indices.len());
    }
    SparseOperator {
        num_nodes: n,
        row_offsets,
        col_indices,
        values,
    }
}
