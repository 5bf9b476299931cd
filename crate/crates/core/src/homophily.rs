//! Edge, node and class homophily.

use serde::Serialize;

use crate::dataset::{GraphDataset, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomophilyReport {
    pub edge_homophily: f64,
    /// `None` marks nodes whose homophily is undefined (no labeled neighbors).
    pub node_homophily: Vec<Option<f64>>,
    pub class_homophily_abnormal: f64,
    pub class_homophily_normal: f64,
}

/// Fraction of undirected edges whose endpoints share a label. Each edge is
/// counted once. A graph without edges has homophily 0 by convention.
pub fn edge_homophily(dataset: &GraphDataset) -> Result<f64> {
    let mut same = 0usize;
    let mut total = 0usize;
    for (u, v) in dataset.adjacency.edges() {
        let (lu, lv) = (dataset.labels[u], dataset.labels[v]);
        if !lu.is_known() {
            return Err(Error::UnlabeledNode(u));
        }
        if !lv.is_known() {
            return Err(Error::UnlabeledNode(v));
        }
        total += 1;
        if lu == lv {
            same += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { same as f64 / total as f64 })
}

/// Per-node fraction of labeled neighbors sharing the node's label.
///
/// Isolated nodes, unlabeled nodes and nodes whose neighbors are all
/// unlabeled get `None`.
pub fn node_homophily(dataset: &GraphDataset) -> Vec<Option<f64>> {
    (0..dataset.num_nodes())
        .map(|i| {
            let li = dataset.labels[i];
            if !li.is_known() {
                return None;
            }
            let mut same = 0usize;
            let mut total = 0usize;
            for &j in dataset.adjacency.neighbors(i) {
                let lj = dataset.labels[j];
                if lj.is_known() {
                    total += 1;
                    same += usize::from(lj == li);
                }
            }
            (total > 0).then(|| same as f64 / total as f64)
        })
        .collect()
}

/// Mean of the defined node homophily values over anomalies and normals.
/// Returns `(h_abnormal, h_normal)`.
pub fn class_homophily(dataset: &GraphDataset, node: &[Option<f64>]) -> Result<(f64, f64)> {
    let mean_over = |class: Label, name: &'static str| -> Result<f64> {
        let vals: Vec<f64> = node
            .iter()
            .zip(&dataset.labels)
            .filter(|(_, &l)| l == class)
            .filter_map(|(h, _)| *h)
            .collect();
        if vals.is_empty() {
            return Err(Error::EmptyClass(name));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok((
        mean_over(Label::Anomaly, "anomaly")?,
        mean_over(Label::Normal, "normal")?,
    ))
}

pub fn homophily_report(dataset: &GraphDataset) -> Result<HomophilyReport> {
    let edge = edge_homophily(dataset)?;
    let node = node_homophily(dataset);
    let (ha, hn) = class_homophily(dataset, &node)?;
    Ok(HomophilyReport {
        edge_homophily: edge,
        node_homophily: node,
        class_homophily_abnormal: ha,
        class_homophily_normal: hn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseAdjacency;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn dataset(n: usize, edges: &[(usize, usize)], labels: &[u8]) -> GraphDataset {
        let adj = SparseAdjacency::from_edges(n, edges.iter().copied()).unwrap();
        let labels = labels
            .iter()
            .map(|&l| if l == 1 { Label::Anomaly } else { Label::Normal })
            .collect();
        GraphDataset::new("t", adj, Array2::zeros((n, 1)), labels, vec![]).unwrap()
    }

    #[test]
    fn triangle_same_label() {
        let ds = dataset(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        assert_eq!(edge_homophily(&ds).unwrap(), 1.0);
        assert_eq!(node_homophily(&ds), vec![Some(1.0); 3]);
    }

    #[test]
    fn single_cross_edge() {
        let ds = dataset(2, &[(0, 1)], &[0, 1]);
        assert_eq!(edge_homophily(&ds).unwrap(), 0.0);
    }

    #[test]
    fn path_fixture() {
        let ds = dataset(3, &[(0, 1), (1, 2)], &[1, 1, 0]);
        assert_eq!(edge_homophily(&ds).unwrap(), 0.5);
        let node = node_homophily(&ds);
        assert_eq!(node, vec![Some(1.0), Some(0.5), Some(0.0)]);
        let (ha, hn) = class_homophily(&ds, &node).unwrap();
        assert_eq!(ha, 0.75);
        assert_eq!(hn, 0.0);
    }

    #[test]
    fn isolated_node_undefined() {
        let ds = dataset(3, &[(0, 1)], &[0, 0, 1]);
        assert_eq!(node_homophily(&ds)[2], None);
        // The only anomaly is isolated, so its class has no defined value.
        let node = node_homophily(&ds);
        assert!(matches!(class_homophily(&ds, &node), Err(Error::EmptyClass("anomaly"))));
    }

    #[test]
    fn single_class_errors() {
        let ds = dataset(3, &[(0, 1), (1, 2)], &[0, 0, 0]);
        let node = node_homophily(&ds);
        assert!(class_homophily(&ds, &node).is_err());
    }

    #[test]
    fn unlabeled_endpoint_errors() {
        let adj = SparseAdjacency::from_edges(2, [(0, 1)]).unwrap();
        let ds = GraphDataset::new(
            "t",
            adj,
            Array2::zeros((2, 1)),
            vec![Label::Normal, Label::Unknown],
            vec![],
        )
        .unwrap();
        assert!(matches!(edge_homophily(&ds), Err(Error::UnlabeledNode(1))));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            n in 2usize..30,
            raw_edges in proptest::collection::vec((0usize..30, 0usize..30), 0..80),
            raw_labels in proptest::collection::vec(0u8..2, 30),
        ) {
            let edges: Vec<_> = raw_edges.into_iter().map(|(u, v)| (u % n, v % n)).collect();
            let ds = dataset(n, &edges, &raw_labels[..n]);

            // Brute force over a dense adjacency matrix.
            let mut dense = vec![vec![false; n]; n];
            for &(u, v) in &edges {
                if u != v { dense[u][v] = true; dense[v][u] = true; }
            }
            let (mut same, mut total) = (0, 0);
            for u in 0..n { for v in u + 1..n { if dense[u][v] {
                total += 1; if raw_labels[u] == raw_labels[v] { same += 1; }
            }}}
            let h = edge_homophily(&ds).unwrap();
            let expected = if total == 0 { 0.0 } else { same as f64 / total as f64 };
            prop_assert!((h - expected).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&h));

            let node = node_homophily(&ds);
            let mut sums = [(0.0, 0usize); 2];
            for u in 0..n {
                let deg = (0..n).filter(|&v| dense[u][v]).count();
                let s = (0..n).filter(|&v| dense[u][v] && raw_labels[v] == raw_labels[u]).count();
                if deg == 0 {
                    prop_assert_eq!(node[u], None);
                } else {
                    let hu = s as f64 / deg as f64;
                    prop_assert!((node[u].unwrap() - hu).abs() < 1e-15);
                    let c = raw_labels[u] as usize;
                    sums[c].0 += hu;
                    sums[c].1 += 1;
                }
            }
            match class_homophily(&ds, &node) {
                Ok((ha, hn)) => {
                    prop_assert!((ha - sums[1].0 / sums[1].1 as f64).abs() < 1e-12);
                    prop_assert!((hn - sums[0].0 / sums[0].1 as f64).abs() < 1e-12);
                }
                Err(_) => prop_assert!(sums[0].1 == 0 || sums[1].1 == 0),
            }
        }
    }
}
