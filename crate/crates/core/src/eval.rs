//! Ranking metrics and the per-homophily-quartile report.
//!
//! AUROC credits ties with one half. Average precision and Rec@K rank nodes
//! by descending score and break ties by ascending position (node id), the
//! convention recorded as [`TIE_ORDER`].

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::dataset::{write_with, Label};
use crate::error::{Error, Result};

pub const TIE_ORDER: &str = "score descending, ties by ascending node id";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub rec_at_k: f64,
    pub k_used: usize,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    Ok((pos, labels.len() - pos))
}

/// Node positions ordered by descending score, ties by ascending position.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::EmptyClass("positive"));
    }
    if neg == 0 {
        return Err(Error::EmptyClass("negative"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // Sum of 1-based midranks of positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * group_pos;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Mean over positives of the precision at each positive's rank.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::EmptyClass("positive"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in ranking(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Share of all positives found among the `k` highest-scored nodes; `k`
/// defaults to the number of positives and is capped at the node count.
pub fn rec_at_k(scores: &[f64], labels: &[bool], k: Option<usize>) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::EmptyClass("positive"));
    }
    let k = k.unwrap_or(pos);
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let hits = ranking(scores).iter().take(k).filter(|&&i| labels[i]).count();
    Ok(hits as f64 / pos as f64)
}

pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<EvalReport> {
    let k = labels.iter().filter(|&&y| y).count();
    Ok(EvalReport {
        auroc: auroc(scores, labels)?,
        auprc: average_precision(scores, labels)?,
        rec_at_k: rec_at_k(scores, labels, None)?,
        k_used: k,
    })
}

/// Scores and binary labels of `ids`; every id must be labeled. Pass ids in
/// ascending order so positional tie-breaking follows node ids.
pub fn gather(scores: &[f64], labels: &[Label], ids: &[usize]) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut s = Vec::with_capacity(ids.len());
    let mut y = Vec::with_capacity(ids.len());
    for &i in ids {
        if i >= scores.len() || i >= labels.len() {
            return Err(Error::NodeOutOfRange {
                id: i,
                num_nodes: scores.len().min(labels.len()),
            });
        }
        let t = labels[i].target().ok_or(Error::UnlabeledNode(i))?;
        s.push(scores[i]);
        y.push(t > 0.5);
    }
    Ok((s, y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileMetrics {
    /// 1 = most homophilic anomalies.
    pub quartile: usize,
    pub anomalies: Vec<usize>,
    pub auprc: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileReport {
    pub quartiles: Vec<QuartileMetrics>,
    /// `(Q1 − Qj)` for j = 2, 3, 4 as `(label, auprc gap, auroc gap)`.
    pub gaps: Vec<(String, f64, f64)>,
}

/// Splits test anomalies with defined homophily into four equal-count groups
/// by descending homophily (ties by node id, remainder to earlier groups)
/// and scores each group against all test normals.
pub fn quartile_report(
    scores: &[f64],
    labels: &[Label],
    node_homophily: &[Option<f64>],
    test_ids: &[usize],
) -> Result<QuartileReport> {
    let mut anomalies = Vec::new();
    let mut normals = Vec::new();
    for &i in test_ids {
        if i >= labels.len() || i >= scores.len() || i >= node_homophily.len() {
            return Err(Error::NodeOutOfRange {
                id: i,
                num_nodes: labels.len(),
            });
        }
        match labels[i] {
            Label::Anomaly => {
                if let Some(h) = node_homophily[i] {
                    anomalies.push((i, h));
                }
            }
            Label::Normal => normals.push(i),
            Label::Unknown => return Err(Error::UnlabeledNode(i)),
        }
    }
    if anomalies.len() < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 test anomalies with defined homophily, found {}",
            anomalies.len()
        )));
    }
    if normals.is_empty() {
        return Err(Error::EmptyClass("normal"));
    }
    anomalies.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let base = anomalies.len() / 4;
    let extra = anomalies.len() % 4;
    let mut quartiles = Vec::with_capacity(4);
    let mut at = 0;
    for q in 0..4 {
        let size = base + usize::from(q < extra);
        let group: Vec<usize> = anomalies[at..at + size].iter().map(|a| a.0).collect();
        at += size;
        let mut ids: Vec<usize> = group.iter().chain(&normals).copied().collect();
        ids.sort_unstable();
        let (s, y) = gather(scores, labels, &ids)?;
        quartiles.push(QuartileMetrics {
            quartile: q + 1,
            anomalies: group,
            auprc: average_precision(&s, &y)?,
            auroc: auroc(&s, &y)?,
        });
    }
    let gaps = (1..4)
        .map(|j| {
            (
                format!("Q1-Q{}", j + 1),
                quartiles[0].auprc - quartiles[j].auprc,
                quartiles[0].auroc - quartiles[j].auroc,
            )
        })
        .collect();
    Ok(QuartileReport { quartiles, gaps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub split: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_report_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "split,metric,value")?;
        for r in rows {
            writeln!(w, "{},{},{}", r.split, r.metric, r.value)?;
        }
        Ok(())
    })
}

pub fn write_quartiles_csv(report: &QuartileReport, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "quartile,auprc,auroc")?;
        for q in &report.quartiles {
            writeln!(w, "Q{},{},{}", q.quartile, q.auprc, q.auroc)?;
        }
        for (label, ap, roc) in &report.gaps {
            writeln!(w, "{label},{ap},{roc}")?;
        }
        Ok(())
    })
}
