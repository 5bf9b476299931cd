//! Attributed graph datasets and the on-disk directory format.
//!
//! A dataset directory holds:
//!
//! * `meta.json`: `{"name": str, "num_nodes": int, "num_features": int}`
//! * `edges.tsv`: one `u<TAB>v` pair per line, 0-indexed, direction ignored
//! * `features.bin` (`SGFEAT01`, u64 n, u64 d, n·d f32 row-major, little
//!   endian) or the fallback `features.csv` (no header, d columns)
//! * `labels.csv`: `node_id,label` lines with label in {0, 1}
//! * `splits.json`: `[{"train": [...], "val": [...], "test": [...]}, ...]`

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;

pub const FEATURE_MAGIC: &[u8; 8] = b"SGFEAT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomaly,
    Unknown,
}

impl Label {
    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }

    /// 1.0 for anomalies, 0.0 for normals.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Normal => Some(0.0),
            Label::Anomaly => Some(1.0),
            Label::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSet {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    name: String,
    num_nodes: usize,
    num_features: usize,
}

#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub adjacency: SparseAdjacency,
    pub features: Array2<f64>,
    pub labels: Vec<Label>,
    pub splits: Vec<SplitSet>,
}

impl GraphDataset {
    /// Assembles and validates a dataset.
    pub fn new(
        name: impl Into<String>,
        adjacency: SparseAdjacency,
        features: Array2<f64>,
        labels: Vec<Label>,
        splits: Vec<SplitSet>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            adjacency,
            features,
            labels,
            splits,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.features.nrows() != n {
            return Err(Error::FeatureRowMismatch {
                rows: self.features.nrows(),
                num_nodes: n,
            });
        }
        if self.labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for {} nodes",
                self.labels.len(),
                n
            )));
        }
        for split in &self.splits {
            let mut seen = HashSet::new();
            for (part, ids) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
                for &id in ids {
                    if id >= n {
                        return Err(Error::NodeOutOfRange { id, num_nodes: n });
                    }
                    if !seen.insert(id) {
                        return Err(Error::invalid(format!(
                            "node {id} appears twice across split parts (in {part})"
                        )));
                    }
                    if part != "test" && !self.labels[id].is_known() {
                        return Err(Error::UnlabeledNode(id));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label_targets(&self, ids: &[usize]) -> Result<Vec<f64>> {
        ids.iter()
            .map(|&i| self.labels[i].target().ok_or(Error::UnlabeledNode(i)))
            .collect()
    }
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let meta: Meta = read_json(&dir.join("meta.json"))?;
    let n = meta.num_nodes;

    let edges = read_edges(&dir.join("edges.tsv"))?;
    let adjacency = SparseAdjacency::from_edges(n, edges)?;

    let bin = dir.join("features.bin");
    let csv = dir.join("features.csv");
    let features = if bin.exists() {
        read_features_bin(&bin)?
    } else if csv.exists() {
        read_features_csv(&csv)?
    } else {
        return Err(Error::MissingFile(bin));
    };
    if features.nrows() != n {
        return Err(Error::FeatureRowMismatch {
            rows: features.nrows(),
            num_nodes: n,
        });
    }
    if features.ncols() != meta.num_features {
        return Err(Error::Dimension(format!(
            "meta.json declares {} features, file has {}",
            meta.num_features,
            features.ncols()
        )));
    }

    let labels = read_labels(&dir.join("labels.csv"), n)?;
    let splits: Vec<SplitSet> = read_json(&dir.join("splits.json"))?;
    GraphDataset::new(meta.name, adjacency, features, labels, splits)
}

/// Writes `dataset` in the directory format read by [`load_dataset`].
/// Features are stored as f32.
pub fn write_dataset(dataset: &GraphDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        name: dataset.name.clone(),
        num_nodes: dataset.num_nodes(),
        num_features: dataset.num_features(),
    };
    write_json(&dir.join("meta.json"), &meta)?;

    let path = dir.join("edges.tsv");
    write_with(&path, |w| {
        for (u, v) in dataset.adjacency.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;

    write_features_bin(&dir.join("features.bin"), &dataset.features)?;

    let path = dir.join("labels.csv");
    write_with(&path, |w| {
        for (i, label) in dataset.labels.iter().enumerate() {
            match label {
                Label::Normal => writeln!(w, "{i},0")?,
                Label::Anomaly => writeln!(w, "{i},1")?,
                Label::Unknown => {}
            }
        }
        Ok(())
    })?;
    write_json(&dir.join("splits.json"), &dataset.splits)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

pub(crate) fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| Error::io(path, e))?;
    let file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(path, e))
}

fn parse_id(tok: &str, file: &str, line: usize) -> Result<usize> {
    tok.trim().parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        msg: format!("expected a node id, got {tok:?}"),
    })
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let reader = BufReader::new(open(path)?);
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let (Some(u), Some(v)) = (toks.next(), toks.next()) else {
            return Err(Error::Parse {
                file: "edges.tsv".into(),
                line: lineno + 1,
                msg: "expected two node ids".into(),
            });
        };
        edges.push((
            parse_id(u, "edges.tsv", lineno + 1)?,
            parse_id(v, "edges.tsv", lineno + 1)?,
        ));
    }
    Ok(edges)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<Label>> {
    let reader = BufReader::new(open(path)?);
    let mut labels = vec![Label::Unknown; n];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((id, value)) = line.split_once(',') else {
            return Err(Error::Parse {
                file: "labels.csv".into(),
                line: lineno + 1,
                msg: "expected node_id,label".into(),
            });
        };
        let id = parse_id(id, "labels.csv", lineno + 1)?;
        if id >= n {
            return Err(Error::NodeOutOfRange { id, num_nodes: n });
        }
        labels[id] = match value.trim() {
            "0" => Label::Normal,
            "1" => Label::Anomaly,
            other => {
                return Err(Error::NonBinaryLabel {
                    node: id,
                    value: other.to_string(),
                })
            }
        };
    }
    Ok(labels)
}

pub fn read_features_bin(path: &Path) -> Result<Array2<f64>> {
    let mut reader = BufReader::new(open(path)?);
    let mut header = [0u8; 24];
    let found = path.metadata().map(|m| m.len()).unwrap_or(0);
    reader.read_exact(&mut header).map_err(|_| Error::Truncated {
        path: path.to_path_buf(),
        expected: 24,
        found,
    })?;
    if &header[..8] != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: String::from_utf8_lossy(FEATURE_MAGIC).into(),
        });
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let expected = 24 + (n * d * 4) as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    let mut payload = vec![0u8; n * d * 4];
    reader.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("shape checked"))
}

pub fn write_features_bin(path: &Path, features: &Array2<f64>) -> Result<()> {
    write_with(path, |w| {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&(features.nrows() as u64).to_le_bytes())?;
        w.write_all(&(features.ncols() as u64).to_le_bytes())?;
        for &v in features.iter() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    })
}

fn read_features_csv(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(open(path)?);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                file: "features.csv".into(),
                line: lineno + 1,
                msg: format!("not a number: {tok:?}"),
            })?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    file: "features.csv".into(),
                    line: lineno + 1,
                    msg: format!("expected {c} columns, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols.unwrap_or(0)), values).expect("rows are uniform"))
}
