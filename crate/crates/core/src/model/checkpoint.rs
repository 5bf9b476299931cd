//! Model checkpoint files.
//!
//! Layout: magic `SGCKPT01`, u64 LE header length, UTF-8 JSON header, then
//! the flat parameter vector as little-endian f64.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelState};
use crate::dataset::write_with;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SGCKPT01";

const LAYOUT: &str = "payload: num_params little-endian f64 values in this order: \
filter.raw[K+1] (softplus gives gamma; shared by both filters unless share_gamma is false), \
filter.raw_high[K+1] (only when share_gamma is false), \
fusion layers then classifier layers, each layer as weight[in][out] row-major followed by bias[out]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: ModelConfig,
    pub dim: usize,
    pub seed: u64,
    pub fusion_shapes: Vec<(usize, usize)>,
    pub classifier_shapes: Vec<(usize, usize)>,
    pub num_params: usize,
    pub layout: String,
}

pub fn write_checkpoint(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let header = CheckpointHeader {
        format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into(),
        config: state.config,
        dim: state.dim,
        seed: state.config.seed,
        fusion_shapes: state.fusion.shapes(),
        classifier_shapes: state.classifier.shapes(),
        num_params: state.num_params(),
        layout: LAYOUT.into(),
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        context: "checkpoint header".into(),
        source,
    })?;
    write_with(path.as_ref(), |w| {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in state.parameters() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected: expected as u64,
        found: bytes.len() as u64,
    };
    if bytes.len() < 16 {
        return Err(truncated(16));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(if bytes[..6] == CHECKPOINT_MAGIC[..6] {
            Error::VersionMismatch {
                path: path.to_path_buf(),
                detail: format!("found {:?}", String::from_utf8_lossy(&bytes[..8])),
            }
        } else {
            Error::BadMagic {
                path: path.to_path_buf(),
                expected: String::from_utf8_lossy(CHECKPOINT_MAGIC).into(),
            }
        });
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = 16usize.checked_add(hlen).ok_or_else(|| truncated(usize::MAX))?;
    if bytes.len() < body {
        return Err(truncated(body));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..body]).map_err(|source| Error::Json {
        context: format!("checkpoint header in {}", path.display()),
        source,
    })?;
    let mut state = ModelState::zeros(header.config, header.dim)?;
    if state.num_params() != header.num_params
        || state.fusion.shapes() != header.fusion_shapes
        || state.classifier.shapes() != header.classifier_shapes
    {
        return Err(Error::Dimension(format!(
            "checkpoint {} declares shapes inconsistent with its config",
            path.display()
        )));
    }
    let expected = body + 8 * header.num_params;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(Error::Dimension(format!(
            "{} has {} trailing bytes",
            path.display(),
            bytes.len() - expected
        )));
    }
    let params: Vec<f64> = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    state.set_parameters(&params)?;
    Ok(state)
}
