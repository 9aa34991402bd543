//! Model checkpoints.
//!
//! Binary layout (little-endian): magic `TUDM`, `u32` version, `u32` input
//! size, `u32` hidden size, `u32` block count, then per block a `u32` name
//! length, the UTF-8 name, a `u32` value count and the values as `f32`.
//! The configs travel in a JSON sidecar next to the binary file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{Dims, ModelConfig, TudModel, BLOCK_NAMES};
use super::train::TrainConfig;
use super::FeatureConfig;
use crate::scoring::Denominator;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TUDM";

/// Everything needed to rebuild inputs for a stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub dims: Dims,
    pub model: ModelConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub denominator: Denominator,
    pub detector: String,
    pub encoder: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TudModel,
    pub meta: CheckpointMeta,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::Validation(format!("{v} does not fit in a u32 field")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_model(mut w: impl Write, model: &TudModel) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, CHECKPOINT_VERSION as usize)?;
    put_u32(&mut w, model.dims().input)?;
    put_u32(&mut w, model.dims().hidden)?;
    let blocks = model.blocks();
    put_u32(&mut w, blocks.len())?;
    for (name, values) in blocks {
        put_u32(&mut w, name.len())?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, values.len())?;
        for &v in values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the binary part; returns dimensions and the flat parameters.
pub fn read_model(mut r: impl Read) -> Result<(Dims, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Validation(
            "not a model checkpoint (bad magic)".into(),
        ));
    }
    let version = get_u32(&mut r)?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Validation(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let dims = Dims {
        input: get_u32(&mut r)?,
        hidden: get_u32(&mut r)?,
    };
    let n_blocks = get_u32(&mut r)?;
    if n_blocks != BLOCK_NAMES.len() {
        return Err(Error::Validation(format!(
            "expected {} blocks, found {n_blocks}",
            BLOCK_NAMES.len()
        )));
    }
    let mut params = Vec::with_capacity(dims.param_count());
    for ((expected, (rows, cols, _)), _) in
        BLOCK_NAMES.iter().zip(dims.block_shapes()).zip(0..n_blocks)
    {
        let name_len = get_u32(&mut r)?;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        if name != expected.as_bytes() {
            return Err(Error::Validation(format!(
                "block {:?} found where {expected} was expected",
                String::from_utf8_lossy(&name)
            )));
        }
        let len = get_u32(&mut r)?;
        if len != rows * cols {
            return Err(Error::Validation(format!(
                "block {expected} has {len} values, expected {}",
                rows * cols
            )));
        }
        let mut buf = vec![0u8; 4 * len];
        r.read_exact(&mut buf)?;
        params.extend(
            buf.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64),
        );
    }
    Ok((dims, params))
}

pub fn save_checkpoint(path: &Path, model: &TudModel, meta: &CheckpointMeta) -> Result<()> {
    if meta.dims != model.dims() {
        return Err(Error::Validation(
            "checkpoint metadata does not match the model".into(),
        ));
    }
    write_model(BufWriter::new(File::create(path)?), model)?;
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut side, meta)?;
    side.write_all(b"\n")?;
    side.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (dims, params) = read_model(BufReader::new(File::open(path)?))?;
    let meta: CheckpointMeta =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    if meta.dims != dims {
        return Err(Error::Validation(
            "checkpoint sidecar disagrees with the binary header".into(),
        ));
    }
    let model = TudModel::from_params(dims, meta.model, params)?;
    Ok(Checkpoint { model, meta })
}
