//! Binary serialization of model weights.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "NDTW" | u32 format | u64 model version
//! u32 x7 dims (flow, link, iterations, embed hidden, readout h1, readout h2, attn)
//! u32 tensor count | (u32 rows, u32 cols) per tensor
//! f64 parameters, tensors in canonical order, row-major
//! f64 x14 normalization stats (flow mean, flow std, link mean, link std)
//! ```
//!
//! The payload is written and read with `to_le_bytes`/`from_le_bytes`, so a
//! round trip reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use super::{ModelDims, ModelWeights, ParamSet, TENSOR_COUNT};
use crate::features::ZScoreStats;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"NDTW";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightsIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a weights file: bad magic")]
    BadMagic,
    #[error("unsupported weights format version {0}")]
    UnsupportedFormat(u32),
    #[error("weights file truncated")]
    Truncated,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("header dimensions or tensor table are invalid")]
    BadHeader,
    #[error(
        "tensor {index} has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}"
    )]
    ShapeMismatch {
        index: usize,
        got_rows: u32,
        got_cols: u32,
        want_rows: u32,
        want_cols: u32,
    },
}

pub fn weights_to_bytes(w: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&w.version.to_le_bytes());
    for d in [
        w.dims.flow_dim,
        w.dims.link_dim,
        w.dims.iterations,
        w.dims.embed_hidden,
        w.dims.readout_hidden1,
        w.dims.readout_hidden2,
        w.dims.attn_dim,
    ] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let tensors = w.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    }
    for t in &tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in w
        .stats
        .flow_mean
        .iter()
        .chain(&w.stats.flow_std)
        .chain(&w.stats.link_mean)
        .chain(&w.stats.link_std)
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsIoError> {
        if self.pos + n > self.buf.len() {
            return Err(WeightsIoError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightsIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WeightsIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WeightsIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn weights_from_bytes(buf: &[u8]) -> Result<ModelWeights, WeightsIoError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(WeightsIoError::BadMagic);
    }
    let fmt = r.u32()?;
    if fmt != FORMAT_VERSION {
        return Err(WeightsIoError::UnsupportedFormat(fmt));
    }
    let version = r.u64()?;
    let dims = ModelDims {
        flow_dim: r.u32()? as usize,
        link_dim: r.u32()? as usize,
        iterations: r.u32()? as usize,
        embed_hidden: r.u32()? as usize,
        readout_hidden1: r.u32()? as usize,
        readout_hidden2: r.u32()? as usize,
        attn_dim: r.u32()? as usize,
    };
    dims.validate().map_err(|_| WeightsIoError::BadHeader)?;
    let count = r.u32()? as usize;
    if count != TENSOR_COUNT {
        return Err(WeightsIoError::BadHeader);
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        shapes.push((r.u32()?, r.u32()?));
    }
    let mut params = ParamSet::zeros(&dims);
    for (index, t) in params.tensors().into_iter().enumerate() {
        let (got_rows, got_cols) = shapes[index];
        if (got_rows as usize, got_cols as usize) != (t.rows(), t.cols()) {
            return Err(WeightsIoError::ShapeMismatch {
                index,
                got_rows,
                got_cols,
                want_rows: t.rows() as u32,
                want_cols: t.cols() as u32,
            });
        }
    }
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = r.f64()?;
        }
    }
    let mut stats = ZScoreStats::identity();
    for i in 0..5 {
        stats.flow_mean[i] = r.f64()?;
    }
    for i in 0..5 {
        stats.flow_std[i] = r.f64()?;
    }
    for i in 0..2 {
        stats.link_mean[i] = r.f64()?;
    }
    for i in 0..2 {
        stats.link_std[i] = r.f64()?;
    }
    if r.remaining() > 0 {
        return Err(WeightsIoError::TrailingBytes(r.remaining()));
    }
    Ok(ModelWeights { version, dims, stats, params })
}

pub fn save_weights(path: impl AsRef<Path>, w: &ModelWeights) -> Result<(), WeightsIoError> {
    fs::write(path, weights_to_bytes(w))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights, WeightsIoError> {
    weights_from_bytes(&fs::read(path)?)
}
