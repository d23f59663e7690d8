//! Binary parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   "RSRKCKPT"
//! version      u32       1
//! dim          u32
//! head_count   u32
//! block_count  u32
//! tensors      f64 * n   canonical ModelParams order:
//!                          per block: w_query w_key w_value w_out ln_scale ln_shift
//!                          then mlp_w1 mlp_b1 mlp_w2 mlp_b2 alpha
//! has_optim    u8        0 or 1
//!   step       u64       } present when has_optim = 1:
//!   first      f64 * n   } moments in the same tensor order
//!   second     f64 * n   }
//! seed         u64
//! meta_len     u32
//! meta         meta_len bytes of JSON (training configuration snapshot, or null)
//! ```
//!
//! Matrices are row-major. Anything short of or beyond this layout is rejected.

use std::fs;
use std::path::Path;

use resrank_core::params::BlockParams;
use resrank_core::training::OptimizerState;
use resrank_core::{CandidateList, Matrix, ModelParams, TrainConfig};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSRKCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optimizer: Option<OptimizerState>,
    pub seed: u64,
    pub config: Option<TrainConfig>,
}

fn push_tensors(buf: &mut Vec<u8>, p: &ModelParams) {
    for (_, t) in p.tensors() {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [p.dim, p.head_count, p.block_count()] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    push_tensors(&mut buf, p);
    match &ckpt.optimizer {
        Some(state) => {
            buf.push(1);
            buf.extend_from_slice(&state.step.to_le_bytes());
            push_tensors(&mut buf, &state.first);
            push_tensors(&mut buf, &state.second);
        }
        None => buf.push(0),
    }
    buf.extend_from_slice(&ckpt.seed.to_le_bytes());
    let meta = serde_json::to_vec(&ckpt.config).expect("config serializes");
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {} (wanted {n} more)", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("tensor size overflow")?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn params(&mut self, dim: usize, heads: usize, blocks: usize) -> std::result::Result<ModelParams, String> {
        let sq = |r: &mut Self| r.f64s(dim * dim).map(|v| Matrix::from_vec(dim, dim, v));
        let mut bl = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            bl.push(BlockParams {
                w_query: sq(self)?,
                w_key: sq(self)?,
                w_value: sq(self)?,
                w_out: sq(self)?,
                ln_scale: self.f64s(dim)?,
                ln_shift: self.f64s(dim)?,
            });
        }
        Ok(ModelParams {
            dim,
            head_count: heads,
            blocks: bl,
            mlp_w1: sq(self)?,
            mlp_b1: self.f64s(dim)?,
            mlp_w2: self.f64s(dim)?,
            mlp_b2: self.f64s(1)?[0],
            alpha: self.f64s(1)?[0],
        })
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let parse = |message: String| Error::Malformed { path: path.to_path_buf(), message };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(parse)? != MAGIC {
        return Err(parse("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32().map_err(parse)?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { path: path.to_path_buf(), found: version });
    }
    let dim = r.u32().map_err(parse)? as usize;
    let heads = r.u32().map_err(parse)? as usize;
    let blocks = r.u32().map_err(parse)? as usize;
    if dim == 0 || heads == 0 || blocks == 0 || !dim.is_multiple_of(heads) || dim > 1 << 16 || blocks > 1 << 10 {
        return Err(Error::Shape(format!("bad header: dim {dim}, heads {heads}, blocks {blocks}")));
    }
    let params = r.params(dim, heads, blocks).map_err(parse)?;
    let optimizer = match r.u8().map_err(parse)? {
        0 => None,
        1 => {
            let step = r.u64().map_err(parse)?;
            let first = r.params(dim, heads, blocks).map_err(parse)?;
            let second = r.params(dim, heads, blocks).map_err(parse)?;
            Some(OptimizerState { first, second, step })
        }
        other => return Err(parse(format!("bad optimizer flag {other}"))),
    };
    let seed = r.u64().map_err(parse)?;
    let meta_len = r.u32().map_err(parse)? as usize;
    let meta = r.take(meta_len).map_err(parse)?;
    let config: Option<TrainConfig> = serde_json::from_slice(meta).map_err(|e| parse(format!("metadata: {e}")))?;
    if r.pos != bytes.len() {
        return Err(parse(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    params.validate()?;
    Ok(Checkpoint {
        params,
        optimizer,
        seed,
        config,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(ckpt)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    decode(&bytes, path)
}

/// Every list must have the checkpoint's embedding dimension.
pub fn check_dataset_dim(params: &ModelParams, lists: &[CandidateList]) -> Result<()> {
    match lists.iter().find(|l| l.dim != params.dim) {
        Some(l) => Err(Error::Shape(format!(
            "list {:?} has dimension {}, checkpoint expects {}",
            l.group_id, l.dim, params.dim
        ))),
        None => Ok(()),
    }
}
