//! Partial-sum checkpoints.
//!
//! One file per completed block of `2^block_log2` consecutive slices,
//! named `block-<block_log2>-<index>.rqck`. Layout, little-endian:
//!
//! | bytes | content                                                    |
//! |-------|------------------------------------------------------------|
//! | 4     | magic `RQCK`                                               |
//! | 4     | version, `u32` = 1                                         |
//! | 8     | fingerprint of plan and network, `u64`                     |
//! | 4     | `block_log2`, `u32`                                        |
//! | 8     | block index, `u64`                                         |
//! | 16    | multiply-adds spent on the block, `u128`                   |
//! | rest  | partial sum as a tensor dump (see [`crate::tensor::write_tensor`]) |

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::EngineError;
use crate::network::TensorNetwork;
use crate::order::{serialize_plan, ContractionPlan, PlanFile};
use crate::tensor::{read_tensor, write_tensor, Tensor};

const MAGIC: &[u8; 4] = b"RQCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: u64,
    pub block_log2: u32,
    pub block_index: u64,
    pub macs: u128,
    pub partial: Tensor,
}

pub fn write_checkpoint(c: &Checkpoint, mut w: impl Write) -> Result<(), EngineError> {
    let mut head = Vec::with_capacity(44);
    head.extend_from_slice(MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    head.extend_from_slice(&c.fingerprint.to_le_bytes());
    head.extend_from_slice(&c.block_log2.to_le_bytes());
    head.extend_from_slice(&c.block_index.to_le_bytes());
    head.extend_from_slice(&c.macs.to_le_bytes());
    w.write_all(&head)?;
    write_tensor(&c.partial, w)?;
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint, EngineError> {
    let mut head = [0u8; 44];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(EngineError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(EngineError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    Ok(Checkpoint {
        fingerprint: u64::from_le_bytes(head[8..16].try_into().unwrap()),
        block_log2: u32::from_le_bytes(head[16..20].try_into().unwrap()),
        block_index: u64::from_le_bytes(head[20..28].try_into().unwrap()),
        macs: u128::from_le_bytes(head[28..44].try_into().unwrap()),
        partial: read_tensor(r)?,
    })
}

pub(super) fn block_path(dir: &Path, block_log2: u32, index: u64) -> PathBuf {
    dir.join(format!("block-{block_log2}-{index}.rqck"))
}

/// Loads a checkpoint if one exists for this exact run and block.
pub(super) fn load_matching(
    path: &Path,
    fingerprint: u64,
    block_log2: u32,
    index: u64,
) -> Result<Option<Checkpoint>, EngineError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let c = read_checkpoint(&bytes[..])?;
    if c.fingerprint != fingerprint || c.block_log2 != block_log2 || c.block_index != index {
        log::warn!(
            "ignoring checkpoint {} from a different run",
            path.display()
        );
        return Ok(None);
    }
    log::debug!("resumed block {index} from {}", path.display());
    Ok(Some(c))
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub(super) fn store(path: &Path, c: &Checkpoint) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    let mut bytes = Vec::new();
    write_checkpoint(c, &mut bytes)?;
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// FNV-1a over the plan file and every node's labels and data.
pub(super) fn fingerprint(net: &TensorNetwork, plan: &ContractionPlan) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    let text = serialize_plan(&PlanFile {
        max_size_log2: plan.max_size_log2,
        slices: plan.slices.clone(),
        tree: plan.tree.clone(),
    });
    feed(text.as_bytes());
    for (id, t) in net.nodes() {
        feed(&(id as u64).to_le_bytes());
        for l in t.labels() {
            feed(&l.0.to_le_bytes());
        }
        for z in t.to_vec() {
            feed(&z.re.to_le_bytes());
            feed(&z.im.to_le_bytes());
        }
    }
    for l in net.open_labels() {
        feed(&l.0.to_le_bytes());
    }
    h
}
