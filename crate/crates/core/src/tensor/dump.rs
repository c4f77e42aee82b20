//! Binary tensor dump.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes        | content                               |
//! |--------------|---------------------------------------|
//! | 4            | magic `RQCT`                          |
//! | 4            | format version, `u32` = 1             |
//! | 4            | rank `r`, `u32`                       |
//! | 4 * r        | labels, `u32` each, index order       |
//! | 8 * 2^r      | entries as `(re: f32, im: f32)` pairs |

use std::io::{Read, Write};

use num_complex::Complex32;

use super::{Label, Tensor, TensorError, MAX_RANK};

const MAGIC: &[u8; 4] = b"RQCT";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> TensorError {
    TensorError::Dump(e.to_string())
}

pub fn write_tensor(t: &Tensor, mut w: impl Write) -> Result<(), TensorError> {
    let mut bytes = Vec::with_capacity(12 + 4 * t.rank() + 8 * t.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for l in t.labels() {
        bytes.extend_from_slice(&l.0.to_le_bytes());
    }
    for z in t.to_vec() {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&bytes).map_err(io_err)
}

fn read_u32(r: &mut impl Read) -> Result<u32, TensorError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_tensor(mut r: impl Read) -> Result<Tensor, TensorError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(TensorError::Dump("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TensorError::Dump(format!("unsupported version {version}")));
    }
    let rank = read_u32(&mut r)? as usize;
    if rank > MAX_RANK {
        return Err(TensorError::Dump(format!("rank {rank} too large")));
    }
    let labels = (0..rank)
        .map(|_| read_u32(&mut r).map(Label))
        .collect::<Result<Vec<_>, _>>()?;
    let mut raw = vec![0u8; 8 << rank];
    r.read_exact(&mut raw).map_err(io_err)?;
    let data = raw
        .chunks_exact(8)
        .map(|b| {
            Complex32::new(
                f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                f32::from_le_bytes([b[4], b[5], b[6], b[7]]),
            )
        })
        .collect();
    Tensor::new(labels, data)
}
