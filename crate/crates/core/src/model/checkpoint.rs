//! Binary parameter snapshots.
//!
//! Layout (little endian): magic `GATRCKP1`, `u32` version, `u32` length and
//! UTF-8 JSON config block, `u32` array count, then per array: `u32` name
//! length, name bytes, `u32` rank, `u64` dims, `f64` values.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::autodiff::{Param, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GATRCKP1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// JSON describing the model that owns the parameters.
    pub config: String,
    pub params: ParamStore<f64>,
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_string<R: Read>(r: &mut R, limit: usize) -> Result<String, CheckpointError> {
    let len = get_u32(r)? as usize;
    if len > limit {
        return Err(CheckpointError::Corrupt(format!("string of {len} bytes")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u32(w, ckpt.config.len() as u32)?;
    w.write_all(ckpt.config.as_bytes())?;
    put_u32(w, ckpt.params.len() as u32)?;
    for p in &ckpt.params.params {
        put_u32(w, p.name.len() as u32)?;
        w.write_all(p.name.as_bytes())?;
        put_u32(w, p.shape.len() as u32)?;
        for &d in &p.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &p.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let config = get_string(r, 1 << 20)?;
    let n = get_u32(r)?;
    let mut params = ParamStore::new();
    for _ in 0..n {
        let name = get_string(r, 4096)?;
        let rank = get_u32(r)? as usize;
        if rank > 8 {
            return Err(CheckpointError::Corrupt(format!("rank {rank} for `{name}`")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(get_u64(r)? as usize);
        }
        let count: usize = shape.iter().product();
        if count > 1 << 28 {
            return Err(CheckpointError::Corrupt(format!("{count} values for `{name}`")));
        }
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        params.params.push(Param { name, shape, data });
    }
    Ok(Checkpoint { config, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_bad_magic() {
        let mut params = ParamStore::new();
        params.push("a.w", &[2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-300, f64::MAX]);
        params.push("b", &[], vec![7.0]);
        let ckpt = Checkpoint {
            config: "{\"kind\":\"test\"}".into(),
            params,
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), ckpt);
        buf[0] = b'X';
        assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(CheckpointError::BadMagic)));
    }
}
