//! Flat binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CPKT1"  u32 entry_count
//! entry*:  u32 name_len  name_bytes  u32 ndim  u32 dim*  f32 value*
//! ```

use std::io::{Read, Write};

use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"CPKT1";

pub fn write_checkpoint<T: Real, W: Write>(store: &ParamStore<T>, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for p in store.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(p.value.len() * 4);
        for x in p.value.data() {
            buf.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads every entry of a checkpoint.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut magic = [0u8; 5];
    if r.read_exact(&mut magic).is_err() || &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "missing magic string {:?}",
            std::str::from_utf8(CHECKPOINT_MAGIC).unwrap()
        )));
    }
    let count = read_u32(&mut r, "entry count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r, "name length")? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|_| Error::Checkpoint("truncated name".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r, "rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut r, "dimension")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint(format!("truncated values for {name}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

/// Overwrites the values in `store` from checkpoint entries. Every stored
/// parameter must be present with a matching shape.
pub fn restore_checkpoint<T: Real, R: Read>(store: &mut ParamStore<T>, r: R) -> Result<()> {
    let entries = read_checkpoint(r)?;
    if entries.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "{} entries for a model with {} parameters",
            entries.len(),
            store.len()
        )));
    }
    for (name, t) in entries {
        let id = store
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected entry {name}")))?;
        if store.get(id).shape() != t.shape() {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {:?}, model expects {:?}",
                t.shape(),
                store.get(id).shape()
            )));
        }
        *store.get_mut(id) = t.cast();
    }
    Ok(())
}
