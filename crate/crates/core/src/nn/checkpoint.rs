//! Flat binary parameter checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic    8 bytes  "SIMTCKPT"
//! version  u32      currently 1
//! count    u32      number of tensors
//! shapes   count x (rank: u32, dims: rank x u32)
//! data     concatenated tensor values, f32 little-endian, in shape-table order
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::{Parameterized, Real};

pub const MAGIC: &[u8; 8] = b"SIMTCKPT";
pub const VERSION: u32 = 1;

pub fn to_bytes<T: Real, P: Parameterized<T> + ?Sized>(model: &mut P) -> Vec<u8> {
    let mut shapes: Vec<Vec<usize>> = Vec::new();
    let mut values: Vec<f32> = Vec::new();
    model.visit_params(&mut |s| {
        shapes.push(s.shape.to_vec());
        values.extend(s.value.iter().map(|v| v.as_f64() as f32));
    });
    let mut out = Vec::with_capacity(16 + values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for shape in &shapes {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Loads values into `model`, which must have exactly the stored shapes.
pub fn from_bytes<T: Real, P: Parameterized<T> + ?Sized>(model: &mut P, bytes: &[u8]) -> Result<()> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut stored = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        stored.push(dims);
    }
    let mut expected = Vec::new();
    model.visit_params(&mut |s| expected.push(s.shape.to_vec()));
    if stored != expected {
        return Err(Error::Checkpoint(format!(
            "shape table mismatch: file has {} tensors, model expects {}",
            stored.len(),
            expected.len()
        )));
    }
    let total: usize = stored.iter().map(|s| s.iter().product::<usize>()).sum();
    let data = r.take(total * 4)?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
    }
    let mut values = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    model.visit_params(&mut |s| {
        for v in s.value.iter_mut() {
            *v = T::of(values.next().expect("length checked") as f64);
        }
    });
    Ok(())
}

pub fn save<T: Real, P: Parameterized<T> + ?Sized>(model: &mut P, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real, P: Parameterized<T> + ?Sized>(model: &mut P, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(model, &bytes)
}
