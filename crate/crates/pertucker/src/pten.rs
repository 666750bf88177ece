//! The "PTEN v1" binary tensor file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes   0x50 0x54 0x45 0x4E  ("PTEN")
//! version u8        1
//! K       u8        number of modes
//! dims    K × u64   mode lengths
//! data    ∏dims × f64   IEEE-754, canonical linearization (mode-1 fastest)
//! ```
//!
//! Readers reject wrong magic or version and truncated payloads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"PTEN";
pub const VERSION: u8 = 1;

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    if t.ndim() > u8::MAX as usize {
        return Err(Error::Format(format!(
            "cannot encode a {}-mode tensor (K must fit in u8)",
            t.ndim()
        )));
    }
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION, t.ndim() as u8])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing PTEN header: {}", e)))?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {:02x?}", magic)));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)
        .map_err(|e| Error::Format(format!("truncated PTEN header: {}", e)))?;
    if head[0] != VERSION {
        return Err(Error::Format(format!(
            "unsupported PTEN version {}",
            head[0]
        )));
    }
    let k = head[1] as usize;
    if k == 0 {
        return Err(Error::Format("PTEN tensor must have at least one mode".into()));
    }
    let mut dims = Vec::with_capacity(k);
    let mut buf8 = [0u8; 8];
    for _ in 0..k {
        r.read_exact(&mut buf8)
            .map_err(|e| Error::Format(format!("truncated PTEN dims: {}", e)))?;
        let d = u64::from_le_bytes(buf8);
        if d > usize::MAX as u64 {
            return Err(Error::Format(format!("dimension {} too large", d)));
        }
        dims.push(d as usize);
    }
    let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let len = len.ok_or_else(|| Error::Format("dimension product overflow".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut buf8)
            .map_err(|e| Error::Format(format!("truncated PTEN payload: {}", e)))?;
        data.push(f64::from_le_bytes(buf8));
    }
    Tensor::new(dims, data)
}

pub fn write_tensor_file<P: AsRef<Path>>(path: P, t: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file<P: AsRef<Path>>(path: P) -> Result<Tensor> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        Error::Format(format!("cannot open {}: {}", path.display(), e))
    })?);
    read_tensor(&mut r)
}
