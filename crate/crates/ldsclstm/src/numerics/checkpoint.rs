//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   : 9 bytes, b"LDSCLSTM1"
//! count   : u32, number of parameter records
//! record  : u32 name_len | name (UTF-8) | u32 rows | u32 cols
//!           | rows*cols f64 values, row-major, little-endian
//! meta_len: u32
//! meta    : meta_len bytes of UTF-8 JSON (vocabulary, inventory, dims)
//! ```
//!
//! Values are stored as f64 regardless of the in-memory scalar type.
//! Optimizer state is not persisted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::numerics::matrix::Matrix;

pub const MAGIC: &[u8; 9] = b"LDSCLSTM1";

pub fn write_checkpoint<T: Real>(
    path: &Path,
    params: &[(&str, &Matrix<T>)],
    meta_json: &str,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, m) in params {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(m.rows() as u32).to_le_bytes())?;
        w.write_all(&(m.cols() as u32).to_le_bytes())?;
        for v in m.data() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    let meta = meta_json.as_bytes();
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta)?;
    w.flush()?;
    Ok(())
}

pub struct CheckpointData<T> {
    pub params: Vec<(String, Matrix<T>)>,
    pub meta_json: String,
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<CheckpointData<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 9];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse { line: 0, reason: "bad checkpoint magic".into() });
    }
    let count = read_u32(&mut r)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|e| Error::Parse { line: 0, reason: format!("bad parameter name: {e}") })?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(T::of(f64::from_le_bytes(buf)));
        }
        params.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    let meta_len = read_u32(&mut r)? as usize;
    let mut meta_buf = vec![0u8; meta_len];
    r.read_exact(&mut meta_buf)?;
    let meta_json = String::from_utf8(meta_buf)
        .map_err(|e| Error::Parse { line: 0, reason: format!("bad metadata: {e}") })?;
    Ok(CheckpointData { params, meta_json })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
