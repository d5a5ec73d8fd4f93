//! Model checkpoint container.
//!
//! Layout: magic "SELQAMDL", u32 format version, length-prefixed UTF-8
//! metadata (JSON), u32 array count, then per array a length-prefixed name,
//! u32 rank, u32 dims, and the little-endian f32 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::array::Array;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SELQAMDL";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn container_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Container {
        path: path.to_string(),
        msg: msg.into(),
    }
}

fn read_u32(r: &mut impl Read, path: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| container_err(path, e.to_string()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read, path: &str) -> Result<String> {
    let len = read_u32(r, path)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| container_err(path, e.to_string()))?;
    String::from_utf8(buf).map_err(|_| container_err(path, "non-UTF-8 string"))
}

pub fn write_checkpoint(
    path: impl AsRef<Path>,
    meta: &str,
    arrays: &[(String, &Array<f32>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, CHECKPOINT_VERSION)?;
    write_str(&mut w, meta)?;
    write_u32(&mut w, arrays.len() as u32)?;
    for (name, array) in arrays {
        write_str(&mut w, name)?;
        write_u32(&mut w, array.rank() as u32)?;
        for &d in array.shape() {
            write_u32(&mut w, d as u32)?;
        }
        for &v in array.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(String, Vec<(String, Array<f32>)>)> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| container_err(&path_str, e.to_string()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(container_err(
            &path_str,
            format!("bad magic {:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let version = read_u32(&mut r, &path_str)?;
    if version != CHECKPOINT_VERSION {
        return Err(container_err(
            &path_str,
            format!("unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"),
        ));
    }
    let meta = read_str(&mut r, &path_str)?;
    let n_arrays = read_u32(&mut r, &path_str)? as usize;
    let mut arrays = Vec::with_capacity(n_arrays);
    for _ in 0..n_arrays {
        let name = read_str(&mut r, &path_str)?;
        let rank = read_u32(&mut r, &path_str)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, &path_str)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf).map_err(|e| container_err(&path_str, e.to_string()))?;
            data.push(f32::from_le_bytes(buf));
        }
        arrays.push((name, Array::from_vec(&shape, data)?));
    }
    Ok((meta, arrays))
}
