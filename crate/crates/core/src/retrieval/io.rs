//! On-disk index container.
//!
//! Layout (all integers little-endian u32, strings length-prefixed UTF-8):
//!
//! ```text
//! magic "SELIDX01"
//! meta_len, meta (JSON)
//! n_docs, then per doc: section_id, token_len
//! n_terms, then per term: term, n_postings, (doc_ordinal, tf)*
//! ```
//!
//! Terms are written in sorted order so identical indexes produce identical
//! bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{DocEntry, InvertedIndex};

pub const INDEX_MAGIC: &[u8; 8] = b"SELIDX01";

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::Container {
        path: path.to_string(),
        msg: e.to_string(),
    })?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read, path: &str) -> Result<String> {
    let len = read_u32(r, path)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| Error::Container {
        path: path.to_string(),
        msg: e.to_string(),
    })?;
    String::from_utf8(buf).map_err(|_| Error::Container {
        path: path.to_string(),
        msg: "non-UTF-8 string".to_string(),
    })
}

pub fn save_index(index: &InvertedIndex, meta: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(INDEX_MAGIC)?;
    write_str(&mut w, meta)?;
    let docs = index.docs();
    write_u32(&mut w, docs.len() as u32)?;
    for d in docs {
        write_str(&mut w, &d.section_id)?;
        write_u32(&mut w, d.len)?;
    }
    let postings = index.postings_sorted();
    write_u32(&mut w, postings.len() as u32)?;
    for (term, list) in postings {
        write_str(&mut w, term)?;
        write_u32(&mut w, list.len() as u32)?;
        for &(ord, tf) in list {
            write_u32(&mut w, ord)?;
            write_u32(&mut w, tf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns the index and its embedded metadata string.
pub fn load_index(path: impl AsRef<Path>) -> Result<(InvertedIndex, String)> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Container {
        path: path_str.clone(),
        msg: e.to_string(),
    })?;
    if &magic != INDEX_MAGIC {
        return Err(Error::Container {
            path: path_str,
            msg: format!(
                "unsupported index format {:?} (expected {:?})",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(INDEX_MAGIC)
            ),
        });
    }
    let meta = read_str(&mut r, &path_str)?;
    let n_docs = read_u32(&mut r, &path_str)? as usize;
    let mut docs = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let section_id = read_str(&mut r, &path_str)?;
        let len = read_u32(&mut r, &path_str)?;
        docs.push(DocEntry { section_id, len });
    }
    let n_terms = read_u32(&mut r, &path_str)? as usize;
    let mut postings = HashMap::with_capacity(n_terms);
    for _ in 0..n_terms {
        let term = read_str(&mut r, &path_str)?;
        let n = read_u32(&mut r, &path_str)? as usize;
        let mut list = Vec::with_capacity(n);
        for _ in 0..n {
            let ord = read_u32(&mut r, &path_str)?;
            let tf = read_u32(&mut r, &path_str)?;
            if ord as usize >= n_docs {
                return Err(Error::Container {
                    path: path_str,
                    msg: format!("posting ordinal {ord} out of range"),
                });
            }
            list.push((ord, tf));
        }
        postings.insert(term, list);
    }
    let index = InvertedIndex::from_parts(docs, postings)?;
    Ok((index, meta))
}
