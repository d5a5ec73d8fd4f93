//! Word-embedding table loaded from a plain-text file: a `V dim` header
//! line, then one `token v1 ... v_dim` line per word.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::validation(format!(
                "embedding vector has length {}, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    /// Out-of-vocabulary tokens resolve to `None`; callers substitute zeros.
    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(&path_str, 1, "empty embedding file"))?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let vocab: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(&path_str, 1, "header must be `V dim`"))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(&path_str, 1, "header must be `V dim`"))?;
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts
                .next()
                .ok_or_else(|| Error::parse(&path_str, line_no, "missing token"))?;
            let values: std::result::Result<Vec<f32>, _> = parts.map(str::parse).collect();
            let values =
                values.map_err(|_| Error::parse(&path_str, line_no, "bad float value"))?;
            table
                .insert(token, values)
                .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        }
        if table.len() != vocab {
            return Err(Error::validation(format!(
                "embedding header declared {vocab} vectors, file has {}",
                table.len()
            )));
        }
        Ok(table)
    }
}
