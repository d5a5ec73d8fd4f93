//! Reader for pre-parsed dependency trees.
//!
//! The file is a sequence of blank-line-terminated blocks:
//!
//! ```text
//! # <key> <sent_index>
//! <token_index>\t<form>\t<head_index>
//! ...
//! ```
//!
//! `head_index` of -1 marks the root. For section sentences the key is the
//! section id; question trees use the question id with sent_index 0.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

use super::DependencyTree;

/// Trees keyed by (key, sent_index), with the forms the parser saw.
pub type ParseTable = HashMap<(String, usize), (Vec<String>, DependencyTree)>;

pub fn load_parse_file(path: impl AsRef<Path>) -> Result<ParseTable> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = File::open(path)?;
    let mut table = ParseTable::new();

    let mut header: Option<(String, usize, usize)> = None; // key, sent_index, header line
    let mut forms: Vec<String> = Vec::new();
    let mut heads: Vec<Option<usize>> = Vec::new();

    let mut flush = |header: &mut Option<(String, usize, usize)>,
                     forms: &mut Vec<String>,
                     heads: &mut Vec<Option<usize>>|
     -> Result<()> {
        if let Some((key, sent_index, line_no)) = header.take() {
            let tree = DependencyTree::new(std::mem::take(heads))
                .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
            if table.insert((key.clone(), sent_index), (std::mem::take(forms), tree)).is_some() {
                return Err(Error::parse(
                    &path_str,
                    line_no,
                    format!("duplicate parse block for ({key}, {sent_index})"),
                ));
            }
        }
        Ok(())
    };

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            flush(&mut header, &mut forms, &mut heads)?;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            flush(&mut header, &mut forms, &mut heads)?;
            let mut parts = rest.split_whitespace();
            let key = parts
                .next()
                .ok_or_else(|| Error::parse(&path_str, line_no, "missing key in header"))?;
            let sent_index: usize = parts
                .next()
                .ok_or_else(|| Error::parse(&path_str, line_no, "missing sent_index in header"))?
                .parse()
                .map_err(|_| Error::parse(&path_str, line_no, "sent_index is not an integer"))?;
            header = Some((key.to_string(), sent_index, line_no));
            continue;
        }
        if header.is_none() {
            return Err(Error::parse(&path_str, line_no, "token line outside a block"));
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                &path_str,
                line_no,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(&path_str, line_no, "bad token index"))?;
        if index != heads.len() {
            return Err(Error::parse(
                &path_str,
                line_no,
                format!("token index {index} out of order (expected {})", heads.len()),
            ));
        }
        let head: i64 = cols[2]
            .parse()
            .map_err(|_| Error::parse(&path_str, line_no, "bad head index"))?;
        forms.push(cols[1].to_string());
        heads.push(if head < 0 { None } else { Some(head as usize) });
    }
    flush(&mut header, &mut forms, &mut heads)?;
    Ok(table)
}
