//! JSON-lines ingestion for section and question files.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    classify_qtype, tokenize, Candidate, Dataset, Question, Section, SectionStore, Sentence, Task,
};

/// Corpus-level counts reported after loading sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusCounts {
    pub articles: usize,
    pub sections: usize,
    pub sentences: usize,
    pub tokens: usize,
}

#[derive(Deserialize)]
struct SectionLine {
    article_id: String,
    section_id: String,
    topic: super::Topic,
    title: String,
    sentences: Vec<String>,
}

#[derive(Deserialize)]
struct CandidateLine {
    section_id: String,
    sent_index: usize,
    label: u8,
}

#[derive(Deserialize)]
struct QuestionLine {
    id: String,
    text: String,
    topic: super::Topic,
    origin: super::Origin,
    split: super::Split,
    candidates: Vec<CandidateLine>,
}

/// Lines written by this toolkit's own artifact emitters carry a leading
/// `{"_config": ...}` metadata object; readers skip it.
fn is_metadata_line(line: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key("_config")))
        .unwrap_or(false)
}

fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || is_metadata_line(&line) {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

/// Load a section file (one JSON object per line) into a store, tokenizing
/// every sentence. Returns the store and the counts of Table-style lexical
/// statistics (articles, sections, sentences, tokens).
pub fn load_sections(path: impl AsRef<Path>) -> Result<(SectionStore, CorpusCounts)> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut store = SectionStore::new();
    let mut articles = std::collections::HashSet::new();
    let mut sentences = 0usize;
    let mut tokens = 0usize;
    for (line_no, line) in data_lines(path)? {
        let parsed: SectionLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        articles.insert(parsed.article_id.clone());
        let section_sentences: Vec<Sentence> = parsed
            .sentences
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let toks = tokenize(raw);
                tokens += toks.len();
                Sentence {
                    section_id: parsed.section_id.clone(),
                    sent_index: i,
                    raw: raw.clone(),
                    tokens: toks,
                    tree: None,
                }
            })
            .collect();
        sentences += section_sentences.len();
        store
            .insert(Section {
                article_id: parsed.article_id,
                section_id: parsed.section_id,
                topic: parsed.topic,
                title: parsed.title,
                sentences: section_sentences,
            })
            .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
    }
    let counts = CorpusCounts {
        articles: articles.len(),
        sections: store.len(),
        sentences,
        tokens,
    };
    Ok((store, counts))
}

/// Load a question file against an already-loaded section store. For
/// `Task::Ass` every question must have at least one answer-labeled candidate.
pub fn load_dataset(
    path: impl AsRef<Path>,
    sections: Arc<SectionStore>,
    task: Task,
) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut questions = Vec::new();
    let mut candidates: IndexMap<String, Vec<Candidate>> = IndexMap::new();
    for (line_no, line) in data_lines(path)? {
        let parsed: QuestionLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let tokens = tokenize(&parsed.text);
        let qtype = classify_qtype(&tokens);
        let cands: Vec<Candidate> = parsed
            .candidates
            .into_iter()
            .map(|c| Candidate {
                question_id: parsed.id.clone(),
                section_id: c.section_id,
                sent_index: c.sent_index,
                answer: c.label != 0,
            })
            .collect();
        candidates.insert(parsed.id.clone(), cands);
        questions.push(Question {
            id: parsed.id,
            text: parsed.text,
            tokens,
            topic: parsed.topic,
            origin: parsed.origin,
            qtype,
            split: parsed.split,
        });
    }
    Dataset::new(task, questions, candidates, sections)
}

/// Serialize a dataset back to the question-file line format.
pub fn dataset_to_lines(dataset: &Dataset) -> Vec<String> {
    dataset
        .questions
        .iter()
        .map(|q| {
            let cands: Vec<serde_json::Value> = dataset
                .candidates(&q.id)
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "section_id": c.section_id,
                        "sent_index": c.sent_index,
                        "label": if c.answer { 1 } else { 0 },
                    })
                })
                .collect();
            serde_json::json!({
                "id": q.id,
                "text": q.text,
                "topic": q.topic,
                "origin": q.origin,
                "split": q.split,
                "candidates": cands,
            })
            .to_string()
        })
        .collect()
}
