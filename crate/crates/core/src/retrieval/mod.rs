//! Inverted-index retrieval over sections: BM25 scoring, top-k search,
//! suspicious-question flagging, and answer-triggering dataset generation.

mod io;

pub use io::{load_index, save_index};

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::corpus::{Candidate, Dataset, SectionStore, Task, Token};
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct DocEntry {
    pub section_id: String,
    pub len: u32,
}

/// Term -> postings map over sections, with the document statistics BM25
/// needs. Immutable once built; queries are pure functions of it.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    docs: Vec<DocEntry>,
    doc_ords: HashMap<String, u32>,
    /// Postings sorted by doc ordinal.
    postings: HashMap<String, Vec<(u32, u32)>>,
    avgdl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub question_id: String,
    /// (section_id, score), descending score, ties by ascending section_id.
    pub hits: Vec<(String, f64)>,
}

impl InvertedIndex {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self, section_id: &str) -> Option<u32> {
        self.doc_ords.get(section_id).map(|&o| self.docs[o as usize].len)
    }

    pub fn contains(&self, section_id: &str) -> bool {
        self.doc_ords.contains_key(section_id)
    }

    fn tf(&self, term: &str, ord: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| list.binary_search_by_key(&ord, |&(o, _)| o).ok().map(|i| list[i].1))
            .unwrap_or(0)
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map(Vec::len).unwrap_or(0) as f64;
        let n = self.docs.len() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_score(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        if tf == 0 {
            return 0.0;
        }
        let tf = tf as f64;
        let norm = 1.0 - BM25_B + BM25_B * doc_len as f64 / self.avgdl;
        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
    }

    pub(crate) fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub(crate) fn postings_sorted(&self) -> Vec<(&str, &[(u32, u32)])> {
        let mut terms: Vec<&str> = self.postings.keys().map(String::as_str).collect();
        terms.sort_unstable();
        terms
            .into_iter()
            .map(|t| (t, self.postings[t].as_slice()))
            .collect()
    }

    pub(crate) fn from_parts(
        docs: Vec<DocEntry>,
        postings: HashMap<String, Vec<(u32, u32)>>,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::validation("index has no documents"));
        }
        let total: u64 = docs.iter().map(|d| d.len as u64).sum();
        let avgdl = total as f64 / docs.len() as f64;
        let mut doc_ords = HashMap::new();
        for (i, d) in docs.iter().enumerate() {
            if doc_ords.insert(d.section_id.clone(), i as u32).is_some() {
                return Err(Error::validation(format!(
                    "duplicate section id {:?} in index",
                    d.section_id
                )));
            }
        }
        Ok(InvertedIndex {
            docs,
            doc_ords,
            postings,
            avgdl,
        })
    }
}

/// Index every lowered token of every sentence; each section is one document.
pub fn build_index(sections: &SectionStore) -> Result<InvertedIndex> {
    if sections.is_empty() {
        return Err(Error::validation("cannot index an empty section store"));
    }
    let mut docs = Vec::with_capacity(sections.len());
    let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
    for (ord, section) in sections.iter().enumerate() {
        let ord = ord as u32;
        let mut counts: IndexMap<&str, u32> = IndexMap::new();
        let mut len = 0u32;
        for sentence in &section.sentences {
            for tok in &sentence.tokens {
                *counts.entry(tok.lower.as_str()).or_insert(0) += 1;
                len += 1;
            }
        }
        for (term, tf) in counts {
            postings.entry(term.to_string()).or_default().push((ord, tf));
        }
        docs.push(DocEntry {
            section_id: section.section_id.clone(),
            len,
        });
    }
    InvertedIndex::from_parts(docs, postings)
}

/// BM25 score of one section for a query, summed over the query tokens in
/// the order given (k1 = 1.2, b = 0.75, idf = ln((N - df + 0.5)/(df + 0.5) + 1)).
pub fn score(index: &InvertedIndex, query: &[Token], section_id: &str) -> Result<f64> {
    let ord = *index
        .doc_ords
        .get(section_id)
        .ok_or_else(|| Error::validation(format!("section {section_id:?} is not indexed")))?;
    let doc_len = index.docs[ord as usize].len;
    let mut total = 0.0;
    for tok in query {
        let idf = index.idf(&tok.lower);
        total += index.term_score(idf, index.tf(&tok.lower, ord), doc_len);
    }
    Ok(total)
}

/// Top-k sections by BM25 score. Zero-scoring sections are excluded and ties
/// break by ascending section id.
pub fn search(index: &InvertedIndex, query: &[Token], k: usize) -> Vec<(String, f64)> {
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for tok in query {
        if let Some(list) = index.postings.get(&tok.lower) {
            let idf = index.idf(&tok.lower);
            for &(ord, tf) in list {
                let doc_len = index.docs[ord as usize].len;
                *acc.entry(ord).or_insert(0.0) += index.term_score(idf, tf, doc_len);
            }
        }
    }
    let mut hits: Vec<(String, f64)> = acc
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(ord, s)| (index.docs[ord as usize].section_id.clone(), s))
        .collect();
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    hits.truncate(k);
    hits
}

pub fn search_question(
    index: &InvertedIndex,
    question_id: &str,
    query: &[Token],
    k: usize,
) -> RetrievalResult {
    RetrievalResult {
        question_id: question_id.to_string(),
        hits: search(index, query, k),
    }
}

/// Question ids whose answer-bearing sections all fall outside the top-k
/// hits for the question text.
pub fn flag_suspicious(dataset: &Dataset, index: &InvertedIndex, k: usize) -> Result<Vec<String>> {
    let mut flagged = Vec::new();
    for q in &dataset.questions {
        let answer_sections: HashSet<&str> = dataset
            .candidates(&q.id)
            .iter()
            .filter(|c| c.answer)
            .map(|c| c.section_id.as_str())
            .collect();
        for s in &answer_sections {
            if !index.contains(s) {
                return Err(Error::validation(format!(
                    "answer section {s:?} of question {:?} is not indexed",
                    q.id
                )));
            }
        }
        let hits = search(index, &q.tokens, k);
        let found = hits.iter().any(|(id, _)| answer_sections.contains(id.as_str()));
        if !found {
            flagged.push(q.id.clone());
        }
    }
    Ok(flagged)
}

/// Build an answer-triggering dataset: for each question, the candidates are
/// every sentence of its top-k sections, labeled as answers only where the
/// source dataset marks that exact sentence as an answer for that question.
/// Questions are kept even when no answer survives retrieval.
pub fn generate_triggering(
    dataset: &Dataset,
    index: &InvertedIndex,
    sections: Arc<SectionStore>,
    k: usize,
) -> Result<Dataset> {
    let mut candidates: IndexMap<String, Vec<Candidate>> = IndexMap::new();
    for q in &dataset.questions {
        let answers: HashSet<(&str, usize)> = dataset
            .candidates(&q.id)
            .iter()
            .filter(|c| c.answer)
            .map(|c| (c.section_id.as_str(), c.sent_index))
            .collect();
        let mut cands = Vec::new();
        for (section_id, _) in search(index, &q.tokens, k) {
            let section = sections.get(&section_id).ok_or_else(|| {
                Error::validation(format!("indexed section {section_id:?} missing from store"))
            })?;
            for sentence in &section.sentences {
                cands.push(Candidate {
                    question_id: q.id.clone(),
                    section_id: section_id.clone(),
                    sent_index: sentence.sent_index,
                    answer: answers.contains(&(section_id.as_str(), sentence.sent_index)),
                });
            }
        }
        candidates.insert(q.id.clone(), cands);
    }
    Dataset::new(Task::At, dataset.questions.clone(), candidates, sections)
}
