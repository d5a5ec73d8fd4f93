//! Lexical and dependency-structure features feeding the feature-based
//! reranker: word co-occurrence, subtree matching over parent/sibling/child
//! slices of co-occurring words, and IDF-weighted overlap.

mod embedding;
mod parse;

pub use embedding::EmbeddingTable;
pub use parse::{load_parse_file, ParseTable};

use std::collections::HashMap;

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Head array for one sentence: `heads[i]` is the parent of token `i`,
/// `None` marks the single root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    heads: Vec<Option<usize>>,
}

impl DependencyTree {
    /// Validates: one root, in-bounds heads, no self-loops, no cycles.
    pub fn new(heads: Vec<Option<usize>>) -> Result<Self> {
        let n = heads.len();
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(Error::validation(format!(
                "dependency tree must have exactly one root, found {roots}"
            )));
        }
        for (i, h) in heads.iter().enumerate() {
            if let Some(p) = h {
                if *p >= n {
                    return Err(Error::validation(format!(
                        "head index {p} of token {i} out of bounds (len {n})"
                    )));
                }
                if *p == i {
                    return Err(Error::validation(format!("token {i} is its own head")));
                }
            }
        }
        // Walking up from any node must reach the root in at most n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = heads[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::validation(format!(
                        "cycle in dependency tree through token {start}"
                    )));
                }
            }
        }
        Ok(DependencyTree { heads })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    /// Nodes sharing this node's parent, excluding the node itself. The root
    /// has no siblings.
    pub fn siblings(&self, i: usize) -> Vec<usize> {
        match self.heads[i] {
            None => Vec::new(),
            Some(p) => (0..self.heads.len())
                .filter(|&j| j != i && self.heads[j] == Some(p))
                .collect(),
        }
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.heads.len())
            .filter(|&j| self.heads[j] == Some(i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Form,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sum,
    Avg,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubtreeConfig {
    pub comparator: Comparator,
    pub metric: Metric,
}

/// The parent/sibling/child similarity triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtreeScore {
    pub s_parent: f64,
    pub s_sibling: f64,
    pub s_child: f64,
}

/// A parsed sentence ready for subtree matching.
#[derive(Debug, Clone, Copy)]
pub struct DepSentence<'a> {
    pub tokens: &'a [Token],
    pub tree: &'a DependencyTree,
}

impl<'a> DepSentence<'a> {
    pub fn new(tokens: &'a [Token], tree: &'a DependencyTree) -> Result<Self> {
        if tokens.len() != tree.len() {
            return Err(Error::validation(format!(
                "tree has {} nodes but sentence has {} tokens",
                tree.len(),
                tokens.len()
            )));
        }
        Ok(DepSentence { tokens, tree })
    }
}

/// Co-occurring words between two token lists: one entry per distinct lowered
/// type present on both sides, anchored at the first occurrence on each side,
/// ordered by position in the first list.
pub fn cooccurring(q: &[Token], a: &[Token]) -> Vec<(usize, usize, String)> {
    let mut a_first: HashMap<&str, usize> = HashMap::new();
    for t in a {
        a_first.entry(t.lower.as_str()).or_insert(t.index);
    }
    let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
    let mut out = Vec::new();
    for t in q {
        if seen.contains(t.lower.as_str()) {
            continue;
        }
        if let Some(&aj) = a_first.get(t.lower.as_str()) {
            out.push((t.index, aj, t.lower.clone()));
        }
        seen.insert(t.lower.as_str());
    }
    out
}

fn reduce(metric: Metric, vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    match metric {
        Metric::Sum => vals.iter().sum(),
        Metric::Avg => vals.iter().sum::<f64>() / vals.len() as f64,
        Metric::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn cosine_f64(u: &[f32], v: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (a, b) in u.iter().zip(v.iter()) {
        let (a, b) = (*a as f64, *b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

struct NodeRef<'a> {
    sentence: DepSentence<'a>,
    /// `None` stands for the virtual root above the actual root token.
    index: Option<usize>,
}

fn compare(config: SubtreeConfig, emb: Option<&EmbeddingTable>, x: &NodeRef, y: &NodeRef) -> f64 {
    match (x.index, y.index) {
        // Virtual roots match each other and nothing else.
        (None, None) => 1.0,
        (None, _) | (_, None) => 0.0,
        (Some(i), Some(j)) => {
            let xi = &x.sentence.tokens[i].lower;
            let yj = &y.sentence.tokens[j].lower;
            match config.comparator {
                Comparator::Form => {
                    if xi == yj {
                        1.0
                    } else {
                        0.0
                    }
                }
                Comparator::Embedding => {
                    let table = emb.expect("embedding comparator requires a table");
                    match (table.get(xi), table.get(yj)) {
                        (Some(u), Some(v)) => cosine_f64(u, v),
                        _ => 0.0,
                    }
                }
            }
        }
    }
}

/// Subtree matching over the co-occurring words `T` of a question/answer
/// pair. For each co-occurring word, the parents are compared directly, and
/// all sibling and all child cross-pairs are compared and reduced by the
/// configured metric; the three accumulators form the score triplet.
pub fn subtree_match(
    q: DepSentence<'_>,
    a: DepSentence<'_>,
    t: &[(usize, usize, String)],
    config: SubtreeConfig,
    emb: Option<&EmbeddingTable>,
) -> Result<SubtreeScore> {
    if config.comparator == Comparator::Embedding && emb.is_none() {
        return Err(Error::validation(
            "embedding comparator needs an embedding table",
        ));
    }
    fn node<'a>(s: DepSentence<'a>, i: Option<usize>) -> NodeRef<'a> {
        NodeRef { sentence: s, index: i }
    }
    let mut score = SubtreeScore {
        s_parent: 0.0,
        s_sibling: 0.0,
        s_child: 0.0,
    };
    for &(qi, ai, _) in t {
        if qi >= q.tree.len() || ai >= a.tree.len() {
            return Err(Error::validation(format!(
                "co-occurrence index ({qi}, {ai}) out of tree bounds ({}, {})",
                q.tree.len(),
                a.tree.len()
            )));
        }
        let pq = node(q, q.tree.parent(qi));
        let pa = node(a, a.tree.parent(ai));
        score.s_parent += compare(config, emb, &pq, &pa);

        let mut vals = Vec::new();
        for &sq in &q.tree.siblings(qi) {
            for &sa in &a.tree.siblings(ai) {
                vals.push(compare(config, emb, &node(q, Some(sq)), &node(a, Some(sa))));
            }
        }
        score.s_sibling += reduce(config.metric, &vals);

        vals.clear();
        for &cq in &q.tree.children(qi) {
            for &ca in &a.tree.children(ai) {
                vals.push(compare(config, emb, &node(q, Some(cq)), &node(a, Some(ca))));
            }
        }
        score.s_child += reduce(config.metric, &vals);
    }
    Ok(score)
}

/// Sentence-level document frequencies for IDF weighting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdfTable {
    n_docs: usize,
    df: HashMap<String, u32>,
}

impl IdfTable {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// idf(w) = ln((N + 1) / (df(w) + 1)) + 1; unseen words get df = 0.
    pub fn idf(&self, lower: &str) -> f64 {
        let df = self.df.get(lower).copied().unwrap_or(0) as f64;
        ((self.n_docs as f64 + 1.0) / (df + 1.0)).ln() + 1.0
    }

    pub fn df_entries(&self) -> impl Iterator<Item = (&str, u32)> {
        self.df.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn from_entries(n_docs: usize, entries: impl IntoIterator<Item = (String, u32)>) -> Self {
        IdfTable {
            n_docs,
            df: entries.into_iter().collect(),
        }
    }
}

/// Build an IDF table treating each sentence as a document.
pub fn build_idf<'a, I>(sentences: I) -> Result<IdfTable>
where
    I: IntoIterator<Item = &'a [Token]>,
{
    let mut n_docs = 0usize;
    let mut df: HashMap<String, u32> = HashMap::new();
    for tokens in sentences {
        n_docs += 1;
        let mut seen = std::collections::HashSet::new();
        for t in tokens {
            if seen.insert(t.lower.as_str()) {
                *df.entry(t.lower.clone()).or_insert(0) += 1;
            }
        }
    }
    if n_docs == 0 {
        return Err(Error::validation("cannot build IDF over an empty corpus"));
    }
    Ok(IdfTable { n_docs, df })
}

/// (overlap count, IDF-normalized overlap, question length). The IDF overlap
/// is the shared types' IDF mass divided by the question types' IDF mass.
pub fn lexical_features(q: &[Token], a: &[Token], idf: &IdfTable) -> (f64, f64, f64) {
    let q_types: indexmap::IndexSet<&str> = q.iter().map(|t| t.lower.as_str()).collect();
    let a_types: std::collections::HashSet<&str> = a.iter().map(|t| t.lower.as_str()).collect();
    let mut overlap = 0usize;
    let mut shared_mass = 0.0f64;
    let mut q_mass = 0.0f64;
    for w in &q_types {
        let weight = idf.idf(w);
        q_mass += weight;
        if a_types.contains(w) {
            overlap += 1;
            shared_mass += weight;
        }
    }
    let overlap_idf = if q_mass > 0.0 { shared_mass / q_mass } else { 0.0 };
    (overlap as f64, overlap_idf, q.len() as f64)
}

/// Input row for the feature-based reranker, in fixed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub cnn_score: f64,
    pub overlap_count: f64,
    pub overlap_idf: f64,
    pub q_len: f64,
    pub s_parent: f64,
    pub s_sibling: f64,
    pub s_child: f64,
}

impl FeatureVector {
    pub const ARITY: usize = 7;

    pub fn to_array(self) -> [f64; 7] {
        [
            self.cnn_score,
            self.overlap_count,
            self.overlap_idf,
            self.q_len,
            self.s_parent,
            self.s_sibling,
            self.s_child,
        ]
    }
}
