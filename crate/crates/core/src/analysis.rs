//! Corpus statistics: question/answer word-overlap ratios and per-facet
//! question counts, plus the length buckets used by the breakdown reports.

use indexmap::IndexMap;
use serde::Serialize;

use crate::corpus::{is_punct_token, Dataset, QType, Token, Topic};
use crate::error::{Error, Result};

/// Question-side, answer-side, and harmonic-mean overlap ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapStats {
    pub omega_q: f64,
    pub omega_a: f64,
    pub omega_f: f64,
}

fn type_set(tokens: &[Token]) -> indexmap::IndexSet<&str> {
    tokens
        .iter()
        .filter(|t| !is_punct_token(&t.form))
        .map(|t| t.lower.as_str())
        .collect()
}

/// Overlap ratios over distinct lowered token types, punctuation excluded.
/// omega_f is the harmonic mean of the two sides, computed as
/// 2*O/(|q| + |a|), which equals 2*wq*wa/(wq + wa) and is 0 for disjoint sets.
pub fn overlap(q: &[Token], a: &[Token]) -> Result<OverlapStats> {
    let q_types = type_set(q);
    let a_types = type_set(a);
    if q_types.is_empty() || a_types.is_empty() {
        return Err(Error::validation(
            "overlap requires non-empty token lists on both sides",
        ));
    }
    let shared = q_types.iter().filter(|w| a_types.contains(**w)).count();
    let omega_q = shared as f64 / q_types.len() as f64;
    let omega_a = shared as f64 / a_types.len() as f64;
    let omega_f = if shared == 0 {
        0.0
    } else {
        2.0 * shared as f64 / (q_types.len() + a_types.len()) as f64
    };
    Ok(OverlapStats {
        omega_q,
        omega_a,
        omega_f,
    })
}

/// Question-length buckets (tokens).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QLenBucket {
    #[serde(rename = "<=5")]
    UpTo5,
    #[serde(rename = "6-8")]
    From6To8,
    #[serde(rename = "9-11")]
    From9To11,
    #[serde(rename = ">=12")]
    From12,
}

impl QLenBucket {
    pub const ALL: [QLenBucket; 4] = [
        QLenBucket::UpTo5,
        QLenBucket::From6To8,
        QLenBucket::From9To11,
        QLenBucket::From12,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QLenBucket::UpTo5 => "<=5",
            QLenBucket::From6To8 => "6-8",
            QLenBucket::From9To11 => "9-11",
            QLenBucket::From12 => ">=12",
        }
    }
}

/// Section-length buckets (sentences). The corpus draws sections of 3 to 25
/// sentences; lengths below 3 fall into the first bucket to keep the
/// function total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SLenBucket {
    #[serde(rename = "3-7")]
    From3To7,
    #[serde(rename = "8-12")]
    From8To12,
    #[serde(rename = "13-18")]
    From13To18,
    #[serde(rename = ">=19")]
    From19,
}

impl SLenBucket {
    pub const ALL: [SLenBucket; 4] = [
        SLenBucket::From3To7,
        SLenBucket::From8To12,
        SLenBucket::From13To18,
        SLenBucket::From19,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SLenBucket::From3To7 => "3-7",
            SLenBucket::From8To12 => "8-12",
            SLenBucket::From13To18 => "13-18",
            SLenBucket::From19 => ">=19",
        }
    }
}

pub fn q_len_bucket(question_len: usize) -> QLenBucket {
    match question_len {
        0..=5 => QLenBucket::UpTo5,
        6..=8 => QLenBucket::From6To8,
        9..=11 => QLenBucket::From9To11,
        _ => QLenBucket::From12,
    }
}

pub fn s_len_bucket(section_len: usize) -> SLenBucket {
    match section_len {
        0..=7 => SLenBucket::From3To7,
        8..=12 => SLenBucket::From8To12,
        13..=18 => SLenBucket::From13To18,
        _ => SLenBucket::From19,
    }
}

pub fn length_bucket(question_len: usize, section_len: usize) -> (QLenBucket, SLenBucket) {
    (q_len_bucket(question_len), s_len_bucket(section_len))
}

/// Corpus report: macro-averaged overlap percentages, single/multi-sentence
/// answer counts, answerable fraction, and per-facet question counts.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    /// Macro averages in percent over answerable questions.
    pub omega_q: f64,
    pub omega_a: f64,
    pub omega_f: f64,
    /// Questions answered by a single sentence.
    pub q_s: usize,
    /// Questions answered by multiple sentences.
    pub q_m: usize,
    pub q_total: usize,
    pub answerable: usize,
    pub answerable_fraction: f64,
    pub topics: IndexMap<String, usize>,
    pub qtypes: IndexMap<String, usize>,
}

/// Macro-average overlap between each question and the concatenation of its
/// answer sentences; unanswerable questions count toward the totals but not
/// the averages.
pub fn corpus_report(dataset: &Dataset) -> Result<CorpusReport> {
    let mut sum_q = 0.0;
    let mut sum_a = 0.0;
    let mut sum_f = 0.0;
    let mut answerable = 0usize;
    let mut q_s = 0usize;
    let mut q_m = 0usize;
    let mut topics: IndexMap<String, usize> = Topic::ALL
        .iter()
        .map(|t| (t.label().to_string(), 0))
        .collect();
    let mut qtypes: IndexMap<String, usize> = QType::ALL
        .iter()
        .map(|t| (t.label().to_string(), 0))
        .collect();
    for q in &dataset.questions {
        *topics.entry(q.topic.label().to_string()).or_insert(0) += 1;
        *qtypes.entry(q.qtype.label().to_string()).or_insert(0) += 1;
        let answers = dataset.answer_sentences(&q.id);
        if answers.is_empty() {
            continue;
        }
        answerable += 1;
        if answers.len() == 1 {
            q_s += 1;
        } else {
            q_m += 1;
        }
        let answer_tokens: Vec<Token> = answers
            .iter()
            .flat_map(|s| s.tokens.iter().cloned())
            .collect();
        let stats = overlap(&q.tokens, &answer_tokens)?;
        sum_q += stats.omega_q;
        sum_a += stats.omega_a;
        sum_f += stats.omega_f;
    }
    let n = answerable.max(1) as f64;
    Ok(CorpusReport {
        omega_q: 100.0 * sum_q / n,
        omega_a: 100.0 * sum_a / n,
        omega_f: 100.0 * sum_f / n,
        q_s,
        q_m,
        q_total: dataset.questions.len(),
        answerable,
        answerable_fraction: if dataset.questions.is_empty() {
            0.0
        } else {
            answerable as f64 / dataset.questions.len() as f64
        },
        topics,
        qtypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    #[test]
    fn overlap_worked_example() {
        // q types {a,b,c}, a types {b,c,d,e} -> (2/3, 1/2, 4/7).
        let s = overlap(&tokenize("a b c"), &tokenize("b c d e")).unwrap();
        assert_eq!(s.omega_q, 2.0 / 3.0);
        assert_eq!(s.omega_a, 0.5);
        assert_eq!(s.omega_f, 4.0 / 7.0);
    }

    #[test]
    fn overlap_identical_and_disjoint() {
        let s = overlap(&tokenize("x y z"), &tokenize("z y x")).unwrap();
        assert_eq!((s.omega_q, s.omega_a, s.omega_f), (1.0, 1.0, 1.0));
        let s = overlap(&tokenize("a b"), &tokenize("c d")).unwrap();
        assert_eq!((s.omega_q, s.omega_a, s.omega_f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn overlap_rejects_empty_sides() {
        assert!(overlap(&tokenize(""), &tokenize("a")).is_err());
        // Punctuation-only sides have no countable types.
        assert!(overlap(&tokenize("? !"), &tokenize("a")).is_err());
    }

    #[test]
    fn bucket_examples() {
        assert_eq!(length_bucket(4, 3), (QLenBucket::UpTo5, SLenBucket::From3To7));
        assert_eq!(length_bucket(12, 25), (QLenBucket::From12, SLenBucket::From19));
        assert_eq!(length_bucket(9, 13), (QLenBucket::From9To11, SLenBucket::From13To18));
    }

    proptest! {
        #[test]
        fn harmonic_identity(shared in 0usize..6, q_only in 0usize..6, a_only in 0usize..6) {
            prop_assume!(shared + q_only > 0 && shared + a_only > 0);
            let word = |p: &str, i: usize| format!("{p}{i}");
            let mut q = Vec::new();
            let mut a = Vec::new();
            for i in 0..shared { q.push(word("s", i)); a.push(word("s", i)); }
            for i in 0..q_only { q.push(word("q", i)); }
            for i in 0..a_only { a.push(word("a", i)); }
            let s = overlap(&tokenize(&q.join(" ")), &tokenize(&a.join(" "))).unwrap();
            if s.omega_q + s.omega_a > 0.0 {
                let harmonic = 2.0 * s.omega_q * s.omega_a / (s.omega_q + s.omega_a);
                prop_assert!((s.omega_f - harmonic).abs() < 1e-12);
                let lo = s.omega_q.min(s.omega_a);
                let hi = s.omega_q.max(s.omega_a);
                if lo > 0.0 {
                    prop_assert!(s.omega_f >= lo - 1e-12 && s.omega_f <= hi + 1e-12);
                }
            } else {
                prop_assert_eq!(s.omega_f, 0.0);
            }
        }

        #[test]
        fn overlap_symmetric(qs in "[a-e]{1,8}", as_ in "[a-e]{1,8}") {
            let q: String = qs.chars().map(|c| format!("{c} ")).collect();
            let a: String = as_.chars().map(|c| format!("{c} ")).collect();
            let fwd = overlap(&tokenize(&q), &tokenize(&a)).unwrap();
            let bwd = overlap(&tokenize(&a), &tokenize(&q)).unwrap();
            prop_assert_eq!(fwd.omega_q, bwd.omega_a);
            prop_assert_eq!(fwd.omega_a, bwd.omega_q);
            prop_assert_eq!(fwd.omega_f, bwd.omega_f);
        }

        #[test]
        fn buckets_total(q in 1usize..200, s in 1usize..200) {
            let (qb, sb) = length_bucket(q, s);
            prop_assert!(QLenBucket::ALL.contains(&qb));
            prop_assert!(SLenBucket::ALL.contains(&sb));
        }
    }
}
