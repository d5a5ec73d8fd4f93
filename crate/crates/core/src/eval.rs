//! Ranking and triggering metrics: average precision, MAP/MRR,
//! question-level precision/recall/F1 with threshold sweeping, accuracy on
//! the answerable subset, and per-facet breakdowns.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use crate::analysis::{q_len_bucket, s_len_bucket};
use crate::corpus::{Dataset, Origin, QType, Split, Topic};
use crate::error::{Error, Result};
use crate::models::RunEntry;

/// One scored candidate with its gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub section_id: String,
    pub sent_index: usize,
    pub score: f64,
    pub positive: bool,
}

/// Facet metadata carried along for breakdowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionMeta {
    pub topic: Option<Topic>,
    pub qtype: Option<QType>,
    pub origin: Option<Origin>,
    pub q_len: Option<usize>,
    /// Sentence count of the first answer-bearing section, when any.
    pub s_len: Option<usize>,
}

impl QuestionMeta {
    pub fn none() -> Self {
        QuestionMeta {
            topic: None,
            qtype: None,
            origin: None,
            q_len: None,
            s_len: None,
        }
    }
}

/// One question's candidates, sorted by descending score with ties broken
/// by ascending (section_id, sent_index).
#[derive(Debug, Clone)]
pub struct ScoredQuestion {
    pub question_id: String,
    pub meta: QuestionMeta,
    pub candidates: Vec<ScoredCandidate>,
}

impl ScoredQuestion {
    pub fn new(
        question_id: impl Into<String>,
        meta: QuestionMeta,
        mut candidates: Vec<ScoredCandidate>,
    ) -> Result<Self> {
        if let Some(bad) = candidates.iter().find(|c| !c.score.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite score for candidate ({}, {})",
                bad.section_id, bad.sent_index
            )));
        }
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| (&a.section_id, a.sent_index).cmp(&(&b.section_id, b.sent_index)))
        });
        Ok(ScoredQuestion {
            question_id: question_id.into(),
            meta,
            candidates,
        })
    }

    pub fn answerable(&self) -> bool {
        self.candidates.iter().any(|c| c.positive)
    }

    pub fn top(&self) -> Option<&ScoredCandidate> {
        self.candidates.first()
    }
}

/// A run where every question has at least one gold positive.
#[derive(Debug, Clone)]
pub struct RankRun {
    pub questions: Vec<ScoredQuestion>,
}

impl RankRun {
    pub fn new(questions: Vec<ScoredQuestion>) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::validation("rank run has no questions"));
        }
        if let Some(q) = questions.iter().find(|q| !q.answerable()) {
            return Err(Error::validation(format!(
                "question {} has no gold positive; rank metrics are undefined",
                q.question_id
            )));
        }
        Ok(RankRun { questions })
    }
}

/// A run that may contain unanswerable questions.
#[derive(Debug, Clone)]
pub struct TriggerRun {
    pub questions: Vec<ScoredQuestion>,
}

impl TriggerRun {
    pub fn new(questions: Vec<ScoredQuestion>) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::validation("trigger run has no questions"));
        }
        Ok(TriggerRun { questions })
    }
}

/// Mean over gold positives of the precision at that candidate's rank.
pub fn average_precision(question: &ScoredQuestion) -> Result<f64> {
    let mut positives = 0usize;
    let mut sum = 0.0f64;
    for (i, c) in question.candidates.iter().enumerate() {
        if c.positive {
            positives += 1;
            sum += positives as f64 / (i + 1) as f64;
        }
    }
    if positives == 0 {
        return Err(Error::validation(format!(
            "average precision undefined for question {} with no positive",
            question.question_id
        )));
    }
    Ok(sum / positives as f64)
}

pub fn reciprocal_rank(question: &ScoredQuestion) -> f64 {
    question
        .candidates
        .iter()
        .position(|c| c.positive)
        .map(|i| 1.0 / (i + 1) as f64)
        .unwrap_or(0.0)
}

pub fn map_mrr(run: &RankRun) -> Result<(f64, f64)> {
    let n = run.questions.len() as f64;
    let mut map = 0.0;
    let mut mrr = 0.0;
    for q in &run.questions {
        map += average_precision(q)?;
        mrr += reciprocal_rank(q);
    }
    Ok((map / n, mrr / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fired: usize,
    pub correct: usize,
    pub answerable: usize,
}

/// Question-level triggering metric: a prediction fires when the top
/// candidate strictly exceeds the threshold and is correct when that
/// candidate is gold-positive. Precision is over fired questions, recall
/// over answerable questions, both 0 at empty denominators.
pub fn trigger_f1(run: &TriggerRun, threshold: f64) -> PrF1 {
    let mut fired = 0usize;
    let mut correct = 0usize;
    let mut answerable = 0usize;
    for q in &run.questions {
        if q.answerable() {
            answerable += 1;
        }
        if let Some(top) = q.top() {
            if top.score > threshold {
                fired += 1;
                if top.positive {
                    correct += 1;
                }
            }
        }
    }
    let precision = if fired > 0 {
        correct as f64 / fired as f64
    } else {
        0.0
    };
    let recall = if answerable > 0 {
        correct as f64 / answerable as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    PrF1 {
        precision,
        recall,
        f1,
        fired,
        correct,
        answerable,
    }
}

/// Best F1 threshold on a development run: every distinct top-candidate
/// score (and negative infinity) is a candidate; the lowest maximizer wins.
/// When no threshold achieves positive F1 the positive-infinity sentinel
/// (never fire) is returned.
pub fn threshold_sweep(run: &TriggerRun) -> f64 {
    let mut candidates: Vec<f64> = run
        .questions
        .iter()
        .filter_map(|q| q.top().map(|c| c.score))
        .collect();
    candidates.push(f64::NEG_INFINITY);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    let mut best_f1 = 0.0f64;
    let mut best_threshold = f64::INFINITY;
    for &t in &candidates {
        let f1 = trigger_f1(run, t).f1;
        if f1 > best_f1 {
            best_f1 = f1;
            best_threshold = t;
        }
    }
    best_threshold
}

/// Fraction of answerable questions whose top-ranked candidate is gold
/// positive; no threshold involved.
pub fn accuracy_answerable(run: &TriggerRun) -> Result<f64> {
    let mut answerable = 0usize;
    let mut correct = 0usize;
    for q in &run.questions {
        if !q.answerable() {
            continue;
        }
        answerable += 1;
        if q.top().map(|c| c.positive).unwrap_or(false) {
            correct += 1;
        }
    }
    if answerable == 0 {
        return Err(Error::validation(
            "accuracy over the answerable subset requires at least one answerable question",
        ));
    }
    Ok(correct as f64 / answerable as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Topic,
    Qtype,
    Origin,
    QLength,
    SLength,
}

impl Facet {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "topic" => Ok(Facet::Topic),
            "qtype" => Ok(Facet::Qtype),
            "origin" => Ok(Facet::Origin),
            "q_length" => Ok(Facet::QLength),
            "s_length" => Ok(Facet::SLength),
            other => Err(Error::validation(format!(
                "unknown facet {other:?} (expected topic, qtype, origin, q_length, s_length)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BreakdownMetric {
    Mrr,
    AccuracyAnswerable,
    F1 { threshold: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketRow {
    pub bucket: String,
    pub questions: usize,
    pub value: f64,
}

fn bucket_of(q: &ScoredQuestion, facet: Facet) -> Option<String> {
    match facet {
        Facet::Topic => q.meta.topic.map(|t| t.label().to_string()),
        Facet::Qtype => q.meta.qtype.map(|t| t.label().to_string()),
        Facet::Origin => q.meta.origin.map(|o| o.label().to_string()),
        Facet::QLength => q.meta.q_len.map(|l| q_len_bucket(l).label().to_string()),
        Facet::SLength => q.meta.s_len.map(|l| s_len_bucket(l).label().to_string()),
    }
}

/// Group questions by facet bucket and compute the metric per bucket.
/// Questions without the facet metadata are omitted; empty buckets are
/// absent rather than zero.
pub fn breakdown(
    questions: &[ScoredQuestion],
    facet: Facet,
    metric: BreakdownMetric,
) -> Result<Vec<BucketRow>> {
    let mut buckets: IndexMap<String, Vec<ScoredQuestion>> = IndexMap::new();
    for q in questions {
        if let Some(b) = bucket_of(q, facet) {
            buckets.entry(b).or_default().push(q.clone());
        }
    }
    let mut rows = Vec::new();
    for (bucket, members) in buckets {
        let n = members.len();
        let value = match metric {
            BreakdownMetric::Mrr => {
                members.iter().map(reciprocal_rank).sum::<f64>() / n as f64
            }
            BreakdownMetric::AccuracyAnswerable => {
                // Buckets with no answerable question have no defined
                // accuracy; they are absent rather than zero.
                match accuracy_answerable(&TriggerRun::new(members)?) {
                    Ok(v) => v,
                    Err(_) => continue,
                }
            }
            BreakdownMetric::F1 { threshold } => trigger_f1(&TriggerRun::new(members)?, threshold).f1,
        };
        rows.push(BucketRow {
            bucket,
            questions: n,
            value,
        });
    }
    Ok(rows)
}

/// Join a scored run against the gold dataset, attaching facet metadata.
/// Gold questions with no entry in the run are skipped (runs are often
/// per-split against an all-split gold file); a question that is only
/// partially scored, and any entry that matches nothing, are errors.
pub fn join_run(
    entries: &[RunEntry],
    dataset: &Dataset,
    split: Option<Split>,
) -> Result<Vec<ScoredQuestion>> {
    let mut scores: HashMap<(&str, &str, usize), f64> = HashMap::new();
    let mut questions_in_run: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for e in entries {
        questions_in_run.insert(&e.question_id);
        if scores
            .insert((&e.question_id, &e.section_id, e.sent_index), e.score)
            .is_some()
        {
            return Err(Error::validation(format!(
                "duplicate run entry for ({}, {}, {})",
                e.question_id, e.section_id, e.sent_index
            )));
        }
    }
    let mut out = Vec::new();
    let mut used = 0usize;
    for q in &dataset.questions {
        if let Some(s) = split {
            if q.split != s {
                continue;
            }
        }
        if !questions_in_run.contains(q.id.as_str()) {
            continue;
        }
        let cands = dataset.candidates(&q.id);
        let mut scored = Vec::with_capacity(cands.len());
        for c in cands {
            let key = (q.id.as_str(), c.section_id.as_str(), c.sent_index);
            let score = *scores.get(&key).ok_or_else(|| {
                Error::validation(format!(
                    "run is missing a score for ({}, {}, {})",
                    q.id, c.section_id, c.sent_index
                ))
            })?;
            used += 1;
            scored.push(ScoredCandidate {
                section_id: c.section_id.clone(),
                sent_index: c.sent_index,
                score,
                positive: c.answer,
            });
        }
        let s_len = cands
            .iter()
            .find(|c| c.answer)
            .and_then(|c| dataset.sections.get(&c.section_id))
            .map(|s| s.sentences.len());
        let meta = QuestionMeta {
            topic: Some(q.topic),
            qtype: Some(q.qtype),
            origin: Some(q.origin),
            q_len: Some(q.tokens.len()),
            s_len,
        };
        out.push(ScoredQuestion::new(q.id.clone(), meta, scored)?);
    }
    if used != entries.len() {
        return Err(Error::validation(format!(
            "run has {} entries but only {used} match the gold dataset{}",
            entries.len(),
            split.map(|s| format!(" (split {})", s.label())).unwrap_or_default()
        )));
    }
    Ok(out)
}

/// run.jsonl: one line per (question_id, section_id, sent_index, score).
pub fn write_run(path: impl AsRef<Path>, entries: &[RunEntry], config: Option<&serde_json::Value>) -> Result<()> {
    let mut f = File::create(path)?;
    if let Some(c) = config {
        writeln!(f, "{}", serde_json::json!({ "_config": c }))?;
    }
    for e in entries {
        writeln!(
            f,
            "{}",
            serde_json::to_string(e).map_err(|e| Error::validation(e.to_string()))?
        )?;
    }
    Ok(())
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Vec<RunEntry>> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(&line) {
            if v.get("_config").is_some() {
                continue;
            }
        }
        let entry: RunEntry = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path_str, i + 1, e.to_string()))?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq(id: &str, scored: &[(f64, bool)]) -> ScoredQuestion {
        let candidates = scored
            .iter()
            .enumerate()
            .map(|(i, &(score, positive))| ScoredCandidate {
                section_id: "s".to_string(),
                sent_index: i,
                score,
                positive,
            })
            .collect();
        ScoredQuestion::new(id, QuestionMeta::none(), candidates).unwrap()
    }

    #[test]
    fn ap_examples() {
        // Positive at rank 1 only.
        let q = sq("q", &[(0.9, true), (0.5, false), (0.1, false)]);
        assert_eq!(average_precision(&q).unwrap(), 1.0);
        // Positives at ranks 2 and 4: (1/2 + 2/4) / 2 = 0.5.
        let q = sq("q", &[(0.9, false), (0.8, true), (0.7, false), (0.6, true)]);
        assert_eq!(average_precision(&q).unwrap(), 0.5);
        // All positive.
        let q = sq("q", &[(0.9, true), (0.8, true)]);
        assert_eq!(average_precision(&q).unwrap(), 1.0);
        // No positive is an error.
        let q = sq("q", &[(0.9, false)]);
        assert!(average_precision(&q).is_err());
    }

    #[test]
    fn map_mrr_worked_example() {
        // Q1 positives at ranks {1, 3}, Q2 at {2}:
        // MAP = ((1 + 2/3)/2 + 1/2)/2 = 2/3, MRR = (1 + 1/2)/2 = 0.75.
        let q1 = sq("q1", &[(0.9, true), (0.8, false), (0.7, true)]);
        let q2 = sq("q2", &[(0.9, false), (0.8, true)]);
        let run = RankRun::new(vec![q1, q2]).unwrap();
        let (map, mrr) = map_mrr(&run).unwrap();
        assert!((map - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mrr, 0.75);
    }

    #[test]
    fn map_mrr_trivial_cases() {
        let run = RankRun::new(vec![
            sq("a", &[(0.9, true), (0.1, false)]),
            sq("b", &[(0.9, true), (0.1, false)]),
        ])
        .unwrap();
        assert_eq!(map_mrr(&run).unwrap(), (1.0, 1.0));
        let single = RankRun::new(vec![sq("a", &[(0.5, false), (0.4, true)])]).unwrap();
        let (map, mrr) = map_mrr(&single).unwrap();
        assert_eq!(map, 0.5);
        assert_eq!(map, mrr);
    }

    #[test]
    fn rank_run_requires_positives() {
        assert!(RankRun::new(vec![sq("a", &[(0.9, false)])]).is_err());
        assert!(RankRun::new(vec![]).is_err());
    }

    #[test]
    fn candidate_input_order_is_irrelevant() {
        let a = ScoredQuestion::new(
            "q",
            QuestionMeta::none(),
            vec![
                ScoredCandidate { section_id: "s".into(), sent_index: 0, score: 0.1, positive: false },
                ScoredCandidate { section_id: "s".into(), sent_index: 1, score: 0.9, positive: true },
            ],
        )
        .unwrap();
        let b = ScoredQuestion::new(
            "q",
            QuestionMeta::none(),
            vec![
                ScoredCandidate { section_id: "s".into(), sent_index: 1, score: 0.9, positive: true },
                ScoredCandidate { section_id: "s".into(), sent_index: 0, score: 0.1, positive: false },
            ],
        )
        .unwrap();
        assert_eq!(a.candidates, b.candidates);
    }

    #[test]
    fn tie_break_by_section_then_index() {
        let q = ScoredQuestion::new(
            "q",
            QuestionMeta::none(),
            vec![
                ScoredCandidate { section_id: "b".into(), sent_index: 0, score: 0.5, positive: false },
                ScoredCandidate { section_id: "a".into(), sent_index: 1, score: 0.5, positive: false },
                ScoredCandidate { section_id: "a".into(), sent_index: 0, score: 0.5, positive: true },
            ],
        )
        .unwrap();
        let order: Vec<(String, usize)> = q
            .candidates
            .iter()
            .map(|c| (c.section_id.clone(), c.sent_index))
            .collect();
        assert_eq!(order, vec![("a".into(), 0), ("a".into(), 1), ("b".into(), 0)]);
    }

    #[test]
    fn trigger_f1_hand_confusion_matrix() {
        // 5 questions, 3 answerable. Fires correctly on one, wrongly on one
        // answerable and one unanswerable: P = 1/3, R = 1/3, F1 = 1/3.
        let run = TriggerRun::new(vec![
            sq("a", &[(0.9, true), (0.1, false)]),  // fires, correct
            sq("b", &[(0.9, false), (0.8, true)]),  // fires, wrong (answerable)
            sq("c", &[(0.9, false), (0.1, false)]), // fires, wrong (unanswerable)
            sq("d", &[(0.2, true), (0.1, false)]),  // below threshold
            sq("e", &[(0.2, false)]),               // below threshold
        ])
        .unwrap();
        let m = trigger_f1(&run, 0.5);
        assert!((m.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trigger_f1_edges() {
        let run = TriggerRun::new(vec![sq("a", &[(0.1, true)])]).unwrap();
        let m = trigger_f1(&run, 0.5); // fires on nothing
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = trigger_f1(&run, 0.0); // perfect
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn sweep_examples() {
        // Scores 0.2 and 0.8; only the 0.8 question is answerable and correct.
        // Threshold 0.2 fires only on the 0.8 question: F1 = 1.
        let run = TriggerRun::new(vec![
            sq("low", &[(0.2, false)]),
            sq("high", &[(0.8, true)]),
        ])
        .unwrap();
        let t = threshold_sweep(&run);
        assert_eq!(t, 0.2);
        assert_eq!(trigger_f1(&run, t).f1, 1.0);

        // All unanswerable: the sentinel says never fire.
        let run = TriggerRun::new(vec![sq("u", &[(0.9, false)])]).unwrap();
        assert_eq!(threshold_sweep(&run), f64::INFINITY);

        // One answerable question correctly top-ranked: any threshold below
        // its score gives F1 = 1; the sweep returns the lowest maximizer.
        let run = TriggerRun::new(vec![sq("a", &[(0.7, true), (0.3, false)])]).unwrap();
        let t = threshold_sweep(&run);
        assert_eq!(t, f64::NEG_INFINITY);
        assert_eq!(trigger_f1(&run, t).f1, 1.0);
    }

    #[test]
    fn accuracy_answerable_examples() {
        let run = TriggerRun::new(vec![
            sq("a", &[(0.9, true), (0.1, false)]),
            sq("b", &[(0.9, false), (0.8, true)]),
            sq("c", &[(0.9, true)]),
            sq("d", &[(0.9, false), (0.8, true)]),
            sq("u", &[(0.9, false)]), // unanswerable, excluded
        ])
        .unwrap();
        assert_eq!(accuracy_answerable(&run).unwrap(), 0.5);
        let all = TriggerRun::new(vec![sq("a", &[(0.9, true)])]).unwrap();
        assert_eq!(accuracy_answerable(&all).unwrap(), 1.0);
        let none = TriggerRun::new(vec![sq("u", &[(0.9, false)])]).unwrap();
        assert!(accuracy_answerable(&none).is_err());
    }

    fn with_topic(mut q: ScoredQuestion, topic: Topic) -> ScoredQuestion {
        q.meta.topic = Some(topic);
        q
    }

    #[test]
    fn breakdown_partitions_and_weighted_mean_matches_overall() {
        let questions = vec![
            with_topic(sq("a", &[(0.9, true), (0.1, false)]), Topic::Tv),
            with_topic(sq("b", &[(0.9, false), (0.8, true)]), Topic::Tv),
            with_topic(sq("c", &[(0.5, false), (0.4, true), (0.3, false)]), Topic::Science),
        ];
        let rows = breakdown(&questions, Facet::Topic, BreakdownMetric::Mrr).unwrap();
        assert_eq!(rows.len(), 2);
        let total: usize = rows.iter().map(|r| r.questions).sum();
        assert_eq!(total, 3);
        let weighted: f64 = rows
            .iter()
            .map(|r| r.value * r.questions as f64)
            .sum::<f64>()
            / total as f64;
        let overall = questions.iter().map(reciprocal_rank).sum::<f64>() / 3.0;
        assert!((weighted - overall).abs() < 1e-12);
        // Per-topic MRR equals the per-subset computation.
        let tv_only = RankRun::new(vec![
            with_topic(sq("a", &[(0.9, true), (0.1, false)]), Topic::Tv),
            with_topic(sq("b", &[(0.9, false), (0.8, true)]), Topic::Tv),
        ])
        .unwrap();
        let (_, tv_mrr) = map_mrr(&tv_only).unwrap();
        let tv_row = rows.iter().find(|r| r.bucket == "TV").unwrap();
        assert!((tv_row.value - tv_mrr).abs() < 1e-12);
    }

    #[test]
    fn breakdown_origin_splits_exactly() {
        let mut a = sq("a", &[(0.9, true)]);
        a.meta.origin = Some(Origin::Original);
        let mut b = sq("b", &[(0.9, true)]);
        b.meta.origin = Some(Origin::Paraphrase);
        let rows = breakdown(&[a, b], Facet::Origin, BreakdownMetric::Mrr).unwrap();
        let buckets: Vec<&str> = rows.iter().map(|r| r.bucket.as_str()).collect();
        assert_eq!(buckets, vec!["original", "paraphrase"]);
        assert!(rows.iter().all(|r| r.questions == 1));
    }

    #[test]
    fn breakdown_skips_missing_metadata() {
        let rows = breakdown(
            &[sq("a", &[(0.9, true)])],
            Facet::Topic,
            BreakdownMetric::Mrr,
        )
        .unwrap();
        assert!(rows.is_empty());
    }

    proptest! {
        #[test]
        fn single_positive_ap_equals_rr(
            scores in prop::collection::vec(0.0f64..1.0, 2..8),
            pos in 0usize..7,
        ) {
            prop_assume!(pos < scores.len());
            let labeled: Vec<(f64, bool)> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (s, i == pos))
                .collect();
            let q = sq("q", &labeled);
            prop_assert_eq!(average_precision(&q).unwrap(), reciprocal_rank(&q));
        }

        #[test]
        fn accuracy_bounds_recall_at_any_threshold(
            tops in prop::collection::vec((0.0f64..1.0, prop::bool::ANY), 1..10),
            threshold in 0.0f64..1.0,
        ) {
            prop_assume!(tops.iter().any(|&(_, p)| p));
            let questions: Vec<ScoredQuestion> = tops
                .iter()
                .enumerate()
                .map(|(i, &(s, p))| sq(&format!("q{i}"), &[(s, p), (s / 2.0, false)]))
                .collect();
            let run = TriggerRun::new(questions).unwrap();
            let acc = accuracy_answerable(&run).unwrap();
            let m = trigger_f1(&run, threshold);
            prop_assert!(acc >= m.recall - 1e-12);
        }

        #[test]
        fn sweep_is_global_max_over_dense_grid(
            tops in prop::collection::vec((0.0f64..1.0, prop::bool::ANY), 1..8),
        ) {
            let questions: Vec<ScoredQuestion> = tops
                .iter()
                .enumerate()
                .map(|(i, &(s, p))| sq(&format!("q{i}"), &[(s, p)]))
                .collect();
            let run = TriggerRun::new(questions).unwrap();
            let best = threshold_sweep(&run);
            let best_f1 = trigger_f1(&run, best).f1;
            for i in 0..=100 {
                let t = i as f64 / 100.0 - 0.005;
                prop_assert!(trigger_f1(&run, t).f1 <= best_f1 + 1e-12);
            }
        }

        #[test]
        fn metrics_invariant_under_score_preserving_permutation(
            scores in prop::collection::vec(0.0f64..1.0, 3..8),
            pos in 0usize..7,
            seed in 0u64..1000,
        ) {
            prop_assume!(pos < scores.len());
            let labeled: Vec<(f64, bool)> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (s, i == pos))
                .collect();
            let q1 = sq("q", &labeled);
            // Same candidates in a rotated input order; the constructor
            // re-sorts either way.
            let mut cands: Vec<ScoredCandidate> = labeled
                .iter()
                .enumerate()
                .map(|(i, &(score, positive))| ScoredCandidate {
                    section_id: "s".into(),
                    sent_index: i,
                    score,
                    positive,
                })
                .collect();
            let n = cands.len();
            cands.rotate_left((seed as usize) % n);
            let q2 = ScoredQuestion::new("q", QuestionMeta::none(), cands).unwrap();
            prop_assert_eq!(average_precision(&q1).unwrap(), average_precision(&q2).unwrap());
            prop_assert_eq!(reciprocal_rank(&q1), reciprocal_rank(&q2));
        }
    }
}
