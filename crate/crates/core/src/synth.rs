//! Deterministic synthetic corpora for demos, tests, and benchmarks.
//!
//! The planted corpus embeds a shared key token in each question and its
//! answer sentence while negatives carry filler only, so an untrained
//! ranker sits near chance and a working one can reach high MRR quickly.

use std::sync::Arc;

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    classify_qtype, tokenize, Candidate, Dataset, Origin, Question, Section, SectionStore,
    Sentence, Split, Task, Topic,
};
use crate::error::Result;
use crate::features::{DependencyTree, ParseTable};

const FILLER: [&str; 24] = [
    "the", "a", "report", "city", "river", "story", "notes", "group", "record", "window",
    "garden", "music", "style", "season", "public", "event", "early", "later", "small", "large",
    "known", "found", "called", "under",
];

/// The planted token: present in every question and its answer sentence,
/// absent from every negative.
pub const PLANTED_KEY: &str = "zqkey";

pub struct PlantedCorpus {
    pub sections: Arc<SectionStore>,
    pub dataset: Dataset,
}

fn filler_sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| *FILLER.choose(rng).expect("non-empty filler vocabulary"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Answer-selection corpus of `n_questions`, one section per question with
/// `sentences_per_section` candidates of which exactly one (carrying the
/// question's key token) is the answer. Every fifth question lands in DEV,
/// every eleventh in TST, the rest in TRN.
pub fn planted_corpus(
    n_questions: usize,
    sentences_per_section: usize,
    seed: u64,
) -> Result<PlantedCorpus> {
    assert!(sentences_per_section >= 2, "need at least one negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = SectionStore::new();
    let mut questions = Vec::new();
    let mut candidates: IndexMap<String, Vec<Candidate>> = IndexMap::new();

    for i in 0..n_questions {
        let key = PLANTED_KEY;
        let topic = Topic::ALL[i % Topic::ALL.len()];
        let section_id = format!("sec{i:03}");
        let answer_pos = rng.random_range(0..sentences_per_section);
        // Question filler; every candidate gets to share some of it, so raw
        // lexical similarity alone cannot separate answers from negatives.
        let q_filler: Vec<&str> = (0..3)
            .map(|_| *FILLER.choose(&mut rng).expect("non-empty filler vocabulary"))
            .collect();
        let mut raw_sentences = Vec::with_capacity(sentences_per_section);
        for s in 0..sentences_per_section {
            let shared = q_filler[rng.random_range(0..q_filler.len())];
            if s == answer_pos {
                let lead = filler_sentence(&mut rng, 1);
                let tail = filler_sentence(&mut rng, 2);
                raw_sentences.push(format!("{lead} {shared} {key} {tail} ."));
            } else {
                let lead = filler_sentence(&mut rng, 2);
                let tail = filler_sentence(&mut rng, 2);
                raw_sentences.push(format!("{lead} {shared} {tail} ."));
            }
        }
        let sentences: Vec<Sentence> = raw_sentences
            .iter()
            .enumerate()
            .map(|(s, raw)| Sentence {
                section_id: section_id.clone(),
                sent_index: s,
                raw: raw.clone(),
                tokens: tokenize(raw),
                tree: None,
            })
            .collect();
        store.insert(Section {
            article_id: format!("art{:02}", i % 7),
            section_id: section_id.clone(),
            topic,
            title: format!("Planted {i}"),
            sentences,
        })?;

        let wh = ["What", "How", "Who", "When", "Where", "Why"][i % 6];
        let text = format!("{wh} {} {} {key} {} ?", q_filler[0], q_filler[1], q_filler[2]);
        let tokens = tokenize(&text);
        let qtype = classify_qtype(&tokens);
        let id = format!("q{i:03}");
        let split = if i % 5 == 4 {
            Split::Dev
        } else if i % 11 == 10 {
            Split::Tst
        } else {
            Split::Trn
        };
        let cands = (0..sentences_per_section)
            .map(|s| Candidate {
                question_id: id.clone(),
                section_id: section_id.clone(),
                sent_index: s,
                answer: s == answer_pos,
            })
            .collect();
        candidates.insert(id.clone(), cands);
        questions.push(Question {
            id,
            text,
            tokens,
            topic,
            origin: if i % 2 == 0 { Origin::Original } else { Origin::Paraphrase },
            qtype,
            split,
        });
    }
    let sections = Arc::new(store);
    let dataset = Dataset::new(Task::Ass, questions, candidates, sections.clone())?;
    Ok(PlantedCorpus { sections, dataset })
}

/// Chain trees (token 0 is the root, each token heads the next) for every
/// question and candidate sentence; enough to exercise the subtree pipeline
/// deterministically.
pub fn chain_parse_table(dataset: &Dataset) -> Result<ParseTable> {
    let mut table = ParseTable::new();
    let chain = |n: usize| -> Result<DependencyTree> {
        DependencyTree::new((0..n).map(|i| if i == 0 { None } else { Some(i - 1) }).collect())
    };
    for q in &dataset.questions {
        if q.tokens.is_empty() {
            continue;
        }
        table.insert(
            (q.id.clone(), 0),
            (
                q.tokens.iter().map(|t| t.form.clone()).collect(),
                chain(q.tokens.len())?,
            ),
        );
    }
    for section in dataset.sections.iter() {
        for s in &section.sentences {
            if s.tokens.is_empty() {
                continue;
            }
            table.insert(
                (section.section_id.clone(), s.sent_index),
                (
                    s.tokens.iter().map(|t| t.form.clone()).collect(),
                    chain(s.tokens.len())?,
                ),
            );
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_corpus_is_valid_ass() {
        let c = planted_corpus(20, 4, 7).unwrap();
        assert_eq!(c.dataset.questions.len(), 20);
        assert_eq!(c.sections.len(), 20);
        let sizes = c.dataset.split_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 20);
        assert!(sizes[1] > 0, "dev split populated: {sizes:?}");
        for q in &c.dataset.questions {
            let answers: Vec<_> = c
                .dataset
                .candidates(&q.id)
                .iter()
                .filter(|c| c.answer)
                .collect();
            assert_eq!(answers.len(), 1);
        }
    }

    #[test]
    fn planted_answer_shares_key_token() {
        let c = planted_corpus(10, 4, 9).unwrap();
        for q in &c.dataset.questions {
            let key = q
                .tokens
                .iter()
                .find(|t| t.lower.starts_with("zq"))
                .expect("question carries a key token");
            let answer = &c.dataset.answer_sentences(&q.id)[0];
            assert!(answer.tokens.iter().any(|t| t.lower == key.lower));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = planted_corpus(8, 3, 42).unwrap();
        let b = planted_corpus(8, 3, 42).unwrap();
        for (qa, qb) in a.dataset.questions.iter().zip(&b.dataset.questions) {
            assert_eq!(qa.text, qb.text);
        }
        let sa: Vec<String> = a.sections.iter().flat_map(|s| s.sentences.iter().map(|x| x.raw.clone())).collect();
        let sb: Vec<String> = b.sections.iter().flat_map(|s| s.sentences.iter().map(|x| x.raw.clone())).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn chain_trees_cover_everything() {
        let c = planted_corpus(5, 3, 1).unwrap();
        let table = chain_parse_table(&c.dataset).unwrap();
        assert_eq!(table.len(), 5 + 15);
        let (forms, tree) = &table[&("q000".to_string(), 0)];
        assert_eq!(forms.len(), tree.len());
        assert_eq!(tree.parent(0), None);
    }
}
