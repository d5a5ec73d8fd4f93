//! Corpus data model: tokenization, sections, questions, candidates, and
//! dataset splits for answer sentence selection (ASS) and answer triggering (AT).

mod load;

pub use load::{dataset_to_lines, load_dataset, load_sections, CorpusCounts};

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DependencyTree;

pub type SectionId = String;
pub type QuestionId = String;

/// A single token with its original and case-folded form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lower: String,
    /// 0-based position within the sentence or question.
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct Sentence {
    pub section_id: SectionId,
    /// 0-based position within the section.
    pub sent_index: usize,
    pub raw: String,
    pub tokens: Vec<Token>,
    pub tree: Option<DependencyTree>,
}

/// One of the ten article topics the corpus draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topic {
    Arts,
    Country,
    Food,
    #[serde(rename = "Historical Events")]
    HistoricalEvents,
    Movies,
    Music,
    Science,
    Sports,
    Travel,
    #[serde(rename = "TV")]
    Tv,
}

impl Topic {
    pub const ALL: [Topic; 10] = [
        Topic::Arts,
        Topic::Country,
        Topic::Food,
        Topic::HistoricalEvents,
        Topic::Movies,
        Topic::Music,
        Topic::Science,
        Topic::Sports,
        Topic::Travel,
        Topic::Tv,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Topic::Arts => "Arts",
            Topic::Country => "Country",
            Topic::Food => "Food",
            Topic::HistoricalEvents => "Historical Events",
            Topic::Movies => "Movies",
            Topic::Music => "Music",
            Topic::Science => "Science",
            Topic::Sports => "Sports",
            Topic::Travel => "Travel",
            Topic::Tv => "TV",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub article_id: String,
    pub section_id: SectionId,
    pub topic: Topic,
    pub title: String,
    /// Ordered by `sent_index`.
    pub sentences: Vec<Sentence>,
}

/// Whether a question came out of the initial generation passes or the
/// paraphrasing pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Paraphrase,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Paraphrase => "paraphrase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "TRN")]
    Trn,
    #[serde(rename = "DEV")]
    Dev,
    #[serde(rename = "TST")]
    Tst,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Trn, Split::Dev, Split::Tst];

    pub fn label(self) -> &'static str {
        match self {
            Split::Trn => "TRN",
            Split::Dev => "DEV",
            Split::Tst => "TST",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QType {
    What,
    How,
    Who,
    When,
    Where,
    Why,
    Misc,
}

impl QType {
    pub const ALL: [QType; 7] = [
        QType::What,
        QType::How,
        QType::Who,
        QType::When,
        QType::Where,
        QType::Why,
        QType::Misc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QType::What => "What",
            QType::How => "How",
            QType::Who => "Who",
            QType::When => "When",
            QType::Where => "Where",
            QType::Why => "Why",
            QType::Misc => "Misc",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    pub tokens: Vec<Token>,
    pub topic: Topic,
    pub origin: Origin,
    pub qtype: QType,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub question_id: QuestionId,
    pub section_id: SectionId,
    pub sent_index: usize,
    pub answer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Task {
    /// Answer sentence selection: every question has at least one answer.
    Ass,
    /// Answer triggering: questions may have no answer among candidates.
    At,
}

/// Immutable store of sections keyed by `section_id`, in file order.
#[derive(Debug, Default, Clone)]
pub struct SectionStore {
    sections: IndexMap<SectionId, Section>,
}

impl SectionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, section: Section) -> Result<()> {
        if self.sections.contains_key(&section.section_id) {
            return Err(Error::validation(format!(
                "duplicate section id {:?}",
                section.section_id
            )));
        }
        self.sections.insert(section.section_id.clone(), section);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Section> {
        self.sections.get(id)
    }

    pub fn sentence(&self, section_id: &str, sent_index: usize) -> Option<&Sentence> {
        self.sections
            .get(section_id)
            .and_then(|s| s.sentences.get(sent_index))
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Section> {
        self.sections.values()
    }

    /// Attach dependency trees to sentences, keyed by (section_id, sent_index).
    /// Unknown keys are ignored; a tree whose length disagrees with the
    /// sentence's token count is rejected.
    pub fn attach_trees<'a, I>(&mut self, trees: I) -> Result<usize>
    where
        I: IntoIterator<Item = (&'a str, usize, DependencyTree)>,
    {
        let mut attached = 0;
        for (section_id, sent_index, tree) in trees {
            if let Some(section) = self.sections.get_mut(section_id) {
                if let Some(sentence) = section.sentences.get_mut(sent_index) {
                    if tree.len() != sentence.tokens.len() {
                        return Err(Error::validation(format!(
                            "tree for ({section_id}, {sent_index}) has {} nodes but the sentence has {} tokens",
                            tree.len(),
                            sentence.tokens.len()
                        )));
                    }
                    sentence.tree = Some(tree);
                    attached += 1;
                }
            }
        }
        Ok(attached)
    }
}

/// A loaded dataset: questions, their candidate lists, and the backing
/// section store. Immutable after load and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub task: Task,
    pub questions: Vec<Question>,
    candidates: IndexMap<QuestionId, Vec<Candidate>>,
    pub sections: Arc<SectionStore>,
}

impl Dataset {
    pub fn new(
        task: Task,
        questions: Vec<Question>,
        candidates: IndexMap<QuestionId, Vec<Candidate>>,
        sections: Arc<SectionStore>,
    ) -> Result<Self> {
        let ds = Dataset {
            task,
            questions,
            candidates,
            sections,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for q in &self.questions {
            if !seen.insert(q.id.as_str()) {
                return Err(Error::validation(format!("duplicate question id {:?}", q.id)));
            }
        }
        let mut dangling = Vec::new();
        let mut unanswered = Vec::new();
        for q in &self.questions {
            let cands = self.candidates.get(&q.id).map(Vec::as_slice).unwrap_or(&[]);
            let mut answers = 0;
            for c in cands {
                if self.sections.sentence(&c.section_id, c.sent_index).is_none() {
                    dangling.push(format!("{} -> ({}, {})", q.id, c.section_id, c.sent_index));
                }
                if c.answer {
                    answers += 1;
                }
            }
            if answers == 0 {
                unanswered.push(q.id.clone());
            }
        }
        if !dangling.is_empty() {
            return Err(Error::validation(format!(
                "candidates reference missing sentences: {}",
                dangling.join(", ")
            )));
        }
        if self.task == Task::Ass && !unanswered.is_empty() {
            return Err(Error::validation(format!(
                "answer sentence selection requires at least one answer per question; none for: {}",
                unanswered.join(", ")
            )));
        }
        Ok(())
    }

    pub fn candidates(&self, question_id: &str) -> &[Candidate] {
        self.candidates
            .get(question_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn question(&self, question_id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == question_id)
    }

    /// Questions restricted to one split, in dataset order.
    pub fn split_questions(&self, split: Split) -> Vec<&Question> {
        self.questions.iter().filter(|q| q.split == split).collect()
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for q in &self.questions {
            match q.split {
                Split::Trn => sizes[0] += 1,
                Split::Dev => sizes[1] += 1,
                Split::Tst => sizes[2] += 1,
            }
        }
        sizes
    }

    /// The answer sentences of a question, in candidate order.
    pub fn answer_sentences(&self, question_id: &str) -> Vec<&Sentence> {
        self.candidates(question_id)
            .iter()
            .filter(|c| c.answer)
            .filter_map(|c| self.sections.sentence(&c.section_id, c.sent_index))
            .collect()
    }
}

fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00A1}' | '\u{00BF}'
        )
}

/// True when every char of the form is punctuation.
pub fn is_punct_token(form: &str) -> bool {
    !form.is_empty() && form.chars().all(is_punct_char)
}

/// Split on whitespace, then peel leading and trailing punctuation characters
/// off each chunk as standalone tokens. Idempotent on its own joined output.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let push = |form: &str, tokens: &mut Vec<Token>| {
        let index = tokens.len();
        tokens.push(Token {
            form: form.to_string(),
            lower: form.to_lowercase(),
            index,
        });
    };
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct_char(chars[start]) {
            start += 1;
        }
        while end > start && is_punct_char(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            push(&c.to_string(), &mut tokens);
        }
        if start < end {
            let middle: String = chars[start..end].iter().collect();
            push(&middle, &mut tokens);
        }
        for &c in &chars[end..] {
            push(&c.to_string(), &mut tokens);
        }
    }
    tokens
}

const WH_WORDS: [(&str, QType); 6] = [
    ("what", QType::What),
    ("how", QType::How),
    ("who", QType::Who),
    ("when", QType::When),
    ("where", QType::Where),
    ("why", QType::Why),
];

/// Classify by the first token if it is a wh-word, otherwise by the first
/// wh-word anywhere in the question, otherwise `Misc`.
pub fn classify_qtype(tokens: &[Token]) -> QType {
    fn wh(lower: &str) -> Option<QType> {
        WH_WORDS.iter().find(|(w, _)| *w == lower).map(|&(_, t)| t)
    }
    if let Some(first) = tokens.first() {
        if let Some(t) = wh(&first.lower) {
            return t;
        }
    }
    for tok in tokens {
        if let Some(t) = wh(&tok.lower) {
            return t;
        }
    }
    QType::Misc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn forms(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.form.as_str()).collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_question_mark_peeled() {
        let toks = tokenize("How was the premiere reviewed?");
        assert_eq!(forms(&toks), vec!["How", "was", "the", "premiere", "reviewed", "?"]);
        assert_eq!(toks[0].lower, "how");
        assert_eq!(toks[5].index, 5);
    }

    #[test]
    fn tokenize_collapses_whitespace() {
        assert_eq!(forms(&tokenize("a b  c")), vec!["a", "b", "c"]);
    }

    #[test]
    fn tokenize_keeps_inner_punctuation() {
        assert_eq!(forms(&tokenize("U.S. (1994)")), vec!["U.S", ".", "(", "1994", ")"]);
    }

    #[test]
    fn qtype_first_token() {
        assert_eq!(classify_qtype(&tokenize("How was the premiere reviewed?")), QType::How);
        assert_eq!(
            classify_qtype(&tokenize("Who felt that Criminal Minds had confusing characters?")),
            QType::Who
        );
    }

    #[test]
    fn qtype_scan_then_misc() {
        assert_eq!(classify_qtype(&tokenize("In what year did it air?")), QType::What);
        assert_eq!(classify_qtype(&tokenize("Name the tallest mountain.")), QType::Misc);
    }

    #[test]
    fn punct_token_detection() {
        assert!(is_punct_token("?"));
        assert!(is_punct_token("..."));
        assert!(!is_punct_token("U.S"));
        assert!(!is_punct_token(""));
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_joined_output(s in "\\PC{0,60}") {
            let once = tokenize(&s);
            let joined = once.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ");
            let twice = tokenize(&joined);
            prop_assert_eq!(
                once.iter().map(|t| t.form.clone()).collect::<Vec<_>>(),
                twice.iter().map(|t| t.form.clone()).collect::<Vec<_>>()
            );
        }

        #[test]
        fn qtype_total(s in "\\PC{0,40}") {
            let toks = tokenize(&s);
            let t = classify_qtype(&toks);
            prop_assert!(QType::ALL.contains(&t));
        }
    }
}
