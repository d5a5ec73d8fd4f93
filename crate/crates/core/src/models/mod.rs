//! The four rankers and their shared plumbing: vocabulary and embedding
//! construction, training configuration, checkpoint save/load, and run
//! prediction with the answer-triggering decision rule.

mod attention;
mod cnn;
mod gru;
mod lr;

pub use attention::{
    ap_score_graph, hinge_loss, oneway_score_graph, train_attention, train_attention_from,
    AttentionGraphParams, AttentionModel, AttentionVariant,
};
pub use cnn::{train_cnn, train_cnn_from, CnnConfig, CnnGraphParams, CnnModel, Pooling};
pub use gru::{encode, GruConfig, GruDirNodes};
pub use lr::{lr_predict, lr_train, LrModel};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Question, Split, Token};
use crate::error::{Error, Result};
use crate::features::{
    cooccurring, lexical_features, subtree_match, Comparator, DepSentence, EmbeddingTable,
    FeatureVector, IdfTable, ParseTable, SubtreeConfig,
};
use crate::tensor::{gaussian_matrix, read_checkpoint, write_checkpoint, Array, ParamStore};

/// Token-to-row mapping; row 0 is reserved for padding and unknown tokens
/// and always backs a zero embedding.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    map: IndexMap<String, usize>,
}

impl Vocab {
    pub fn from_token_lists<'a, I>(lists: I) -> Self
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut map = IndexMap::new();
        for list in lists {
            for tok in list {
                let next = map.len() + 1;
                map.entry(tok.lower.clone()).or_insert(next);
            }
        }
        Vocab { map }
    }

    /// Tokens of every question in the split and of every candidate
    /// sentence, in dataset order.
    pub fn from_dataset(dataset: &Dataset, split: Split) -> Self {
        let mut lists: Vec<&[Token]> = Vec::new();
        for q in dataset.split_questions(split) {
            lists.push(&q.tokens);
            for c in dataset.candidates(&q.id) {
                if let Some(s) = dataset.sections.sentence(&c.section_id, c.sent_index) {
                    lists.push(&s.tokens);
                }
            }
        }
        Self::from_token_lists(lists)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Vocab {
            map: tokens.into_iter().zip(1..).collect(),
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        self.map.keys().cloned().collect()
    }

    /// Row id; 0 when out of vocabulary.
    pub fn id(&self, lower: &str) -> usize {
        self.map.get(lower).copied().unwrap_or(0)
    }

    /// Embedding rows including the reserved zero row.
    pub fn rows(&self) -> usize {
        self.map.len() + 1
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (&str, usize)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Where initial embedding vectors come from.
pub enum EmbeddingSource<'a> {
    Table(&'a EmbeddingTable),
    /// Seeded Gaussian vectors, for fixtures and when no table is supplied.
    Seeded { dim: usize, scale: f64 },
}

impl EmbeddingSource<'_> {
    pub fn seeded(dim: usize) -> EmbeddingSource<'static> {
        EmbeddingSource::Seeded { dim, scale: 0.3 }
    }
}

/// Build the model's embedding matrix: row 0 is zero, vocab tokens are
/// looked up in the table (missing tokens stay zero) or drawn from a seeded
/// Gaussian.
pub fn build_embedding_matrix(
    vocab: &Vocab,
    source: &EmbeddingSource<'_>,
    requested_dim: usize,
    seed: u64,
) -> Result<Array<f32>> {
    match source {
        EmbeddingSource::Table(table) => {
            let dim = table.dim();
            let mut m = Array::zeros(&[vocab.rows(), dim]);
            for (tok, row) in vocab.entries() {
                if let Some(v) = table.get(tok) {
                    m.row_mut(row).copy_from_slice(v);
                }
            }
            Ok(m)
        }
        EmbeddingSource::Seeded { dim, scale } => {
            let dim = if *dim == 0 { requested_dim } else { *dim };
            if dim == 0 {
                return Err(Error::validation("embedding dimension must be positive"));
            }
            let mut m = gaussian_matrix(vocab.rows(), dim, *scale, seed.wrapping_add(0xe33d));
            for v in m.row_mut(0) {
                *v = 0.0;
            }
            Ok(m)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Negatives sampled per positive; `None` uses the whole pool.
    pub negatives_per_positive: Option<usize>,
    /// Answer-triggering decision value applied to predicted scores.
    pub threshold: f64,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            seed,
            learning_rate: 1e-3,
            negatives_per_positive: None,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.learning_rate <= 0.0
            || self.negatives_per_positive == Some(0)
        {
            return Err(Error::validation(
                "training configuration values must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// CNN ranker fronted by the feature-based logistic regression, with the
/// subtree-matching triplet among the features.
#[derive(Debug, Clone)]
pub struct CnnSubtreeModel {
    pub cnn: CnnModel,
    pub lr: LrModel,
    pub subtree: SubtreeConfig,
    pub idf: IdfTable,
}

impl CnnSubtreeModel {
    /// Embedding table over the CNN's own vectors, for the embedding
    /// comparator.
    pub fn comparator_table(&self) -> EmbeddingTable {
        let emb = self.cnn.params.get("emb").expect("embedding matrix present");
        let mut table = EmbeddingTable::new(emb.cols());
        for (tok, row) in self.cnn.vocab.entries() {
            table
                .insert(tok.to_string(), emb.row(row).to_vec())
                .expect("dimensions agree");
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Cnn,
    CnnSubtree,
    Oneway,
    Ap,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::CnnSubtree => "cnn-subtree",
            ModelKind::Oneway => "oneway",
            ModelKind::Ap => "ap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(ModelKind::Cnn),
            "cnn-subtree" => Ok(ModelKind::CnnSubtree),
            "oneway" => Ok(ModelKind::Oneway),
            "ap" => Ok(ModelKind::Ap),
            other => Err(Error::validation(format!(
                "unknown model kind {other:?} (expected cnn, cnn-subtree, oneway, ap)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Cnn(CnnModel),
    CnnSubtree(CnnSubtreeModel),
    Attention(AttentionModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cnn(_) => ModelKind::Cnn,
            Model::CnnSubtree(_) => ModelKind::CnnSubtree,
            Model::Attention(m) => match m.variant {
                AttentionVariant::OneWay => ModelKind::Oneway,
                AttentionVariant::AttentivePooling => ModelKind::Ap,
            },
        }
    }
}

/// Inputs a model may need beyond the dataset itself.
#[derive(Default, Clone, Copy)]
pub struct ScoreContext<'a> {
    /// Dependency trees: question trees keyed by (question_id, 0), sentence
    /// trees by (section_id, sent_index).
    pub parses: Option<&'a ParseTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub question_id: String,
    pub section_id: String,
    pub sent_index: usize,
    pub score: f64,
}

fn tree_for<'a>(
    parses: Option<&'a ParseTable>,
    key: &str,
    index: usize,
) -> Option<&'a crate::features::DependencyTree> {
    parses.and_then(|p| p.get(&(key.to_string(), index)).map(|(_, t)| t))
}

fn subtree_features(
    model: &CnnSubtreeModel,
    comparator_emb: &EmbeddingTable,
    question: &Question,
    q_tree: Option<&crate::features::DependencyTree>,
    a_tokens: &[Token],
    a_tree: Option<&crate::features::DependencyTree>,
) -> Result<(f64, f64, f64)> {
    let (Some(qt), Some(at)) = (q_tree, a_tree) else {
        // Sentences without trees contribute an all-zero triplet.
        return Ok((0.0, 0.0, 0.0));
    };
    let q = DepSentence::new(&question.tokens, qt)?;
    let a = DepSentence::new(a_tokens, at)?;
    let t = cooccurring(&question.tokens, a_tokens);
    let emb = match model.subtree.comparator {
        Comparator::Embedding => Some(comparator_emb),
        Comparator::Form => None,
    };
    let s = subtree_match(q, a, &t, model.subtree, emb)?;
    Ok((s.s_parent, s.s_sibling, s.s_child))
}

/// Feature row for one (question, candidate sentence) pair, given the CNN
/// stage's score.
pub fn assemble_features(
    model: &CnnSubtreeModel,
    comparator_emb: &EmbeddingTable,
    question: &Question,
    q_tree: Option<&crate::features::DependencyTree>,
    a_tokens: &[Token],
    a_tree: Option<&crate::features::DependencyTree>,
    cnn_score: f64,
) -> Result<FeatureVector> {
    let (overlap_count, overlap_idf, q_len) =
        lexical_features(&question.tokens, a_tokens, &model.idf);
    let (s_parent, s_sibling, s_child) =
        subtree_features(model, comparator_emb, question, q_tree, a_tokens, a_tree)?;
    Ok(FeatureVector {
        cnn_score,
        overlap_count,
        overlap_idf,
        q_len,
        s_parent,
        s_sibling,
        s_child,
    })
}

/// Score every candidate of every question (optionally restricted to one
/// split). Scores are pure per (question, candidate) pair.
pub fn predict_run(
    model: &Model,
    dataset: &Dataset,
    split: Option<Split>,
    ctx: &ScoreContext<'_>,
) -> Result<Vec<RunEntry>> {
    let questions: Vec<&Question> = match split {
        Some(s) => dataset.split_questions(s),
        None => dataset.questions.iter().collect(),
    };
    let comparator_emb = match model {
        Model::CnnSubtree(m) => Some(m.comparator_table()),
        _ => None,
    };
    let mut out = Vec::new();
    for q in questions {
        let q_tree = tree_for(ctx.parses, &q.id, 0);
        for cand in dataset.candidates(&q.id) {
            let sentence = dataset
                .sections
                .sentence(&cand.section_id, cand.sent_index)
                .ok_or_else(|| Error::validation("candidate resolves to no sentence"))?;
            let score = match model {
                Model::Cnn(m) => m.score(&q.tokens, &sentence.tokens)?,
                Model::Attention(m) => m.score(&q.tokens, &sentence.tokens)?,
                Model::CnnSubtree(m) => {
                    let a_tree = sentence
                        .tree
                        .as_ref()
                        .or_else(|| tree_for(ctx.parses, &cand.section_id, cand.sent_index));
                    let cnn_score = m.cnn.score(&q.tokens, &sentence.tokens)?;
                    let features = assemble_features(
                        m,
                        comparator_emb.as_ref().expect("built for cnn-subtree"),
                        q,
                        q_tree,
                        &sentence.tokens,
                        a_tree,
                        cnn_score,
                    )?;
                    lr_predict(&m.lr, &features)
                }
            };
            if !score.is_finite() {
                return Err(Error::NonFinite { op: "predict_run" });
            }
            out.push(RunEntry {
                question_id: q.id.clone(),
                section_id: cand.section_id.clone(),
                sent_index: cand.sent_index,
                score,
            });
        }
    }
    Ok(out)
}

/// Answer-triggering decision over one question's scored candidates:
/// the top candidate when it clears the threshold, otherwise abstain.
pub fn at_decide<'a>(entries: &'a [RunEntry], threshold: f64) -> Option<&'a RunEntry> {
    let top = entries.iter().max_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap()
            .then_with(|| (&b.section_id, b.sent_index).cmp(&(&a.section_id, a.sent_index)))
    })?;
    (top.score > threshold).then_some(top)
}

/// Two-stage training for the subtree-feature pipeline: train the CNN,
/// build per-pair feature rows with the final CNN scores, then fit the
/// logistic regression on them.
pub fn train_cnn_subtree(
    dataset: &Dataset,
    split: Split,
    cnn_config: CnnConfig,
    subtree: SubtreeConfig,
    train: &TrainConfig,
    embeddings: &EmbeddingSource<'_>,
    parses: Option<&ParseTable>,
) -> Result<(CnnSubtreeModel, TrainReport)> {
    let (cnn, report) = train_cnn(dataset, split, cnn_config, train, embeddings)?;

    let mut sentence_tokens: Vec<&[Token]> = Vec::new();
    for q in dataset.split_questions(split) {
        for c in dataset.candidates(&q.id) {
            if let Some(s) = dataset.sections.sentence(&c.section_id, c.sent_index) {
                sentence_tokens.push(&s.tokens);
            }
        }
    }
    let idf = crate::features::build_idf(sentence_tokens.iter().copied())?;

    let mut model = CnnSubtreeModel {
        cnn,
        lr: LrModel::default(),
        subtree,
        idf,
    };
    let comparator_emb = model.comparator_table();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for q in dataset.split_questions(split) {
        let q_tree = tree_for(parses, &q.id, 0);
        for cand in dataset.candidates(&q.id) {
            let Some(sentence) = dataset.sections.sentence(&cand.section_id, cand.sent_index)
            else {
                continue;
            };
            if q.tokens.is_empty() || sentence.tokens.is_empty() {
                continue;
            }
            let a_tree = sentence
                .tree
                .as_ref()
                .or_else(|| tree_for(parses, &cand.section_id, cand.sent_index));
            let cnn_score = model.cnn.score(&q.tokens, &sentence.tokens)?;
            rows.push(assemble_features(
                &model,
                &comparator_emb,
                q,
                q_tree,
                &sentence.tokens,
                a_tree,
                cnn_score,
            )?);
            labels.push(cand.answer);
        }
    }
    model.lr = lr_train(&rows, &labels, 0.1, 4000)?;
    Ok((model, report))
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: ModelKind,
    vocab: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cnn_config: Option<CnnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gru_config: Option<GruConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subtree: Option<SubtreeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<LrModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idf: Option<(usize, Vec<(String, u32)>)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

fn params_to_arrays(params: &ParamStore) -> Vec<(String, &Array<f32>)> {
    params.iter().map(|(n, p)| (n.to_string(), &p.value)).collect()
}

fn params_from_arrays(arrays: Vec<(String, Array<f32>)>) -> ParamStore {
    let mut store = ParamStore::new();
    for (name, value) in arrays {
        let embedding = name == "emb";
        store.insert(name, value, embedding);
    }
    store
}

/// Save a model checkpoint; `config_echo` is embedded verbatim in the
/// container metadata.
pub fn save_model(
    model: &Model,
    path: impl AsRef<std::path::Path>,
    config_echo: serde_json::Value,
) -> Result<()> {
    let mut meta = CheckpointMeta {
        kind: model.kind(),
        vocab: Vec::new(),
        cnn_config: None,
        gru_config: None,
        subtree: None,
        lr: None,
        idf: None,
        config: if config_echo.is_null() {
            None
        } else {
            Some(config_echo)
        },
    };
    let params = match model {
        Model::Cnn(m) => {
            meta.vocab = m.vocab.tokens();
            meta.cnn_config = Some(m.config.clone());
            &m.params
        }
        Model::CnnSubtree(m) => {
            meta.vocab = m.cnn.vocab.tokens();
            meta.cnn_config = Some(m.cnn.config.clone());
            meta.subtree = Some(m.subtree);
            meta.lr = Some(m.lr.clone());
            let mut df: Vec<(String, u32)> = m
                .idf
                .df_entries()
                .map(|(t, d)| (t.to_string(), d))
                .collect();
            df.sort();
            meta.idf = Some((m.idf.n_docs(), df));
            &m.cnn.params
        }
        Model::Attention(m) => {
            meta.vocab = m.vocab.tokens();
            meta.gru_config = Some(m.config);
            &m.params
        }
    };
    let meta_json = serde_json::to_string(&meta)
        .map_err(|e| Error::validation(format!("metadata serialization failed: {e}")))?;
    write_checkpoint(path, &meta_json, &params_to_arrays(params))
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<Model> {
    let path = path.as_ref();
    let (meta_json, arrays) = read_checkpoint(path)?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_json).map_err(|e| Error::Container {
        path: path.display().to_string(),
        msg: format!("bad metadata: {e}"),
    })?;
    let vocab = Vocab::from_tokens(meta.vocab);
    let params = params_from_arrays(arrays);
    let missing = |what: &str| Error::Container {
        path: path.display().to_string(),
        msg: format!("checkpoint metadata missing {what}"),
    };
    match meta.kind {
        ModelKind::Cnn => {
            let config = meta.cnn_config.ok_or_else(|| missing("cnn_config"))?;
            Ok(Model::Cnn(CnnModel::from_parts(config, vocab, params)?))
        }
        ModelKind::CnnSubtree => {
            let config = meta.cnn_config.ok_or_else(|| missing("cnn_config"))?;
            let cnn = CnnModel::from_parts(config, vocab, params)?;
            let (n_docs, df) = meta.idf.ok_or_else(|| missing("idf"))?;
            Ok(Model::CnnSubtree(CnnSubtreeModel {
                cnn,
                lr: meta.lr.ok_or_else(|| missing("lr"))?,
                subtree: meta.subtree.ok_or_else(|| missing("subtree"))?,
                idf: IdfTable::from_entries(n_docs, df),
            }))
        }
        ModelKind::Oneway | ModelKind::Ap => {
            let config = meta.gru_config.ok_or_else(|| missing("gru_config"))?;
            let variant = match meta.kind {
                ModelKind::Oneway => AttentionVariant::OneWay,
                _ => AttentionVariant::AttentivePooling,
            };
            Ok(Model::Attention(AttentionModel::from_parts(
                variant, config, vocab, params,
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn vocab_reserves_zero_row() {
        let v = Vocab::from_token_lists([tokenize("a b a c").as_slice()]);
        assert_eq!(v.rows(), 4);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("zzz"), 0);
        let rebuilt = Vocab::from_tokens(v.tokens());
        assert_eq!(rebuilt.id("c"), v.id("c"));
    }

    #[test]
    fn seeded_embeddings_zero_pad_row() {
        let v = Vocab::from_token_lists([tokenize("x y").as_slice()]);
        let m = build_embedding_matrix(&v, &EmbeddingSource::seeded(5), 5, 1).unwrap();
        assert_eq!(m.shape(), &[3, 5]);
        assert!(m.row(0).iter().all(|&x| x == 0.0));
        assert!(m.row(1).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn table_embeddings_resolve_by_token() {
        let mut table = EmbeddingTable::new(2);
        table.insert("x", vec![1.0, 2.0]).unwrap();
        let v = Vocab::from_token_lists([tokenize("x y").as_slice()]);
        let m = build_embedding_matrix(&v, &EmbeddingSource::Table(&table), 2, 1).unwrap();
        assert_eq!(m.row(v.id("x")), &[1.0, 2.0]);
        assert_eq!(m.row(v.id("y")), &[0.0, 0.0]); // OOV in the table
    }

    #[test]
    fn train_config_validation() {
        let mut c = TrainConfig::with_seed(1);
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::with_seed(1);
        c.negatives_per_positive = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn at_decide_threshold_rule() {
        let entries = vec![
            RunEntry {
                question_id: "q".into(),
                section_id: "s".into(),
                sent_index: 0,
                score: 0.3,
            },
            RunEntry {
                question_id: "q".into(),
                section_id: "s".into(),
                sent_index: 1,
                score: 0.7,
            },
        ];
        let fired = at_decide(&entries, 0.5).unwrap();
        assert_eq!(fired.sent_index, 1);
        assert!(at_decide(&entries, 0.7).is_none()); // strict inequality
        assert!(at_decide(&entries, 0.9).is_none());
        assert!(at_decide(&[], 0.0).is_none());
    }
}
