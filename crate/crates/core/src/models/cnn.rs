//! Convolutional ranker: question and answer embeddings stacked into one
//! image, convolved with full-width filters, pooled per side, and scored
//! through a hidden layer and a sigmoid output. Trained with binary
//! cross-entropy over every (question, candidate) pair.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Split, Token};
use crate::error::{Error, Result};
use crate::tensor::{
    orthogonal_init, rmsprop_step, Array, Graph, NodeId, ParamStore, RmspropState, Scalar,
};

use super::{EmbeddingSource, TrainConfig, TrainReport, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Tokens kept per side; the image holds 2 * max_len rows.
    pub max_len: usize,
    pub emb_dim: usize,
    pub filter_heights: Vec<usize>,
    pub filters_per_height: usize,
    pub hidden_dim: usize,
    /// The emb+ variant retrains embedding rows of seen tokens.
    pub trainable_embeddings: bool,
    pub pooling: Pooling,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            max_len: 40,
            emb_dim: 300,
            filter_heights: vec![2, 3],
            filters_per_height: 100,
            hidden_dim: 200,
            trainable_embeddings: false,
            pooling: Pooling::Max,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0
            || self.emb_dim == 0
            || self.filter_heights.is_empty()
            || self.filters_per_height == 0
            || self.hidden_dim == 0
        {
            return Err(Error::validation("CNN configuration values must be positive"));
        }
        if let Some(&h) = self.filter_heights.iter().find(|&&h| h == 0 || h > self.max_len) {
            return Err(Error::validation(format!(
                "filter height {h} must be in 1..={} so both sides have at least one window",
                self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocab: Vocab,
    pub params: ParamStore,
}

/// Graph handles for the CNN parameters, in store order.
pub struct CnnGraphParams {
    pub emb: NodeId,
    pub conv: Vec<(NodeId, NodeId)>,
    pub hidden_w: NodeId,
    pub hidden_b: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
}

impl CnnModel {
    /// Fresh model with orthogonal conv/dense weights and zero biases.
    pub fn init(config: CnnConfig, vocab: Vocab, embeddings: Array<f32>, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.shape() != [vocab.rows(), config.emb_dim] {
            return Err(Error::Shape {
                op: "cnn init",
                details: format!(
                    "embedding matrix {:?} vs vocab rows {} x dim {}",
                    embeddings.shape(),
                    vocab.rows(),
                    config.emb_dim
                ),
            });
        }
        let mut params = ParamStore::new();
        params.insert("emb", embeddings, true);
        let f = config.filters_per_height;
        for (i, &h) in config.filter_heights.iter().enumerate() {
            let flat = orthogonal_init(f, h * config.emb_dim, seed.wrapping_add(1 + i as u64));
            let w = Array::from_vec(&[f, h, config.emb_dim], flat.data().to_vec())?;
            params.insert(format!("conv_w_{h}"), w, false);
            params.insert(format!("conv_b_{h}"), Array::zeros(&[f]), false);
        }
        let pooled = 2 * config.filter_heights.len() * f;
        params.insert(
            "hidden_w",
            orthogonal_init(config.hidden_dim, pooled, seed.wrapping_add(101)),
            false,
        );
        params.insert("hidden_b", Array::zeros(&[config.hidden_dim]), false);
        let out = orthogonal_init(1, config.hidden_dim, seed.wrapping_add(102));
        params.insert("out_w", Array::vector(out.data().to_vec()), false);
        params.insert("out_b", Array::zeros(&[]), false);
        Ok(CnnModel {
            config,
            vocab,
            params,
        })
    }

    pub fn from_parts(config: CnnConfig, vocab: Vocab, params: ParamStore) -> Result<Self> {
        config.validate()?;
        Ok(CnnModel {
            config,
            vocab,
            params,
        })
    }

    pub fn insert_params<T: Scalar>(&self, g: &mut Graph<T>) -> CnnGraphParams {
        let get = |g: &mut Graph<T>, name: &str| -> NodeId {
            let arr = self.params.get(name).expect("cnn parameter present");
            g.leaf(Array::from_f64(&arr.to_f64()))
        };
        let emb = get(g, "emb");
        let conv = self
            .config
            .filter_heights
            .iter()
            .map(|h| (get(g, &format!("conv_w_{h}")), get(g, &format!("conv_b_{h}"))))
            .collect();
        CnnGraphParams {
            emb,
            conv,
            hidden_w: get(g, "hidden_w"),
            hidden_b: get(g, "hidden_b"),
            out_w: get(g, "out_w"),
            out_b: get(g, "out_b"),
        }
    }

    /// Row indices for the 2 * max_len image: question rows then answer
    /// rows, each truncated to max_len and padded with the zero row.
    pub fn image_ids(&self, q: &[Token], a: &[Token]) -> Vec<usize> {
        let l = self.config.max_len;
        let mut ids = Vec::with_capacity(2 * l);
        for side in [q, a] {
            let mut n = 0;
            for tok in side.iter().take(l) {
                ids.push(self.vocab.id(&tok.lower));
                n += 1;
            }
            ids.resize(ids.len() + (l - n), 0);
        }
        ids
    }

    /// Pre-sigmoid score. Convolution windows that straddle the question /
    /// answer boundary belong to neither side's pooling region.
    pub fn logit<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &CnnGraphParams,
        image_ids: &[usize],
    ) -> Result<NodeId> {
        let l = self.config.max_len;
        let image = g.gather_rows(p.emb, image_ids)?;
        let mut pooled = Vec::new();
        let mut a_pooled = Vec::new();
        for (&h, &(w, b)) in self.config.filter_heights.iter().zip(&p.conv) {
            let conv = g.conv2d_valid(image, w, b)?;
            let act = g.tanh(conv)?;
            let q_region = g.slice_rows(act, 0, l - h + 1)?;
            let a_region = g.slice_rows(act, l, 2 * l - h + 1)?;
            let (qv, av) = match self.config.pooling {
                Pooling::Max => (g.max_axis(q_region, 0)?, g.max_axis(a_region, 0)?),
                Pooling::Avg => (g.mean_axis(q_region, 0)?, g.mean_axis(a_region, 0)?),
            };
            pooled.push(qv);
            a_pooled.push(av);
        }
        pooled.extend(a_pooled);
        let sentence_vectors = g.concat0(&pooled)?;
        let hidden_lin = g.matvec(p.hidden_w, sentence_vectors)?;
        let hidden_pre = g.add(hidden_lin, p.hidden_b)?;
        let hidden = g.tanh(hidden_pre)?;
        let out_lin = g.dot(p.out_w, hidden)?;
        g.add(out_lin, p.out_b)
    }

    /// Sigmoid score in (0, 1).
    pub fn score(&self, q: &[Token], a: &[Token]) -> Result<f64> {
        if q.is_empty() || a.is_empty() {
            return Err(Error::validation(
                "cnn scoring requires a non-empty question and answer",
            ));
        }
        let mut g = Graph::<f32>::new();
        let p = self.insert_params(&mut g);
        let ids = self.image_ids(q, a);
        let logit = self.logit(&mut g, &p, &ids)?;
        let s = g.sigmoid(logit)?;
        Ok(g.value(s).scalar_value() as f64)
    }
}

pub(super) struct CnnExample {
    pub image_ids: Vec<usize>,
    pub label: f64,
}

fn collect_examples(dataset: &Dataset, split: Split, model: &CnnModel) -> Result<Vec<CnnExample>> {
    let mut out = Vec::new();
    for q in dataset.split_questions(split) {
        for cand in dataset.candidates(&q.id) {
            let sentence = dataset
                .sections
                .sentence(&cand.section_id, cand.sent_index)
                .ok_or_else(|| Error::validation("candidate resolves to no sentence"))?;
            if q.tokens.is_empty() || sentence.tokens.is_empty() {
                continue;
            }
            out.push(CnnExample {
                image_ids: model.image_ids(&q.tokens, &sentence.tokens),
                label: if cand.answer { 1.0 } else { 0.0 },
            });
        }
    }
    if out.is_empty() {
        return Err(Error::validation(format!(
            "no training examples in split {}",
            split.label()
        )));
    }
    Ok(out)
}

/// Train with RMSProp on mean binary cross-entropy. Deterministic for a
/// fixed seed: example order, parameter init, and updates are all seeded.
pub fn train_cnn(
    dataset: &Dataset,
    split: Split,
    config: CnnConfig,
    train: &TrainConfig,
    embeddings: &EmbeddingSource<'_>,
) -> Result<(CnnModel, TrainReport)> {
    train.validate()?;
    let vocab = Vocab::from_dataset(dataset, split);
    let emb = super::build_embedding_matrix(&vocab, embeddings, config.emb_dim, train.seed)?;
    let config = CnnConfig {
        emb_dim: emb.cols(),
        ..config
    };
    let model = CnnModel::init(config, vocab, emb, train.seed)?;
    train_cnn_from(model, dataset, split, train)
}

pub fn train_cnn_from(
    mut model: CnnModel,
    dataset: &Dataset,
    split: Split,
    train: &TrainConfig,
) -> Result<(CnnModel, TrainReport)> {
    let examples = collect_examples(dataset, split, &model)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed.wrapping_add(0x5eed));
    let mut opt = RmspropState::with_lr(train.learning_rate);
    let mut report = TrainReport::default();

    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(train.batch_size) {
            let mut g = Graph::<f32>::new();
            let p = model.insert_params(&mut g);
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &examples[i];
                let logit = model.logit(&mut g, &p, &ex.image_ids)?;
                losses.push(g.bce_with_logits(logit, ex.label)?);
            }
            let stacked = g.stack_scalars(&losses)?;
            let loss = g.mean(stacked)?;
            g.backward(loss)?;

            let mut grads: IndexMap<String, Array<f32>> = IndexMap::new();
            if model.config.trainable_embeddings {
                let mut ge = g.grad(p.emb);
                // The zero row backs padding and unknown tokens; keep it fixed.
                for v in ge.row_mut(0) {
                    *v = 0.0;
                }
                grads.insert("emb".to_string(), ge);
            }
            for (&h, &(w, b)) in model.config.filter_heights.iter().zip(&p.conv) {
                grads.insert(format!("conv_w_{h}"), g.grad(w));
                grads.insert(format!("conv_b_{h}"), g.grad(b));
            }
            grads.insert("hidden_w".to_string(), g.grad(p.hidden_w));
            grads.insert("hidden_b".to_string(), g.grad(p.hidden_b));
            grads.insert("out_w".to_string(), g.grad(p.out_w));
            grads.insert("out_b".to_string(), g.grad(p.out_b));

            rmsprop_step(&mut opt, &mut model.params, &grads, 0.0)?;
            epoch_loss += g.value(loss).scalar_value() as f64;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite { op: "train_cnn" });
        }
        report.epoch_losses.push(mean);
        let _ = epoch;
    }
    Ok((model, report))
}
