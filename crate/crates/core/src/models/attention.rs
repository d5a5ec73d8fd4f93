//! Attention rankers over the bidirectional GRU encoder. Attentive pooling
//! aligns question and answer positions through a bilinear similarity
//! matrix; one-way attention replaces the question matrix with its last
//! encoder state. Both train on the pairwise hinge ranking loss with
//! frozen embeddings.

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

use super::gru::{encode, init_direction, insert_direction, GruConfig, GruDirNodes};
use super::{EmbeddingSource, TrainConfig, TrainReport, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionVariant {
    OneWay,
    #[serde(rename = "ap")]
    AttentivePooling,
}

/// Bilinear alignment H = tanh(Q U At), pooled row-wise and column-wise
/// into attention weights; returns the cosine of the attended
/// representations, in [-1, 1].
pub fn ap_score_graph<T: Scalar>(
    g: &mut Graph<T>,
    q: NodeId,
    a: NodeId,
    u: NodeId,
) -> Result<NodeId> {
    let qu = g.matmul(q, u)?;
    let at = g.transpose(a)?;
    let h_pre = g.matmul(qu, at)?;
    let h = g.tanh(h_pre)?;
    let hq = g.max_axis(h, 1)?;
    let ha = g.max_axis(h, 0)?;
    let sq = g.softmax(hq, 0)?;
    let sa = g.softmax(ha, 0)?;
    let qt = g.transpose(q)?;
    let rq = g.matvec(qt, sq)?;
    let at2 = g.transpose(a)?;
    let ra = g.matvec(at2, sa)?;
    g.cosine(rq, ra)
}

/// One-way attention: importances h = tanh(A U q_last), softmax over the
/// answer positions only, question represented by its last encoder state.
pub fn oneway_score_graph<T: Scalar>(
    g: &mut Graph<T>,
    q_last: NodeId,
    a: NodeId,
    u: NodeId,
) -> Result<NodeId> {
    let au = g.matmul(a, u)?;
    let h_pre = g.matvec(au, q_last)?;
    let h = g.tanh(h_pre)?;
    let sa = g.softmax(h, 0)?;
    let at = g.transpose(a)?;
    let ra = g.matvec(at, sa)?;
    g.cosine(q_last, ra)
}

/// max(0, margin - s_pos + s_neg).
pub fn hinge_loss(s_pos: f64, s_neg: f64, margin: f64) -> f64 {
    (margin - s_pos + s_neg).max(0.0)
}

#[derive(Debug, Clone)]
pub struct AttentionModel {
    pub variant: AttentionVariant,
    pub config: GruConfig,
    pub vocab: Vocab,
    /// "emb" (frozen), "fwd_*" / "bwd_*" direction parameters, and "u".
    pub params: ParamStore,
}

pub struct AttentionGraphParams {
    pub fwd: GruDirNodes,
    pub bwd: GruDirNodes,
    pub u: NodeId,
}

impl AttentionModel {
    pub fn init(
        variant: AttentionVariant,
        config: GruConfig,
        vocab: Vocab,
        embeddings: Array<f32>,
        seed: u64,
    ) -> Result<Self> {
        if config.h == 0 || config.emb_dim == 0 {
            return Err(Error::validation("GRU configuration values must be positive"));
        }
        if embeddings.shape() != [vocab.rows(), config.emb_dim] {
            return Err(Error::Shape {
                op: "attention init",
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
        init_direction(&mut params, "fwd", &config, seed.wrapping_add(10));
        init_direction(&mut params, "bwd", &config, seed.wrapping_add(20));
        params.insert("u", orthogonal_init(config.c(), config.c(), seed.wrapping_add(30)), false);
        Ok(AttentionModel {
            variant,
            config,
            vocab,
            params,
        })
    }

    pub fn from_parts(
        variant: AttentionVariant,
        config: GruConfig,
        vocab: Vocab,
        params: ParamStore,
    ) -> Self {
        AttentionModel {
            variant,
            config,
            vocab,
            params,
        }
    }

    pub fn insert_params<T: Scalar>(&self, g: &mut Graph<T>) -> AttentionGraphParams {
        let fwd = insert_direction(g, &self.params, "fwd");
        let bwd = insert_direction(g, &self.params, "bwd");
        let u_arr = self.params.get("u").expect("bilinear parameter present");
        let u = g.leaf(Array::from_f64(&u_arr.to_f64()));
        AttentionGraphParams { fwd, bwd, u }
    }

    /// Frozen embedding rows as constant leaves, one per token (OOV -> zeros).
    pub fn token_leaves<T: Scalar>(&self, g: &mut Graph<T>, tokens: &[Token]) -> Vec<NodeId> {
        let emb = self.params.get("emb").expect("embedding matrix present");
        tokens
            .iter()
            .map(|t| {
                let row = emb.row(self.vocab.id(&t.lower));
                let data: Vec<T> = row.iter().map(|&v| T::from_f64(v as f64)).collect();
                g.leaf(Array::vector(data))
            })
            .collect()
    }

    pub fn encode_tokens<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &AttentionGraphParams,
        tokens: &[Token],
    ) -> Result<NodeId> {
        if tokens.is_empty() {
            return Err(Error::validation("cannot encode an empty token list"));
        }
        let xs = self.token_leaves(g, tokens);
        encode(g, &p.fwd, &p.bwd, &xs, self.config.h)
    }

    pub fn score_graph<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &AttentionGraphParams,
        q_tokens: &[Token],
        a_tokens: &[Token],
    ) -> Result<NodeId> {
        let q = self.encode_tokens(g, p, q_tokens)?;
        let a = self.encode_tokens(g, p, a_tokens)?;
        match self.variant {
            AttentionVariant::AttentivePooling => ap_score_graph(g, q, a, p.u),
            AttentionVariant::OneWay => {
                let rows = g.value(q).rows();
                let last = g.slice_rows(q, rows - 1, rows)?;
                let q_last = g.reshape(last, &[self.config.c()])?;
                oneway_score_graph(g, q_last, a, p.u)
            }
        }
    }

    /// Cosine score in [-1, 1].
    pub fn score(&self, q_tokens: &[Token], a_tokens: &[Token]) -> Result<f64> {
        let mut g = Graph::<f32>::new();
        let p = self.insert_params(&mut g);
        let s = self.score_graph(&mut g, &p, q_tokens, a_tokens)?;
        Ok(g.value(s).scalar_value() as f64)
    }

    fn grads_for_step<T: Scalar>(
        &self,
        g: &Graph<f32>,
        p: &AttentionGraphParams,
    ) -> IndexMap<String, Array<f32>> {
        let _ = std::marker::PhantomData::<T>;
        let mut grads = IndexMap::new();
        let dir = |nodes: &GruDirNodes| -> [NodeId; 9] {
            [
                nodes.wz, nodes.wr, nodes.wn, nodes.uz, nodes.ur, nodes.un, nodes.bz, nodes.br,
                nodes.bn,
            ]
        };
        for (prefix, nodes) in [("fwd", &p.fwd), ("bwd", &p.bwd)] {
            for (part, id) in super::gru::GRU_PARTS.iter().zip(dir(nodes)) {
                grads.insert(format!("{prefix}_{part}"), g.grad(id));
            }
        }
        grads.insert("u".to_string(), g.grad(p.u));
        grads
    }
}

struct TrainPair {
    q_idx: usize,
    pos: usize,
    neg: usize,
}

/// Train by minimizing the mean pairwise hinge loss over sampled
/// (positive, negative) candidate pairs. Questions without negatives are
/// skipped with a warning in the report; embeddings stay frozen.
pub fn train_attention(
    dataset: &Dataset,
    split: Split,
    variant: AttentionVariant,
    config: GruConfig,
    train: &TrainConfig,
    embeddings: &EmbeddingSource<'_>,
) -> Result<(AttentionModel, TrainReport)> {
    train.validate()?;
    let vocab = Vocab::from_dataset(dataset, split);
    let emb = super::build_embedding_matrix(&vocab, embeddings, config.emb_dim, train.seed)?;
    let config = GruConfig {
        emb_dim: emb.cols(),
        ..config
    };
    let model = AttentionModel::init(variant, config, vocab, emb, train.seed)?;
    train_attention_from(model, dataset, split, train)
}

pub fn train_attention_from(
    mut model: AttentionModel,
    dataset: &Dataset,
    split: Split,
    train: &TrainConfig,
) -> Result<(AttentionModel, TrainReport)> {
    let questions = dataset.split_questions(split);
    let mut report = TrainReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed.wrapping_add(0xa77e));

    // Candidate sentence token lists, resolved once.
    let mut pairs: Vec<TrainPair> = Vec::new();
    let mut sentences: Vec<Vec<Vec<Token>>> = Vec::new(); // per question: candidate tokens
    let mut labels: Vec<Vec<bool>> = Vec::new();
    for (qi, q) in questions.iter().enumerate() {
        let cands = dataset.candidates(&q.id);
        let mut toks = Vec::with_capacity(cands.len());
        let mut labs = Vec::with_capacity(cands.len());
        for c in cands {
            let s = dataset
                .sections
                .sentence(&c.section_id, c.sent_index)
                .ok_or_else(|| Error::validation("candidate resolves to no sentence"))?;
            toks.push(s.tokens.clone());
            labs.push(c.answer);
        }
        let positives: Vec<usize> = (0..labs.len()).filter(|&i| labs[i]).collect();
        let negatives: Vec<usize> = (0..labs.len())
            .filter(|&i| !labs[i] && !toks[i].is_empty())
            .collect();
        if positives.is_empty() || negatives.is_empty() {
            report
                .warnings
                .push(format!("question {} skipped: no usable positive/negative pair", q.id));
            sentences.push(toks);
            labels.push(labs);
            continue;
        }
        for &pos in &positives {
            if toks[pos].is_empty() {
                continue;
            }
            let take = train.negatives_per_positive.unwrap_or(negatives.len());
            let mut pool = negatives.clone();
            pool.shuffle(&mut rng);
            for &neg in pool.iter().take(take) {
                pairs.push(TrainPair { q_idx: qi, pos, neg });
            }
        }
        sentences.push(toks);
        labels.push(labs);
    }
    if pairs.is_empty() {
        return Err(Error::validation("no trainable pairs in the split"));
    }

    let mut opt = RmspropState::with_lr(train.learning_rate);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(train.batch_size) {
            let mut g = Graph::<f32>::new();
            let p = model.insert_params(&mut g);
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let pair = &pairs[i];
                let q_tokens = &questions[pair.q_idx].tokens;
                let s_pos = model.score_graph(&mut g, &p, q_tokens, &sentences[pair.q_idx][pair.pos])?;
                let s_neg = model.score_graph(&mut g, &p, q_tokens, &sentences[pair.q_idx][pair.neg])?;
                losses.push(g.hinge(s_pos, s_neg, model.config.margin)?);
            }
            let stacked = g.stack_scalars(&losses)?;
            let loss = g.mean(stacked)?;
            g.backward(loss)?;
            let grads = model.grads_for_step::<f32>(&g, &p);
            rmsprop_step(&mut opt, &mut model.params, &grads, model.config.l2)?;
            epoch_loss += g.value(loss).scalar_value() as f64;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite { op: "train_attention" });
        }
        report.epoch_losses.push(mean);
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::tensor::{gaussian_matrix, GRAD_CHECK_H, GRAD_CHECK_TOL};

    fn tiny_model(variant: AttentionVariant, seed: u64) -> AttentionModel {
        let vocab = Vocab::from_token_lists([
            tokenize("what is the premiere date").as_slice(),
            tokenize("the premiere aired in september").as_slice(),
            tokenize("ratings were strong").as_slice(),
        ]);
        let config = GruConfig {
            h: 3,
            emb_dim: 4,
            margin: 0.5,
            l2: 0.0,
        };
        let mut emb = gaussian_matrix(vocab.rows(), 4, 0.4, seed.wrapping_add(3));
        for v in emb.row_mut(0) {
            *v = 0.0;
        }
        AttentionModel::init(variant, config, vocab, emb, seed).unwrap()
    }

    #[test]
    fn scores_stay_in_cosine_range() {
        for variant in [AttentionVariant::AttentivePooling, AttentionVariant::OneWay] {
            let m = tiny_model(variant, 5);
            let s = m
                .score(&tokenize("what is the premiere date"), &tokenize("ratings were strong"))
                .unwrap();
            assert!((-1.0..=1.0).contains(&s), "{s}");
        }
    }

    #[test]
    fn identical_singleton_inputs_score_one() {
        // |q| = |a| = 1 with U = I and identical embeddings: H = tanh(q U qt)
        // is 1x1, both attention vectors are [1], so cosine(q, q) = 1.
        let mut g = Graph::<f64>::new();
        let q = g.leaf(Array::matrix(1, 2, vec![0.6, 0.8]).unwrap());
        let u = g.leaf(Array::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let s = ap_score_graph(&mut g, q, q, u).unwrap();
        assert!((g.value(s).scalar_value() - 1.0).abs() < 1e-12);

        let mut g = Graph::<f64>::new();
        let q_last = g.leaf(Array::vector(vec![0.6, 0.8]));
        let a = g.leaf(Array::matrix(1, 2, vec![0.6, 0.8]).unwrap());
        let u = g.leaf(Array::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let s = oneway_score_graph(&mut g, q_last, a, u).unwrap();
        assert!((g.value(s).scalar_value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oneway_singleton_answer_attends_fully() {
        let mut g = Graph::<f64>::new();
        let q_last = g.leaf(Array::vector(vec![0.2, -0.4]));
        let a = g.leaf(Array::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let u = g.leaf(Array::matrix(2, 2, vec![0.3, 0.1, -0.2, 0.5]).unwrap());
        let au = g.matmul(a, u).unwrap();
        let h_pre = g.matvec(au, q_last).unwrap();
        let h = g.tanh(h_pre).unwrap();
        let sa = g.softmax(h, 0).unwrap();
        assert_eq!(g.value(sa).data(), &[1.0]);
        let s = oneway_score_graph(&mut g, q_last, a, u).unwrap();
        // r_a equals the single answer row, so the score is cosine(q, a0).
        let want = (0.2 * 1.0 + -0.4 * 2.0)
            / ((0.2f64 * 0.2 + 0.4 * 0.4).sqrt() * (1.0f64 + 4.0).sqrt());
        assert!((g.value(s).scalar_value() - want).abs() < 1e-12);
    }

    /// Straight-line dense-algebra evaluation of the attentive-pooling
    /// equations in plain f64.
    fn ap_oracle(q: &[Vec<f64>], a: &[Vec<f64>], u: &[Vec<f64>]) -> f64 {
        let c = u.len();
        let h: Vec<Vec<f64>> = q
            .iter()
            .map(|qi| {
                a.iter()
                    .map(|aj| {
                        let mut acc = 0.0;
                        for x in 0..c {
                            for y in 0..c {
                                acc += qi[x] * u[x][y] * aj[y];
                            }
                        }
                        acc.tanh()
                    })
                    .collect()
            })
            .collect();
        let hq: Vec<f64> = h
            .iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let ha: Vec<f64> = (0..a.len())
            .map(|j| h.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let softmax = |v: &[f64]| -> Vec<f64> {
            let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        };
        let sq = softmax(&hq);
        let sa = softmax(&ha);
        let weighted = |rows: &[Vec<f64>], w: &[f64]| -> Vec<f64> {
            (0..c)
                .map(|k| rows.iter().zip(w).map(|(r, &wi)| r[k] * wi).sum())
                .collect()
        };
        let rq = weighted(q, &sq);
        let ra = weighted(a, &sa);
        let dot: f64 = rq.iter().zip(&ra).map(|(x, y)| x * y).sum();
        let nq: f64 = rq.iter().map(|x| x * x).sum::<f64>().sqrt();
        let na: f64 = ra.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (nq * na)
    }

    #[test]
    fn ap_matches_dense_algebra_oracle() {
        let c = 4;
        let qm = gaussian_matrix(3, c, 0.7, 51).to_f64();
        let am = gaussian_matrix(4, c, 0.7, 52).to_f64();
        let um = gaussian_matrix(c, c, 0.7, 53).to_f64();
        let rows = |m: &Array<f64>| -> Vec<Vec<f64>> {
            (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
        };
        let want = ap_oracle(&rows(&qm), &rows(&am), &rows(&um));
        let mut g = Graph::<f64>::new();
        let q = g.leaf(qm);
        let a = g.leaf(am);
        let u = g.leaf(um);
        let s = ap_score_graph(&mut g, q, a, u).unwrap();
        assert!((g.value(s).scalar_value() - want).abs() < 1e-12);
    }

    #[test]
    fn ap_transpose_symmetry() {
        let c = 4;
        let qm = gaussian_matrix(3, c, 0.6, 61);
        let am = gaussian_matrix(5, c, 0.6, 62);
        let um = gaussian_matrix(c, c, 0.6, 63);
        let fwd = {
            let mut g = Graph::<f32>::new();
            let q = g.leaf(qm.clone());
            let a = g.leaf(am.clone());
            let u = g.leaf(um.clone());
            let s = ap_score_graph(&mut g, q, a, u).unwrap();
            g.value(s).scalar_value()
        };
        let bwd = {
            let mut g = Graph::<f32>::new();
            let a = g.leaf(am);
            let q = g.leaf(qm);
            let u = g.leaf(um);
            let ut = g.transpose(u).unwrap();
            let s = ap_score_graph(&mut g, a, q, ut).unwrap();
            g.value(s).scalar_value()
        };
        assert!((fwd - bwd).abs() < 1e-6, "{fwd} vs {bwd}");
    }

    #[test]
    fn hinge_loss_values() {
        assert_eq!(hinge_loss(0.9, 0.4, 0.5), 0.0);
        assert_eq!(hinge_loss(0.3, 0.3, 0.5), 0.5);
        assert_eq!(hinge_loss(-0.2, 0.4, 0.5), 1.1);
    }

    #[test]
    fn hinge_gradient_of_u_passes_grad_check() {
        // Loss = hinge(ap(q, a_pos), ap(q, a_neg)) with the margin active.
        let c = 3;
        let qm = gaussian_matrix(2, c, 0.6, 71).to_f64();
        let pm = gaussian_matrix(3, c, 0.6, 72).to_f64();
        let nm = gaussian_matrix(2, c, 0.6, 73).to_f64();
        let um = gaussian_matrix(c, c, 0.6, 74).to_f64();
        let report = crate::tensor::grad_check(
            &[um],
            |g, leaves| {
                let q = g.leaf(qm.clone());
                let ap = g.leaf(pm.clone());
                let an = g.leaf(nm.clone());
                let s_pos = ap_score_graph(g, q, ap, leaves[0])?;
                let s_neg = ap_score_graph(g, q, an, leaves[0])?;
                g.hinge(s_pos, s_neg, 2.0) // wide margin keeps the gate active
            },
            GRAD_CHECK_H,
            GRAD_CHECK_TOL,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }
}
