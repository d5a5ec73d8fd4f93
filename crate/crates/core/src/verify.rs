//! Finite-difference verification of the model losses on seeded random
//! fixtures, shared by the `gradcheck` command and the acceptance suite.
//!
//! Fixtures are screened so the check is well-posed: hinge fixtures must sit
//! clear of the kink, since central differences are meaningless across a
//! non-differentiable point.

use crate::corpus::tokenize;
use crate::error::Result;
use crate::models::{
    ap_score_graph, oneway_score_graph, AttentionModel, AttentionVariant, CnnConfig, CnnModel,
    GruConfig, Pooling, Vocab,
};
use crate::tensor::{
    gaussian_matrix, grad_check, Array, GradCheckReport, Graph, NodeId, GRAD_CHECK_H,
    GRAD_CHECK_TOL,
};

#[derive(Debug)]
pub struct LossCheck {
    pub name: String,
    pub seed: u64,
    pub report: GradCheckReport,
}

impl LossCheck {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn fixture_vocab() -> Vocab {
    Vocab::from_token_lists([
        tokenize("what city holds the zqkey record").as_slice(),
        tokenize("the zqkey record stands in the north").as_slice(),
        tokenize("an unrelated filler sentence sits here").as_slice(),
    ])
}

fn cnn_fixture(seed: u64, trainable_embeddings: bool) -> Result<(CnnModel, Vec<usize>, f64)> {
    let config = CnnConfig {
        max_len: 6,
        emb_dim: 5,
        filter_heights: vec![2, 3],
        filters_per_height: 3,
        hidden_dim: 4,
        trainable_embeddings,
        pooling: Pooling::Max,
    };
    let vocab = fixture_vocab();
    let mut emb = gaussian_matrix(vocab.rows(), config.emb_dim, 0.3, seed.wrapping_add(900));
    for v in emb.row_mut(0) {
        *v = 0.0;
    }
    let model = CnnModel::init(config, vocab, emb, seed)?;
    let q = tokenize("what city holds the zqkey record");
    let a = tokenize("the zqkey record stands in the north");
    let ids = model.image_ids(&q, &a);
    let label = if seed % 2 == 0 { 1.0 } else { 0.0 };
    Ok((model, ids, label))
}

/// Gradient of the CNN binary cross-entropy with respect to every trainable
/// parameter (embeddings included when the fixture is an emb+ variant).
pub fn check_cnn_loss(seed: u64, trainable_embeddings: bool) -> Result<LossCheck> {
    let (model, image_ids, label) = cnn_fixture(seed, trainable_embeddings)?;
    let names = model.params.names();
    let arrays: Vec<Array<f64>> = names
        .iter()
        .map(|n| model.params.get(n).unwrap().to_f64())
        .collect();
    let config = model.config.clone();
    let report = grad_check(
        &arrays,
        |g, leaves| {
            let p = crate::models::CnnGraphParams {
                emb: leaves[0],
                conv: config
                    .filter_heights
                    .iter()
                    .enumerate()
                    .map(|(i, _)| (leaves[1 + 2 * i], leaves[2 + 2 * i]))
                    .collect(),
                hidden_w: leaves[1 + 2 * config.filter_heights.len()],
                hidden_b: leaves[2 + 2 * config.filter_heights.len()],
                out_w: leaves[3 + 2 * config.filter_heights.len()],
                out_b: leaves[4 + 2 * config.filter_heights.len()],
            };
            let logit = model.logit(g, &p, &image_ids)?;
            g.bce_with_logits(logit, label)
        },
        GRAD_CHECK_H,
        GRAD_CHECK_TOL,
    )?;
    Ok(LossCheck {
        name: format!(
            "cnn binary cross-entropy ({})",
            if trainable_embeddings { "emb+" } else { "emb" }
        ),
        seed,
        report,
    })
}

struct HingeFixture {
    q: Array<f64>,
    pos: Array<f64>,
    neg: Array<f64>,
    u: Array<f64>,
    margin: f64,
}

fn hinge_fixture(seed: u64, c: usize) -> HingeFixture {
    HingeFixture {
        q: gaussian_matrix(3, c, 0.6, seed.wrapping_add(1)).to_f64(),
        pos: gaussian_matrix(4, c, 0.6, seed.wrapping_add(2)).to_f64(),
        neg: gaussian_matrix(3, c, 0.6, seed.wrapping_add(3)).to_f64(),
        u: gaussian_matrix(c, c, 0.6, seed.wrapping_add(4)).to_f64(),
        margin: 0.5,
    }
}

fn hinge_violation<F>(f: &HingeFixture, score: F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, NodeId, NodeId, NodeId) -> Result<NodeId>,
{
    let mut g = Graph::<f64>::new();
    let q = g.leaf(f.q.clone());
    let pos = g.leaf(f.pos.clone());
    let neg = g.leaf(f.neg.clone());
    let u = g.leaf(f.u.clone());
    let s_pos = score(&mut g, q, pos, u)?;
    let s_neg = score(&mut g, q, neg, u)?;
    Ok(f.margin - g.value(s_pos).scalar_value() + g.value(s_neg).scalar_value())
}

/// Seeds whose hinge sits safely away from the kink, so finite differences
/// are valid: scan deterministically from `seed` upward.
fn usable_hinge_seed<F>(mut seed: u64, score: &F) -> Result<(u64, HingeFixture)>
where
    F: Fn(&mut Graph<f64>, NodeId, NodeId, NodeId) -> Result<NodeId>,
{
    for _ in 0..200 {
        let f = hinge_fixture(seed, 4);
        let v = hinge_violation(&f, score)?;
        if v.abs() > 0.05 {
            return Ok((seed, f));
        }
        seed = seed.wrapping_add(1);
    }
    Err(crate::error::Error::validation(
        "no hinge fixture clear of the kink found in 200 seeds",
    ))
}

fn check_hinge_loss(name: &str, seed: u64, variant: AttentionVariant) -> Result<LossCheck> {
    let score = move |g: &mut Graph<f64>, q: NodeId, a: NodeId, u: NodeId| match variant {
        AttentionVariant::AttentivePooling => ap_score_graph(g, q, a, u),
        AttentionVariant::OneWay => {
            let rows = g.value(q).rows();
            let cols = g.value(q).cols();
            let last = g.slice_rows(q, rows - 1, rows)?;
            let q_last = g.reshape(last, &[cols])?;
            oneway_score_graph(g, q_last, a, u)
        }
    };
    let (seed, fixture) = usable_hinge_seed(seed, &score)?;
    let report = grad_check(
        &[
            fixture.q.clone(),
            fixture.pos.clone(),
            fixture.neg.clone(),
            fixture.u.clone(),
        ],
        |g, leaves| {
            let s_pos = score(g, leaves[0], leaves[1], leaves[3])?;
            let s_neg = score(g, leaves[0], leaves[2], leaves[3])?;
            g.hinge(s_pos, s_neg, fixture.margin)
        },
        GRAD_CHECK_H,
        GRAD_CHECK_TOL,
    )?;
    Ok(LossCheck {
        name: name.to_string(),
        seed,
        report,
    })
}

/// End-to-end hinge check through the GRU encoder, with respect to the
/// encoder and bilinear parameters.
fn check_encoder_hinge(seed: u64, variant: AttentionVariant) -> Result<LossCheck> {
    let config = GruConfig {
        h: 2,
        emb_dim: 3,
        margin: 2.0, // wide margin keeps the gate active at random init
        l2: 0.0,
    };
    let vocab = fixture_vocab();
    let mut emb = gaussian_matrix(vocab.rows(), config.emb_dim, 0.4, seed.wrapping_add(77));
    for v in emb.row_mut(0) {
        *v = 0.0;
    }
    let model = AttentionModel::init(variant, config, vocab, emb, seed)?;
    let names = model.params.names();
    let checked: Vec<String> = names.into_iter().filter(|n| n != "emb").collect();
    let arrays: Vec<Array<f64>> = checked
        .iter()
        .map(|n| model.params.get(n).unwrap().to_f64())
        .collect();
    let q_tokens = tokenize("what city holds the zqkey record");
    let pos_tokens = tokenize("the zqkey record stands in the north");
    let neg_tokens = tokenize("an unrelated filler sentence sits here");
    let margin = model.config.margin;
    let report = grad_check(
        &arrays,
        |g, leaves| {
            // Leaves follow the store order with "emb" removed:
            // nine forward parts, nine backward parts, then u.
            let p = crate::models::AttentionGraphParams {
                fwd: crate::models::GruDirNodes::from_slice(&leaves[0..9]),
                bwd: crate::models::GruDirNodes::from_slice(&leaves[9..18]),
                u: leaves[18],
            };
            let s_pos = model.score_graph(g, &p, &q_tokens, &pos_tokens)?;
            let s_neg = model.score_graph(g, &p, &q_tokens, &neg_tokens)?;
            g.hinge(s_pos, s_neg, margin)
        },
        GRAD_CHECK_H,
        GRAD_CHECK_TOL,
    )?;
    Ok(LossCheck {
        name: format!(
            "{} hinge through encoder",
            match variant {
                AttentionVariant::AttentivePooling => "attentive-pooling",
                AttentionVariant::OneWay => "one-way",
            }
        ),
        seed,
        report,
    })
}

/// The full fixture battery: n seeds per loss.
pub fn model_loss_checks(base_seed: u64, fixtures_per_loss: usize) -> Result<Vec<LossCheck>> {
    let mut out = Vec::new();
    for i in 0..fixtures_per_loss {
        let seed = base_seed.wrapping_add(100 * i as u64);
        out.push(check_cnn_loss(seed, i % 2 == 1)?);
        out.push(check_hinge_loss("attentive-pooling hinge", seed, AttentionVariant::AttentivePooling)?);
        out.push(check_hinge_loss("one-way hinge", seed, AttentionVariant::OneWay)?);
    }
    // One encoder-through check per variant covers the recurrent path.
    out.push(check_encoder_hinge(base_seed.wrapping_add(7000), AttentionVariant::AttentivePooling)?);
    out.push(check_encoder_hinge(base_seed.wrapping_add(8000), AttentionVariant::OneWay)?);
    Ok(out)
}
