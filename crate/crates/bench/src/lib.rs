//! Shared fixtures for the criterion benchmarks.

use selrank_core::corpus::{Split, Token};
use selrank_core::models::{
    build_embedding_matrix, AttentionModel, AttentionVariant, CnnConfig, CnnModel,
    EmbeddingSource, GruConfig, Pooling, Vocab,
};
use selrank_core::synth::{planted_corpus, PlantedCorpus};

pub fn corpus() -> PlantedCorpus {
    planted_corpus(40, 5, 99).expect("fixture corpus")
}

pub fn bench_pair(corpus: &PlantedCorpus) -> (Vec<Token>, Vec<Token>) {
    let q = &corpus.dataset.questions[0];
    let a = corpus.dataset.answer_sentences(&q.id)[0];
    (q.tokens.clone(), a.tokens.clone())
}

pub fn small_cnn(corpus: &PlantedCorpus) -> CnnModel {
    let vocab = Vocab::from_dataset(&corpus.dataset, Split::Trn);
    let config = CnnConfig {
        max_len: 12,
        emb_dim: 24,
        filter_heights: vec![2, 3],
        filters_per_height: 16,
        hidden_dim: 24,
        trainable_embeddings: false,
        pooling: Pooling::Max,
    };
    let emb = build_embedding_matrix(&vocab, &EmbeddingSource::seeded(24), 24, 5).expect("embeddings");
    CnnModel::init(config, vocab, emb, 5).expect("cnn fixture")
}

pub fn small_attention(corpus: &PlantedCorpus, variant: AttentionVariant) -> AttentionModel {
    let vocab = Vocab::from_dataset(&corpus.dataset, Split::Trn);
    let config = GruConfig {
        h: 8,
        emb_dim: 24,
        margin: 0.5,
        l2: 0.0,
    };
    let emb = build_embedding_matrix(&vocab, &EmbeddingSource::seeded(24), 24, 5).expect("embeddings");
    AttentionModel::init(variant, config, vocab, emb, 5).expect("attention fixture")
}
