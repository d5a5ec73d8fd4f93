//! End-to-end demo on a bundled synthetic fixture: corpus files, index,
//! suspicious flagging, triggering generation, statistics, training, scoring,
//! and evaluation, all under one output directory.

use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use selrank_core::analysis::corpus_report;
use selrank_core::corpus::{dataset_to_lines, load_dataset, load_sections, Split, Task};
use selrank_core::eval::{
    join_run, map_mrr, threshold_sweep, trigger_f1, write_run, RankRun, TriggerRun,
};
use selrank_core::models::{
    load_model, predict_run, save_model, train_attention, train_cnn, AttentionVariant, CnnConfig,
    EmbeddingSource, GruConfig, Model, Pooling, ScoreContext, TrainConfig,
};
use selrank_core::retrieval::{build_index, flag_suspicious, generate_triggering, save_index};
use selrank_core::synth::planted_corpus;
use selrank_core::{Error, Result};

use crate::config::FileConfig;

fn write_sections_jsonl(
    store: &selrank_core::corpus::SectionStore,
    path: &Path,
    config: &serde_json::Value,
) -> Result<()> {
    let mut lines = vec![json!({ "_config": config }).to_string()];
    for section in store.iter() {
        lines.push(
            json!({
                "article_id": section.article_id,
                "section_id": section.section_id,
                "topic": section.topic,
                "title": section.title,
                "sentences": section.sentences.iter().map(|s| s.raw.clone()).collect::<Vec<_>>(),
            })
            .to_string(),
        );
    }
    std::fs::write(path, lines.join("\n") + "\n")?;
    Ok(())
}

pub fn run(file: &FileConfig, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let started = std::time::Instant::now();
    let seed = file.resolve(seed, "seed", 1234)?;
    let default_dir = Path::new("selrank-demo");
    let dir = out.unwrap_or(default_dir);
    std::fs::create_dir_all(dir)?;
    let cfg = json!({"command": "demo", "seed": seed});

    // Fixture corpus on disk, then back through the ordinary loaders so the
    // demo exercises the same ingestion path as real data.
    let corpus = planted_corpus(20, 4, seed)?;
    let sections_path = dir.join("sections.jsonl");
    let ass_path = dir.join("ass.jsonl");
    write_sections_jsonl(&corpus.sections, &sections_path, &cfg)?;
    let mut lines = vec![json!({ "_config": &cfg }).to_string()];
    lines.extend(dataset_to_lines(&corpus.dataset));
    std::fs::write(&ass_path, lines.join("\n") + "\n")?;
    let (store, counts) = load_sections(&sections_path)?;
    let store = Arc::new(store);
    let dataset = load_dataset(&ass_path, store.clone(), Task::Ass)?;
    eprintln!(
        "demo corpus: {} articles, {} sections, {} sentences, {} tokens",
        counts.articles, counts.sections, counts.sentences, counts.tokens
    );

    // Retrieval: index, suspicious questions, triggering dataset.
    let index = build_index(&store)?;
    save_index(&index, &cfg.to_string(), dir.join("index.bin"))?;
    let flagged = flag_suspicious(&dataset, &index, 5)?;
    eprintln!("suspicious questions at k=5: {}", flagged.len());
    let at = generate_triggering(&dataset, &index, store.clone(), 5)?;
    let at_path = dir.join("at.jsonl");
    let mut lines = vec![json!({ "_config": &cfg }).to_string()];
    lines.extend(dataset_to_lines(&at));
    std::fs::write(&at_path, lines.join("\n") + "\n")?;
    let at = load_dataset(&at_path, store.clone(), Task::At)?;

    // Statistics over the selection corpus.
    let stats = corpus_report(&dataset)?;
    crate::write_json(
        &dir.join("stats.json"),
        &json!({
            "_config": &cfg,
            "articles": counts.articles,
            "sections": counts.sections,
            "sentences": counts.sentences,
            "tokens": counts.tokens,
            "q_s": stats.q_s,
            "q_m": stats.q_m,
            "q_total": stats.q_total,
            "omega_q": stats.omega_q,
            "omega_a": stats.omega_a,
            "omega_f": stats.omega_f,
        }),
    )?;

    // Two small models over the fixture.
    let mut train = TrainConfig::with_seed(seed);
    train.epochs = 6;
    train.batch_size = 16;
    train.learning_rate = 0.005;
    let cnn_config = CnnConfig {
        max_len: 12,
        emb_dim: 10,
        filter_heights: vec![2, 3],
        filters_per_height: 6,
        hidden_dim: 8,
        trainable_embeddings: false,
        pooling: Pooling::Max,
    };
    let (cnn, cnn_report) = train_cnn(
        &dataset,
        Split::Trn,
        cnn_config,
        &train,
        &EmbeddingSource::seeded(10),
    )?;
    let cnn = Model::Cnn(cnn);
    save_model(&cnn, dir.join("cnn.bin"), cfg.clone())?;
    let cnn = load_model(dir.join("cnn.bin"))?;
    eprintln!(
        "cnn trained: loss {:.4} -> {:.4}",
        cnn_report.initial_loss().unwrap_or(f64::NAN),
        cnn_report.final_loss().unwrap_or(f64::NAN)
    );

    let mut at_train = train.clone();
    at_train.learning_rate = 0.02;
    at_train.batch_size = 8;
    at_train.negatives_per_positive = Some(3);
    let gru_config = GruConfig {
        h: 4,
        emb_dim: 10,
        margin: 0.5,
        l2: 1e-5,
    };
    let (ap, ap_report) = train_attention(
        &dataset,
        Split::Trn,
        AttentionVariant::AttentivePooling,
        gru_config,
        &at_train,
        &EmbeddingSource::seeded(10),
    )?;
    let ap = Model::Attention(ap);
    save_model(&ap, dir.join("ap.bin"), cfg.clone())?;
    eprintln!(
        "attentive pooling trained: loss {:.4} -> {:.4}",
        ap_report.initial_loss().unwrap_or(f64::NAN),
        ap_report.final_loss().unwrap_or(f64::NAN)
    );

    // Score and evaluate answer sentence selection on the dev split.
    let ctx = ScoreContext::default();
    let mut summary = serde_json::Map::new();
    summary.insert("suspicious".into(), json!(flagged.len()));
    for (name, model) in [("cnn", &cnn), ("ap", &ap)] {
        let dev = predict_run(model, &dataset, Some(Split::Dev), &ctx)?;
        write_run(dir.join(format!("{name}_ass_dev.jsonl")), &dev, Some(&cfg))?;
        let dev_questions = join_run(&dev, &dataset, Some(Split::Dev))?;
        let (map, mrr) = map_mrr(&RankRun::new(dev_questions)?)?;
        eprintln!("{name}: selection dev MAP {map:.3} MRR {mrr:.3}");
        summary.insert(format!("{name}_ass_dev_map"), json!(map));
        summary.insert(format!("{name}_ass_dev_mrr"), json!(mrr));
    }

    // Triggering needs negatives drawn from retrieved distractor sections,
    // so train a separate CNN on the generated triggering corpus, tune the
    // threshold on its dev split, and report on the training split (the
    // fixture is too small to hold out a meaningful test set).
    let at_cnn_config = CnnConfig {
        max_len: 12,
        emb_dim: 10,
        filter_heights: vec![2, 3],
        filters_per_height: 6,
        hidden_dim: 8,
        trainable_embeddings: false,
        pooling: Pooling::Max,
    };
    let mut at_train_cfg = train.clone();
    at_train_cfg.epochs = 8;
    let (at_cnn, at_cnn_report) = train_cnn(
        &at,
        Split::Trn,
        at_cnn_config,
        &at_train_cfg,
        &EmbeddingSource::seeded(10),
    )?;
    let at_cnn = Model::Cnn(at_cnn);
    save_model(&at_cnn, dir.join("cnn_at.bin"), cfg.clone())?;
    eprintln!(
        "triggering cnn trained: loss {:.4} -> {:.4}",
        at_cnn_report.initial_loss().unwrap_or(f64::NAN),
        at_cnn_report.final_loss().unwrap_or(f64::NAN)
    );
    let at_trn = predict_run(&at_cnn, &at, Some(Split::Trn), &ctx)?;
    write_run(dir.join("cnn_at_trn.jsonl"), &at_trn, Some(&cfg))?;
    let trn_run = TriggerRun::new(join_run(&at_trn, &at, Some(Split::Trn))?)?;
    let threshold = threshold_sweep(&trn_run);
    let m = trigger_f1(&trn_run, threshold);
    let acc = selrank_core::eval::accuracy_answerable(&trn_run)?;
    eprintln!(
        "cnn triggering (in-sample): threshold {threshold:.3}, P {:.3} R {:.3} F1 {:.3}, acc@1 {acc:.3}",
        m.precision, m.recall, m.f1
    );
    summary.insert("cnn_at_in_sample_f1".into(), json!(m.f1));
    summary.insert("cnn_at_in_sample_accuracy".into(), json!(acc));
    summary.insert(
        "cnn_at_threshold".into(),
        if threshold.is_finite() {
            json!(threshold)
        } else {
            json!(threshold.to_string())
        },
    );
    summary.insert("elapsed_ms".into(), json!(started.elapsed().as_millis() as u64));
    summary.insert("out".into(), json!(dir.display().to_string()));
    crate::write_json(&dir.join("summary.json"), &{
        let mut v = serde_json::Map::new();
        v.insert("_config".into(), cfg);
        v.extend(summary.clone());
        serde_json::Value::Object(v)
    })?;
    if started.elapsed().as_secs() >= 60 {
        return Err(Error::validation(format!(
            "demo exceeded its 60 s budget ({:?})",
            started.elapsed()
        )));
    }
    println!("{}", serde_json::Value::Object(summary));
    Ok(())
}
