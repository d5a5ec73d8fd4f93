//! selrank: corpus construction, ranking models, and evaluation for
//! selection-based question answering.

mod config;
mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::FileConfig;
use selrank_core::corpus::{dataset_to_lines, load_dataset, load_sections, Split, Task};
use selrank_core::eval::{
    accuracy_answerable, breakdown, join_run, map_mrr, read_run, threshold_sweep, trigger_f1,
    write_run, BreakdownMetric, Facet, RankRun, TriggerRun,
};
use selrank_core::features::{Comparator, EmbeddingTable, Metric, SubtreeConfig};
use selrank_core::models::{
    load_model, predict_run, save_model, train_attention, train_cnn, train_cnn_subtree,
    AttentionVariant, CnnConfig, EmbeddingSource, GruConfig, Model, ModelKind, Pooling,
    ScoreContext, TrainConfig,
};
use selrank_core::retrieval::{
    build_index, flag_suspicious, generate_triggering, load_index, save_index,
};
use selrank_core::{Error, Result};

const VERSION_LINE: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (index format SELIDX01, checkpoint format SELQAMDL v1)"
);

#[derive(Parser)]
#[command(name = "selrank", version = VERSION_LINE, about = "Selection-based question answering toolkit")]
struct Cli {
    /// Optional key=value configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inverted-index operations.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Flag questions whose answer section misses the top-k retrieval hits.
    Suspicious(RetrievalArgs),
    /// Generate an answer-triggering dataset from top-k retrieved sections.
    Triggering(TriggeringArgs),
    /// Corpus statistics: overlap ratios and facet counts.
    Stats(StatsArgs),
    /// Train a ranking model.
    Train(TrainArgs),
    /// Score a dataset with a trained model.
    Score(ScoreArgs),
    /// Evaluate a scored run against gold labels.
    Eval(EvalArgs),
    /// Finite-difference verification of every model loss.
    Gradcheck(GradcheckArgs),
    /// End-to-end pipeline on a bundled synthetic fixture.
    Demo(DemoArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build an index over a section file.
    Build {
        #[arg(long)]
        sections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RetrievalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    sections: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Retrieval depth (default 5).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct TriggeringArgs {
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    sections: PathBuf,
    /// ass | at (default ass).
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// cnn | cnn-subtree | oneway | ap.
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    sections: PathBuf,
    /// Embedding file (`V dim` header); seeded random vectors when absent.
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Dependency parse file for the subtree features.
    #[arg(long)]
    parses: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Training split (default trn).
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Negatives per positive for hinge training (default: whole pool for
    /// the CNN, 5 for attention models).
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Comma-separated convolution filter heights.
    #[arg(long)]
    filter_heights: Option<String>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// GRU hidden units per direction.
    #[arg(long)]
    gru_hidden: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Subtree comparator: form | embedding.
    #[arg(long)]
    comparator: Option<String>,
    /// Subtree metric: sum | avg | max.
    #[arg(long)]
    metric: Option<String>,
    /// Retrain embedding rows of seen tokens (emb+ variant).
    #[arg(long)]
    trainable_embeddings: bool,
    /// CNN pooling: max | avg.
    #[arg(long)]
    pooling: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    sections: PathBuf,
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Restrict scoring to one split (trn | dev | tst).
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// ass | at.
    #[arg(long)]
    task: String,
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    sections: PathBuf,
    /// Fixed answer-triggering threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Development run whose best-F1 threshold is used instead.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Comma-separated facets: topic,qtype,origin,length.
    #[arg(long)]
    facets: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Seeded random fixtures per loss (default 5).
    #[arg(long)]
    fixtures: Option<usize>,
}

#[derive(Args)]
struct DemoArgs {
    /// Output directory (default ./selrank-demo).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_split(s: &str) -> Result<Split> {
    match s.to_ascii_uppercase().as_str() {
        "TRN" => Ok(Split::Trn),
        "DEV" => Ok(Split::Dev),
        "TST" => Ok(Split::Tst),
        other => Err(Error::validation(format!(
            "unknown split {other:?} (expected trn, dev, tst)"
        ))),
    }
}

fn parse_task(s: &str) -> Result<Task> {
    match s.to_ascii_lowercase().as_str() {
        "ass" => Ok(Task::Ass),
        "at" => Ok(Task::At),
        other => Err(Error::validation(format!(
            "unknown task {other:?} (expected ass, at)"
        ))),
    }
}

fn load_corpus(sections: &Path, dataset: &Path, task: Task) -> Result<selrank_core::corpus::Dataset> {
    let (store, _) = load_sections(sections)?;
    load_dataset(dataset, Arc::new(store), task)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run_index_build(sections: &Path, out: &Path) -> Result<()> {
    let (store, counts) = load_sections(sections)?;
    let index = build_index(&store)?;
    let cfg = json!({
        "command": "index build",
        "sections": sections.display().to_string(),
        "counts": counts,
    });
    save_index(&index, &cfg.to_string(), out)?;
    eprintln!("indexed {} sections (avgdl {:.2})", index.n_docs(), index.avgdl());
    println!(
        "{}",
        json!({"sections": index.n_docs(), "avgdl": index.avgdl(), "out": out.display().to_string()})
    );
    Ok(())
}

fn run_suspicious(file: &FileConfig, args: &RetrievalArgs) -> Result<()> {
    let k = file.resolve(args.k, "k", 5)?;
    let dataset = load_corpus(&args.sections, &args.dataset, Task::Ass)?;
    let (index, _) = load_index(&args.index)?;
    let flagged = flag_suspicious(&dataset, &index, k)?;
    eprintln!("{} of {} questions flagged", flagged.len(), dataset.questions.len());
    println!(
        "{}",
        json!({
            "_config": {"command": "suspicious", "k": k},
            "questions": dataset.questions.len(),
            "suspicious": flagged.len(),
            "ids": flagged,
        })
    );
    Ok(())
}

fn run_triggering(file: &FileConfig, args: &TriggeringArgs) -> Result<()> {
    let k = file.resolve(args.retrieval.k, "k", 5)?;
    let (store, _) = load_sections(&args.retrieval.sections)?;
    let store = Arc::new(store);
    let dataset = load_dataset(&args.retrieval.dataset, store.clone(), Task::Ass)?;
    let (index, _) = load_index(&args.retrieval.index)?;
    let at = generate_triggering(&dataset, &index, store, k)?;
    let cfg = json!({
        "command": "triggering",
        "k": k,
        "dataset": args.retrieval.dataset.display().to_string(),
    });
    let mut lines = vec![json!({ "_config": cfg }).to_string()];
    lines.extend(dataset_to_lines(&at));
    std::fs::write(&args.out, lines.join("\n") + "\n")?;
    let answerable = at
        .questions
        .iter()
        .filter(|q| at.candidates(&q.id).iter().any(|c| c.answer))
        .count();
    let fraction = answerable as f64 / at.questions.len().max(1) as f64;
    eprintln!(
        "triggering dataset: {} questions, answerable fraction {:.4}",
        at.questions.len(),
        fraction
    );
    println!(
        "{}",
        json!({
            "questions": at.questions.len(),
            "answerable": answerable,
            "answerable_fraction": fraction,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn run_stats(file: &FileConfig, args: &StatsArgs) -> Result<()> {
    let task = parse_task(&file.resolve(args.task.clone(), "task", "ass".to_string())?)?;
    let (store, counts) = load_sections(&args.sections)?;
    let dataset = load_dataset(&args.dataset, Arc::new(store), task)?;
    let report = selrank_core::analysis::corpus_report(&dataset)?;
    let value = json!({
        "_config": {"command": "stats", "task": task, "dataset": args.dataset.display().to_string()},
        "articles": counts.articles,
        "sections": counts.sections,
        "sentences": counts.sentences,
        "tokens": counts.tokens,
        "q_s": report.q_s,
        "q_m": report.q_m,
        "q_total": report.q_total,
        "omega_q": report.omega_q,
        "omega_a": report.omega_a,
        "omega_f": report.omega_f,
        "answerable_fraction": report.answerable_fraction,
        "topics": report.topics,
        "qtypes": report.qtypes,
    });
    write_json(&args.out, &value)?;
    eprintln!(
        "omega_q {:.2} omega_a {:.2} omega_f {:.2} over {} answerable questions",
        report.omega_q, report.omega_a, report.omega_f, report.answerable
    );
    println!("{}", json!({"out": args.out.display().to_string(), "q_total": report.q_total}));
    Ok(())
}

struct ResolvedTrain {
    kind: ModelKind,
    split: Split,
    train: TrainConfig,
    cnn: CnnConfig,
    gru: GruConfig,
    subtree: SubtreeConfig,
    echo: serde_json::Value,
}

fn resolve_train(file: &FileConfig, args: &TrainArgs) -> Result<ResolvedTrain> {
    let kind = ModelKind::parse(&args.model)?;
    let split = parse_split(&file.resolve(args.split.clone(), "split", "trn".to_string())?)?;
    let default_negatives = match kind {
        ModelKind::Oneway | ModelKind::Ap => Some(5),
        _ => None,
    };
    let default_lr = match kind {
        ModelKind::Oneway | ModelKind::Ap => 0.02,
        _ => 0.005,
    };
    let train = TrainConfig {
        epochs: file.resolve(args.epochs, "epochs", 10)?,
        batch_size: file.resolve(args.batch_size, "batch_size", 32)?,
        seed: args.seed,
        learning_rate: file.resolve(args.lr, "lr", default_lr)?,
        negatives_per_positive: file.resolve_opt(args.negatives, "negatives")?.or(default_negatives),
        threshold: file.resolve(args.threshold, "threshold", 0.5)?,
    };
    train.validate()?;
    let filter_heights = match file.resolve_opt(args.filter_heights.clone(), "filter_heights")? {
        Some(raw) => raw
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::validation(format!("bad filter heights {raw:?}")))?,
        None => vec![2, 3],
    };
    let pooling = match file
        .resolve(args.pooling.clone(), "pooling", "max".to_string())?
        .as_str()
    {
        "max" => Pooling::Max,
        "avg" => Pooling::Avg,
        other => return Err(Error::validation(format!("unknown pooling {other:?}"))),
    };
    let emb_dim = file.resolve(args.emb_dim, "emb_dim", 300)?;
    let cnn = CnnConfig {
        max_len: file.resolve(args.max_len, "max_len", 40)?,
        emb_dim,
        filter_heights,
        filters_per_height: file.resolve(args.filters, "filters", 100)?,
        hidden_dim: file.resolve(args.hidden_dim, "hidden_dim", 200)?,
        trainable_embeddings: args.trainable_embeddings,
        pooling,
    };
    let gru = GruConfig {
        h: file.resolve(args.gru_hidden, "gru_hidden", 141)?,
        emb_dim,
        margin: file.resolve(args.margin, "margin", 0.5)?,
        l2: file.resolve(args.l2, "l2", 1e-4)?,
    };
    let comparator = match file
        .resolve(args.comparator.clone(), "comparator", "form".to_string())?
        .as_str()
    {
        "form" => Comparator::Form,
        "embedding" => Comparator::Embedding,
        other => return Err(Error::validation(format!("unknown comparator {other:?}"))),
    };
    let metric = match file
        .resolve(args.metric.clone(), "metric", "avg".to_string())?
        .as_str()
    {
        "sum" => Metric::Sum,
        "avg" => Metric::Avg,
        "max" => Metric::Max,
        other => return Err(Error::validation(format!("unknown metric {other:?}"))),
    };
    let subtree = SubtreeConfig { comparator, metric };
    let echo = json!({
        "command": "train",
        "model": kind.label(),
        "split": split.label(),
        "train": train,
        "cnn": cnn,
        "gru": gru,
        "subtree": subtree,
    });
    Ok(ResolvedTrain {
        kind,
        split,
        train,
        cnn,
        gru,
        subtree,
        echo,
    })
}

fn run_train(file: &FileConfig, args: &TrainArgs) -> Result<()> {
    let resolved = resolve_train(file, args)?;
    let dataset = load_corpus(&args.sections, &args.data, Task::Ass)?;
    let emb_table = match &args.emb {
        Some(path) => Some(EmbeddingTable::load(path)?),
        None => None,
    };
    let source = match &emb_table {
        Some(t) => EmbeddingSource::Table(t),
        None => EmbeddingSource::seeded(resolved.cnn.emb_dim),
    };
    let parses = match &args.parses {
        Some(path) => Some(selrank_core::features::load_parse_file(path)?),
        None => None,
    };
    let (model, report) = match resolved.kind {
        ModelKind::Cnn => {
            let (m, r) = train_cnn(&dataset, resolved.split, resolved.cnn.clone(), &resolved.train, &source)?;
            (Model::Cnn(m), r)
        }
        ModelKind::CnnSubtree => {
            let (m, r) = train_cnn_subtree(
                &dataset,
                resolved.split,
                resolved.cnn.clone(),
                resolved.subtree,
                &resolved.train,
                &source,
                parses.as_ref(),
            )?;
            (Model::CnnSubtree(m), r)
        }
        ModelKind::Oneway | ModelKind::Ap => {
            let variant = match resolved.kind {
                ModelKind::Oneway => AttentionVariant::OneWay,
                _ => AttentionVariant::AttentivePooling,
            };
            let (m, r) = train_attention(
                &dataset,
                resolved.split,
                variant,
                resolved.gru,
                &resolved.train,
                &source,
            )?;
            (Model::Attention(m), r)
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    save_model(&model, &args.out, resolved.echo)?;
    eprintln!(
        "trained {} for {} epochs (loss {:.4} -> {:.4})",
        resolved.kind.label(),
        resolved.train.epochs,
        report.initial_loss().unwrap_or(f64::NAN),
        report.final_loss().unwrap_or(f64::NAN),
    );
    println!(
        "{}",
        json!({
            "model": resolved.kind.label(),
            "out": args.out.display().to_string(),
            "epochs": resolved.train.epochs,
            "final_loss": report.final_loss(),
        })
    );
    Ok(())
}

fn run_score(file: &FileConfig, args: &ScoreArgs) -> Result<()> {
    let split = match file.resolve_opt(args.split.clone(), "split")? {
        Some(s) => Some(parse_split(&s)?),
        None => None,
    };
    let model = load_model(&args.model)?;
    // Triggering datasets may contain unanswerable questions; loading as AT
    // accepts both tasks' files.
    let dataset = load_corpus(&args.sections, &args.data, Task::At)?;
    let parses = match &args.parses {
        Some(path) => Some(selrank_core::features::load_parse_file(path)?),
        None => None,
    };
    let ctx = ScoreContext {
        parses: parses.as_ref(),
    };
    let entries = predict_run(&model, &dataset, split, &ctx)?;
    let cfg = json!({
        "command": "score",
        "model": model.kind().label(),
        "data": args.data.display().to_string(),
        "split": split.map(|s| s.label()),
    });
    write_run(&args.out, &entries, Some(&cfg))?;
    eprintln!("scored {} candidates with {}", entries.len(), model.kind().label());
    println!(
        "{}",
        json!({"entries": entries.len(), "out": args.out.display().to_string()})
    );
    Ok(())
}

fn parse_facets(raw: &str) -> Result<Vec<Facet>> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "length" {
            out.push(Facet::QLength);
            out.push(Facet::SLength);
        } else {
            out.push(Facet::parse(part)?);
        }
    }
    Ok(out)
}

fn run_eval(file: &FileConfig, args: &EvalArgs) -> Result<()> {
    let task = parse_task(&args.task)?;
    let dataset = load_corpus(&args.sections, &args.gold, task)?;
    let entries = read_run(&args.run)?;
    let questions = join_run(&entries, &dataset, None)?;
    let facets = match file.resolve_opt(args.facets.clone(), "facets")? {
        Some(raw) => parse_facets(&raw)?,
        None => Vec::new(),
    };

    let mut report = serde_json::Map::new();
    report.insert("task".into(), json!(task));
    report.insert("questions".into(), json!(questions.len()));
    let mut facet_metric = BreakdownMetric::Mrr;
    let mut effective_threshold = None;
    match task {
        Task::Ass => {
            let run = RankRun::new(questions.clone())?;
            let (map, mrr) = map_mrr(&run)?;
            report.insert("map".into(), json!(map));
            report.insert("mrr".into(), json!(mrr));
        }
        Task::At => {
            let threshold = match (args.threshold, &args.sweep) {
                (Some(_), Some(_)) => {
                    return Err(Error::validation(
                        "--threshold and --sweep are mutually exclusive",
                    ))
                }
                (Some(t), None) => t,
                (None, Some(dev_run)) => {
                    let dev_entries = read_run(dev_run)?;
                    let dev_questions = join_run(&dev_entries, &dataset, None)?;
                    threshold_sweep(&TriggerRun::new(dev_questions)?)
                }
                (None, None) => file.resolve(None, "threshold", 0.5)?,
            };
            let run = TriggerRun::new(questions.clone())?;
            let m = trigger_f1(&run, threshold);
            // Sweep sentinels are not finite; keep them readable in JSON.
            report.insert(
                "threshold".into(),
                if threshold.is_finite() {
                    json!(threshold)
                } else {
                    json!(threshold.to_string())
                },
            );
            report.insert("precision".into(), json!(m.precision));
            report.insert("recall".into(), json!(m.recall));
            report.insert("f1".into(), json!(m.f1));
            report.insert("fired".into(), json!(m.fired));
            report.insert("answerable".into(), json!(m.answerable));
            if run.questions.iter().any(|q| q.answerable()) {
                report.insert(
                    "accuracy_answerable".into(),
                    json!(accuracy_answerable(&run)?),
                );
            }
            facet_metric = BreakdownMetric::AccuracyAnswerable;
            effective_threshold = Some(threshold);
        }
    }
    if !facets.is_empty() {
        let mut facet_map = serde_json::Map::new();
        for facet in facets {
            let label = match facet {
                Facet::Topic => "topic",
                Facet::Qtype => "qtype",
                Facet::Origin => "origin",
                Facet::QLength => "q_length",
                Facet::SLength => "s_length",
            };
            let rows = breakdown(&questions, facet, facet_metric)?;
            facet_map.insert(
                label.to_string(),
                serde_json::to_value(rows).map_err(|e| Error::validation(e.to_string()))?,
            );
        }
        report.insert("facets".into(), serde_json::Value::Object(facet_map));
    }
    let cfg = json!({
        "command": "eval",
        "task": task,
        "run": args.run.display().to_string(),
        "gold": args.gold.display().to_string(),
        "threshold": effective_threshold.map(|t| if t.is_finite() { json!(t) } else { json!(t.to_string()) }),
    });
    let mut value = serde_json::Map::new();
    value.insert("_config".into(), cfg);
    value.extend(report);
    write_json(&args.out, &serde_json::Value::Object(value.clone()))?;
    println!(
        "{}",
        serde_json::Value::Object(value.into_iter().filter(|(k, _)| k != "_config").collect())
    );
    Ok(())
}

fn run_gradcheck(file: &FileConfig, args: &GradcheckArgs) -> Result<()> {
    let seed = file.resolve(args.seed, "seed", 1)?;
    let fixtures = file.resolve(args.fixtures, "fixtures", 5)?;
    let checks = selrank_core::verify::model_loss_checks(seed, fixtures)?;
    let mut all_ok = true;
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        eprintln!(
            "{status}: {} (seed {}, {} coordinates, max rel err {:.3e})",
            c.name, c.seed, c.report.coords_checked, c.report.max_rel_err
        );
        all_ok &= c.passed();
    }
    println!(
        "{}",
        json!({
            "checks": checks.len(),
            "passed": checks.iter().filter(|c| c.passed()).count(),
        })
    );
    if !all_ok {
        return Err(Error::NonFinite {
            op: "gradcheck (finite-difference mismatch)",
        });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Index { command } => match command {
            IndexCommand::Build { sections, out } => run_index_build(sections, out),
        },
        Command::Suspicious(args) => run_suspicious(&file, args),
        Command::Triggering(args) => run_triggering(&file, args),
        Command::Stats(args) => run_stats(&file, args),
        Command::Train(args) => run_train(&file, args),
        Command::Score(args) => run_score(&file, args),
        Command::Eval(args) => run_eval(&file, args),
        Command::Gradcheck(args) => run_gradcheck(&file, args),
        Command::Demo(args) => demo::run(&file, args.out.as_deref(), args.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
