//! End-to-end tests of the selrank binary.

use std::path::Path;
use std::process::{Command, Output};

fn selrank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selrank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_fixture_corpus(dir: &Path) {
    let sections = [
        r#"{"article_id":"a1","section_id":"s1","topic":"TV","title":"Reception","sentences":["the premiere had mixed reviews","critics praised the cast","ratings stayed strong"]}"#,
        r#"{"article_id":"a1","section_id":"s2","topic":"TV","title":"Plot","sentences":["the team solves a case","a profile is developed"]}"#,
        r#"{"article_id":"a2","section_id":"s3","topic":"Science","title":"Orbit","sentences":["the moon orbits the earth","tides follow the moon"]}"#,
    ];
    std::fs::write(dir.join("sections.jsonl"), sections.join("\n") + "\n").unwrap();
    let questions = [
        r#"{"id":"q1","text":"How were the premiere reviews?","topic":"TV","origin":"original","split":"TRN","candidates":[{"section_id":"s1","sent_index":0,"label":1},{"section_id":"s1","sent_index":1,"label":0},{"section_id":"s1","sent_index":2,"label":0}]}"#,
        r#"{"id":"q2","text":"What does the moon orbit?","topic":"Science","origin":"paraphrase","split":"DEV","candidates":[{"section_id":"s3","sent_index":0,"label":1},{"section_id":"s3","sent_index":1,"label":0}]}"#,
    ];
    std::fs::write(dir.join("ass.jsonl"), questions.join("\n") + "\n").unwrap();
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = selrank(&["--such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = selrank(&["definitely-not-a-subcommand"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn version_names_container_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = selrank(&["--version"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("SELIDX01") && text.contains("SELQAMDL"), "{text}");
}

#[test]
fn missing_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = selrank(
        &["index", "build", "--sections", "nope.jsonl", "--out", "x.bin"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn retrieval_pipeline_over_fixture_files() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path());

    let out = selrank(
        &["index", "build", "--sections", "sections.jsonl", "--out", "index.bin"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(summary["sections"], 3);

    let out = selrank(
        &[
            "suspicious",
            "--dataset",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--index",
            "index.bin",
            "--k",
            "5",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["questions"], 2);
    assert_eq!(summary["suspicious"], 0);

    let out = selrank(
        &[
            "triggering",
            "--dataset",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--index",
            "index.bin",
            "--k",
            "2",
            "--out",
            "at.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let at_text = std::fs::read_to_string(dir.path().join("at.jsonl")).unwrap();
    assert!(at_text.lines().next().unwrap().contains("_config"));
    assert_eq!(at_text.lines().count(), 3); // config line + 2 questions

    let out = selrank(
        &[
            "stats",
            "--dataset",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--out",
            "stats.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["articles"], 2);
    assert_eq!(stats["sections"], 3);
    assert_eq!(stats["sentences"], 7);
    assert_eq!(stats["q_total"], 2);
    assert_eq!(stats["q_m"], 0);
}

#[test]
fn eval_report_is_reproducible_and_hand_checked() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path());
    // Hand-built run: q1's positive at rank 2 (AP = RR = 1/2), q2's positive
    // at rank 1. MAP = MRR = (1/2 + 1) / 2 = 0.75.
    let run = [
        r#"{"question_id":"q1","section_id":"s1","sent_index":0,"score":0.4}"#,
        r#"{"question_id":"q1","section_id":"s1","sent_index":1,"score":0.9}"#,
        r#"{"question_id":"q1","section_id":"s1","sent_index":2,"score":0.1}"#,
        r#"{"question_id":"q2","section_id":"s3","sent_index":0,"score":0.8}"#,
        r#"{"question_id":"q2","section_id":"s3","sent_index":1,"score":0.2}"#,
    ];
    std::fs::write(dir.path().join("run.jsonl"), run.join("\n") + "\n").unwrap();

    let args = [
        "eval",
        "--task",
        "ass",
        "--run",
        "run.jsonl",
        "--gold",
        "ass.jsonl",
        "--sections",
        "sections.jsonl",
        "--facets",
        "topic,qtype,origin,length",
        "--out",
        "report.json",
    ];
    let out = selrank(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["map"], 0.75);
    assert_eq!(report["mrr"], 0.75);
    assert_eq!(report["questions"], 2);
    let topics = report["facets"]["topic"].as_array().unwrap();
    assert_eq!(topics.len(), 2);
    assert!(report["facets"]["q_length"].is_array());

    // Byte-identical across runs.
    let out = selrank(&args, dir.path());
    assert!(out.status.success());
    let second = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn at_eval_with_swept_threshold() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path());
    // Treat the fixture as a triggering task; q1 fires correctly above 0.4.
    let run = [
        r#"{"question_id":"q1","section_id":"s1","sent_index":0,"score":0.9}"#,
        r#"{"question_id":"q1","section_id":"s1","sent_index":1,"score":0.4}"#,
        r#"{"question_id":"q1","section_id":"s1","sent_index":2,"score":0.1}"#,
        r#"{"question_id":"q2","section_id":"s3","sent_index":0,"score":0.3}"#,
        r#"{"question_id":"q2","section_id":"s3","sent_index":1,"score":0.6}"#,
    ];
    std::fs::write(dir.path().join("dev.jsonl"), run.join("\n") + "\n").unwrap();
    let out = selrank(
        &[
            "eval",
            "--task",
            "at",
            "--run",
            "dev.jsonl",
            "--gold",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--sweep",
            "dev.jsonl",
            "--out",
            "at_report.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("at_report.json")).unwrap())
            .unwrap();
    // Firing only on q1 (top 0.9, correct) gives P=1, R=1/2, F1=2/3.
    assert_eq!(report["threshold"], 0.6);
    assert_eq!(report["precision"], 1.0);
    assert_eq!(report["recall"], 0.5);
    assert!((report["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(report["accuracy_answerable"], 0.5);
}

#[test]
fn train_score_eval_flow_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path());
    std::fs::write(
        dir.path().join("selrank.conf"),
        "epochs = 2\nbatch_size = 4\nemb_dim = 6\nmax_len = 8\nfilters = 3\nhidden_dim = 4\n",
    )
    .unwrap();
    let out = selrank(
        &[
            "--config",
            "selrank.conf",
            "train",
            "--model",
            "cnn",
            "--data",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--seed",
            "3",
            "--epochs",
            "3", // flag overrides the file
            "--out",
            "model.bin",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["epochs"], 3);

    let out = selrank(
        &[
            "score",
            "--model",
            "model.bin",
            "--data",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--out",
            "run.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_text = std::fs::read_to_string(dir.path().join("run.jsonl")).unwrap();
    assert!(run_text.lines().next().unwrap().contains("_config"));
    assert_eq!(run_text.lines().count(), 6); // config + 5 candidates

    let out = selrank(
        &[
            "eval",
            "--task",
            "ass",
            "--run",
            "run.jsonl",
            "--gold",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["questions"], 2);
    assert!(report["map"].as_f64().unwrap() > 0.0);
}

#[test]
fn cnn_subtree_training_uses_parse_file() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path());
    // Chain trees for the two questions and their candidate sentences.
    let mut blocks = Vec::new();
    let chain = |key: &str, idx: usize, forms: &[&str]| -> String {
        let mut lines = vec![format!("# {key} {idx}")];
        for (i, f) in forms.iter().enumerate() {
            let head = if i == 0 { -1 } else { i as i64 - 1 };
            lines.push(format!("{i}\t{f}\t{head}"));
        }
        lines.join("\n") + "\n"
    };
    blocks.push(chain("q1", 0, &["How", "were", "the", "premiere", "reviews", "?"]));
    blocks.push(chain("q2", 0, &["What", "does", "the", "moon", "orbit", "?"]));
    blocks.push(chain("s1", 0, &["the", "premiere", "had", "mixed", "reviews"]));
    blocks.push(chain("s1", 1, &["critics", "praised", "the", "cast"]));
    blocks.push(chain("s1", 2, &["ratings", "stayed", "strong"]));
    blocks.push(chain("s3", 0, &["the", "moon", "orbits", "the", "earth"]));
    blocks.push(chain("s3", 1, &["tides", "follow", "the", "moon"]));
    std::fs::write(dir.path().join("parses.txt"), blocks.join("\n")).unwrap();

    let out = selrank(
        &[
            "train",
            "--model",
            "cnn-subtree",
            "--data",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--parses",
            "parses.txt",
            "--seed",
            "4",
            "--epochs",
            "2",
            "--batch-size",
            "4",
            "--emb-dim",
            "6",
            "--max-len",
            "8",
            "--filters",
            "3",
            "--hidden-dim",
            "4",
            "--comparator",
            "form",
            "--metric",
            "max",
            "--out",
            "subtree.bin",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = selrank(
        &[
            "score",
            "--model",
            "subtree.bin",
            "--data",
            "ass.jsonl",
            "--sections",
            "sections.jsonl",
            "--parses",
            "parses.txt",
            "--out",
            "subtree_run.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn demo_completes_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let started = std::time::Instant::now();
    let out = selrank(&["demo", "--out", "demo", "--seed", "7"], dir.path());
    let elapsed = started.elapsed();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elapsed.as_secs() < 60, "demo took {elapsed:?}");
    for artifact in [
        "sections.jsonl",
        "ass.jsonl",
        "at.jsonl",
        "index.bin",
        "stats.json",
        "cnn.bin",
        "ap.bin",
        "summary.json",
    ] {
        assert!(
            dir.path().join("demo").join(artifact).exists(),
            "missing demo artifact {artifact}"
        );
    }
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["cnn_ass_dev_mrr"].as_f64().unwrap() > 0.0);
}
