//! End-to-end runs of the `se3m` binary on a small synthetic corpus.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const TOPICS: &[(&str, &str, &str, f64)] = &[
    ("admin", "restart", "server", 2.0),
    ("customer", "purchase", "basket", 5.0),
    ("analyst", "export", "report", 8.0),
    ("developer", "deploy", "pipeline", 13.0),
];

const CONFIG: &str = "\
labeled = stories.csv
finetune_corpus = domain.txt
kfold = 3
static.dimension = 8
static.epochs = 2
static.finetune_epochs = 1
ctx.layers = 1
ctx.hidden = 8
ctx.heads = 2
ctx.intermediate = 16
ctx.max_seq_len = 32
ctx.vocab_size = 90
ctx.epochs = 1
ctx.finetune_epochs = 1
head.epochs = 3
head.patience = 2
head.batch_size = 16
head.lstm_hidden = 6
head.dense = 8, 4
";

struct Workspace {
    dir: tempfile::TempDir,
    records: usize,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("issuekey,title,description,storypoint\n");
        let mut records = 0;
        for i in 0..48 {
            let (actor, verb, object, points) = TOPICS[i % TOPICS.len()];
            let project = ["ALPHA", "BETA", "GAMMA"][i % 3];
            csv.push_str(&format!(
                "{project}-{i},{verb} the {object},\"As a {actor} I want to {verb} the {object}. It must work.\",{points}\n"
            ));
            records += 1;
        }
        std::fs::write(dir.path().join("stories.csv"), csv).unwrap();
        let domain: Vec<String> = (0..30)
            .map(|i| {
                let (actor, verb, object, _) = TOPICS[(i + 1) % TOPICS.len()];
                format!("the {actor} can {verb} each {object}. every {object} needs a {actor}.")
            })
            .collect();
        std::fs::write(dir.path().join("domain.txt"), domain.join("\n") + "\n").unwrap();
        std::fs::write(dir.path().join("pipeline.conf"), CONFIG).unwrap();
        Self { dir, records }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn command(&self, args: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_se3m"));
        cmd.current_dir(self.path())
            .env("SE3M_DATA_DIR", self.path())
            .arg("--config")
            .arg(self.path().join("pipeline.conf"))
            .args(args);
        cmd
    }

    fn run(&self, args: &[&str]) -> Output {
        self.command(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn eval_dir(&self, out: &str, name: &str) -> PathBuf {
        self.path().join(out).join("reports/evaluations").join(name)
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn csv_rows(path: &Path) -> usize {
    String::from_utf8(read(path)).unwrap().lines().count() - 1
}

#[test]
fn unknown_subcommand_exits_with_usage_error() {
    let ws = Workspace::new();
    let out = ws.run(&["transmogrify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn configuration_errors_exit_with_one() {
    let ws = Workspace::new();
    let out = ws.run(&["stats", "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ws.run(&["stats", "--set", "labeled=missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ws.run(&["evaluate", "--experiment", "E1"]);
    assert_eq!(out.status.code(), Some(1), "no embedding model has been trained yet");
}

#[test]
fn ingest_and_stats_write_their_outputs() {
    let ws = Workspace::new();
    let line = ws.ok(&["ingest"]);
    assert!(line.contains("ingested 48 records from 3 projects"), "{line}");
    assert_eq!(csv_rows(&ws.path().join("run/reports/ingest/corpus.jsonl")) + 1, 48);
    ws.ok(&["stats"]);
    let stats = ws.path().join("run/reports/stats");
    for file in ["words_hist.csv", "effort_hist.csv", "buckets.csv", "summary.json"] {
        assert!(stats.join(file).is_file(), "{file}");
    }
    assert_eq!(csv_rows(&stats.join("buckets.csv")), 9);
}

#[test]
fn static_pipeline_is_reproducible_and_bundles() {
    let ws = Workspace::new();
    ws.ok(&["pretrain-static"]);
    ws.ok(&["finetune-static"]);
    assert!(ws.path().join("run/models/static_finetuned.ckpt.manifest").is_file());

    let summary = ws.ok(&["evaluate", "--experiment", "E2", "--kfold", "3", "--seed", "7"]);
    assert!(summary.starts_with("E2 (static fine-tuned): MAE"), "{summary}");
    ws.ok(&["evaluate", "--experiment", "E2", "--kfold", "3", "--seed", "7", "--set", "report_dir=again/reports"]);
    let name = "E2-kfold3-seed7";
    for file in ["folds.csv", "folds_raw.csv", "comparison.csv", "comparison_raw.csv", "confusion.csv"] {
        assert_eq!(
            read(&ws.eval_dir("run", name).join(file)),
            read(&ws.eval_dir("again", name).join(file)),
            "{file} differs between identical runs"
        );
    }
    assert_eq!(csv_rows(&ws.eval_dir("run", name).join("folds.csv")), 3 + 2);

    ws.ok(&["evaluate", "--experiment", "E1", "--by-project", "--mode", "pooled"]);
    let lopo = ws.eval_dir("run", "E1-by-project");
    assert_eq!(csv_rows(&lopo.join("per_project_E1.csv")), 3);
    assert_eq!(csv_rows(&lopo.join("new_project_E1.csv")), 4);
    assert!(lopo.join("projects/BETA.json").is_file());

    ws.ok(&["embed", "--experiment", "E2"]);
    assert_eq!(csv_rows(&ws.path().join("run/reports/embeddings/E2.csv")), ws.records);

    ws.ok(&["train", "--experiment", "E2"]);
    let line = ws.ok(&["predict", "--experiment", "E2", "as a customer i want to purchase the basket"]);
    let response: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let effort = response["effort"].as_f64().unwrap();
    assert!((1.0..=100.0).contains(&effort));
    assert_eq!(response["degenerate"], false);

    ws.ok(&["report"]);
    let bundle = ws.path().join("run/reports/bundles/v1");
    assert_eq!(csv_rows(&bundle.join("comparison.csv")), 2);
    assert_eq!(csv_rows(&bundle.join("embeddings_E2.csv")), ws.records);
    assert_eq!(csv_rows(&bundle.join("embeddings_E1.csv")), ws.records);
    assert!(bundle.join("evaluations/E2-kfold3-seed7/confusion_normalized.csv").is_file());
    let manifest: serde_json::Value = serde_json::from_slice(&read(&bundle.join("manifest.json"))).unwrap();
    let seeds: Vec<u64> = manifest["seeds"].as_array().unwrap().iter().map(|s| s.as_u64().unwrap()).collect();
    assert!(seeds.contains(&7) && seeds.contains(&1), "{seeds:?}");
    assert!(manifest["corpus_checksums"]["labeled"].is_string());
    ws.ok(&["report"]);
    assert!(ws.path().join("run/reports/bundles/v2/manifest.json").is_file());
}

#[test]
fn contextual_pipeline_reports_the_confusion_matrix() {
    let ws = Workspace::new();
    let line = ws.ok(&["pretrain-ctx"]);
    assert!(line.starts_with("pretrained encoder"), "{line}");
    ws.ok(&["finetune-ctx"]);
    ws.ok(&["evaluate", "--experiment", "E5", "--kfold", "3"]);
    let confusion = String::from_utf8(read(&ws.eval_dir("run", "E5-kfold3-seed1").join("confusion.csv"))).unwrap();
    let lines: Vec<&str> = confusion.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
    let out = ws.run(&["evaluate", "--experiment", "E3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn post(addr: &str, body: &str) -> (u16, serde_json::Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "POST /estimate HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status: u16 = response.split_whitespace().nth(1).unwrap().parse().unwrap();
    let payload = response.split("\r\n\r\n").nth(1).unwrap_or("");
    (status, serde_json::from_str(payload).unwrap_or(serde_json::Value::Null))
}

#[test]
fn serve_answers_estimates() {
    let ws = Workspace::new();
    ws.ok(&["pretrain-static"]);
    ws.ok(&["train", "--experiment", "E1"]);
    let mut child = ws
        .command(&["serve", "--experiment", "E1", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").expect("listen line").to_string();

    let buckets = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 20.0, 40.0, 100.0];
    let (status, a) = post(&addr, r#"{"text": "add login form"}"#);
    assert_eq!(status, 200);
    let effort = a["effort"].as_f64().unwrap();
    assert!((1.0..=100.0).contains(&effort));
    assert!(buckets.contains(&a["class"].as_f64().unwrap()));
    assert_eq!(a["model_id"].as_str().unwrap().len(), 64);

    let (status, empty) = post(&addr, r#"{"text": ""}"#);
    assert_eq!(status, 200);
    assert_eq!(empty["degenerate"], true);
    assert!((1.0..=100.0).contains(&empty["effort"].as_f64().unwrap()));

    let (status, _) = post(&addr, "{not json");
    assert!((400..500).contains(&status), "{status}");
    let (status, again) = post(&addr, r#"{"text": "add login form"}"#);
    assert_eq!(status, 200);
    assert_eq!(again, a);
    child.kill().unwrap();
    child.wait().unwrap();
}
