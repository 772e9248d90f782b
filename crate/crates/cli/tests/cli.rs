use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eras::app::Checkpoint;

const CONFIG: &str = r#"
dim = 8
blocks = 2
epochs = 6
eval_every = 2
batch_size = 64
groups = 2
search_epochs = 2
pretrain_epochs = 2
derive_samples = 3
reward_batch = 32
reward_candidates = 40
workers = 2

[synthetic]
n_entities = 60
seed = 5
families = [
  { pattern = "symmetric", count = 2, facts_per_relation = 60 },
  { pattern = "anti-symmetric", count = 2, facts_per_relation = 60 },
]
"#;

fn eras(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eras"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), CONFIG).unwrap();
    dir
}

fn metric(dir: &Path, out: &str, table: &str, key: &str) -> f64 {
    let text = fs::read_to_string(dir.join(out).join("metrics.toml")).unwrap();
    let doc: toml::Table = text.parse().unwrap();
    doc[table][key].as_float().unwrap()
}

#[test]
fn search_emits_artifacts_and_is_reproducible() {
    let dir = setup();
    let p = dir.path();
    for out in ["a", "b"] {
        let o = eras(p, &["--config", "cfg.toml", "search", "-o", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "manifest.toml",
        "entity.bin",
        "relation.bin",
        "architecture.txt",
        "assignment.tsv",
        "policy.bin",
        "search_log.csv",
        "metrics.toml",
        "report.txt",
        "relations.csv",
        "patterns.csv",
        "config.toml",
    ] {
        assert!(p.join("a").join(f).exists(), "missing {f}");
    }
    let a = metric(p, "a", "test", "mrr");
    assert_eq!(a.to_bits(), metric(p, "b", "test", "mrr").to_bits());
    assert_eq!(
        fs::read(p.join("a/entity.bin")).unwrap(),
        fs::read(p.join("b/entity.bin")).unwrap()
    );

    // Evaluating the checkpoint reproduces the reported test metrics.
    let o = eras(p, &["eval", "a"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(p.join("a/eval_test_relations.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains(&format!("MRR {a:.4}")), "{stdout}");
}

#[test]
fn train_known_model_and_resume() {
    let dir = setup();
    let p = dir.path();
    let o = eras(p, &["--config", "cfg.toml", "train", "--arch", "DistMult", "-o", "full"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = eras(p, &["--config", "cfg.toml", "train", "--arch", "DistMult", "-o", "half", "--epochs=3"]);
    assert!(o.status.success());
    let o = eras(p, &["--config", "cfg.toml", "train", "--resume", "half", "-o", "resumed"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let full = Checkpoint::load(&p.join("full")).unwrap().resume.unwrap();
    let resumed = Checkpoint::load(&p.join("resumed")).unwrap().resume.unwrap();
    assert_eq!(full.losses.len(), 6);
    assert_eq!(full.losses, resumed.losses);
    assert_eq!(full.table, resumed.table);
}

#[test]
fn error_exit_codes() {
    let dir = setup();
    let p = dir.path();
    let o = eras(p, &["--config", "cfg.toml", "train", "--arch", "1 2 : 9 0 0 0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = eras(p, &["search", "--dataset=/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(2));
    let o = eras(p, &["--config", "cfg.toml", "search", "--learning-rte=0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rte"));
    let o = eras(p, &["search"]);
    assert_eq!(o.status.code(), Some(1));
    let o = eras(p, &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = eras(p, &["--config", "cfg.toml", "train", "--arch", "DistMult", "--learning_rate=1e300"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn corrupted_checkpoint_is_a_data_error() {
    let dir = setup();
    let p = dir.path();
    let o = eras(p, &["--config", "cfg.toml", "train", "--arch", "ComplEx", "-o", "ck", "--epochs=2"]);
    assert!(o.status.success());
    let blob = p.join("ck/entity.bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&blob, bytes).unwrap();
    let o = eras(p, &["eval", "ck"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_then_patterns() {
    let dir = setup();
    let p = dir.path();
    let o = eras(p, &["--config", "cfg.toml", "synth", "-o", "kg"]);
    assert!(o.status.success());
    for split in ["train.txt", "valid.txt", "test.txt"] {
        assert!(p.join("kg").join(split).exists());
    }
    let o = eras(p, &["patterns", "--dataset=kg", "-o", "rep"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(p.join("rep/relation_patterns.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("sym_0,symmetric"));
    assert!(csv.contains("anti_2,anti-symmetric"));
}
