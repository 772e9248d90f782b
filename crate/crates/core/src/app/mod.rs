//! Commands behind the `eras` binary: search, train, eval, synth, patterns.

pub mod checkpoint;
pub mod config;

use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::controller::PolicyState;
use crate::error::{ErasError, Result};
use crate::evaluator::{
    link_prediction_eval, triplet_classification, ClassificationReport, EvalReport, RankMetrics, Supernet,
};
use crate::kg_store::{
    classify_relation_patterns, generate_synthetic, load_dataset, PatternLabel, Split, TripleStore,
};
use crate::scorer::EmbeddingTable;
use crate::search_engine::{derive, search, SearchLogRow};
use crate::search_space::{encode_known, Architecture, KnownModel};
use crate::trainer::{epoch_rng, Trainer};

pub use checkpoint::{Checkpoint, Manifest, ResumeState};
pub use config::{apply_overrides, parse_override, RunConfig};

/// Stream offsets keeping the rng of each pipeline stage independent.
const DERIVE_STREAM: usize = 1 << 20;
const CLASSIFY_STREAM: usize = 1 << 21;

pub const CONFIG_FILE: &str = "config.toml";

/// Loads the configured dataset directory or generates the synthetic one.
pub fn load_store(cfg: &RunConfig) -> Result<TripleStore> {
    match (&cfg.dataset, &cfg.synthetic) {
        (Some(dir), _) => load_dataset(dir),
        (None, Some(spec)) => generate_synthetic(spec),
        (None, None) => Err(ErasError::Config(
            "set `dataset` to a directory or provide a [synthetic] section".into(),
        )),
    }
}

/// Sets the global worker pool size once per process.
pub fn init_workers(workers: usize) {
    if workers > 0 {
        // A second call fails harmlessly when the pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub mrr: f64,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
    pub ranks: usize,
}

impl From<&RankMetrics> for SplitMetrics {
    fn from(m: &RankMetrics) -> Self {
        SplitMetrics {
            mrr: m.mrr,
            hit1: m.hit1,
            hit3: m.hit3,
            hit10: m.hit10,
            ranks: m.count,
        }
    }
}

/// Final metrics written to `metrics.toml`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub architecture: String,
    pub assignment: Vec<usize>,
    pub best_valid_mrr: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub valid: SplitMetrics,
    pub test: SplitMetrics,
    pub classification: Option<ClassificationReport>,
    pub search_seconds: Option<f64>,
    pub train_seconds: f64,
}

pub struct Evaluation {
    pub valid: EvalReport,
    pub test: EvalReport,
    pub classification: Option<ClassificationReport>,
}

fn evaluate(
    cfg: &RunConfig,
    store: &TripleStore,
    arch: &Architecture,
    assignment: &[usize],
    table: &EmbeddingTable,
) -> Result<Evaluation> {
    let labels = classify_relation_patterns(store, &cfg.pattern_thresholds());
    let net = Supernet::new(arch, assignment, table);
    let valid = link_prediction_eval(&net, store, Split::Valid, &labels, cfg.tie);
    let test = link_prediction_eval(&net, store, Split::Test, &labels, cfg.tie);
    let classification = if cfg.classify {
        let mut rng = epoch_rng(cfg.seed, CLASSIFY_STREAM);
        Some(triplet_classification(&net, store, &mut rng)?)
    } else {
        None
    };
    Ok(Evaluation {
        valid,
        test,
        classification,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ErasError::io(dir, e))
}

fn write_string(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| ErasError::io(path, e))
}

fn write_reports(dir: &Path, eval: &Evaluation) -> Result<()> {
    let mut text = eval.valid.render();
    text.push('\n');
    text.push_str(&eval.test.render());
    if let Some(c) = &eval.classification {
        text.push_str(&format!(
            "\ntriplet classification: valid accuracy {:.4}  test accuracy {:.4}\n",
            c.valid_accuracy, c.test_accuracy
        ));
    }
    write_string(&dir.join("report.txt"), &text)?;
    eval.test.write_relation_csv(&dir.join("relations.csv"))?;
    eval.test.write_summary_csv(&dir.join("patterns.csv"))
}

fn write_search_log(path: &Path, log: &[SearchLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ErasError::io(path, std::io::Error::other(e)))?;
    for row in log {
        w.serialize(row).map_err(|e| ErasError::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| ErasError::io(path, e))
}

fn vocab_names(store: &TripleStore) -> (Vec<String>, Vec<String>) {
    (store.entities().names().to_vec(), store.relations().names().to_vec())
}

fn manifest_for(kind: &str, cfg: &RunConfig, store: &TripleStore, arch: &Architecture, trainer: &Trainer) -> Manifest {
    Manifest {
        format_version: checkpoint::FORMAT_VERSION,
        kind: kind.into(),
        dim: cfg.dim,
        blocks: arch.blocks(),
        groups: arch.groups(),
        n_entities: store.num_entities(),
        n_relations: store.num_relations(),
        seed: cfg.seed,
        created_by: format!("eras {}", env!("CARGO_PKG_VERSION")),
        epoch: trainer.epoch,
        learning_rate: trainer.adagrad.learning_rate,
        best_valid_mrr: trainer.best_valid_mrr.max(0.0),
        best_epoch: trainer.best_epoch,
        stalled: trainer.stalled,
    }
}

fn summary(
    trainer: &Trainer,
    eval: &Evaluation,
    search_seconds: Option<f64>,
    train_seconds: f64,
) -> RunSummary {
    RunSummary {
        architecture: trainer.arch.to_string(),
        assignment: trainer.group_of.clone(),
        best_valid_mrr: trainer.best_valid_mrr.max(0.0),
        best_epoch: trainer.best_epoch,
        epochs_run: trainer.epoch,
        valid: (&eval.valid.overall).into(),
        test: (&eval.test.overall).into(),
        classification: eval.classification,
        search_seconds,
        train_seconds,
    }
}

fn finish_training(
    kind: &str,
    cfg: &RunConfig,
    store: &TripleStore,
    trainer: &Trainer,
    policy: Option<&PolicyState>,
    search_seconds: Option<f64>,
    train_seconds: f64,
) -> Result<RunSummary> {
    let out = &cfg.output;
    create_dir(out)?;
    let eval = evaluate(cfg, store, &trainer.arch, &trainer.group_of, &trainer.best_table)?;
    let (entities, relations) = vocab_names(store);
    let ck = Checkpoint {
        manifest: manifest_for(kind, cfg, store, &trainer.arch, trainer),
        table: trainer.best_table.clone(),
        arch: trainer.arch.clone(),
        assignment: trainer.group_of.clone(),
        entities,
        relations,
        policy: policy.map(PolicyState::named_blocks),
        resume: Some(ResumeState {
            table: trainer.table.clone(),
            adagrad: trainer.adagrad.clone(),
            losses: trainer.losses.clone(),
        }),
    };
    ck.save(out)?;
    write_string(&out.join(CONFIG_FILE), &cfg.to_toml_string())?;
    write_reports(out, &eval)?;
    let summary = summary(trainer, &eval, search_seconds, train_seconds);
    write_string(&out.join("metrics.toml"), &toml::to_string(&summary).expect("summary serialises"))?;
    Ok(summary)
}

fn group_embeddings(cfg: &RunConfig) -> Result<Option<Vec<f64>>> {
    match &cfg.group_embeddings {
        Some(p) if cfg.freeze_groups => Ok(Some(checkpoint::read_matrix(p)?.2)),
        _ => Ok(None),
    }
}

/// Search, derivation, stand-alone retraining and evaluation.
pub fn cmd_search(cfg: &RunConfig) -> Result<RunSummary> {
    init_workers(cfg.workers);
    let store = load_store(cfg)?;
    let scfg = cfg.search_config();
    let fixed = group_embeddings(cfg)?;
    let outcome = search(&store, &scfg, fixed.as_deref())?;
    create_dir(&cfg.output)?;
    write_search_log(&cfg.output.join("search_log.csv"), &outcome.log)?;
    let mut rng = epoch_rng(cfg.seed, DERIVE_STREAM);
    let derived = derive(
        &outcome.policy,
        &outcome.groups,
        &outcome.table,
        &store,
        cfg.derive_samples,
        &scfg,
        &mut rng,
    )?;
    info!("derived `{}` with validation reward {:.4}", derived.arch, derived.reward);

    let start = Instant::now();
    let mut trainer = Trainer::new(
        derived.arch,
        outcome.groups.assignment().to_vec(),
        &store,
        cfg.dim,
        cfg.train_config(),
    )?;
    trainer.run(&store)?;
    let train_seconds = start.elapsed().as_secs_f64();
    finish_training(
        "search",
        cfg,
        &store,
        &trainer,
        Some(&outcome.policy),
        Some(outcome.wall_seconds),
        train_seconds,
    )
}

/// Resolves `--arch`: a serialised line or a known model name.
pub fn parse_architecture(spec: &str, blocks: usize) -> Result<Architecture> {
    if spec.contains(':') {
        return spec.parse();
    }
    let model: KnownModel = spec.parse()?;
    encode_known(model, blocks)
}

fn assignment_for(cfg: &RunConfig, arch: &Architecture, store: &TripleStore) -> Result<Vec<usize>> {
    if arch.groups() == 1 {
        return Ok(vec![0; store.num_relations()]);
    }
    let path = cfg.assignment.as_ref().ok_or_else(|| {
        ErasError::Config(format!(
            "architecture has {} groups; set `assignment` to a relation_id<TAB>group file",
            arch.groups()
        ))
    })?;
    checkpoint::read_assignment(path, store.num_relations(), arch.groups())
}

fn check_vocab(ck: &Checkpoint, store: &TripleStore) -> Result<()> {
    let (entities, relations) = vocab_names(store);
    if entities != ck.entities || relations != ck.relations {
        return Err(ErasError::Dimension(
            "dataset vocabulary does not match the checkpoint".into(),
        ));
    }
    Ok(())
}

/// Stand-alone training of a fixed architecture, optionally resumed.
pub fn cmd_train(cfg: &RunConfig, arch: Option<&str>, resume: Option<&Path>) -> Result<RunSummary> {
    init_workers(cfg.workers);
    let store = load_store(cfg)?;
    let start = Instant::now();
    let mut trainer = match resume {
        Some(dir) => {
            let ck = Checkpoint::load(dir)?;
            check_vocab(&ck, &store)?;
            if let Some(spec) = arch {
                if parse_architecture(spec, cfg.blocks)? != ck.arch {
                    return Err(ErasError::Config("--arch differs from the checkpoint".into()));
                }
            }
            let state = ck
                .resume
                .ok_or_else(|| ErasError::Checkpoint("checkpoint has no optimiser state".into()))?;
            let mut t = Trainer::new(ck.arch, ck.assignment, &store, ck.manifest.dim, cfg.train_config())?;
            t.table = state.table;
            t.adagrad = state.adagrad;
            t.losses = state.losses;
            t.best_table = ck.table;
            t.epoch = ck.manifest.epoch;
            t.best_valid_mrr = ck.manifest.best_valid_mrr;
            t.best_epoch = ck.manifest.best_epoch;
            t.stalled = ck.manifest.stalled;
            t
        }
        None => {
            let spec = arch.ok_or_else(|| ErasError::Config("train needs --arch or --resume".into()))?;
            let arch = parse_architecture(spec, cfg.blocks)?;
            let assignment = assignment_for(cfg, &arch, &store)?;
            Trainer::new(arch, assignment, &store, cfg.dim, cfg.train_config())?
        }
    };
    trainer.run(&store)?;
    let train_seconds = start.elapsed().as_secs_f64();
    finish_training("train", cfg, &store, &trainer, None, None, train_seconds)
}

/// Loads the run configuration stored with a checkpoint, then applies overrides.
pub fn checkpoint_config(dir: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let path = dir.join(CONFIG_FILE);
    let path = path.exists().then_some(path);
    RunConfig::load(path.as_deref(), overrides)
}

/// Evaluates a checkpoint on one split and writes `eval_<split>.*` next to it.
pub fn cmd_eval(cfg: &RunConfig, dir: &Path, split: Split) -> Result<(EvalReport, Option<ClassificationReport>)> {
    init_workers(cfg.workers);
    let ck = Checkpoint::load(dir)?;
    let store = load_store(cfg)?;
    check_vocab(&ck, &store)?;
    let labels = classify_relation_patterns(&store, &cfg.pattern_thresholds());
    let net = Supernet::new(&ck.arch, &ck.assignment, &ck.table);
    let report = link_prediction_eval(&net, &store, split, &labels, cfg.tie);
    let classification = if cfg.classify {
        let mut rng = epoch_rng(cfg.seed, CLASSIFY_STREAM);
        Some(triplet_classification(&net, &store, &mut rng)?)
    } else {
        None
    };
    report.write_text(&dir.join(format!("eval_{split}.txt")))?;
    report.write_relation_csv(&dir.join(format!("eval_{split}_relations.csv")))?;
    report.write_summary_csv(&dir.join(format!("eval_{split}_patterns.csv")))?;
    Ok((report, classification))
}

/// Writes the synthetic dataset to the output directory and returns a
/// one-line description.
pub fn cmd_synth(cfg: &RunConfig) -> Result<String> {
    let spec = cfg
        .synthetic
        .as_ref()
        .ok_or_else(|| ErasError::Config("synth needs a [synthetic] section".into()))?;
    let store = generate_synthetic(spec)?;
    store.write_dataset(&cfg.output)?;
    Ok(format!(
        "wrote {} entities, {} relations, {}/{}/{} triples to {}",
        store.num_entities(),
        store.num_relations(),
        store.train().len(),
        store.valid().len(),
        store.test().len(),
        cfg.output.display()
    ))
}

/// Relation pattern table; also written to `<output>/relation_patterns.csv`.
pub fn cmd_patterns(cfg: &RunConfig) -> Result<(Vec<PatternLabel>, String)> {
    let store = load_store(cfg)?;
    let labels = classify_relation_patterns(&store, &cfg.pattern_thresholds());
    let mut counts = vec![0usize; store.num_relations()];
    for t in store.train() {
        counts[t.relation] += 1;
    }
    create_dir(&cfg.output)?;
    let path = cfg.output.join("relation_patterns.csv");
    let io = |e: csv::Error| ErasError::io(&path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(["relation", "pattern", "symmetry_ratio", "inverse_of", "train_triples"])
        .map_err(io)?;
    let mut text = format!("{:<32} {:<15} {:>9} {:>8}  inverse_of\n", "relation", "pattern", "sym_ratio", "train");
    for (r, label) in labels.iter().enumerate() {
        let name = store.relations().name(r);
        let inverse = label.inverse_of.map(|o| store.relations().name(o)).unwrap_or("");
        text.push_str(&format!(
            "{:<32} {:<15} {:>9.4} {:>8}  {}\n",
            name,
            label.pattern.to_string(),
            label.symmetry_ratio,
            counts[r],
            inverse
        ));
        w.write_record([
            name.to_owned(),
            label.pattern.to_string(),
            format!("{:.6}", label.symmetry_ratio),
            inverse.to_owned(),
            counts[r].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ErasError::io(&path, e))?;
    Ok((labels, text))
}
