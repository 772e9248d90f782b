//! Alternating search over shared embeddings, relation groups and the
//! controller, plus derivation of the final architecture.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info};
use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, PolicyState, SampleTrace};
use crate::error::{ErasError, Result};
use crate::evaluator::{filtered_rank, TieRule};
use crate::grouping::{init_assignments, GroupAssignment};
use crate::kg_store::{Direction, Triple, TripleStore};
use crate::scorer::{score_all_candidates, score_all_entities, EmbeddingTable, GradAccumulator};
use crate::search_space::{encode_known, is_exploitative, Architecture, ConstraintScope, KnownModel};
use crate::trainer::{epoch_batches, epoch_rng, supernet_step, train_standalone, AdagradState, TrainConfig};

/// Candidate set used to rank answers when computing rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    /// Every non-filtered entity.
    Full,
    /// This many uniformly drawn entities plus the true answer, filtered.
    Sampled(usize),
}

impl Default for CandidateMode {
    fn default() -> Self {
        CandidateMode::Sampled(500)
    }
}

impl fmt::Display for CandidateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateMode::Full => f.write_str("full"),
            CandidateMode::Sampled(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for CandidateMode {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(CandidateMode::Full);
        }
        match s.parse::<usize>() {
            Ok(c) if c > 0 => Ok(CandidateMode::Sampled(c)),
            _ => Err(ErasError::Config(format!(
                "reward_candidates must be \"full\" or a positive count, got `{s}`"
            ))),
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum CandidateRepr {
    Count(usize),
    Name(String),
}

impl Serialize for CandidateMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CandidateMode::Full => CandidateRepr::Name("full".into()).serialize(s),
            CandidateMode::Sampled(c) => CandidateRepr::Count(*c).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CandidateMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match CandidateRepr::deserialize(d)? {
            CandidateRepr::Count(c) => c.to_string().parse(),
            CandidateRepr::Name(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub groups: usize,
    pub blocks: usize,
    pub dim: usize,
    /// Architectures drawn for the final selection.
    pub derive_samples: usize,
    pub epochs: usize,
    pub reward_batch: usize,
    pub reward_candidates: CandidateMode,
    /// Reward on the training mini-batch instead of validation data.
    pub single_level: bool,
    /// Keep the initial grouping for the whole search.
    pub freeze_groups: bool,
    /// Epochs of the SimplE pre-training that seeds frozen groups when no
    /// relation embeddings are supplied.
    pub pretrain_epochs: usize,
    pub constraint: ConstraintScope,
    pub seed: u64,
    pub train: TrainConfig,
    pub controller: ControllerConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            groups: 3,
            blocks: 4,
            dim: 64,
            derive_samples: 32,
            epochs: 50,
            reward_batch: 256,
            reward_candidates: CandidateMode::default(),
            single_level: false,
            freeze_groups: false,
            pretrain_epochs: 50,
            constraint: ConstraintScope::PerGroup,
            seed: 0,
            train: TrainConfig::default(),
            controller: ControllerConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.blocks == 0 || self.derive_samples == 0 || self.reward_batch == 0 {
            return Err(ErasError::Config(
                "groups, blocks, derive_samples and reward_batch must be at least 1".into(),
            ));
        }
        if self.dim == 0 || self.dim % self.blocks != 0 {
            return Err(ErasError::Config(format!(
                "dim {} must be a positive multiple of blocks {}",
                self.dim, self.blocks
            )));
        }
        if self.blocks > 127 {
            return Err(ErasError::Config("at most 127 blocks are supported".into()));
        }
        self.train.validate()
    }
}

/// Per-triple reciprocal ranks (tail and head) under `arch`, with optimistic ties.
fn reciprocal_ranks(
    arch: &Architecture,
    group_of: &[usize],
    table: &EmbeddingTable,
    store: &TripleStore,
    triples: &[Triple],
    candidates: Option<&[[Vec<usize>; 2]]>,
) -> Vec<f64> {
    triples
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let group = group_of[t.relation];
            let mut rr = 0.0;
            for (d, dir) in Direction::BOTH.into_iter().enumerate() {
                let rank = match candidates {
                    None => {
                        let scores = score_all_entities(arch, group, t, dir, table);
                        filtered_rank(&scores, dir.answer(t), &store.filter_mask(t, dir), TieRule::Optimistic)
                    }
                    Some(lists) => {
                        let list = &lists[k][d];
                        let scores = score_all_candidates(arch, group, t, dir, list, table)
                            .expect("candidate lists include the answer");
                        // The answer is stored first.
                        let target = scores[0];
                        1.0 + scores[1..].iter().filter(|&&s| s > target).count() as f64
                    }
                };
                rr += 1.0 / rank;
            }
            rr
        })
        .collect()
}

/// Answer-first candidate lists for each triple and direction.
fn sample_candidates(
    store: &TripleStore,
    triples: &[Triple],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<[Vec<usize>; 2]> {
    let n_e = store.num_entities();
    triples
        .iter()
        .map(|t| {
            Direction::BOTH.map(|dir| {
                let answer = dir.answer(t);
                let known = store.known_answers(t, dir);
                let mut list = vec![answer];
                for e in index::sample(rng, n_e, count.min(n_e)) {
                    if e != answer && !known.contains(&e) {
                        list.push(e);
                    }
                }
                list
            })
        })
        .collect()
}

/// Mean reciprocal rank of the true head and tail; 0 for architectures that
/// violate the exploitative constraint.
pub fn reward(
    arch: &Architecture,
    group_of: &[usize],
    table: &EmbeddingTable,
    store: &TripleStore,
    triples: &[Triple],
    mode: CandidateMode,
    scope: ConstraintScope,
    rng: &mut impl Rng,
) -> Result<f64> {
    if triples.is_empty() {
        return Err(ErasError::InvalidArgument("reward batch is empty".into()));
    }
    if !is_exploitative(arch, scope) {
        return Ok(0.0);
    }
    let lists = match mode {
        CandidateMode::Sampled(c) if c < store.num_entities() => Some(sample_candidates(store, triples, c, rng)),
        _ => None,
    };
    let rr = reciprocal_ranks(arch, group_of, table, store, triples, lists.as_deref());
    Ok(rr.iter().sum::<f64>() / (2 * triples.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchLogRow {
    pub wall_seconds: f64,
    pub epoch: usize,
    pub step: usize,
    pub mean_loss: f64,
    pub mean_reward: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub policy: PolicyState,
    pub groups: GroupAssignment,
    pub table: EmbeddingTable,
    pub adagrad: AdagradState,
    pub log: Vec<SearchLogRow>,
    pub wall_seconds: f64,
}

/// Relation embeddings used to form frozen groups: pre-trained SimplE when
/// the block count allows it, DistMult otherwise.
fn pretrained_relations(store: &TripleStore, cfg: &SearchConfig) -> Result<Vec<f64>> {
    let model = if cfg.blocks % 2 == 0 { KnownModel::SimplE } else { KnownModel::DistMult };
    let arch = encode_known(model, cfg.blocks)?;
    let train = TrainConfig {
        epochs: cfg.pretrain_epochs,
        seed: cfg.seed ^ 0x5eed,
        ..cfg.train
    };
    let out = train_standalone(&arch, &vec![0; store.num_relations()], store, cfg.dim, &train)?;
    Ok(out.table.relation_matrix().to_vec())
}

/// Runs the alternating search loop.
///
/// `group_embeddings` seeds frozen groups when `freeze_groups` is set; it
/// is ignored otherwise.
pub fn search(store: &TripleStore, cfg: &SearchConfig, group_embeddings: Option<&[f64]>) -> Result<SearchOutcome> {
    search_with_policy(store, cfg, group_embeddings, None)
}

/// [`search`] starting from a given policy; with `controller.learning_rate`
/// at zero the policy stays fixed.
pub fn search_with_policy(
    store: &TripleStore,
    cfg: &SearchConfig,
    group_embeddings: Option<&[f64]>,
    policy: Option<PolicyState>,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if store.train().is_empty() {
        return Err(ErasError::EmptySplit("train".into()));
    }
    if !cfg.single_level && store.valid().is_empty() {
        return Err(ErasError::EmptySplit("valid".into()));
    }
    let start = Instant::now();
    let (n, m) = (cfg.groups, cfg.blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = EmbeddingTable::random(store.num_entities(), store.num_relations(), cfg.dim, m, &mut rng)?;
    let mut policy = match policy {
        Some(p) => p,
        None => PolicyState::for_space(n, m, cfg.controller, &mut rng),
    };
    if policy.steps() != n * m * m || policy.num_ops() != 2 * m + 1 {
        return Err(ErasError::InvalidArgument("policy dimensions do not match the search space".into()));
    }
    let mut groups = if cfg.freeze_groups {
        let rel = match group_embeddings {
            Some(r) => r.to_vec(),
            None => pretrained_relations(store, cfg)?,
        };
        let dim = rel.len() / store.num_relations().max(1);
        init_assignments(&rel, dim, n, cfg.seed)?
    } else {
        init_assignments(table.relation_matrix(), cfg.dim, n, cfg.seed)?
    };
    info!("initial groups {:?}", groups.assignment());

    let mut adagrad = AdagradState::new(&table, cfg.train.learning_rate);
    let mut acc = GradAccumulator::new(&table);
    let mut log = Vec::new();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut batch_rng = epoch_rng(cfg.seed, epoch);
        let batches = epoch_batches(store.train(), cfg.train.batch_size, &mut batch_rng);
        for batch in &batches {
            let traces: Vec<SampleTrace> = (0..cfg.train.samples).map(|_| policy.sample(&mut rng)).collect();
            let archs = traces
                .iter()
                .map(|t| t.architecture(n, m))
                .collect::<Result<Vec<_>>>()?;
            let loss = supernet_step(&archs, groups.assignment(), batch, &mut table, &mut adagrad, cfg.train.l2, &mut acc)?;

            let reward_triples: Vec<Triple> = if cfg.single_level {
                batch.clone()
            } else if store.valid().len() <= cfg.reward_batch {
                store.valid().to_vec()
            } else {
                store.valid().choose_multiple(&mut rng, cfg.reward_batch).copied().collect()
            };
            let mut scored = Vec::with_capacity(traces.len());
            let mut total = 0.0;
            for (trace, arch) in traces.into_iter().zip(&archs) {
                let q = reward(
                    arch,
                    groups.assignment(),
                    &table,
                    store,
                    &reward_triples,
                    cfg.reward_candidates,
                    cfg.constraint,
                    &mut rng,
                )?;
                total += q;
                scored.push((trace, q));
            }
            if cfg.controller.learning_rate > 0.0 {
                policy.reinforce_update(&scored)?;
            }
            step += 1;
            let row = SearchLogRow {
                wall_seconds: start.elapsed().as_secs_f64(),
                epoch,
                step,
                mean_loss: loss,
                mean_reward: total / scored.len() as f64,
                baseline: policy.baseline(),
            };
            debug!("{row:?}");
            log.push(row);
        }
        if !cfg.freeze_groups {
            groups.update_assignments(table.relation_matrix())?;
        }
        if let Some(last) = log.last() {
            info!(
                "search epoch {epoch}: loss {:.4} reward {:.4} groups {:?}",
                last.mean_loss,
                last.mean_reward,
                groups.assignment()
            );
        }
    }
    Ok(SearchOutcome {
        policy,
        groups,
        table,
        adagrad,
        log,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Largest validation set scored in full during derivation.
pub const DERIVE_VALIDATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub arch: Architecture,
    pub reward: f64,
    /// Rewards of all samples in the order drawn.
    pub rewards: Vec<f64>,
    pub samples: Vec<Architecture>,
}

/// Samples `k` architectures and keeps the one with the highest reward on
/// the validation set, ranked against all filtered candidates.
pub fn derive(
    policy: &PolicyState,
    groups: &GroupAssignment,
    table: &EmbeddingTable,
    store: &TripleStore,
    k: usize,
    cfg: &SearchConfig,
    rng: &mut impl Rng,
) -> Result<Derived> {
    if k == 0 {
        return Err(ErasError::InvalidArgument("derive needs at least one sample".into()));
    }
    let valid: Vec<Triple> = if store.valid().len() <= DERIVE_VALIDATION_CAP {
        store.valid().to_vec()
    } else {
        store.valid().choose_multiple(rng, DERIVE_VALIDATION_CAP).copied().collect()
    };
    if valid.is_empty() {
        return Err(ErasError::EmptySplit("valid".into()));
    }
    let (n, m) = (cfg.groups, cfg.blocks);
    let samples: Vec<Architecture> = (0..k)
        .map(|_| policy.sample(rng).architecture(n, m))
        .collect::<Result<_>>()?;
    if samples.iter().all(|a| !is_exploitative(a, cfg.constraint)) {
        return Err(ErasError::Search(format!(
            "all {k} sampled architectures violate the exploitative constraint; sample more"
        )));
    }
    let mut rewards = Vec::with_capacity(k);
    for arch in &samples {
        rewards.push(reward(arch, groups.assignment(), table, store, &valid, CandidateMode::Full, cfg.constraint, rng)?);
    }
    let mut best = 0;
    for (i, &q) in rewards.iter().enumerate() {
        if q > rewards[best] {
            best = i;
        }
    }
    Ok(Derived {
        arch: samples[best].clone(),
        reward: rewards[best],
        rewards,
        samples,
    })
}

/// Fraction of relations whose group's majority label matches their own.
pub fn group_purity(assignment: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(assignment.len(), labels.len());
    if assignment.is_empty() {
        return 1.0;
    }
    let groups = assignment.iter().max().map_or(0, |g| g + 1);
    let classes = labels.iter().max().map_or(0, |l| l + 1);
    let mut counts = vec![vec![0usize; classes]; groups];
    for (&g, &l) in assignment.iter().zip(labels) {
        counts[g][l] += 1;
    }
    let majority: usize = counts.iter().map(|c| c.iter().copied().max().unwrap_or(0)).sum();
    majority as f64 / assignment.len() as f64
}
