//! Multiclass log-loss, Adagrad and stand-alone training of fixed architectures.

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ErasError, Result};
use crate::evaluator::{mean_reciprocal_rank, Supernet, TieRule};
use crate::kg_store::{Direction, Triple, TripleStore};
use crate::scorer::{axpy, backprop_query, query_vector, EmbeddingTable, GradAccumulator};
use crate::search_space::{is_exploitative, Architecture, ConstraintScope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Architectures sampled per supernet step.
    pub samples: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Learning-rate multiplier applied when validation MRR stalls.
    pub decay_rate: f64,
    pub epochs: usize,
    pub eval_every: usize,
    /// Stalled evaluations tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            samples: 1,
            learning_rate: 0.1,
            l2: 1e-3,
            decay_rate: 0.95,
            epochs: 200,
            eval_every: 5,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.samples == 0 {
            return Err(ErasError::Config("batch_size and samples must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || self.l2 < 0.0 || !(self.decay_rate > 0.0) {
            return Err(ErasError::Config(
                "learning_rate and decay_rate must be positive, l2 non-negative".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(ErasError::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

pub const ADAGRAD_EPS: f64 = 1e-10;

/// Accumulated squared gradients for `E` and `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub learning_rate: f64,
    pub entity_acc: Vec<f64>,
    pub relation_acc: Vec<f64>,
}

impl AdagradState {
    pub fn new(table: &EmbeddingTable, learning_rate: f64) -> Self {
        AdagradState {
            learning_rate,
            entity_acc: vec![0.0; table.entity_matrix().len()],
            relation_acc: vec![0.0; table.relation_matrix().len()],
        }
    }

    /// `acc += g²; ω -= η g / √(acc + ε)` over the rows touched in `grad`.
    pub fn apply(&mut self, table: &mut EmbeddingTable, grad: &GradAccumulator) {
        let d = table.dim();
        let lr = self.learning_rate;
        let update = |w: &mut [f64], acc: &mut [f64], g: &[f64]| {
            for ((w, a), &g) in w.iter_mut().zip(acc.iter_mut()).zip(g) {
                *a += g * g;
                *w -= lr * g / (*a + ADAGRAD_EPS).sqrt();
            }
        };
        for &e in grad.entity_rows() {
            update(table.entity_mut(e), &mut self.entity_acc[e * d..(e + 1) * d], grad.entity_row(e));
        }
        for &r in grad.relation_rows() {
            update(
                table.relation_mut(r),
                &mut self.relation_acc[r * d..(r + 1) * d],
                grad.relation_row(r),
            );
        }
        debug_assert!(table.is_finite(), "non-finite embedding after Adagrad step");
    }
}

/// Per-query intermediate of the softmax loss.
struct QueryGrad {
    triple: Triple,
    direction: Direction,
    group: usize,
    q: Vec<f64>,
    /// `weight · (p_e − 1[e = answer])` for every entity `e`.
    coef: Vec<f64>,
    grad_q: Vec<f64>,
    loss: f64,
}

fn softmax_query(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    direction: Direction,
    table: &EmbeddingTable,
    weight: f64,
) -> QueryGrad {
    let d = table.dim();
    let q = query_vector(arch, group, triple, direction, table);
    let answer = direction.answer(triple);
    let ents = table.entity_matrix();
    let mut coef: Vec<f64> = ents
        .chunks_exact(d)
        .map(|e| e.iter().zip(&q).map(|(a, b)| a * b).sum())
        .collect();
    let max = coef.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for s in coef.iter_mut() {
        *s = (*s - max).exp();
        z += *s;
    }
    let loss = z.ln() - (coef[answer].ln());
    let mut grad_q = vec![0.0; d];
    for (e, c) in coef.iter_mut().enumerate() {
        *c /= z;
        if e == answer {
            *c -= 1.0;
        }
        *c *= weight;
        if *c != 0.0 {
            axpy(&mut grad_q, *c, &ents[e * d..(e + 1) * d]);
        }
    }
    QueryGrad {
        triple: *triple,
        direction,
        group,
        q,
        coef,
        grad_q,
        loss,
    }
}

/// Adds `weight · ∂L/∂ω` for the batch into `acc` and returns the batch-mean
/// loss `L`. `L` averages, over triples, the tail and head log-losses plus
/// `λ(‖h‖² + ‖r‖² + ‖t‖²)`.
pub fn accumulate_loss_grad(
    arch: &Architecture,
    group_of: &[usize],
    batch: &[Triple],
    table: &EmbeddingTable,
    l2: f64,
    weight: f64,
    acc: &mut GradAccumulator,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(ErasError::InvalidArgument("empty training batch".into()));
    }
    let d = table.dim();
    let scale = weight / batch.len() as f64;
    let queries: Vec<QueryGrad> = batch
        .par_iter()
        .flat_map_iter(|t| {
            let group = group_of[t.relation];
            Direction::BOTH
                .into_iter()
                .map(move |dir| softmax_query(arch, group, t, dir, table, scale))
        })
        .collect();

    let mut loss = 0.0;
    for qg in &queries {
        if !qg.loss.is_finite() {
            let t = qg.triple;
            return Err(ErasError::NonFinite(format!(
                "loss for triple ({}, {}, {})",
                t.head, t.relation, t.tail
            )));
        }
        loss += qg.loss;
    }

    // Candidate side: row e gets Σ_queries coef_e · q, summed per row in a
    // fixed order.
    acc.entity_matrix_mut()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(e, row)| {
            for qg in &queries {
                let c = qg.coef[e];
                if c != 0.0 {
                    axpy(row, c, &qg.q);
                }
            }
        });
    for qg in &queries {
        backprop_query(arch, qg.group, &qg.triple, qg.direction, &qg.grad_q, table, acc);
    }

    let mut penalty = 0.0;
    if l2 > 0.0 {
        for t in batch {
            let (h, r, e) = (table.entity(t.head), table.relation(t.relation), table.entity(t.tail));
            penalty += [h, r, e].iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum::<f64>();
            let (h, e) = (h.to_vec(), e.to_vec());
            axpy(acc.entity_row_mut(t.head), 2.0 * l2 * scale, &h);
            axpy(acc.entity_row_mut(t.tail), 2.0 * l2 * scale, &e);
            axpy(acc.relation_row_mut(t.relation), 2.0 * l2 * scale, table.relation(t.relation));
        }
    }
    Ok((loss + l2 * penalty) / batch.len() as f64)
}

/// Batch-mean loss and its gradient, accumulated into `acc`.
pub fn loss_and_grad(
    arch: &Architecture,
    group_of: &[usize],
    batch: &[Triple],
    table: &EmbeddingTable,
    l2: f64,
    acc: &mut GradAccumulator,
) -> Result<f64> {
    accumulate_loss_grad(arch, group_of, batch, table, l2, 1.0, acc)
}

/// One shared-embedding step averaging the gradients of `archs`.
/// Returns the mean loss over the architectures.
pub fn supernet_step(
    archs: &[Architecture],
    group_of: &[usize],
    batch: &[Triple],
    table: &mut EmbeddingTable,
    adagrad: &mut AdagradState,
    l2: f64,
    acc: &mut GradAccumulator,
) -> Result<f64> {
    if archs.is_empty() {
        return Err(ErasError::InvalidArgument("supernet step needs at least one architecture".into()));
    }
    acc.clear();
    let u = archs.len() as f64;
    let mut loss = 0.0;
    for arch in archs {
        loss += accumulate_loss_grad(arch, group_of, batch, table, l2, 1.0 / u, acc)?;
    }
    adagrad.apply(table, acc);
    Ok(loss / u)
}

/// Deterministic per-epoch rng, so a run can resume at any epoch boundary.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Shuffled training mini-batches for one epoch.
pub fn epoch_batches(train: &[Triple], batch_size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<Triple>> {
    let mut order = train.to_vec();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[Triple]>::to_vec).collect()
}

/// Stand-alone training state of one fixed architecture.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub arch: Architecture,
    pub group_of: Vec<usize>,
    pub config: TrainConfig,
    pub table: EmbeddingTable,
    pub adagrad: AdagradState,
    /// Epochs completed.
    pub epoch: usize,
    pub best_table: EmbeddingTable,
    pub best_valid_mrr: f64,
    pub best_epoch: usize,
    pub stalled: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    pub best_valid_mrr: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub losses: Vec<f64>,
}

impl Trainer {
    /// Fresh embeddings for `store`, seeded from `config.seed`.
    pub fn new(
        arch: Architecture,
        group_of: Vec<usize>,
        store: &TripleStore,
        dim: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if group_of.len() != store.num_relations() || group_of.iter().any(|&g| g >= arch.groups()) {
            return Err(ErasError::InvalidArgument(format!(
                "group assignment must map {} relations into {} groups",
                store.num_relations(),
                arch.groups()
            )));
        }
        if !is_exploitative(&arch, ConstraintScope::PerGroup) {
            warn!("architecture `{arch}` violates the exploitative constraint");
        }
        let mut rng = epoch_rng(config.seed, 0);
        let table = EmbeddingTable::random(
            store.num_entities(),
            store.num_relations(),
            dim,
            arch.blocks(),
            &mut rng,
        )?;
        let adagrad = AdagradState::new(&table, config.learning_rate);
        Ok(Trainer {
            arch,
            group_of,
            config,
            best_table: table.clone(),
            table,
            adagrad,
            epoch: 0,
            best_valid_mrr: f64::NEG_INFINITY,
            best_epoch: 0,
            stalled: 0,
            losses: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.config.epochs || self.stalled >= self.config.patience
    }

    /// One pass over the training split; returns the mean batch loss.
    pub fn run_epoch(&mut self, store: &TripleStore) -> Result<f64> {
        let mut rng = epoch_rng(self.config.seed, self.epoch + 1);
        let batches = epoch_batches(store.train(), self.config.batch_size, &mut rng);
        let mut acc = GradAccumulator::new(&self.table);
        let mut total = 0.0;
        for batch in &batches {
            total += supernet_step(
                std::slice::from_ref(&self.arch),
                &self.group_of,
                batch,
                &mut self.table,
                &mut self.adagrad,
                self.config.l2,
                &mut acc,
            )?;
        }
        if !self.table.is_finite() {
            return Err(ErasError::NonFinite(format!("embeddings after epoch {}", self.epoch + 1)));
        }
        self.epoch += 1;
        let loss = total / batches.len().max(1) as f64;
        self.losses.push(loss);
        Ok(loss)
    }

    /// Validation MRR (mean ties) of the current embeddings.
    pub fn validation_mrr(&self, store: &TripleStore) -> f64 {
        let net = Supernet::new(&self.arch, &self.group_of, &self.table);
        mean_reciprocal_rank(&net, store, store.valid(), TieRule::Mean)
    }

    /// Early-stopping bookkeeping after an evaluation.
    fn record_evaluation(&mut self, mrr: f64) {
        if mrr > self.best_valid_mrr {
            self.best_valid_mrr = mrr;
            self.best_epoch = self.epoch;
            self.best_table.clone_from(&self.table);
            self.stalled = 0;
        } else {
            self.stalled += 1;
            self.adagrad.learning_rate *= self.config.decay_rate;
        }
    }

    /// Trains until the epoch budget or patience runs out.
    pub fn run(&mut self, store: &TripleStore) -> Result<()> {
        if store.valid().is_empty() {
            warn!("no validation triples; training for the full epoch budget");
        }
        while !self.finished() {
            let loss = self.run_epoch(store)?;
            debug!("epoch {} loss {loss:.6}", self.epoch);
            if self.epoch % self.config.eval_every == 0 || self.epoch == self.config.epochs {
                let mrr = if store.valid().is_empty() { 0.0 } else { self.validation_mrr(store) };
                info!("epoch {} loss {loss:.5} valid mrr {mrr:.4}", self.epoch);
                self.record_evaluation(mrr);
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> TrainOutcome {
        TrainOutcome {
            table: self.best_table.clone(),
            best_valid_mrr: self.best_valid_mrr.max(0.0),
            best_epoch: self.best_epoch,
            epochs_run: self.epoch,
            losses: self.losses.clone(),
        }
    }
}

/// Trains `arch` from fresh embeddings with early stopping on validation MRR.
pub fn train_standalone(
    arch: &Architecture,
    group_of: &[usize],
    store: &TripleStore,
    dim: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(arch.clone(), group_of.to_vec(), store, dim, *config)?;
    trainer.run(store)?;
    Ok(trainer.outcome())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::Vocab;
    use crate::scorer::score;
    use crate::search_space::{encode_known, KnownModel};
    use rand::Rng;

    fn random_arch(groups: usize, blocks: usize, rng: &mut ChaCha8Rng) -> Architecture {
        let v = groups * blocks * blocks;
        let tokens = (0..v).map(|_| rng.random_range(0..=(2 * blocks) as u8)).collect();
        Architecture::new(groups, blocks, tokens).unwrap()
    }

    fn brute_loss(arch: &Architecture, group_of: &[usize], batch: &[Triple], table: &EmbeddingTable, l2: f64) -> f64 {
        let n_e = table.num_entities();
        let mut total = 0.0;
        for t in batch {
            let g = group_of[t.relation];
            for dir in Direction::BOTH {
                let scores: Vec<f64> = (0..n_e).map(|e| score(arch, g, &dir.substitute(t, e), table)).collect();
                let lse = scores.iter().map(|s| s.exp()).sum::<f64>().ln();
                total += lse - scores[dir.answer(t)];
            }
            let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            total += l2 * (sq(table.entity(t.head)) + sq(table.relation(t.relation)) + sq(table.entity(t.tail)));
        }
        total / batch.len() as f64
    }

    #[test]
    fn single_entity_loss_is_zero() {
        let table = EmbeddingTable::random(1, 1, 4, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let arch = encode_known(KnownModel::DistMult, 2).unwrap();
        let mut acc = GradAccumulator::new(&table);
        let loss = loss_and_grad(&arch, &[0], &[Triple::new(0, 0, 0)], &table, 0.0, &mut acc).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn zero_architecture_loss_is_uniform() {
        let table = EmbeddingTable::random(7, 2, 4, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let arch = Architecture::zeros(1, 2);
        let mut acc = GradAccumulator::new(&table);
        let loss = loss_and_grad(&arch, &[0, 0], &[Triple::new(0, 1, 3)], &table, 0.0, &mut acc).unwrap();
        assert!((loss - 2.0 * 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let table = EmbeddingTable::random(6, 3, 8, 2, &mut rng).unwrap();
        let arch = random_arch(2, 2, &mut rng);
        let group_of = [0, 1, 1];
        let batch = [Triple::new(0, 0, 1), Triple::new(2, 1, 2), Triple::new(5, 2, 3)];
        let mut acc = GradAccumulator::new(&table);
        let fast = loss_and_grad(&arch, &group_of, &batch, &table, 1e-2, &mut acc).unwrap();
        let slow = brute_loss(&arch, &group_of, &batch, &table, 1e-2);
        assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for blocks in [2, 4] {
            let mut table = EmbeddingTable::random(6, 3, 8, blocks, &mut rng).unwrap();
            let arch = random_arch(1, blocks, &mut rng);
            let batch = [Triple::new(0, 0, 1), Triple::new(3, 2, 3), Triple::new(4, 0, 2)];
            let group_of = [0, 0, 0];
            let mut acc = GradAccumulator::new(&table);
            loss_and_grad(&arch, &group_of, &batch, &table, 1e-2, &mut acc).unwrap();
            let eps = 1e-4;
            for e in 0..6 {
                for x in 0..8 {
                    let orig = table.entity(e)[x];
                    table.entity_mut(e)[x] = orig + eps;
                    let up = brute_loss(&arch, &group_of, &batch, &table, 1e-2);
                    table.entity_mut(e)[x] = orig - eps;
                    let down = brute_loss(&arch, &group_of, &batch, &table, 1e-2);
                    table.entity_mut(e)[x] = orig;
                    let numeric = (up - down) / (2.0 * eps);
                    let analytic = acc.entity_row(e)[x];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!((numeric - analytic).abs() / denom < 1e-5, "E[{e}][{x}]");
                }
            }
        }
    }

    #[test]
    fn tail_loss_is_shift_invariant() {
        // With every entity's second block set to ones, item (0,1) adds
        // <h_0, r_2, 1> to every tail candidate alike.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut table = EmbeddingTable::random(5, 1, 4, 2, &mut rng).unwrap();
        for e in 0..5 {
            table.entity_mut(e)[2..].fill(1.0);
        }
        let arch = Architecture::new(1, 2, vec![1, 3, 0, 0]).unwrap();
        let triple = Triple::new(1, 0, 2);
        let tail_loss = |t: &EmbeddingTable| softmax_query(&arch, 0, &triple, Direction::ReplaceTail, t, 1.0).loss;
        let base = tail_loss(&table);
        table.relation_mut(0)[2..].copy_from_slice(&[3.0, -7.5]);
        let shifted = tail_loss(&table);
        assert!((base - shifted).abs() < 1e-12, "{base} vs {shifted}");
    }

    #[test]
    fn identical_samples_average_to_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let table = EmbeddingTable::random(6, 2, 8, 2, &mut rng).unwrap();
        let arch = random_arch(1, 2, &mut rng);
        let batch = [Triple::new(0, 0, 1), Triple::new(2, 1, 4)];
        let step = |archs: &[Architecture]| {
            let mut t = table.clone();
            let mut ada = AdagradState::new(&t, 0.1);
            let mut acc = GradAccumulator::new(&t);
            let loss = supernet_step(archs, &[0, 0], &batch, &mut t, &mut ada, 1e-3, &mut acc).unwrap();
            (loss, t, ada)
        };
        let (l1, t1, a1) = step(std::slice::from_ref(&arch));
        let (l2, t2, a2) = step(&[arch.clone(), arch.clone()]);
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in t1.entity_matrix().iter().zip(t2.entity_matrix()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a1.relation_acc.iter().zip(&a2.relation_acc) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn step_touches_only_batch_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut table = EmbeddingTable::random(6, 4, 8, 2, &mut rng).unwrap();
        let before = table.clone();
        let arch = encode_known(KnownModel::DistMult, 2).unwrap();
        let mut ada = AdagradState::new(&table, 0.1);
        let mut acc = GradAccumulator::new(&table);
        supernet_step(&[arch], &[0; 4], &[Triple::new(0, 1, 2)], &mut table, &mut ada, 1e-3, &mut acc).unwrap();
        for r in [0, 2, 3] {
            assert_eq!(table.relation(r), before.relation(r));
        }
        assert_ne!(table.relation(1), before.relation(1));
        assert!(ada.entity_acc.iter().all(|&a| a >= 0.0));
    }

    fn toy_store(n_e: usize, n_r: usize, rng: &mut ChaCha8Rng) -> TripleStore {
        let mut ents = Vocab::new();
        (0..n_e).for_each(|e| {
            ents.intern(&format!("e{e}"));
        });
        let mut rels = Vocab::new();
        (0..n_r).for_each(|r| {
            rels.intern(&format!("r{r}"));
        });
        let mut all = std::collections::BTreeSet::new();
        while all.len() < 80 {
            let h = rng.random_range(0..n_e);
            let r = rng.random_range(0..n_r);
            let step = rng.random_range(1..=3);
            all.insert(Triple::new(h, r, (h + step * (r + 1)) % n_e));
        }
        let mut all: Vec<_> = all.into_iter().collect();
        all.shuffle(rng);
        TripleStore::from_ids(ents, rels, all[..60].to_vec(), all[60..70].to_vec(), all[70..].to_vec())
    }

    #[test]
    fn loss_decreases_under_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let store = toy_store(20, 2, &mut rng);
        let arch = encode_known(KnownModel::DistMult, 2).unwrap();
        let cfg = TrainConfig { batch_size: 16, learning_rate: 0.2, ..TrainConfig::default() };
        let mut trainer = Trainer::new(arch, vec![0, 0], &store, 8, cfg).unwrap();
        let first = trainer.run_epoch(&store).unwrap();
        let mut last = first;
        for _ in 0..12 {
            last = trainer.run_epoch(&store).unwrap();
        }
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn standalone_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let store = toy_store(20, 2, &mut rng);
        let arch = encode_known(KnownModel::ComplEx, 2).unwrap();
        let cfg = TrainConfig { epochs: 10, batch_size: 32, ..TrainConfig::default() };
        let a = train_standalone(&arch, &[0, 0], &store, 8, &cfg).unwrap();
        let b = train_standalone(&arch, &[0, 0], &store, 8, &cfg).unwrap();
        assert_eq!(a.best_valid_mrr.to_bits(), b.best_valid_mrr.to_bits());
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn rejects_bad_grouping() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let store = toy_store(20, 2, &mut rng);
        let arch = encode_known(KnownModel::DistMult, 2).unwrap();
        assert!(Trainer::new(arch.clone(), vec![0], &store, 8, TrainConfig::default()).is_err());
        assert!(Trainer::new(arch, vec![0, 1], &store, 8, TrainConfig::default()).is_err());
    }
}
