//! Filtered link-prediction metrics and triplet classification.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ErasError, Result};
use crate::kg_store::{Direction, PatternLabel, RelationPattern, Split, Triple, TripleStore};
use crate::scorer::{score, score_all_entities, EmbeddingTable};
use crate::search_space::Architecture;

/// How candidates that tie with the true answer are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// `rank = 1 + #{strictly higher}`.
    Optimistic,
    /// `rank = 1 + #{strictly higher} + #{tied others} / 2`.
    #[default]
    Mean,
}

impl std::str::FromStr for TieRule {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimistic" => Ok(TieRule::Optimistic),
            "mean" => Ok(TieRule::Mean),
            other => Err(ErasError::InvalidArgument(format!("unknown tie rule `{other}`"))),
        }
    }
}

/// Anything that can score all entities as the answer of a query.
pub trait TripleScorer {
    fn num_entities(&self) -> usize;
    /// Scores with the answer slot of `triple` replaced by every entity id.
    fn score_entities(&self, triple: &Triple, direction: Direction) -> Vec<f64>;
    fn score_triple(&self, triple: &Triple) -> f64;
}

/// A searched or fixed architecture bound to embeddings and a grouping.
#[derive(Debug, Clone, Copy)]
pub struct Supernet<'a> {
    pub arch: &'a Architecture,
    pub group_of: &'a [usize],
    pub table: &'a EmbeddingTable,
}

impl<'a> Supernet<'a> {
    pub fn new(arch: &'a Architecture, group_of: &'a [usize], table: &'a EmbeddingTable) -> Self {
        Supernet {
            arch,
            group_of,
            table,
        }
    }
}

impl TripleScorer for Supernet<'_> {
    fn num_entities(&self) -> usize {
        self.table.num_entities()
    }

    fn score_entities(&self, triple: &Triple, direction: Direction) -> Vec<f64> {
        score_all_entities(self.arch, self.group_of[triple.relation], triple, direction, self.table)
    }

    fn score_triple(&self, triple: &Triple) -> f64 {
        score(self.arch, self.group_of[triple.relation], triple, self.table)
    }
}

/// Rank of `answer` among the entries of `scores` not marked in `filtered`.
pub fn filtered_rank(scores: &[f64], answer: usize, filtered: &[bool], tie: TieRule) -> f64 {
    let target = scores[answer];
    let mut higher = 0usize;
    let mut tied = 0usize;
    for (e, &s) in scores.iter().enumerate() {
        if e == answer || filtered[e] {
            continue;
        }
        if s > target {
            higher += 1;
        } else if s == target {
            tied += 1;
        }
    }
    match tie {
        TieRule::Optimistic => 1.0 + higher as f64,
        TieRule::Mean => 1.0 + higher as f64 + tied as f64 / 2.0,
    }
}

/// Filtered ranks of `triple` for tail then head replacement.
pub fn triple_ranks(
    scorer: &impl TripleScorer,
    store: &TripleStore,
    triple: &Triple,
    tie: TieRule,
) -> [f64; 2] {
    Direction::BOTH.map(|dir| {
        let scores = scorer.score_entities(triple, dir);
        let mask = store.filter_mask(triple, dir);
        filtered_rank(&scores, dir.answer(triple), &mask, tie)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RankMetrics {
    pub count: usize,
    pub mrr: f64,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
}

impl RankMetrics {
    pub fn from_ranks(ranks: &[f64]) -> Self {
        if ranks.is_empty() {
            return RankMetrics::default();
        }
        let n = ranks.len() as f64;
        let frac = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        RankMetrics {
            count: ranks.len(),
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            hit1: frac(1.0),
            hit3: frac(3.0),
            hit10: frac(10.0),
        }
    }

    /// Count-weighted mean of several metric rows.
    pub fn weighted_mean<'a>(rows: impl IntoIterator<Item = &'a RankMetrics>) -> Self {
        let mut out = RankMetrics::default();
        for r in rows {
            let w = r.count as f64;
            out.mrr += w * r.mrr;
            out.hit1 += w * r.hit1;
            out.hit3 += w * r.hit3;
            out.hit10 += w * r.hit10;
            out.count += r.count;
        }
        if out.count > 0 {
            let n = out.count as f64;
            out.mrr /= n;
            out.hit1 /= n;
            out.hit3 /= n;
            out.hit10 /= n;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationRow {
    pub relation: String,
    pub pattern: RelationPattern,
    pub inverse_of: Option<String>,
    pub metrics: RankMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: String,
    /// Over both prediction directions of every triple.
    pub overall: RankMetrics,
    pub per_relation: Vec<RelationRow>,
    pub per_pattern: Vec<(RelationPattern, RankMetrics)>,
    pub wall_seconds: f64,
}

/// Mean filtered MRR over both directions; the quick path used for early
/// stopping and rewards.
pub fn mean_reciprocal_rank(
    scorer: &(impl TripleScorer + Sync),
    store: &TripleStore,
    triples: &[Triple],
    tie: TieRule,
) -> f64 {
    if triples.is_empty() {
        return 0.0;
    }
    let rr: Vec<f64> = triples
        .par_iter()
        .map(|t| triple_ranks(scorer, store, t, tie).iter().map(|r| 1.0 / r).sum::<f64>())
        .collect();
    rr.iter().sum::<f64>() / (2 * triples.len()) as f64
}

/// Full filtered link-prediction evaluation of one split.
pub fn link_prediction_eval(
    scorer: &(impl TripleScorer + Sync),
    store: &TripleStore,
    split: Split,
    patterns: &[PatternLabel],
    tie: TieRule,
) -> EvalReport {
    let start = Instant::now();
    let triples = store.split(split);
    let ranks: Vec<[f64; 2]> = triples
        .par_iter()
        .map(|t| triple_ranks(scorer, store, t, tie))
        .collect();

    let n_r = store.num_relations();
    let mut by_relation: Vec<Vec<f64>> = vec![Vec::new(); n_r];
    let mut all = Vec::with_capacity(2 * triples.len());
    for (t, r) in triples.iter().zip(&ranks) {
        by_relation[t.relation].extend_from_slice(r);
        all.extend_from_slice(r);
    }
    let per_relation: Vec<RelationRow> = (0..n_r)
        .map(|r| RelationRow {
            relation: store.relations().name(r).to_owned(),
            pattern: patterns.get(r).map_or(RelationPattern::General, |p| p.pattern),
            inverse_of: patterns
                .get(r)
                .and_then(|p| p.inverse_of)
                .map(|o| store.relations().name(o).to_owned()),
            metrics: RankMetrics::from_ranks(&by_relation[r]),
        })
        .collect();
    let per_pattern = [
        RelationPattern::Symmetric,
        RelationPattern::AntiSymmetric,
        RelationPattern::General,
    ]
    .into_iter()
    .map(|p| {
        let rows = per_relation.iter().filter(|row| row.pattern == p).map(|row| &row.metrics);
        (p, RankMetrics::weighted_mean(rows))
    })
    .collect();

    EvalReport {
        split: split.to_string(),
        overall: RankMetrics::from_ranks(&all),
        per_relation,
        per_pattern,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

impl EvalReport {
    pub fn pattern(&self, pattern: RelationPattern) -> RankMetrics {
        self.per_pattern
            .iter()
            .find(|(p, _)| *p == pattern)
            .map(|(_, m)| *m)
            .unwrap_or_default()
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let m = &self.overall;
        out.push_str(&format!(
            "split {}: MRR {:.4}  Hit@1 {:.4}  Hit@3 {:.4}  Hit@10 {:.4}  ({} ranks, {:.2}s)\n",
            self.split, m.mrr, m.hit1, m.hit3, m.hit10, m.count, self.wall_seconds
        ));
        out.push_str(&format!(
            "{:<32} {:<15} {:>7} {:>8} {:>8} {:>8}\n",
            "relation", "pattern", "ranks", "MRR", "Hit@1", "Hit@10"
        ));
        for row in &self.per_relation {
            out.push_str(&format!(
                "{:<32} {:<15} {:>7} {:>8.4} {:>8.4} {:>8.4}\n",
                row.relation,
                row.pattern.to_string(),
                row.metrics.count,
                row.metrics.mrr,
                row.metrics.hit1,
                row.metrics.hit10
            ));
        }
        for (p, m) in &self.per_pattern {
            if m.count > 0 {
                out.push_str(&format!(
                    "pattern {:<15} ranks {:>7}  MRR {:.4}  Hit@1 {:.4}  Hit@10 {:.4}\n",
                    p.to_string(),
                    m.count,
                    m.mrr,
                    m.hit1,
                    m.hit10
                ));
            }
        }
        out
    }

    /// One row per relation.
    pub fn write_relation_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["relation", "pattern", "inverse_of", "ranks", "mrr", "hit1", "hit3", "hit10"])
            .map_err(|e| csv_err(path, e))?;
        for row in &self.per_relation {
            let m = &row.metrics;
            w.write_record([
                row.relation.clone(),
                row.pattern.to_string(),
                row.inverse_of.clone().unwrap_or_default(),
                m.count.to_string(),
                fmt_metric(m.mrr),
                fmt_metric(m.hit1),
                fmt_metric(m.hit3),
                fmt_metric(m.hit10),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| ErasError::io(path, e))
    }

    /// Global metrics next to symmetric / anti-symmetric breakdown columns.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let sym = self.pattern(RelationPattern::Symmetric);
        let anti = self.pattern(RelationPattern::AntiSymmetric);
        let gen = self.pattern(RelationPattern::General);
        w.write_record([
            "split", "mrr", "hit1", "hit10", "symmetric_mrr", "symmetric_hit1", "anti_symmetric_mrr",
            "anti_symmetric_hit1", "general_mrr", "general_hit1",
        ])
        .map_err(|e| csv_err(path, e))?;
        w.write_record([
            self.split.clone(),
            fmt_metric(self.overall.mrr),
            fmt_metric(self.overall.hit1),
            fmt_metric(self.overall.hit10),
            fmt_metric(sym.mrr),
            fmt_metric(sym.hit1),
            fmt_metric(anti.mrr),
            fmt_metric(anti.hit1),
            fmt_metric(gen.mrr),
            fmt_metric(gen.hit1),
        ])
        .map_err(|e| csv_err(path, e))?;
        w.flush().map_err(|e| ErasError::io(path, e))
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| ErasError::io(path, e))?;
        f.write_all(self.render().as_bytes()).map_err(|e| ErasError::io(path, e))
    }
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_err(path: &Path, e: csv::Error) -> ErasError {
    ErasError::io(path, std::io::Error::other(e))
}

/// Per-relation decision thresholds for triplet classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierThresholds {
    pub per_relation: Vec<Option<f64>>,
    pub default: f64,
}

impl ClassifierThresholds {
    pub fn threshold(&self, relation: usize) -> f64 {
        self.per_relation.get(relation).copied().flatten().unwrap_or(self.default)
    }
}

/// A scored example: `(relation, score, is_positive)`.
pub type LabeledScore = (usize, f64, bool);

/// Threshold maximising accuracy of `score > θ` on `examples`, with its
/// accuracy. Candidates are midpoints of adjacent distinct scores plus one
/// value below the minimum and one above the maximum; the lowest threshold
/// wins ties.
pub fn best_threshold(examples: &[(f64, bool)]) -> (f64, f64) {
    let mut sorted: Vec<(f64, bool)> = examples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len() as f64;
    let lo = sorted.first().map_or(0.0, |x| x.0);
    let hi = sorted.last().map_or(0.0, |x| x.0);

    // Everything predicted positive: correct = #positives.
    let mut correct = sorted.iter().filter(|x| x.1).count() as f64;
    let mut best = (lo - 1.0, correct / n);
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].0;
        // Move every example with this score to the negative side.
        while i < sorted.len() && sorted[i].0 == value {
            correct += if sorted[i].1 { -1.0 } else { 1.0 };
            i += 1;
        }
        let theta = if i < sorted.len() {
            (value + sorted[i].0) / 2.0
        } else {
            hi + 1.0
        };
        if correct / n > best.1 {
            best = (theta, correct / n);
        }
    }
    best
}

/// Fits `θ_r` per relation on validation examples. Relations without
/// examples fall back to the pooled optimum.
pub fn fit_thresholds(examples: &[LabeledScore], n_relations: usize) -> Result<ClassifierThresholds> {
    if examples.is_empty() {
        return Err(ErasError::InvalidArgument("no validation examples for thresholds".into()));
    }
    let pooled: Vec<(f64, bool)> = examples.iter().map(|&(_, s, y)| (s, y)).collect();
    let (default, _) = best_threshold(&pooled);
    let mut grouped: Vec<Vec<(f64, bool)>> = vec![Vec::new(); n_relations];
    for &(r, s, y) in examples {
        grouped[r].push((s, y));
    }
    let per_relation = grouped
        .iter()
        .map(|ex| (!ex.is_empty()).then(|| best_threshold(ex).0))
        .collect();
    Ok(ClassifierThresholds {
        per_relation,
        default,
    })
}

/// Fraction of examples where `score > θ_r` agrees with the label.
pub fn classify(examples: &[LabeledScore], thresholds: &ClassifierThresholds) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct = examples
        .iter()
        .filter(|&&(r, s, y)| (s > thresholds.threshold(r)) == y)
        .count();
    correct as f64 / examples.len() as f64
}

/// One corrupted triple per positive: head or tail replaced uniformly,
/// avoiding known triples.
pub fn corrupt_negatives(store: &TripleStore, positives: &[Triple], rng: &mut impl Rng) -> Vec<Triple> {
    let n_e = store.num_entities();
    let mut out = Vec::with_capacity(positives.len());
    let mut drawn = HashSet::new();
    for t in positives {
        let dir = if rng.random_bool(0.5) {
            Direction::ReplaceTail
        } else {
            Direction::ReplaceHead
        };
        let mut neg = *t;
        for _ in 0..(100 * n_e.max(1)) {
            let cand = dir.substitute(t, rng.random_range(0..n_e));
            if !store.contains(&cand) && !drawn.contains(&cand) {
                neg = cand;
                break;
            }
        }
        if neg != *t {
            drawn.insert(neg);
            out.push(neg);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub valid_accuracy: f64,
    pub test_accuracy: f64,
}

fn labeled_scores(
    scorer: &impl TripleScorer,
    store: &TripleStore,
    split: Split,
    rng: &mut impl Rng,
) -> Vec<LabeledScore> {
    let pos = store.split(split);
    let neg = corrupt_negatives(store, pos, rng);
    pos.iter()
        .map(|t| (t.relation, scorer.score_triple(t), true))
        .chain(neg.iter().map(|t| (t.relation, scorer.score_triple(t), false)))
        .collect()
}

/// Triplet classification with thresholds fitted on validation data.
pub fn triplet_classification(
    scorer: &impl TripleScorer,
    store: &TripleStore,
    rng: &mut impl Rng,
) -> Result<ClassificationReport> {
    let valid = labeled_scores(scorer, store, Split::Valid, rng);
    let test = labeled_scores(scorer, store, Split::Test, rng);
    let thresholds = fit_thresholds(&valid, store.num_relations())?;
    Ok(ClassificationReport {
        valid_accuracy: classify(&valid, &thresholds),
        test_accuracy: classify(&test, &thresholds),
    })
}
