use std::collections::{HashMap, HashSet};
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Triple, TripleStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationPattern {
    Symmetric,
    AntiSymmetric,
    General,
}

impl fmt::Display for RelationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationPattern::Symmetric => "symmetric",
            RelationPattern::AntiSymmetric => "anti-symmetric",
            RelationPattern::General => "general",
        })
    }
}

/// Detected pattern of one relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternLabel {
    pub pattern: RelationPattern,
    /// Fraction of training triples whose reverse is also a training triple.
    pub symmetry_ratio: f64,
    /// Relation `r'` such that most `(h,r,t)` appear as `(t,r',h)`.
    pub inverse_of: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternThresholds {
    pub symmetric: f64,
    pub anti_symmetric: f64,
    pub inverse: f64,
}

impl Default for PatternThresholds {
    fn default() -> Self {
        PatternThresholds {
            symmetric: 0.8,
            anti_symmetric: 0.05,
            inverse: 0.8,
        }
    }
}

/// Labels every relation from its training triples.
pub fn classify_relation_patterns(
    store: &TripleStore,
    thresholds: &PatternThresholds,
) -> Vec<PatternLabel> {
    let n_r = store.num_relations();
    let train: HashSet<Triple> = store.train().iter().copied().collect();
    let mut per_relation: Vec<Vec<Triple>> = vec![Vec::new(); n_r];
    for tr in store.train() {
        per_relation[tr.relation].push(*tr);
    }
    // (head, tail) → relations holding it, for the inverse test.
    let mut by_pair: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for tr in &train {
        by_pair.entry((tr.head, tr.tail)).or_default().push(tr.relation);
    }

    (0..n_r)
        .map(|r| {
            let triples = &per_relation[r];
            if triples.is_empty() {
                warn!(
                    "relation `{}` has no training triples; labelled general",
                    store.relations().name(r)
                );
                return PatternLabel {
                    pattern: RelationPattern::General,
                    symmetry_ratio: 0.0,
                    inverse_of: None,
                };
            }
            let n = triples.len() as f64;
            let reversed = triples.iter().filter(|t| train.contains(&t.reversed())).count();
            let ratio = reversed as f64 / n;
            let pattern = if ratio >= thresholds.symmetric {
                RelationPattern::Symmetric
            } else if ratio <= thresholds.anti_symmetric {
                RelationPattern::AntiSymmetric
            } else {
                RelationPattern::General
            };

            let mut counts = vec![0usize; n_r];
            for t in triples {
                if let Some(rels) = by_pair.get(&(t.tail, t.head)) {
                    for &other in rels {
                        if other != r {
                            counts[other] += 1;
                        }
                    }
                }
            }
            let inverse_of = counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c as f64 / n >= thresholds.inverse)
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(other, _)| other);

            PatternLabel {
                pattern,
                symmetry_ratio: ratio,
                inverse_of,
            }
        })
        .collect()
}
