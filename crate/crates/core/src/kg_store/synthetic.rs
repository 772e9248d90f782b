//! Pattern-controlled synthetic knowledge graphs.
//!
//! Entities are spread over latent clusters. Each relation links clusters
//! through a map chosen to realise its pattern: an involution for symmetric
//! relations, a cycle of length at least three for anti-symmetric ones.
//! Facts are sampled pairs consistent with the map, so held-out facts are
//! predictable from the cluster structure.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NamedTriple, TripleStore};
use crate::error::{ErasError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyPattern {
    Symmetric,
    AntiSymmetric,
    /// Each unit is a pair of relations `(r, r')` with `(t, r', h)` iff `(h, r, t)`.
    InversePair,
    General,
}

impl std::str::FromStr for FamilyPattern {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(FamilyPattern::Symmetric),
            "anti-symmetric" => Ok(FamilyPattern::AntiSymmetric),
            "inverse-pair" => Ok(FamilyPattern::InversePair),
            "general" => Ok(FamilyPattern::General),
            other => Err(ErasError::InvalidArgument(format!("unknown relation family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationFamily {
    pub pattern: FamilyPattern,
    /// Number of relations (number of relation pairs for `inverse-pair`).
    pub count: usize,
    pub facts_per_relation: usize,
    /// Fraction of each relation's facts drawn from one latent cluster map
    /// common to the family; the rest come from the relation's own map.
    #[serde(default)]
    pub shared_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    pub families: Vec<RelationFamily>,
    #[serde(default)]
    pub seed: u64,
    /// Latent entity clusters; at least 3.
    #[serde(default = "default_clusters")]
    pub clusters: usize,
}

fn default_clusters() -> usize {
    10
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ErasError::InvalidArgument(msg));
        if self.n_entities < 2 {
            return bad("synthetic spec needs at least 2 entities".into());
        }
        if self.clusters < 3 || self.clusters > self.n_entities {
            return bad(format!(
                "clusters must be in 3..={}, got {}",
                self.n_entities, self.clusters
            ));
        }
        if self.families.is_empty() {
            return bad("synthetic spec has no relation families".into());
        }
        for fam in &self.families {
            if !(0.0..=1.0).contains(&fam.shared_fraction) {
                return bad(format!("shared_fraction must lie in [0, 1], got {}", fam.shared_fraction));
            }
            if fam.count == 0 || fam.facts_per_relation == 0 {
                return bad(format!("family {:?} needs positive counts", fam.pattern));
            }
            let limit = self.n_entities * self.n_entities;
            if fam.facts_per_relation > limit {
                return bad(format!(
                    "facts_per_relation {} exceeds n_entities² = {limit}",
                    fam.facts_per_relation
                ));
            }
        }
        Ok(())
    }
}

/// One split unit: triples that are assigned to splits together.
enum Unit {
    Single((usize, usize, usize)),
    /// Two orientations of one fact (symmetric pair or inverse pair).
    Paired((usize, usize, usize), (usize, usize, usize)),
}

struct Layout {
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Layout {
    fn new(n_entities: usize, clusters: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n_entities).collect();
        order.shuffle(rng);
        let mut cluster_of = vec![0; n_entities];
        let mut members = vec![Vec::new(); clusters];
        for (i, &e) in order.iter().enumerate() {
            cluster_of[e] = i % clusters;
            members[i % clusters].push(e);
        }
        for m in &mut members {
            m.sort_unstable();
        }
        Layout {
            cluster_of,
            members,
        }
    }

    fn involution(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let c = self.members.len();
        let mut order: Vec<usize> = (0..c).collect();
        order.shuffle(rng);
        let mut map: Vec<usize> = (0..c).collect();
        for pair in order.chunks(2) {
            if let [a, b] = *pair {
                map[a] = b;
                map[b] = a;
            }
        }
        map
    }

    fn cycle(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let c = self.members.len();
        let mut order: Vec<usize> = (0..c).collect();
        order.shuffle(rng);
        let mut map = vec![0; c];
        for i in 0..c {
            map[order[i]] = order[(i + 1) % c];
        }
        map
    }

    /// Number of ordered pairs `(h, t)`, `h != t`, with `cluster(t) = map(cluster(h))`.
    fn capacity(&self, map: &[usize]) -> usize {
        (0..self.members.len())
            .map(|c| {
                let own = self.members[c].len();
                let target = self.members[map[c]].len();
                if map[c] == c {
                    own * own.saturating_sub(1)
                } else {
                    own * target
                }
            })
            .sum()
    }

    fn draw(&self, map: &[usize], rng: &mut ChaCha8Rng) -> (usize, usize) {
        loop {
            let h = rng.random_range(0..self.cluster_of.len());
            let targets = &self.members[map[self.cluster_of[h]]];
            let t = targets[rng.random_range(0..targets.len())];
            if t != h {
                return (h, t);
            }
        }
    }

    /// Samples `n` distinct ordered pairs, optionally treating `(h,t)` and
    /// `(t,h)` as the same pair.
    fn sample_pairs(
        &self,
        map: &[usize],
        n: usize,
        unordered: bool,
        used: &mut HashSet<(usize, usize)>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(usize, usize)>> {
        let cap = if unordered {
            self.capacity(map) / 2
        } else {
            self.capacity(map)
        };
        let free = cap.saturating_sub(if unordered { used.len() / 2 } else { used.len() });
        if n > free {
            return Err(ErasError::InvalidArgument(format!(
                "relation needs {n} facts but cluster structure admits only {free}"
            )));
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let (h, t) = self.draw(map, rng);
            if used.contains(&(h, t)) {
                continue;
            }
            used.insert((h, t));
            if unordered {
                used.insert((t, h));
            }
            out.push((h, t));
        }
        Ok(out)
    }
}

/// Generates a seeded synthetic store whose relation families carry the
/// requested patterns by construction.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TripleStore> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = Layout::new(spec.n_entities, spec.clusters, &mut rng);

    let mut relation_units: Vec<Vec<Unit>> = Vec::new();
    let mut relation_names: Vec<String> = Vec::new();
    for fam in &spec.families {
        let shared = (fam.shared_fraction > 0.0).then(|| (layout.involution(&mut rng), layout.cycle(&mut rng)));
        for _ in 0..fam.count {
            let r = relation_names.len();
            let n = fam.facts_per_relation;
            let mut used = HashSet::new();
            let (sym_map, anti_map) = match fam.pattern {
                FamilyPattern::Symmetric => (layout.involution(&mut rng), Vec::new()),
                FamilyPattern::AntiSymmetric | FamilyPattern::InversePair => (Vec::new(), layout.cycle(&mut rng)),
                FamilyPattern::General => (layout.involution(&mut rng), layout.cycle(&mut rng)),
            };
            let mut sample = |own: &[usize], common: Option<&Vec<usize>>, n: usize, unordered: bool| {
                let n_common = common.map_or(0, |_| (n as f64 * fam.shared_fraction).round() as usize);
                let mut pairs = match common {
                    Some(map) => layout.sample_pairs(map, n_common, unordered, &mut used, &mut rng)?,
                    None => Vec::new(),
                };
                pairs.extend(layout.sample_pairs(own, n - n_common, unordered, &mut used, &mut rng)?);
                Ok::<_, ErasError>(pairs)
            };
            let common_sym = shared.as_ref().map(|s| &s.0);
            let common_anti = shared.as_ref().map(|s| &s.1);
            match fam.pattern {
                FamilyPattern::Symmetric => {
                    let pairs = sample(&sym_map, common_sym, (n / 2).max(1), true)?;
                    relation_names.push(format!("sym_{r}"));
                    relation_units.push(
                        pairs.into_iter().map(|(h, t)| Unit::Paired((h, r, t), (t, r, h))).collect(),
                    );
                }
                FamilyPattern::AntiSymmetric => {
                    let pairs = sample(&anti_map, common_anti, n, false)?;
                    relation_names.push(format!("anti_{r}"));
                    relation_units.push(pairs.into_iter().map(|(h, t)| Unit::Single((h, r, t))).collect());
                }
                FamilyPattern::InversePair => {
                    let pairs = sample(&anti_map, common_anti, n, false)?;
                    let inv = r + 1;
                    relation_names.push(format!("inv_{r}"));
                    relation_names.push(format!("inv_{r}_rev"));
                    relation_units.push(
                        pairs.into_iter().map(|(h, t)| Unit::Paired((h, r, t), (t, inv, h))).collect(),
                    );
                    relation_units.push(Vec::new());
                }
                FamilyPattern::General => {
                    let n_sym_pairs = n / 4;
                    let n_single = n - 2 * n_sym_pairs;
                    let pairs = sample(&sym_map, common_sym, n_sym_pairs, true)?;
                    let singles = sample(&anti_map, common_anti, n_single, false)?;
                    relation_names.push(format!("gen_{r}"));
                    let mut units: Vec<Unit> =
                        pairs.into_iter().map(|(h, t)| Unit::Paired((h, r, t), (t, r, h))).collect();
                    units.extend(singles.into_iter().map(|(h, t)| Unit::Single((h, r, t))));
                    relation_units.push(units);
                }
            }
        }
    }

    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for units in relation_units {
        let (mut singles, mut paired): (Vec<Unit>, Vec<Unit>) =
            units.into_iter().partition(|u| matches!(u, Unit::Single(_)));
        singles.shuffle(&mut rng);
        paired.shuffle(&mut rng);

        // Singles: exact 80/10/10.
        let n = singles.len();
        let n_valid = (n as f64 * 0.1).round() as usize;
        let n_test = (n as f64 * 0.1).round() as usize;
        for (i, unit) in singles.into_iter().enumerate() {
            let Unit::Single(tr) = unit else { unreachable!() };
            if i < n_valid {
                valid.push(tr);
            } else if i < n_valid + n_test {
                test.push(tr);
            } else {
                train.push(tr);
            }
        }

        // Pairs: 10% split valid/test, 20% one orientation held out, 70% both
        // in train. This keeps triple-level proportions at 80/10/10 and never
        // puts both orientations in test.
        let p = paired.len();
        let n_apart = (p as f64 * 0.1).round() as usize;
        let n_held = (p as f64 * 0.2).round() as usize;
        for (i, unit) in paired.into_iter().enumerate() {
            let Unit::Paired(a, b) = unit else { unreachable!() };
            let (first, second) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            if i < n_apart {
                valid.push(first);
                test.push(second);
            } else if i < n_apart + n_held {
                train.push(first);
                if (i - n_apart) % 2 == 0 {
                    valid.push(second);
                } else {
                    test.push(second);
                }
            } else {
                train.push(first);
                train.push(second);
            }
        }
    }

    let name = |(h, r, t): (usize, usize, usize)| -> NamedTriple {
        (format!("e{h}"), relation_names[r].clone(), format!("e{t}"))
    };
    let train: Vec<NamedTriple> = train.into_iter().map(name).collect();
    let valid: Vec<NamedTriple> = valid.into_iter().map(name).collect();
    let test: Vec<NamedTriple> = test.into_iter().map(name).collect();
    Ok(TripleStore::from_named(&train, &valid, &test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::Triple;

    fn spec(pattern: FamilyPattern, facts: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_entities: 50,
            families: vec![RelationFamily {
                pattern,
                count: 1,
                facts_per_relation: facts,
                shared_fraction: 0.0,
            }],
            seed: 7,
            clusters: 5,
        }
    }

    fn symmetry_ratio(store: &TripleStore) -> f64 {
        let train = store.train();
        let hits = train
            .iter()
            .filter(|t| store.contains(&t.reversed()))
            .count();
        hits as f64 / train.len() as f64
    }

    #[test]
    fn symmetric_family_is_closed_under_reversal() {
        let store = generate_synthetic(&spec(FamilyPattern::Symmetric, 100)).unwrap();
        assert_eq!(store.num_known(), 100);
        assert_eq!(symmetry_ratio(&store), 1.0);
    }

    #[test]
    fn antisymmetric_family_never_reverses() {
        let store = generate_synthetic(&spec(FamilyPattern::AntiSymmetric, 100)).unwrap();
        assert_eq!(symmetry_ratio(&store), 0.0);
    }

    #[test]
    fn inverse_pair_mirrors_facts() {
        let store = generate_synthetic(&spec(FamilyPattern::InversePair, 60)).unwrap();
        assert_eq!(store.num_relations(), 2);
        let all: Vec<Triple> = [store.train(), store.valid(), store.test()].concat();
        for tr in &all {
            let other = 1 - tr.relation;
            assert!(store.contains(&Triple::new(tr.tail, other, tr.head)));
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = generate_synthetic(&spec(FamilyPattern::General, 80)).unwrap();
        let b = generate_synthetic(&spec(FamilyPattern::General, 80)).unwrap();
        assert_eq!(a.train(), b.train());
        assert_eq!(a.valid(), b.valid());
        assert_eq!(a.test(), b.test());
        assert_eq!(a.entities(), b.entities());
    }

    #[test]
    fn split_proportions_and_test_constraint() {
        let store = generate_synthetic(&spec(FamilyPattern::Symmetric, 200)).unwrap();
        assert_eq!(store.train().len(), 160);
        assert_eq!(store.valid().len(), 20);
        assert_eq!(store.test().len(), 20);
        let test: HashSet<Triple> = store.test().iter().copied().collect();
        assert!(store.test().iter().all(|t| !test.contains(&t.reversed())));
    }

    #[test]
    fn too_many_facts_is_an_error() {
        assert!(generate_synthetic(&spec(FamilyPattern::AntiSymmetric, 2501)).is_err());
        // Fits under n² but not under the cluster structure.
        assert!(generate_synthetic(&spec(FamilyPattern::AntiSymmetric, 2000)).is_err());
    }
}
