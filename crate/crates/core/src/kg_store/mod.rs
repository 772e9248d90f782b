//! Triple storage, benchmark-file loading and filtered candidate lookup.

mod patterns;
mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{ErasError, Result};

pub use patterns::{classify_relation_patterns, PatternLabel, PatternThresholds, RelationPattern};
pub use synthetic::{generate_synthetic, FamilyPattern, RelationFamily, SyntheticSpec};

/// A fact `(head, relation, tail)` over dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    pub const fn reversed(self) -> Self {
        Triple::new(self.tail, self.relation, self.head)
    }
}

/// Which side of a triple is replaced when ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ReplaceTail,
    ReplaceHead,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::ReplaceTail, Direction::ReplaceHead];

    /// The entity that is the correct answer for `triple` in this direction.
    pub fn answer(self, triple: &Triple) -> usize {
        match self {
            Direction::ReplaceTail => triple.tail,
            Direction::ReplaceHead => triple.head,
        }
    }

    /// `triple` with the answer slot replaced by `entity`.
    pub fn substitute(self, triple: &Triple, entity: usize) -> Triple {
        match self {
            Direction::ReplaceTail => Triple::new(triple.head, triple.relation, entity),
            Direction::ReplaceHead => Triple::new(entity, triple.relation, triple.tail),
        }
    }
}

/// Which split of the store a set of triples comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(ErasError::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Name ↔ dense id mapping in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Immutable indexed triple store with train/valid/test splits.
#[derive(Debug, Clone)]
pub struct TripleStore {
    entities: Vocab,
    relations: Vocab,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    known: HashSet<Triple>,
    tails_of: HashMap<(usize, usize), Vec<usize>>,
    heads_of: HashMap<(usize, usize), Vec<usize>>,
}

/// Named triples for the three splits, in file order.
pub type NamedTriple = (String, String, String);

impl TripleStore {
    /// Builds a store from named triples. Ids are assigned in first-appearance
    /// order across train, then valid, then test.
    pub fn from_named(
        train: &[NamedTriple],
        valid: &[NamedTriple],
        test: &[NamedTriple],
    ) -> Self {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut intern = |rows: &[NamedTriple]| -> Vec<Triple> {
            rows.iter()
                .map(|(h, r, t)| {
                    let h = entities.intern(h);
                    let r = relations.intern(r);
                    let t = entities.intern(t);
                    Triple::new(h, r, t)
                })
                .collect()
        };
        let train = intern(train);
        let valid = intern(valid);
        let test = intern(test);
        Self::from_ids(entities, relations, train, valid, test)
    }

    /// Builds a store from id triples and their vocabularies.
    pub fn from_ids(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Self {
        let mut known = HashSet::with_capacity(train.len() + valid.len() + test.len());
        let mut tails_of: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut heads_of: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut overlaps = 0usize;
        for tr in train.iter().chain(&valid).chain(&test) {
            assert!(tr.head < entities.len() && tr.tail < entities.len());
            assert!(tr.relation < relations.len());
            if known.insert(*tr) {
                tails_of.entry((tr.head, tr.relation)).or_default().push(tr.tail);
                heads_of.entry((tr.relation, tr.tail)).or_default().push(tr.head);
            } else {
                overlaps += 1;
            }
        }
        if overlaps > 0 {
            warn!("{overlaps} duplicate triples across or within splits");
        }
        TripleStore {
            entities,
            relations,
            train,
            valid,
            test,
            known,
            tails_of,
            heads_of,
        }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.known.contains(triple)
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    /// Known triples, all splits, for the answer side of `direction`.
    pub fn known_answers(&self, triple: &Triple, direction: Direction) -> &[usize] {
        let found = match direction {
            Direction::ReplaceTail => self.tails_of.get(&(triple.head, triple.relation)),
            Direction::ReplaceHead => self.heads_of.get(&(triple.relation, triple.tail)),
        };
        found.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Boolean mask over entities: `true` marks candidates removed by the
    /// filtered protocol. The true answer is never masked.
    pub fn filter_mask(&self, triple: &Triple, direction: Direction) -> Vec<bool> {
        let mut mask = vec![false; self.num_entities()];
        for &e in self.known_answers(triple, direction) {
            mask[e] = true;
        }
        mask[direction.answer(triple)] = false;
        mask
    }

    /// All entity ids that remain candidates for `triple` under the filtered
    /// protocol, including the true answer.
    pub fn filtered_candidates(&self, triple: &Triple, direction: Direction) -> Vec<usize> {
        let mask = self.filter_mask(triple, direction);
        (0..self.num_entities()).filter(|&e| !mask[e]).collect()
    }

    /// Writes `train.txt`, `valid.txt` and `test.txt` under `dir`.
    pub fn write_dataset(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| ErasError::io(dir, e))?;
        for split in [Split::Train, Split::Valid, Split::Test] {
            let path = dir.join(split.file_name());
            let file = fs::File::create(&path).map_err(|e| ErasError::io(&path, e))?;
            let mut out = BufWriter::new(file);
            for tr in self.split(split) {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    self.entities.name(tr.head),
                    self.relations.name(tr.relation),
                    self.entities.name(tr.tail)
                )
                .map_err(|e| ErasError::io(&path, e))?;
            }
            out.flush().map_err(|e| ErasError::io(&path, e))?;
        }
        Ok(())
    }
}

fn read_split(path: &Path) -> Result<Vec<NamedTriple>> {
    let text = fs::read_to_string(path).map_err(|e| ErasError::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(ErasError::Parse {
                file: path.to_owned(),
                line: idx + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        rows.push((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned()));
    }
    if rows.is_empty() {
        return Err(ErasError::EmptySplit(path.to_owned()));
    }
    Ok(rows)
}

/// Loads a benchmark directory holding `train.txt`, `valid.txt` and
/// `test.txt`, one `head<TAB>relation<TAB>tail` triple per line.
pub fn load_dataset(dir: &Path) -> Result<TripleStore> {
    let train = read_split(&dir.join(Split::Train.file_name()))?;
    let valid = read_split(&dir.join(Split::Valid.file_name()))?;
    let test = read_split(&dir.join(Split::Test.file_name()))?;
    Ok(TripleStore::from_named(&train, &valid, &test))
}
