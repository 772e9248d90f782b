//! Block-bilinear search space.
//!
//! Embeddings are split into `M` blocks. A scoring function for one relation
//! group is the sum over all `M × M` (head block, tail block) items of a
//! triple-dot product with one operation: the zero vector or a signed
//! relation block. An [`Architecture`] fixes that choice for each of the
//! `N` groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ErasError, Result};

/// One entry of the operation set: `0`, `+r_m` or `-r_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Zero,
    /// Relation block `block` (0-based) with sign `+1` or `-1`.
    Block { block: usize, sign: i8 },
}

/// The `2M + 1` operations for `M` blocks.
///
/// Token `0` is the zero operation, token `2m - 1` is `+r_m` and token `2m`
/// is `-r_m` for blocks `m = 1..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperationSet {
    blocks: usize,
}

impl OperationSet {
    pub fn new(blocks: usize) -> Self {
        assert!(blocks >= 1, "at least one block");
        OperationSet { blocks }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn len(&self) -> usize {
        2 * self.blocks + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn operation(&self, token: u8) -> Operation {
        decode_token(token)
    }

    pub fn token(&self, op: Operation) -> u8 {
        encode_token(op)
    }
}

pub fn decode_token(token: u8) -> Operation {
    if token == 0 {
        Operation::Zero
    } else {
        let k = token as usize;
        Operation::Block {
            block: (k - 1) / 2,
            sign: if k % 2 == 1 { 1 } else { -1 },
        }
    }
}

pub fn encode_token(op: Operation) -> u8 {
    match op {
        Operation::Zero => 0,
        Operation::Block { block, sign } => {
            let m = block + 1;
            (if sign > 0 { 2 * m - 1 } else { 2 * m }) as u8
        }
    }
}

fn plus(block: usize) -> u8 {
    (2 * block + 1) as u8
}

fn minus(block: usize) -> u8 {
    (2 * block + 2) as u8
}

/// Token choice for every multiplicative item of every group.
///
/// Item `(i, j)` of group `n` lives at `n·M² + i·M + j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    groups: usize,
    blocks: usize,
    tokens: Vec<u8>,
}

impl Architecture {
    pub fn new(groups: usize, blocks: usize, tokens: Vec<u8>) -> Result<Self> {
        if groups == 0 || blocks == 0 {
            return Err(ErasError::InvalidArgument(
                "architecture needs N >= 1 and M >= 1".into(),
            ));
        }
        if blocks > 127 {
            return Err(ErasError::InvalidArgument(format!("M = {blocks} is too large")));
        }
        let expected = groups * blocks * blocks;
        if tokens.len() != expected {
            return Err(ErasError::InvalidArgument(format!(
                "architecture with N={groups}, M={blocks} needs {expected} tokens, got {}",
                tokens.len()
            )));
        }
        let max = 2 * blocks;
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize > max) {
            return Err(ErasError::InvalidArgument(format!(
                "token {bad} out of range 0..={max}"
            )));
        }
        Ok(Architecture {
            groups,
            blocks,
            tokens,
        })
    }

    pub fn zeros(groups: usize, blocks: usize) -> Self {
        Architecture::new(groups, blocks, vec![0; groups * blocks * blocks]).expect("valid dims")
    }

    /// The same single-group architecture repeated for `groups` groups.
    pub fn replicate(&self, groups: usize) -> Self {
        assert_eq!(self.groups, 1, "replicate expects a single-group architecture");
        Architecture {
            groups,
            blocks: self.blocks,
            tokens: self.tokens.repeat(groups),
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn operations(&self) -> OperationSet {
        OperationSet::new(self.blocks)
    }

    pub fn tokens(&self) -> &[u8] {
        &self.tokens
    }

    /// Tokens of group `n`, row-major over `(i, j)`.
    pub fn group_tokens(&self, n: usize) -> &[u8] {
        let len = self.blocks * self.blocks;
        &self.tokens[n * len..(n + 1) * len]
    }

    pub fn token_at(&self, group: usize, i: usize, j: usize) -> u8 {
        self.tokens[group * self.blocks * self.blocks + i * self.blocks + j]
    }

    /// Non-zero items of group `n` as `(head block, tail block, relation block, sign)`.
    pub fn active_items(&self, n: usize) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let m = self.blocks;
        self.group_tokens(n)
            .iter()
            .enumerate()
            .filter_map(move |(idx, &tok)| match decode_token(tok) {
                Operation::Zero => None,
                Operation::Block { block, sign } => Some((idx / m, idx % m, block, f64::from(sign))),
            })
    }

    /// The binary matrix view: row `v` is the one-hot encoding of token `v`.
    pub fn to_one_hot(&self) -> Vec<Vec<u8>> {
        let width = 2 * self.blocks + 1;
        self.tokens
            .iter()
            .map(|&t| {
                let mut row = vec![0u8; width];
                row[t as usize] = 1;
                row
            })
            .collect()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} :", self.groups, self.blocks)?;
        for t in &self.tokens {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = ErasError;

    /// Parses `"N M : t_1 t_2 … t_V"`.
    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: &str| ErasError::InvalidArgument(format!("architecture line `{line}`: {msg}"));
        let (dims, body) = line.split_once(':').ok_or_else(|| bad("missing `:`"))?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        let [groups, blocks] = dims[..] else {
            return Err(bad("expected `N M` before `:`"));
        };
        let tokens: Vec<u8> = body
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("token is not a small integer")))
            .collect::<Result<_>>()?;
        Architecture::new(groups, blocks, tokens)
    }
}

/// Hand-designed bilinear models expressible in the space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnownModel {
    DistMult,
    ComplEx,
    SimplE,
    Analogy,
}

impl FromStr for KnownModel {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distmult" => Ok(KnownModel::DistMult),
            "complex" => Ok(KnownModel::ComplEx),
            "simple" => Ok(KnownModel::SimplE),
            "analogy" => Ok(KnownModel::Analogy),
            _ => Err(ErasError::InvalidArgument(format!("unknown model `{s}`"))),
        }
    }
}

/// Single-group encoding of a known model over `blocks` blocks.
///
/// ComplEx and SimplE use the first half of the blocks as the real (head
/// role) part and the second half as the imaginary (tail role) part.
/// Analogy needs exactly four blocks: two diagonal, two complex.
pub fn encode_known(model: KnownModel, blocks: usize) -> Result<Architecture> {
    let m = blocks;
    let mut tokens = vec![0u8; m * m];
    let mut set = |i: usize, j: usize, tok: u8| tokens[i * m + j] = tok;
    let incompatible = |why: &str| {
        Err(ErasError::InvalidArgument(format!(
            "{model:?} is not expressible with M = {m}: {why}"
        )))
    };
    match model {
        KnownModel::DistMult => {
            if m == 0 {
                return incompatible("needs M >= 1");
            }
            for i in 0..m {
                set(i, i, plus(i));
            }
        }
        KnownModel::ComplEx => {
            if m == 0 || m % 2 != 0 {
                return incompatible("needs even M");
            }
            let p = m / 2;
            for a in 0..p {
                set(a, a, plus(a));
                set(p + a, p + a, plus(a));
                set(a, p + a, plus(p + a));
                set(p + a, a, minus(p + a));
            }
        }
        KnownModel::SimplE => {
            if m == 0 || m % 2 != 0 {
                return incompatible("needs even M");
            }
            let p = m / 2;
            for a in 0..p {
                set(a, p + a, plus(a));
                set(p + a, a, plus(p + a));
            }
        }
        KnownModel::Analogy => {
            if m != 4 {
                return incompatible("needs M = 4");
            }
            set(0, 0, plus(0));
            set(1, 1, plus(1));
            set(2, 2, plus(2));
            set(3, 3, plus(2));
            set(2, 3, plus(3));
            set(3, 2, minus(3));
        }
    }
    Architecture::new(1, m, tokens)
}

/// Scope of the block-coverage constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintScope {
    /// Every group must use every relation block.
    #[default]
    PerGroup,
    /// The union of all groups must use every relation block.
    Union,
}

impl FromStr for ConstraintScope {
    type Err = ErasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-group" => Ok(ConstraintScope::PerGroup),
            "union" => Ok(ConstraintScope::Union),
            other => Err(ErasError::InvalidArgument(format!("unknown constraint scope `{other}`"))),
        }
    }
}

/// A relation block missing from a group (`group` is `None` for union scope).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub group: Option<usize>,
    /// 0-based relation block.
    pub block: usize,
}

fn covered_blocks<'a>(tokens: impl Iterator<Item = &'a u8>, blocks: usize) -> Vec<bool> {
    let mut seen = vec![false; blocks];
    for &t in tokens {
        if let Operation::Block { block, .. } = decode_token(t) {
            seen[block] = true;
        }
    }
    seen
}

/// Checks that every relation block is selected at least once, with
/// either sign. Returns the missing `(group, block)` pairs.
pub fn check_exploitative(arch: &Architecture, scope: ConstraintScope) -> Vec<Violation> {
    let m = arch.blocks();
    match scope {
        ConstraintScope::PerGroup => (0..arch.groups())
            .flat_map(|n| {
                covered_blocks(arch.group_tokens(n).iter(), m)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, seen)| !seen)
                    .map(move |(block, _)| Violation {
                        group: Some(n),
                        block,
                    })
            })
            .collect(),
        ConstraintScope::Union => covered_blocks(arch.tokens().iter(), m)
            .into_iter()
            .enumerate()
            .filter(|(_, seen)| !seen)
            .map(|(block, _)| Violation { group: None, block })
            .collect(),
    }
}

pub fn is_exploitative(arch: &Architecture, scope: ConstraintScope) -> bool {
    check_exploitative(arch, scope).is_empty()
}
