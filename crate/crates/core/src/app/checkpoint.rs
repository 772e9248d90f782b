//! On-disk checkpoints: a TOML manifest next to binary blobs.
//!
//! Embedding matrices are stored as an 8-byte magic, `rows` and `cols` as
//! little-endian `u64`, then row-major little-endian `f64`. Policy and
//! optimiser state use a named-block container of the same flavour.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ErasError, Result};
use crate::scorer::EmbeddingTable;
use crate::search_space::Architecture;
use crate::trainer::AdagradState;

pub const FORMAT_VERSION: u32 = 1;
pub const MATRIX_MAGIC: &[u8; 8] = b"ERASMAT1";
pub const BLOCKS_MAGIC: &[u8; 8] = b"ERASBLK1";

pub type NamedBlock = (String, Vec<usize>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: String,
    pub dim: usize,
    pub blocks: usize,
    pub groups: usize,
    pub n_entities: usize,
    pub n_relations: usize,
    pub seed: u64,
    pub created_by: String,
    /// Training epochs completed.
    pub epoch: usize,
    /// Adagrad step size in effect after `epoch`.
    pub learning_rate: f64,
    pub best_valid_mrr: f64,
    pub best_epoch: usize,
    pub stalled: usize,
}

/// Optimiser state needed to continue stand-alone training.
#[derive(Debug, Clone, PartialEq)]
pub struct ResumeState {
    pub table: EmbeddingTable,
    pub adagrad: AdagradState,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    /// Embeddings used for evaluation.
    pub table: EmbeddingTable,
    pub arch: Architecture,
    pub assignment: Vec<usize>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub policy: Option<Vec<NamedBlock>>,
    pub resume: Option<ResumeState>,
}

fn ck(msg: String) -> ErasError {
    ErasError::Checkpoint(msg)
}

fn encode_matrix(rows: usize, cols: usize, data: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * data.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| ErasError::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(bytes).map_err(|e| ErasError::io(path, e))?;
    w.flush().map_err(|e| ErasError::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| ErasError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ck(format!("{}: truncated", self.path.display())));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn size(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| ck(format!("{}: size overflow", self.path.display())))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| ck(format!("{}: size overflow", self.path.display())))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(ck(format!("{}: bad magic", self.path.display())));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(ck(format!("{}: trailing bytes", self.path.display())));
        }
        Ok(())
    }
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    assert_eq!(rows * cols, data.len());
    write_file(path, &encode_matrix(rows, cols, data))
}

/// Returns `(rows, cols, data)`.
pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    r.magic(MATRIX_MAGIC)?;
    let rows = r.size()?;
    let cols = r.size()?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| ck(format!("{}: size overflow", path.display())))?;
    let data = r.f64s(n)?;
    r.finish()?;
    Ok((rows, cols, data))
}

pub fn write_blocks(path: &Path, blocks: &[NamedBlock]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(BLOCKS_MAGIC);
    out.extend_from_slice(&(blocks.len() as u64).to_le_bytes());
    for (name, shape, data) in blocks {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "block `{name}` shape");
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u64).to_le_bytes());
        for &s in shape {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_file(path, &out)
}

pub fn read_blocks(path: &Path) -> Result<Vec<NamedBlock>> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    r.magic(BLOCKS_MAGIC)?;
    let count = r.size()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.size()?;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| ck(format!("{}: block name is not UTF-8", path.display())))?;
        let ndim = r.size()?;
        let shape = (0..ndim).map(|_| r.size()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &b| a.checked_mul(b))
            .ok_or_else(|| ck(format!("{}: size overflow", path.display())))?;
        let data = r.f64s(n)?;
        out.push((name, shape, data));
    }
    r.finish()?;
    Ok(out)
}

fn write_table(dir: &Path, prefix: &str, table: &EmbeddingTable) -> Result<()> {
    let d = table.dim();
    write_matrix(
        &dir.join(format!("{prefix}entity.bin")),
        table.num_entities(),
        d,
        table.entity_matrix(),
    )?;
    write_matrix(
        &dir.join(format!("{prefix}relation.bin")),
        table.num_relations(),
        d,
        table.relation_matrix(),
    )
}

fn read_table(dir: &Path, prefix: &str, m: &Manifest) -> Result<EmbeddingTable> {
    let ep = dir.join(format!("{prefix}entity.bin"));
    let rp = dir.join(format!("{prefix}relation.bin"));
    let (er, ec, e) = read_matrix(&ep)?;
    let (rr, rc, r) = read_matrix(&rp)?;
    if (er, ec) != (m.n_entities, m.dim) || (rr, rc) != (m.n_relations, m.dim) {
        return Err(ck(format!(
            "embedding blobs are {er}×{ec} and {rr}×{rc}, manifest says {}×{d} and {}×{d}",
            m.n_entities,
            m.n_relations,
            d = m.dim
        )));
    }
    EmbeddingTable::from_parts(m.dim, m.blocks, e, r)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| ErasError::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn write_assignment(path: &Path, assignment: &[usize]) -> Result<()> {
    write_lines(path, assignment.iter().enumerate().map(|(r, g)| format!("{r}\t{g}")))
}

pub fn read_assignment(path: &Path, n_relations: usize, groups: usize) -> Result<Vec<usize>> {
    let mut out = vec![None; n_relations];
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || ErasError::Parse {
            file: path.to_path_buf(),
            line: i + 1,
            message: "expected `relation_id<TAB>group`".into(),
        };
        let (r, g) = line.split_once('\t').ok_or_else(bad)?;
        let r: usize = r.trim().parse().map_err(|_| bad())?;
        let g: usize = g.trim().parse().map_err(|_| bad())?;
        if r >= n_relations || g >= groups {
            return Err(ErasError::Parse {
                file: path.to_path_buf(),
                line: i + 1,
                message: format!("relation {r} or group {g} out of range"),
            });
        }
        out[r] = Some(g);
    }
    out.into_iter()
        .enumerate()
        .map(|(r, g)| g.ok_or_else(|| ck(format!("{}: relation {r} has no group", path.display()))))
        .collect()
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| ErasError::io(dir, e))?;
        let manifest = toml::to_string(&self.manifest).expect("manifest serialises");
        write_file(&dir.join("manifest.toml"), manifest.as_bytes())?;
        write_table(dir, "", &self.table)?;
        write_lines(&dir.join("architecture.txt"), [self.arch.to_string()])?;
        write_assignment(&dir.join("assignment.tsv"), &self.assignment)?;
        write_lines(&dir.join("entities.txt"), self.entities.iter().cloned())?;
        write_lines(&dir.join("relations.txt"), self.relations.iter().cloned())?;
        if let Some(policy) = &self.policy {
            write_blocks(&dir.join("policy.bin"), policy)?;
        }
        if let Some(state) = &self.resume {
            write_table(dir, "current_", &state.table)?;
            let d = state.table.dim();
            write_blocks(
                &dir.join("adagrad.bin"),
                &[
                    (
                        "entity_acc".into(),
                        vec![state.table.num_entities(), d],
                        state.adagrad.entity_acc.clone(),
                    ),
                    (
                        "relation_acc".into(),
                        vec![state.table.num_relations(), d],
                        state.adagrad.relation_acc.clone(),
                    ),
                    ("losses".into(), vec![state.losses.len()], state.losses.clone()),
                ],
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.toml");
        let text = fs::read_to_string(&mpath).map_err(|e| ErasError::io(&mpath, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| ck(format!("{}: {}", mpath.display(), e.message())))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(ck(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let table = read_table(dir, "", &manifest)?;
        let apath = dir.join("architecture.txt");
        let line = read_lines(&apath)?.into_iter().next().unwrap_or_default();
        let arch: Architecture = line.parse()?;
        if arch.groups() != manifest.groups || arch.blocks() != manifest.blocks {
            return Err(ck("architecture does not match the manifest".into()));
        }
        let assignment = read_assignment(&dir.join("assignment.tsv"), manifest.n_relations, manifest.groups)?;
        let entities = read_lines(&dir.join("entities.txt"))?;
        let relations = read_lines(&dir.join("relations.txt"))?;
        if entities.len() != manifest.n_entities || relations.len() != manifest.n_relations {
            return Err(ck("vocabulary files do not match the manifest".into()));
        }
        let ppath = dir.join("policy.bin");
        let policy = if ppath.exists() { Some(read_blocks(&ppath)?) } else { None };
        let gpath = dir.join("adagrad.bin");
        let resume = if gpath.exists() {
            let state_table = read_table(dir, "current_", &manifest)?;
            let blocks = read_blocks(&gpath)?;
            let get = |name: &str, len: Option<usize>| -> Result<Vec<f64>> {
                let (_, _, data) = blocks
                    .iter()
                    .find(|(n, _, _)| n == name)
                    .ok_or_else(|| ck(format!("adagrad block `{name}` missing")))?;
                if len.is_some_and(|l| l != data.len()) {
                    return Err(ck(format!("adagrad block `{name}` has the wrong size")));
                }
                Ok(data.clone())
            };
            let adagrad = AdagradState {
                learning_rate: manifest.learning_rate,
                entity_acc: get("entity_acc", Some(state_table.entity_matrix().len()))?,
                relation_acc: get("relation_acc", Some(state_table.relation_matrix().len()))?,
            };
            Some(ResumeState {
                table: state_table,
                adagrad,
                losses: get("losses", None)?,
            })
        } else {
            None
        };
        Ok(Checkpoint {
            manifest,
            table,
            arch,
            assignment,
            entities,
            relations,
            policy,
            resume,
        })
    }
}
