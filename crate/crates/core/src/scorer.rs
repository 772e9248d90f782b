//! Supernet scores and their gradients with respect to the shared embeddings.

use rand::Rng;

use crate::error::{ErasError, Result};
use crate::kg_store::{Direction, Triple};
use crate::search_space::Architecture;

/// Shared entity and relation embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    blocks: usize,
    entity: Vec<f64>,
    relation: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(n_entities: usize, n_relations: usize, dim: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || dim == 0 || dim % blocks != 0 {
            return Err(ErasError::Dimension(format!(
                "embedding dimension {dim} is not divisible into {blocks} blocks"
            )));
        }
        Ok(EmbeddingTable {
            dim,
            blocks,
            entity: vec![0.0; n_entities * dim],
            relation: vec![0.0; n_relations * dim],
        })
    }

    /// Uniform `(-0.5/√d, 0.5/√d)` initialisation.
    pub fn random(
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        blocks: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut table = Self::zeros(n_entities, n_relations, dim, blocks)?;
        let bound = 0.5 / (dim as f64).sqrt();
        for x in table.entity.iter_mut().chain(table.relation.iter_mut()) {
            *x = rng.random_range(-bound..bound);
        }
        Ok(table)
    }

    pub fn from_parts(
        dim: usize,
        blocks: usize,
        entity: Vec<f64>,
        relation: Vec<f64>,
    ) -> Result<Self> {
        let mut table = Self::zeros(0, 0, dim, blocks)?;
        if entity.len() % dim != 0 || relation.len() % dim != 0 {
            return Err(ErasError::Dimension(format!(
                "embedding buffers are not multiples of d = {dim}"
            )));
        }
        table.entity = entity;
        table.relation = relation;
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_width(&self) -> usize {
        self.dim / self.blocks
    }

    pub fn num_entities(&self) -> usize {
        self.entity.len() / self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.relation.len() / self.dim
    }

    pub fn entity(&self, e: usize) -> &[f64] {
        &self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        &self.relation[r * self.dim..(r + 1) * self.dim]
    }

    pub fn entity_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.relation[r * self.dim..(r + 1) * self.dim]
    }

    pub fn entity_matrix(&self) -> &[f64] {
        &self.entity
    }

    pub fn relation_matrix(&self) -> &[f64] {
        &self.relation
    }

    pub fn entity_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.entity
    }

    pub fn relation_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.relation
    }

    pub fn is_finite(&self) -> bool {
        self.entity.iter().chain(&self.relation).all(|x| x.is_finite())
    }

    fn check(&self, arch: &Architecture, group: usize) {
        debug_assert_eq!(arch.blocks(), self.blocks, "architecture/table block mismatch");
        debug_assert!(group < arch.groups());
    }
}

/// `Σ_x a_x · b_x · c_x`.
pub fn triple_dot(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    if a.len() != b.len() || b.len() != c.len() {
        return Err(ErasError::Dimension(format!(
            "triple_dot lengths {} / {} / {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    Ok(dot3(a, b, c))
}

#[inline]
fn dot3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).sum()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn block(v: &[f64], idx: usize, width: usize) -> &[f64] {
    &v[idx * width..(idx + 1) * width]
}

/// `f_n(h, r, t)` for group `group` of `arch`.
pub fn score(arch: &Architecture, group: usize, triple: &Triple, table: &EmbeddingTable) -> f64 {
    table.check(arch, group);
    let w = table.block_width();
    let h = table.entity(triple.head);
    let r = table.relation(triple.relation);
    let t = table.entity(triple.tail);
    arch.active_items(group)
        .map(|(i, j, m, s)| s * dot3(block(h, i, w), block(r, m, w), block(t, j, w)))
        .sum()
}

/// The vector `q` with `f_n = q · e` for the entity `e` on the answer side.
///
/// For tail replacement block `j` of `q` is `Σ_i s·(h_i ⊙ r_m)`; for head
/// replacement block `i` is `Σ_j s·(r_m ⊙ t_j)`.
pub fn query_vector(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    direction: Direction,
    table: &EmbeddingTable,
) -> Vec<f64> {
    table.check(arch, group);
    let w = table.block_width();
    let r = table.relation(triple.relation);
    let mut q = vec![0.0; table.dim()];
    match direction {
        Direction::ReplaceTail => {
            let h = table.entity(triple.head);
            for (i, j, m, s) in arch.active_items(group) {
                let (hb, rb) = (block(h, i, w), block(r, m, w));
                for (x, q) in q[j * w..(j + 1) * w].iter_mut().enumerate() {
                    *q += s * hb[x] * rb[x];
                }
            }
        }
        Direction::ReplaceHead => {
            let t = table.entity(triple.tail);
            for (i, j, m, s) in arch.active_items(group) {
                let (tb, rb) = (block(t, j, w), block(r, m, w));
                for (x, q) in q[i * w..(i + 1) * w].iter_mut().enumerate() {
                    *q += s * rb[x] * tb[x];
                }
            }
        }
    }
    q
}

/// Scores of `triple` with the answer slot replaced by each candidate.
///
/// One pass builds the query vector, after which each candidate costs one
/// `d`-length dot product.
pub fn score_all_candidates(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    direction: Direction,
    candidates: &[usize],
    table: &EmbeddingTable,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(ErasError::InvalidArgument("empty candidate list".into()));
    }
    let q = query_vector(arch, group, triple, direction, table);
    Ok(candidates.iter().map(|&e| dot(&q, table.entity(e))).collect())
}

/// Scores against every entity.
pub fn score_all_entities(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    direction: Direction,
    table: &EmbeddingTable,
) -> Vec<f64> {
    let q = query_vector(arch, group, triple, direction, table);
    table
        .entity_matrix()
        .chunks_exact(table.dim())
        .map(|row| dot(&q, row))
        .collect()
}

/// Row-sparse gradient buffer over the shape of an [`EmbeddingTable`].
///
/// Storage is dense; a touched-row list makes clearing and applying cost
/// proportional to the rows actually written.
#[derive(Debug, Clone)]
pub struct GradAccumulator {
    dim: usize,
    entity: Vec<f64>,
    relation: Vec<f64>,
    entity_touched: Vec<bool>,
    relation_touched: Vec<bool>,
    entity_rows: Vec<usize>,
    relation_rows: Vec<usize>,
}

impl GradAccumulator {
    pub fn new(table: &EmbeddingTable) -> Self {
        let (n_e, n_r, d) = (table.num_entities(), table.num_relations(), table.dim());
        GradAccumulator {
            dim: d,
            entity: vec![0.0; n_e * d],
            relation: vec![0.0; n_r * d],
            entity_touched: vec![false; n_e],
            relation_touched: vec![false; n_r],
            entity_rows: Vec::new(),
            relation_rows: Vec::new(),
        }
    }

    pub fn entity_row_mut(&mut self, e: usize) -> &mut [f64] {
        if !self.entity_touched[e] {
            self.entity_touched[e] = true;
            self.entity_rows.push(e);
        }
        &mut self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation_row_mut(&mut self, r: usize) -> &mut [f64] {
        if !self.relation_touched[r] {
            self.relation_touched[r] = true;
            self.relation_rows.push(r);
        }
        &mut self.relation[r * self.dim..(r + 1) * self.dim]
    }

    pub fn entity_row(&self, e: usize) -> &[f64] {
        &self.entity[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation_row(&self, r: usize) -> &[f64] {
        &self.relation[r * self.dim..(r + 1) * self.dim]
    }

    /// The whole entity gradient matrix, with every row marked touched.
    pub fn entity_matrix_mut(&mut self) -> &mut [f64] {
        for e in 0..self.entity_touched.len() {
            if !self.entity_touched[e] {
                self.entity_touched[e] = true;
                self.entity_rows.push(e);
            }
        }
        &mut self.entity
    }

    /// Touched entity rows in first-touch order.
    pub fn entity_rows(&self) -> &[usize] {
        &self.entity_rows
    }

    pub fn relation_rows(&self) -> &[usize] {
        &self.relation_rows
    }

    pub fn is_empty(&self) -> bool {
        self.entity_rows.is_empty() && self.relation_rows.is_empty()
    }

    pub fn clear(&mut self) {
        for &e in &self.entity_rows {
            self.entity[e * self.dim..(e + 1) * self.dim].fill(0.0);
            self.entity_touched[e] = false;
        }
        for &r in &self.relation_rows {
            self.relation[r * self.dim..(r + 1) * self.dim].fill(0.0);
            self.relation_touched[r] = false;
        }
        self.entity_rows.clear();
        self.relation_rows.clear();
    }

    /// Multiplies every touched row by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for &e in &self.entity_rows {
            self.entity[e * self.dim..(e + 1) * self.dim]
                .iter_mut()
                .for_each(|x| *x *= factor);
        }
        for &r in &self.relation_rows {
            self.relation[r * self.dim..(r + 1) * self.dim]
                .iter_mut()
                .for_each(|x| *x *= factor);
        }
    }

    /// Adds `factor · other` into `self`.
    pub fn add_scaled(&mut self, other: &GradAccumulator, factor: f64) {
        for &e in &other.entity_rows {
            let src = other.entity_row(e).to_vec();
            axpy(self.entity_row_mut(e), factor, &src);
        }
        for &r in &other.relation_rows {
            let src = other.relation_row(r).to_vec();
            axpy(self.relation_row_mut(r), factor, &src);
        }
    }
}

#[inline]
pub(crate) fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, x) in dst.iter_mut().zip(x) {
        *d += a * x;
    }
}

/// Accumulates `g · ∂f_n(h,r,t)/∂ω` into `acc`.
pub fn grad_triple(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    upstream: f64,
    table: &EmbeddingTable,
    acc: &mut GradAccumulator,
) {
    if upstream == 0.0 {
        return;
    }
    table.check(arch, group);
    let w = table.block_width();
    let d = table.dim();
    let h = table.entity(triple.head);
    let r = table.relation(triple.relation);
    let t = table.entity(triple.tail);
    let mut gh = vec![0.0; d];
    let mut gr = vec![0.0; d];
    let mut gt = vec![0.0; d];
    for (i, j, m, s) in arch.active_items(group) {
        let g = upstream * s;
        for x in 0..w {
            let (hx, rx, tx) = (h[i * w + x], r[m * w + x], t[j * w + x]);
            gh[i * w + x] += g * rx * tx;
            gt[j * w + x] += g * hx * rx;
            gr[m * w + x] += g * hx * tx;
        }
    }
    axpy(acc.entity_row_mut(triple.head), 1.0, &gh);
    axpy(acc.entity_row_mut(triple.tail), 1.0, &gt);
    axpy(acc.relation_row_mut(triple.relation), 1.0, &gr);
}

/// Back-propagates `∂L/∂q` of a [`query_vector`] into the fixed entity and
/// the relation row.
pub(crate) fn backprop_query(
    arch: &Architecture,
    group: usize,
    triple: &Triple,
    direction: Direction,
    grad_q: &[f64],
    table: &EmbeddingTable,
    acc: &mut GradAccumulator,
) {
    let w = table.block_width();
    let d = table.dim();
    let r = table.relation(triple.relation);
    let (fixed_id, fixed) = match direction {
        Direction::ReplaceTail => (triple.head, table.entity(triple.head)),
        Direction::ReplaceHead => (triple.tail, table.entity(triple.tail)),
    };
    let mut g_fixed = vec![0.0; d];
    let mut g_rel = vec![0.0; d];
    for (i, j, m, s) in arch.active_items(group) {
        // Block of the fixed entity and block of q it feeds.
        let (fb, qb) = match direction {
            Direction::ReplaceTail => (i, j),
            Direction::ReplaceHead => (j, i),
        };
        for x in 0..w {
            let gq = s * grad_q[qb * w + x];
            g_fixed[fb * w + x] += gq * r[m * w + x];
            g_rel[m * w + x] += gq * fixed[fb * w + x];
        }
    }
    axpy(acc.entity_row_mut(fixed_id), 1.0, &g_fixed);
    axpy(acc.relation_row_mut(triple.relation), 1.0, &g_rel);
}
