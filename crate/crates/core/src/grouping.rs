//! Relation-to-group assignment by k-means over relation embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ErasError, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 50;

/// Hard assignment of each relation to one of `groups` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    assignment: Vec<usize>,
    /// `groups × dim`, row-major.
    centroids: Vec<f64>,
    groups: usize,
    dim: usize,
    sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GroupAssignment {
    /// Assignment with fixed centroids; `sse` is computed from `points`.
    pub fn from_parts(
        assignment: Vec<usize>,
        centroids: Vec<f64>,
        groups: usize,
        dim: usize,
        points: &[f64],
    ) -> Result<Self> {
        if groups == 0 || centroids.len() != groups * dim || points.len() != assignment.len() * dim {
            return Err(ErasError::Dimension(format!(
                "{} centroid values and {} point values for {groups} groups of dimension {dim}",
                centroids.len(),
                points.len()
            )));
        }
        if let Some(&g) = assignment.iter().find(|&&g| g >= groups) {
            return Err(ErasError::InvalidArgument(format!("group index {g} out of range")));
        }
        let mut out = GroupAssignment {
            assignment,
            centroids,
            groups,
            dim,
            sse: 0.0,
        };
        out.sse = out.objective(points);
        Ok(out)
    }

    /// Every relation in group 0 with the centroid at the mean.
    pub fn single(points: &[f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut out = GroupAssignment {
            assignment: vec![0; n],
            centroids: vec![0.0; dim],
            groups: 1,
            dim,
            sse: 0.0,
        };
        out.recompute_centroids(points);
        out.sse = out.objective(points);
        out
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn centroid(&self, n: usize) -> &[f64] {
        &self.centroids[n * self.dim..(n + 1) * self.dim]
    }

    /// Sum of squared distances to assigned centroids at the last update.
    pub fn sse(&self) -> f64 {
        self.sse
    }

    pub fn group_of(&self, relation: usize) -> Result<usize> {
        self.assignment.get(relation).copied().ok_or_else(|| {
            ErasError::InvalidArgument(format!(
                "relation {relation} out of range for {} relations",
                self.assignment.len()
            ))
        })
    }

    /// Binary `N_r × N` matrix view.
    pub fn one_hot(&self) -> Vec<Vec<u8>> {
        self.assignment
            .iter()
            .map(|&g| (0..self.groups).map(|n| u8::from(n == g)).collect())
            .collect()
    }

    fn point<'a>(&self, points: &'a [f64], r: usize) -> &'a [f64] {
        &points[r * self.dim..(r + 1) * self.dim]
    }

    /// `Σ_r ‖r − c_{B(r)}‖²`.
    pub fn objective(&self, points: &[f64]) -> f64 {
        (0..self.assignment.len())
            .map(|r| sq_dist(self.point(points, r), self.centroid(self.assignment[r])))
            .sum()
    }

    fn nearest(&self, p: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for n in 0..self.groups {
            let d = sq_dist(p, self.centroid(n));
            if d < best_d {
                best = n;
                best_d = d;
            }
        }
        best
    }

    fn recompute_centroids(&mut self, points: &[f64]) {
        let d = self.dim;
        let mut sums = vec![0.0; self.groups * d];
        let mut counts = vec![0usize; self.groups];
        for (r, &g) in self.assignment.iter().enumerate() {
            counts[g] += 1;
            for (s, x) in sums[g * d..(g + 1) * d].iter_mut().zip(&points[r * d..(r + 1) * d]) {
                *s += x;
            }
        }
        for n in 0..self.groups {
            if counts[n] > 0 {
                let c = counts[n] as f64;
                for (dst, s) in self.centroids[n * d..(n + 1) * d].iter_mut().zip(&sums[n * d..(n + 1) * d]) {
                    *dst = s / c;
                }
            }
        }
    }

    /// Moves the point farthest from its centroid into each empty cluster.
    /// Only points from clusters with at least two members are moved.
    fn reseed_empty(&mut self, points: &[f64]) {
        loop {
            let mut counts = vec![0usize; self.groups];
            for &g in &self.assignment {
                counts[g] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                return;
            };
            let mut far = None;
            let mut far_d = f64::NEG_INFINITY;
            for r in 0..self.assignment.len() {
                let g = self.assignment[r];
                if counts[g] < 2 {
                    continue;
                }
                let d = sq_dist(self.point(points, r), self.centroid(g));
                if d > far_d {
                    far = Some(r);
                    far_d = d;
                }
            }
            let Some(r) = far else { return };
            self.assignment[r] = empty;
            let p = self.point(points, r).to_vec();
            self.centroids[empty * self.dim..(empty + 1) * self.dim].copy_from_slice(&p);
        }
    }

    /// Lloyd iterations warm-started from the current centroids, until the
    /// assignment is stable or [`MAX_LLOYD_ITERATIONS`] passes. Returns the
    /// objective after each pass.
    pub fn update_assignments(&mut self, points: &[f64]) -> Result<Vec<f64>> {
        if points.len() != self.assignment.len() * self.dim {
            return Err(ErasError::Dimension(format!(
                "expected {} relation rows of dimension {}",
                self.assignment.len(),
                self.dim
            )));
        }
        let mut history = Vec::new();
        for _ in 0..MAX_LLOYD_ITERATIONS {
            let next: Vec<usize> = (0..self.assignment.len())
                .map(|r| self.nearest(self.point(points, r)))
                .collect();
            let changed = next != self.assignment;
            self.assignment = next;
            self.reseed_empty(points);
            self.recompute_centroids(points);
            self.sse = self.objective(points);
            history.push(self.sse);
            if !changed {
                break;
            }
        }
        Ok(history)
    }
}

/// k-means++ seeding followed by one [`GroupAssignment::update_assignments`].
///
/// `points` is the `N_r × dim` relation matrix.
pub fn init_assignments(points: &[f64], dim: usize, groups: usize, seed: u64) -> Result<GroupAssignment> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(ErasError::Dimension("relation matrix is not a multiple of the dimension".into()));
    }
    let n_r = points.len() / dim;
    if groups == 0 || groups > n_r {
        return Err(ErasError::InvalidArgument(format!(
            "cannot form {groups} groups from {n_r} relations"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |r: usize| &points[r * dim..(r + 1) * dim];
    let mut chosen = vec![rng.random_range(0..n_r)];
    let mut dist: Vec<f64> = (0..n_r).map(|r| sq_dist(row(r), row(chosen[0]))).collect();
    while chosen.len() < groups {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (r, &d) in dist.iter().enumerate() {
                acc += d;
                if d > 0.0 && u < acc {
                    pick = Some(r);
                    break;
                }
            }
            pick.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // All remaining points coincide with chosen centroids.
            let free: Vec<usize> = (0..n_r).filter(|r| !chosen.contains(r)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (r, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(r), row(next)));
        }
    }
    let centroids: Vec<f64> = chosen.iter().flat_map(|&r| row(r).iter().copied()).collect();
    let mut out = GroupAssignment {
        assignment: vec![usize::MAX; n_r],
        centroids,
        groups,
        dim,
        sse: f64::INFINITY,
    };
    out.update_assignments(points)?;
    Ok(out)
}
