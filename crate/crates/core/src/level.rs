//! Level-by-level coding of plane trees.
//!
//! Level `n` of a tree is stored as the nondecreasing vector of 1-based parent
//! indices of its vertices in level `n - 1`. A finite neighbourhood of the root
//! of height `n` is the list of out-degree vectors of levels `0..n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EnergyModel;
use crate::tree::PlaneTree;

/// One level of a plane tree: the parent index (1-based) of each vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelEncoding(Vec<usize>);

impl LevelEncoding {
    /// Level 0: the root, which by convention points at index 1.
    pub fn root() -> Self {
        LevelEncoding(vec![1])
    }

    pub fn new(parents: Vec<usize>) -> Result<Self> {
        if parents.contains(&0) {
            return Err(Error::Domain("parent indices are 1-based".into()));
        }
        if parents.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain(
                "parent indices must be nondecreasing in a plane embedding".into(),
            ));
        }
        Ok(LevelEncoding(parents))
    }

    /// Canonical encoding of a level whose parents have the given child counts.
    pub fn from_offspring(counts: &[usize]) -> Self {
        let mut parents = Vec::with_capacity(counts.iter().sum());
        for (i, &c) in counts.iter().enumerate() {
            parents.extend(std::iter::repeat_n(i + 1, c));
        }
        LevelEncoding(parents)
    }

    pub fn parents(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ⊲ next`: every parent referenced by `next` exists in `self`.
    pub fn precedes(&self, next: &LevelEncoding) -> bool {
        next.0.last().is_none_or(|&max| max <= self.len())
    }

    /// Child count of each vertex of `self` implied by `next`.
    pub fn offspring_counts(&self, next: &LevelEncoding) -> Result<Vec<usize>> {
        if !self.precedes(next) {
            return Err(Error::Domain(format!(
                "level of size {} cannot parent index {}",
                self.len(),
                next.0.last().copied().unwrap_or(0)
            )));
        }
        let mut counts = vec![0; self.len()];
        for &p in &next.0 {
            counts[p - 1] += 1;
        }
        Ok(counts)
    }
}

impl fmt::Display for LevelEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for p in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
            first = false;
        }
        Ok(())
    }
}

/// `E(g, g')`: energy that level `next` induces on its parent level `level`.
///
/// Vertices of `level` with no children contribute `E_0`.
pub fn level_energy(level: &LevelEncoding, next: &LevelEncoding, model: &EnergyModel) -> Result<f64> {
    let counts = level.offspring_counts(next)?;
    counts
        .iter()
        .map(|&c| {
            if c > model.max_degree() {
                Err(Error::Domain(format!(
                    "vertex with {c} children exceeds D = {}",
                    model.max_degree()
                )))
            } else {
                Ok(model.energy(c))
            }
        })
        .sum()
}

/// A tree of height exactly `n`: the root's radius-`n` neighbourhood.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborhoodTree {
    /// `offspring[h][j]`: number of children of the `j`-th vertex at height `h`.
    offspring: Vec<Vec<usize>>,
}

impl NeighborhoodTree {
    pub fn from_offspring(offspring: Vec<Vec<usize>>) -> Result<Self> {
        if offspring.is_empty() {
            return Err(Error::Domain("neighbourhood height must be at least 1".into()));
        }
        if offspring[0].len() != 1 {
            return Err(Error::Domain("level 0 holds exactly the root".into()));
        }
        for h in 1..offspring.len() {
            let width: usize = offspring[h - 1].iter().sum();
            if offspring[h].len() != width {
                return Err(Error::Domain(format!(
                    "level {h} lists {} vertices, parents provide {width}",
                    offspring[h].len()
                )));
            }
        }
        if offspring.last().unwrap().iter().sum::<usize>() == 0 {
            return Err(Error::Domain("top level is empty: height below n".into()));
        }
        Ok(NeighborhoodTree { offspring })
    }

    /// A plane tree of height exactly `n`.
    pub fn from_tree(tree: &PlaneTree, n: usize) -> Result<Self> {
        if tree.height() != n {
            return Err(Error::Domain(format!(
                "tree has height {}, expected {n}",
                tree.height()
            )));
        }
        let mut levels = tree.level_degrees();
        levels.truncate(n);
        NeighborhoodTree::from_offspring(levels)
    }

    /// From level encodings `g_1..g_n` (the root level is implicit).
    pub fn from_levels(levels: &[LevelEncoding]) -> Result<Self> {
        let mut offspring = Vec::with_capacity(levels.len());
        let mut parent = LevelEncoding::root();
        for g in levels {
            offspring.push(parent.offspring_counts(g)?);
            parent = g.clone();
        }
        NeighborhoodTree::from_offspring(offspring)
    }

    pub fn offspring(&self) -> &[Vec<usize>] {
        &self.offspring
    }

    pub fn height(&self) -> usize {
        self.offspring.len()
    }

    /// `k`: number of vertices at height `n`.
    pub fn top_count(&self) -> usize {
        self.offspring.last().unwrap().iter().sum()
    }

    /// `m`: number of vertices at height below `n`.
    pub fn interior_count(&self) -> usize {
        self.offspring.iter().map(Vec::len).sum()
    }

    pub fn max_out_degree(&self) -> usize {
        self.offspring
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// `Ē(τ)`: energy of the vertices below the top level.
    pub fn interior_energy(&self, model: &EnergyModel) -> Result<f64> {
        let d = self.max_out_degree();
        if d > model.max_degree() {
            return Err(Error::Domain(format!(
                "neighbourhood has out-degree {d} > D = {}",
                model.max_degree()
            )));
        }
        Ok(self.offspring.iter().flatten().map(|&c| model.energy(c)).sum())
    }

    /// Level encodings `g_1..g_n`.
    pub fn levels(&self) -> Vec<LevelEncoding> {
        self.offspring
            .iter()
            .map(|c| LevelEncoding::from_offspring(c))
            .collect()
    }

    pub fn to_tree(&self) -> PlaneTree {
        let mut levels = self.offspring.clone();
        levels.push(vec![0; self.top_count()]);
        PlaneTree::from_level_degrees(&levels).expect("validated on construction")
    }
}

impl fmt::Display for NeighborhoodTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_tree())
    }
}

/// Calls `f` with every vector in `{0..=max}^width` in lexicographic order.
pub fn for_each_offspring_vector<F: FnMut(&[usize])>(width: usize, max: usize, mut f: F) {
    let mut v = vec![0usize; width];
    loop {
        f(&v);
        let mut i = width;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if v[i] < max {
                v[i] += 1;
                break;
            }
            v[i] = 0;
        }
    }
}

/// Default cap on the number of atoms materialised by [`enumerate_neighborhoods`].
pub const NEIGHBORHOOD_LIMIT: usize = 2_000_000;

/// All trees of height exactly `n` with out-degrees at most `max_degree`, built
/// by extending one level at a time. With `max_vertices`, only trees with at
/// most that many vertices are produced.
///
/// Order: lexicographic in the per-level out-degree vectors.
pub fn enumerate_neighborhoods(
    n: usize,
    max_degree: usize,
    max_vertices: Option<usize>,
) -> Result<Vec<NeighborhoodTree>> {
    if n == 0 {
        return Err(Error::Domain("neighbourhood height must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut prefix: Vec<Vec<usize>> = Vec::with_capacity(n);
    extend_levels(n, max_degree, max_vertices, 1, 1, &mut prefix, &mut out)?;
    Ok(out)
}

fn extend_levels(
    n: usize,
    max_degree: usize,
    max_vertices: Option<usize>,
    width: usize,
    used: usize,
    prefix: &mut Vec<Vec<usize>>,
    out: &mut Vec<NeighborhoodTree>,
) -> Result<()> {
    let depth = prefix.len();
    let remaining_levels = n - depth;
    let mut status = Ok(());
    for_each_offspring_vector(width, max_degree, |v| {
        if status.is_err() {
            return;
        }
        let next: usize = v.iter().sum();
        if next == 0 {
            return;
        }
        // Every later level holds at least one vertex.
        if let Some(cap) = max_vertices {
            if used + next + (remaining_levels - 1) > cap {
                return;
            }
        }
        prefix.push(v.to_vec());
        if remaining_levels == 1 {
            if out.len() >= NEIGHBORHOOD_LIMIT {
                status = Err(Error::Resource(format!(
                    "more than {NEIGHBORHOOD_LIMIT} trees of height {n}"
                )));
            } else {
                out.push(NeighborhoodTree {
                    offspring: prefix.clone(),
                });
            }
        } else {
            status = extend_levels(n, max_degree, max_vertices, next, used + next, prefix, out);
        }
        prefix.pop();
    });
    status
}
