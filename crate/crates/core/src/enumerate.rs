//! Exact finite-N quantities: weighted tree counts, partition functions,
//! forest counts and the law of the root neighbourhood under `μ_N`.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::level::{enumerate_neighborhoods, NeighborhoodTree};
use crate::model::EnergyModel;
use crate::numeric::{log_convolve, log_sum_exp, stable_sum};

/// Largest order accepted by the dynamic-programming tables.
pub const DP_ORDER_LIMIT: usize = 2_000;

/// Log-space table of weighted tree counts `F[m] = Σ_{|T| = m} e^{-βE(T)}`.
///
/// Alongside `F`, the table keeps the `d`-fold convolutions `F^{*d}` for
/// `d = 1..=D` (weighted ordered forests of `d` trees), which the recursion
/// `F[m] = Σ_d e^{-βE_d} F^{*d}[m-1]` needs anyway.
#[derive(Debug, Clone)]
pub struct WeightedCountTable {
    max_order: usize,
    log_weights: Vec<f64>,
    /// `powers[d - 1][m] = ln F^{*d}[m]`, `m = 0..=max_order`.
    powers: Vec<Vec<f64>>,
}

impl WeightedCountTable {
    pub fn new(model: &EnergyModel, max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::Domain("max_order must be at least 1".into()));
        }
        if max_order > DP_ORDER_LIMIT {
            return Err(Error::Resource(format!(
                "order {max_order} exceeds the DP limit {DP_ORDER_LIMIT}"
            )));
        }
        let d_max = model.max_degree();
        let log_weights = model.log_weights();
        let len = max_order + 1;
        let mut powers = vec![vec![f64::NEG_INFINITY; len]; d_max];
        let mut terms = Vec::with_capacity(len);
        for m in 1..len {
            // F[m] from F^{*d}[m-1]; those only involve F[..m-1].
            let f_m = if m == 1 {
                log_weights[0]
            } else {
                let parts: Vec<f64> = (1..=d_max)
                    .map(|d| log_weights[d] + powers[d - 1][m - 1])
                    .collect();
                log_sum_exp(&parts)
            };
            powers[0][m] = f_m;
            // Extend the higher convolution powers to index m.
            for d in 2..=d_max {
                terms.clear();
                for a in 1..m {
                    let t = powers[0][a] + powers[d - 2][m - a];
                    if t > f64::NEG_INFINITY {
                        terms.push(t);
                    }
                }
                powers[d - 1][m] = log_sum_exp(&terms);
            }
        }
        Ok(WeightedCountTable {
            max_order,
            log_weights,
            powers,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn max_degree(&self) -> usize {
        self.powers.len()
    }

    /// `ln F[m]`.
    pub fn log_count(&self, m: usize) -> f64 {
        if m == 0 {
            f64::NEG_INFINITY
        } else {
            self.powers[0][m]
        }
    }

    /// `ln` of the weighted count of trees of order `m` whose root has `degree` children.
    pub fn log_count_by_root_degree(&self, m: usize, degree: usize) -> f64 {
        match (m, degree) {
            (0, _) => f64::NEG_INFINITY,
            (1, 0) => self.log_weights[0],
            (_, 0) => f64::NEG_INFINITY,
            _ if degree > self.max_degree() => f64::NEG_INFINITY,
            _ => self.log_weights[degree] + self.powers[degree - 1][m - 1],
        }
    }

    /// `ln W(·, k)`: weighted count of ordered forests of `k` trees, indexed by
    /// total order `0..=max_order`.
    pub fn log_forest(&self, k: usize) -> Vec<f64> {
        let len = self.max_order + 1;
        if k == 0 {
            let mut v = vec![f64::NEG_INFINITY; len];
            v[0] = 0.0;
            return v;
        }
        let d_max = self.max_degree();
        if k <= d_max {
            return self.powers[k - 1].clone();
        }
        let mut acc = self.powers[d_max - 1].clone();
        let mut left = k - d_max;
        while left > 0 {
            let step = left.min(d_max);
            acc = log_convolve(&acc, &self.powers[step - 1], len);
            left -= step;
        }
        acc
    }
}

/// `ln Z_N`.
pub fn log_partition_function(order: usize, model: &EnergyModel) -> Result<f64> {
    Ok(WeightedCountTable::new(model, order)?.log_count(order))
}

/// Unweighted counts `|T_m(D)|` for `m = 0..=max_order` in exact arithmetic.
pub fn exact_tree_counts(max_order: usize, max_degree: usize) -> Vec<BigUint> {
    let len = max_order + 1;
    // powers[d][m]: ordered forests of d trees with m vertices
    let mut powers: Vec<Vec<BigUint>> = vec![vec![BigUint::zero(); len]; max_degree + 1];
    powers[0][0] = BigUint::one();
    let mut counts = vec![BigUint::zero(); len];
    for m in 1..len {
        let mut c = BigUint::zero();
        for d in 0..=max_degree {
            c += &powers[d][m - 1];
        }
        counts[m] = c;
        for d in 1..=max_degree {
            let mut s = BigUint::zero();
            for a in 1..=m {
                if !powers[d - 1][m - a].is_zero() {
                    s += &counts[a] * &powers[d - 1][m - a];
                }
            }
            powers[d][m] = s;
        }
    }
    counts
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Number of plane forests on `order` vertices with `components` trees and
/// `degree_counts[i]` vertices of out-degree `i`:
/// `(k / N) · N! / (r_0! ⋯ r_D!)` when `Σ r_i = N` and `Σ i r_i = N - k`, else 0.
pub fn forest_count(order: usize, components: usize, degree_counts: &[usize]) -> BigUint {
    let total: usize = degree_counts.iter().sum();
    let edges: usize = degree_counts.iter().enumerate().map(|(i, r)| i * r).sum();
    if total != order || edges + components != order {
        return BigUint::zero();
    }
    if order == 0 {
        return BigUint::one();
    }
    let mut multinomial = factorial(order);
    for &r in degree_counts {
        multinomial /= factorial(r);
    }
    let scaled = multinomial * BigUint::from(components);
    let n = BigUint::from(order);
    debug_assert!((&scaled % &n).is_zero());
    scaled / n
}

/// One atom of a distribution on neighbourhood trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub tree: NeighborhoodTree,
    pub log_prob: f64,
}

impl Atom {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// `μ_N π_{n,N}^{-1}` restricted to the trees of height exactly `n`.
#[derive(Debug, Clone)]
pub struct FiniteDistribution {
    pub order: usize,
    pub radius: usize,
    pub atoms: Vec<Atom>,
}

impl FiniteDistribution {
    pub fn total_mass(&self) -> f64 {
        stable_sum(self.atoms.iter().map(Atom::prob))
    }

    /// Mass of trees of order `N` whose height is below `n` and so have no
    /// image in `S_n`. Zero once `N` exceeds `1 + D + ⋯ + D^{n-1}`.
    pub fn escaped_mass(&self) -> f64 {
        (1.0 - self.total_mass()).max(0.0)
    }

    pub fn to_map(&self) -> HashMap<NeighborhoodTree, f64> {
        self.atoms
            .iter()
            .map(|a| (a.tree.clone(), a.prob()))
            .collect()
    }

    /// CSV rows `tau,k,m,probability` with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,k,m,probability\n");
        for a in &self.atoms {
            s.push_str(&format!(
                "{},{},{},{:.17e}\n",
                a.tree,
                a.tree.top_count(),
                a.tree.interior_count(),
                a.prob()
            ));
        }
        s
    }
}

/// Smallest order at which every tree with branching at most `max_degree`
/// reaches height `radius`.
pub fn full_height_order(radius: usize, max_degree: usize) -> usize {
    // 1 + D + ... + D^{n-1} vertices fit below height n
    let mut fit = 0usize;
    let mut level = 1usize;
    for _ in 0..radius {
        fit = fit.saturating_add(level);
        level = level.saturating_mul(max_degree);
    }
    fit.saturating_add(1)
}

/// Exact law of the radius-`n` root neighbourhood of a `μ_N`-distributed tree.
///
/// The atom `τ` (with `k` top vertices and `m` below) has probability
/// `e^{-βĒ(τ)} W(N - m, k) / Z_N`. Trees of order `N` and height below `n` are
/// not represented; see [`FiniteDistribution::escaped_mass`].
pub fn pushforward_finite(order: usize, radius: usize, model: &EnergyModel) -> Result<FiniteDistribution> {
    let table = WeightedCountTable::new(model, order)?;
    pushforward_with_table(&table, order, radius, model)
}

/// As [`pushforward_finite`], reusing a table built for some order `≥ order`.
pub fn pushforward_with_table(
    table: &WeightedCountTable,
    order: usize,
    radius: usize,
    model: &EnergyModel,
) -> Result<FiniteDistribution> {
    if radius == 0 {
        return Err(Error::Domain("radius must be at least 1".into()));
    }
    if order > table.max_order() {
        return Err(Error::Domain(format!(
            "table covers orders up to {}, asked for {order}",
            table.max_order()
        )));
    }
    let candidates = enumerate_neighborhoods(radius, model.max_degree(), Some(order))?;
    if candidates.is_empty() {
        return Err(Error::EmptySupport(format!(
            "no tree of order {order} reaches height {radius}"
        )));
    }
    let log_z = table.log_count(order);
    let mut forests: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut atoms = Vec::with_capacity(candidates.len());
    for tau in candidates {
        let k = tau.top_count();
        let m = tau.interior_count();
        let forest = forests.entry(k).or_insert_with(|| table.log_forest(k));
        let lw = forest[order - m];
        if lw == f64::NEG_INFINITY {
            continue;
        }
        let log_prob = -model.beta() * tau.interior_energy(model)? + lw - log_z;
        atoms.push(Atom { tree: tau, log_prob });
    }
    if atoms.is_empty() {
        return Err(Error::EmptySupport(format!(
            "no tree of order {order} reaches height {radius}"
        )));
    }
    Ok(FiniteDistribution {
        order,
        radius,
        atoms,
    })
}
