//! Limit laws of root neighbourhoods and their comparison with finite N.
//!
//! For a tree `τ` of height `n` with `k` vertices on top and `m` below,
//! `P_n{τ} = C k e^{-βĒ(τ)} ρ^k σ^{m-1}`.

use std::collections::HashMap;

use serde::Serialize;

use crate::enumerate::{pushforward_with_table, Atom, FiniteDistribution, WeightedCountTable};
use crate::error::{Error, Result};
use crate::level::{enumerate_neighborhoods, for_each_offspring_vector, NeighborhoodTree};
use crate::model::{CriticalParams, EnergyModel};
use crate::numeric::{stable_sum, NeumaierSum};

/// `ln P_n{τ}`.
pub fn limit_log_prob(tau: &NeighborhoodTree, params: &CriticalParams, model: &EnergyModel) -> Result<f64> {
    let k = tau.top_count() as f64;
    let m = tau.interior_count() as f64;
    let e_bar = tau.interior_energy(model)?;
    Ok(params.log_c() + k.ln() - model.beta() * e_bar + k * params.log_rho() + (m - 1.0) * params.log_sigma())
}

pub fn limit_prob(tau: &NeighborhoodTree, params: &CriticalParams, model: &EnergyModel) -> Result<f64> {
    limit_log_prob(tau, params, model).map(f64::exp)
}

/// `P_n` on all of `S_n`.
pub fn limit_distribution(radius: usize, params: &CriticalParams, model: &EnergyModel) -> Result<Vec<Atom>> {
    enumerate_neighborhoods(radius, model.max_degree(), None)?
        .into_iter()
        .map(|tree| {
            let log_prob = limit_log_prob(&tree, params, model)?;
            Ok(Atom { tree, log_prob })
        })
        .collect()
}

/// Sum of `P_{n+1}` over all one-level extensions of `τ`, by direct enumeration
/// of the child counts of its top vertices.
pub fn extension_mass(tau: &NeighborhoodTree, params: &CriticalParams, model: &EnergyModel) -> Result<f64> {
    let k = tau.top_count();
    let m = tau.interior_count();
    let d = model.max_degree();
    let base = params.log_c() - model.beta() * tau.interior_energy(model)?
        + (m + k - 1) as f64 * params.log_sigma();
    let digit: Vec<f64> = (0..=d)
        .map(|c| model.log_weight(c) + c as f64 * params.log_rho())
        .collect();
    let mut sum = NeumaierSum::default();
    // Prefix sums of the log factors and of the child totals, refreshed from
    // the position the odometer touched.
    let mut prefix_log = vec![0.0; k + 1];
    let mut prefix_children = vec![0usize; k + 1];
    let mut last: Vec<usize> = vec![usize::MAX; k];
    for_each_offspring_vector(k, d, |v| {
        let start = v
            .iter()
            .zip(&last)
            .position(|(a, b)| a != b)
            .unwrap_or(k);
        for i in start..k {
            prefix_log[i + 1] = prefix_log[i] + digit[v[i]];
            prefix_children[i + 1] = prefix_children[i] + v[i];
        }
        last.copy_from_slice(v);
        let k_next = prefix_children[k];
        if k_next > 0 {
            sum.add(k_next as f64 * (base + prefix_log[k]).exp());
        }
    });
    Ok(sum.value())
}

/// `max_{τ ∈ S_n} |P_n{τ} - Σ_{τ' extends τ} P_{n+1}{τ'}|`.
pub fn check_consistency(radius: usize, params: &CriticalParams, model: &EnergyModel) -> Result<f64> {
    let mut worst = 0.0f64;
    for tau in enumerate_neighborhoods(radius, model.max_degree(), None)? {
        let p = limit_prob(&tau, params, model)?;
        let ext = extension_mass(&tau, params, model)?;
        worst = worst.max((p - ext).abs());
    }
    Ok(worst)
}

/// Total variation between a finite-N pushforward and `P_n`.
///
/// Atoms are matched on the union of supports; finite-N mass on trees below
/// height `n` has no counterpart and counts in full.
pub fn tv_between(finite: &FiniteDistribution, limit: &[Atom]) -> f64 {
    let mut finite_map: HashMap<&NeighborhoodTree, f64> =
        finite.atoms.iter().map(|a| (&a.tree, a.prob())).collect();
    let mut acc = NeumaierSum::default();
    for a in limit {
        let q = finite_map.remove(&a.tree).unwrap_or(0.0);
        acc.add((q - a.prob()).abs());
    }
    for (_, q) in finite_map {
        acc.add(q);
    }
    acc.add(finite.escaped_mass());
    (0.5 * acc.value()).clamp(0.0, 1.0)
}

pub fn tv_distance(order: usize, radius: usize, model: &EnergyModel) -> Result<f64> {
    let params = crate::model::critical_params(model)?;
    let table = WeightedCountTable::new(model, order)?;
    let finite = pushforward_with_table(&table, order, radius, model)?;
    let limit = limit_distribution(radius, &params, model)?;
    Ok(tv_between(&finite, &limit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvRow {
    #[serde(rename = "N")]
    pub order: usize,
    pub n: usize,
    pub tv_distance: f64,
}

/// TV distances for several orders, sharing one count table.
pub fn convergence_table(orders: &[usize], radius: usize, model: &EnergyModel) -> Result<Vec<TvRow>> {
    let Some(&max_order) = orders.iter().max() else {
        return Ok(Vec::new());
    };
    let params = crate::model::critical_params(model)?;
    let table = WeightedCountTable::new(model, max_order)?;
    let limit = limit_distribution(radius, &params, model)?;
    orders
        .iter()
        .map(|&order| {
            let finite = pushforward_with_table(&table, order, radius, model)?;
            Ok(TvRow {
                order,
                n: radius,
                tv_distance: tv_between(&finite, &limit),
            })
        })
        .collect()
}

/// Smallest tabulated order from which every later TV value stays below `threshold`.
pub fn first_order_below(rows: &[TvRow], threshold: f64) -> Option<usize> {
    let mut found = None;
    for r in rows.iter().rev() {
        if r.tv_distance < threshold {
            found = Some(r.order);
        } else {
            break;
        }
    }
    found
}

/// Number of adjacent pairs where the TV column increases.
pub fn count_inversions(rows: &[TvRow]) -> usize {
    rows.windows(2)
        .filter(|w| w[1].tv_distance > w[0].tv_distance)
        .count()
}

/// `(finite-N ratio, limiting ratio)` of the probabilities of two atoms.
pub fn ratio_check(
    tau1: &NeighborhoodTree,
    tau2: &NeighborhoodTree,
    order: usize,
    model: &EnergyModel,
) -> Result<(f64, f64)> {
    if tau1.height() != tau2.height() {
        return Err(Error::Domain("atoms must have the same height".into()));
    }
    let params = crate::model::critical_params(model)?;
    let table = WeightedCountTable::new(model, order)?;
    ratio_check_with(tau1, tau2, order, &table, &params, model)
}

pub fn ratio_check_with(
    tau1: &NeighborhoodTree,
    tau2: &NeighborhoodTree,
    order: usize,
    table: &WeightedCountTable,
    params: &CriticalParams,
    model: &EnergyModel,
) -> Result<(f64, f64)> {
    let finite_log = |tau: &NeighborhoodTree| -> Result<f64> {
        let (k, m) = (tau.top_count(), tau.interior_count());
        if m + k > order {
            return Err(Error::Domain(format!("atom {tau} has zero probability at N = {order}")));
        }
        let lw = table.log_forest(k)[order - m];
        if lw == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("atom {tau} has zero probability at N = {order}")));
        }
        Ok(-model.beta() * tau.interior_energy(model)? + lw)
    };
    let finite = (finite_log(tau1)? - finite_log(tau2)?).exp();
    let limit = (limit_log_prob(tau1, params, model)? - limit_log_prob(tau2, params, model)?).exp();
    Ok((finite, limit))
}

/// `Σ_{τ ∈ S_n} P_n{τ}`.
pub fn limit_total_mass(radius: usize, params: &CriticalParams, model: &EnergyModel) -> Result<f64> {
    Ok(stable_sum(
        limit_distribution(radius, params, model)?
            .iter()
            .map(Atom::prob),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::critical_params;
    use crate::tree::PlaneTree;
    use proptest::prelude::*;

    fn tau(s: &str, n: usize) -> NeighborhoodTree {
        NeighborhoodTree::from_tree(&s.parse::<PlaneTree>().unwrap(), n).unwrap()
    }

    #[test]
    fn first_level_closed_form() {
        let m = EnergyModel::uniform(2).unwrap();
        let p = critical_params(&m).unwrap();
        assert!((limit_prob(&tau("(())", 1), &p, &m).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((limit_prob(&tau("(()())", 1), &p, &m).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // n = 1 atom is C j e^{-βE_j} ρ^j for any model
        let m = EnergyModel::new(3, vec![0.4, -0.6, 1.2, 0.3], 0.7).unwrap();
        let p = critical_params(&m).unwrap();
        for j in 1..=3 {
            let direct = p.c * j as f64 * m.log_weight(j).exp() * p.rho.powi(j as i32);
            let got = limit_prob(&NeighborhoodTree::from_offspring(vec![vec![j]]).unwrap(), &p, &m).unwrap();
            assert!((got - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn depends_only_on_statistics() {
        // Same (k, m, Ē): both have levels of sizes 1, 2, 2 with one 2-vertex
        // and one 0-vertex at height 1, arranged in opposite order.
        let m = EnergyModel::new(2, vec![0.3, 1.1, -0.4], 1.3).unwrap();
        let p = critical_params(&m).unwrap();
        let a = tau("((()())())", 2);
        let b = tau("(()(()()))", 2);
        assert_ne!(a, b);
        assert_eq!(a.top_count(), b.top_count());
        let (pa, pb) = (limit_prob(&a, &p, &m).unwrap(), limit_prob(&b, &p, &m).unwrap());
        assert!((pa - pb).abs() < 1e-15);
    }

    #[test]
    fn consistency_small_cases() {
        let m = EnergyModel::uniform(2).unwrap();
        let p = critical_params(&m).unwrap();
        assert!(check_consistency(1, &p, &m).unwrap() < 1e-10);
        let m = EnergyModel::new(3, vec![0.2, -1.3, 0.8, 2.1], 0.7).unwrap();
        let p = critical_params(&m).unwrap();
        assert!(check_consistency(1, &p, &m).unwrap() < 1e-10);
    }

    #[test]
    fn tv_examples() {
        let m = EnergyModel::uniform(2).unwrap();
        let tv16 = tv_distance(16, 1, &m).unwrap();
        let tv64 = tv_distance(64, 1, &m).unwrap();
        assert!(tv64 < tv16);
        assert!((0.0..=1.0).contains(&tv16));
        let rows = convergence_table(&[16, 32, 64, 128, 256, 512], 1, &m).unwrap();
        assert!(first_order_below(&rows, 0.05).is_some());
        assert_eq!(rows[2].tv_distance, tv64);
    }

    #[test]
    fn tv_counts_escaped_mass() {
        // N = 4, n = 2, D = 3: the star escapes S_2 with mass 1/5.
        let m = EnergyModel::uniform(3).unwrap();
        assert!(tv_distance(4, 2, &m).unwrap() >= 0.1);
    }

    #[test]
    fn ratio_examples() {
        let m = EnergyModel::uniform(2).unwrap();
        let one = tau("(())", 1);
        let two = tau("(()())", 1);
        let (f, l) = ratio_check(&one, &one, 20, &m).unwrap();
        assert!((f - 1.0).abs() < 1e-15 && (l - 1.0).abs() < 1e-15);
        let (f, l) = ratio_check(&one, &two, 128, &m).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        assert!((f / l - 1.0).abs() < 0.1);
        let wide = tau("((()())(()()))", 2);
        assert!(matches!(ratio_check(&wide, &tau("((()))", 2), 5, &m), Err(Error::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn limit_is_normalised(
            d in 2usize..=3,
            e in prop::collection::vec(-2.0f64..2.0, 4),
            beta in -1.5f64..1.5,
            radius in 1usize..=2,
        ) {
            let m = EnergyModel::new(d, e[..=d].to_vec(), beta).unwrap();
            let p = critical_params(&m).unwrap();
            prop_assert!((limit_total_mass(radius, &p, &m).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
