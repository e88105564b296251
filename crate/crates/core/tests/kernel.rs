use std::collections::HashMap;

use plane_gibbs::infinite::{sample_next_level, transition_prob, OffspringSampler};
use plane_gibbs::level::for_each_offspring_vector;
use plane_gibbs::seed::task_rng;
use plane_gibbs::{critical_params, EnergyModel, LevelEncoding};

#[test]
fn two_vertex_level_atoms_within_three_standard_errors() {
    let model = EnergyModel::uniform(2).unwrap();
    let params = critical_params(&model).unwrap();
    let sampler = OffspringSampler::new(&params);
    let g = LevelEncoding::new(vec![1, 2]).unwrap();
    let draws = 1_000_000u64;
    let mut rng = task_rng(17, 0);
    let mut counts: HashMap<LevelEncoding, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sample_next_level(&g, &sampler, &mut rng)).or_default() += 1;
    }
    let mut atoms = 0;
    let mut mass = 0.0;
    for_each_offspring_vector(2, 2, |v| {
        let next = LevelEncoding::from_offspring(v);
        let p = transition_prob(&g, &next, &params, &model);
        let observed = counts.get(&next).copied().unwrap_or(0) as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        if p == 0.0 {
            assert_eq!(observed, 0.0, "{next}");
        } else {
            assert!((observed - p).abs() < 3.0 * se, "{next}: {observed} vs {p}");
            atoms += 1;
        }
        mass += p;
    });
    assert_eq!(atoms, 8);
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(!counts.contains_key(&LevelEncoding::new(vec![]).unwrap()));
}
