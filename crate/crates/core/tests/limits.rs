use plane_gibbs::asymptotics::{
    besq_report, besq_terminal_values, compare_discrete_vs_sde, gamma_limit_test, simulate_groups, ComparisonSetup,
};
use plane_gibbs::infinite::{
    sample_size_step, sample_trajectory, step_groups, track_progeny, GroupLabeling, OffspringSampler,
};
use plane_gibbs::seed::task_rng;
use plane_gibbs::stats::{ks_two_sample, summarize};
use plane_gibbs::{critical_params, CriticalParams, EnergyModel};
use rayon::prelude::*;

fn uniform2() -> CriticalParams {
    critical_params(&EnergyModel::uniform(2).unwrap()).unwrap()
}

fn tilted3() -> CriticalParams {
    critical_params(&EnergyModel::new(3, vec![0.4, 0.0, -0.3, 0.9], 1.1).unwrap()).unwrap()
}

#[test]
fn level_size_means_grow_linearly() {
    let p = tilted3();
    let sampler = OffspringSampler::new(&p);
    let checkpoints = [10usize, 100, 500];
    let rows: Vec<[f64; 3]> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(31, i);
            let mut y = 1u64;
            let mut out = [0.0; 3];
            let mut next = 0;
            for step in 1..=500 {
                y = sample_size_step(y, &sampler, &mut rng);
                if step == checkpoints[next] {
                    out[next] = y as f64;
                    next = (next + 1).min(2);
                }
            }
            out
        })
        .collect();
    for (j, &n) in checkpoints.iter().enumerate() {
        let s = summarize(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
        let expected = 1.0 + n as f64 * p.mu;
        assert!((s.mean - expected).abs() < 3.0 * s.std_error, "n={n}: {} vs {expected}", s.mean);
    }
}

#[test]
fn rescaled_sizes_have_gamma_mean() {
    let p = uniform2();
    let r = gamma_limit_test(500, 100_000, &p, 32).unwrap();
    assert!((r.mean / 2.0 - 1.0).abs() < 0.02, "{r:?}");
    assert!((r.mean - r.expected_mean).abs() < 3.0 * r.mean_std_error, "{r:?}");
}

#[test]
fn besq_terminal_moments() {
    let p = tilted3();
    let z = besq_terminal_values(1.0, 1e-3, 100_000, &p, 33).unwrap();
    let r = besq_report(1.0, 1e-3, &z, &p);
    assert!((r.mean / r.expected_mean - 1.0).abs() < 0.01, "{r:?}");
    assert!((r.variance / r.expected_variance - 1.0).abs() < 0.03, "{r:?}");
    assert!(r.ks_statistic < 0.02, "{r:?}");
}

#[test]
fn group_diffusion_sum_and_cross_variation() {
    let p = uniform2();
    let initial = [0.1, 0.2, 0.05];
    let per_path: Vec<(f64, f64)> = (0..20_000u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_groups(&initial, 1.0, 1e-3, &p, &mut task_rng(34, i)).unwrap();
            let total = path.values.last().unwrap().iter().sum();
            let cross = path
                .values
                .windows(2)
                .map(|w| (w[1][0] - w[0][0]) * (w[1][1] - w[0][1]))
                .sum();
            (total, cross)
        })
        .collect();
    let totals = summarize(&per_path.iter().map(|x| x.0).collect::<Vec<_>>());
    let expected = initial.iter().sum::<f64>() + p.mu;
    assert!((totals.mean / expected - 1.0).abs() < 0.01, "{totals:?}");
    let cross = summarize(&per_path.iter().map(|x| x.1).collect::<Vec<_>>());
    assert!(cross.mean.abs() < 3.0 * cross.std_error, "{cross:?}");
}

#[test]
fn group_chain_matches_tracked_progeny() {
    // Same stopping rule on both sides: split the first level with at least
    // two vertices into two contiguous groups and follow it to level 60.
    let p = tilted3();
    let sampler = OffspringSampler::new(&p);
    let steps = 60;
    let paths = 20_000u64;
    let tracked: Vec<f64> = (0..paths)
        .into_par_iter()
        .filter_map(|i| {
            let traj = sample_trajectory(steps, &sampler, 35, i);
            let sizes = traj.sizes();
            let start = sizes.iter().position(|&y| y >= 2)?;
            let lab = GroupLabeling::contiguous(sizes[start] as usize, 2).unwrap();
            Some(track_progeny(&traj, start, &lab).unwrap().last().unwrap()[0] as f64)
        })
        .collect();
    let chained: Vec<f64> = (0..paths)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = task_rng(36, i);
            let mut y = 1u64;
            let mut step = 0;
            while y < 2 {
                if step == steps {
                    return None;
                }
                y = sample_size_step(y, &sampler, &mut rng);
                step += 1;
            }
            let mut counts = GroupLabeling::contiguous(y as usize, 2).unwrap().counts();
            for _ in step..steps {
                step_groups(&mut counts, &sampler, &mut rng);
            }
            Some(counts[0] as f64)
        })
        .collect();
    let (mut a, mut b) = (tracked, chained);
    let n_eff = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let d = ks_two_sample(&mut a, &mut b);
    assert!(d < 1.63 / n_eff.sqrt(), "KS {d}");
}

#[test]
fn discrete_vs_diffusion_distances_shrink() {
    let p = uniform2();
    let setup = ComparisonSetup {
        paths: 40_000,
        ..ComparisonSetup::default()
    };
    let mut means = Vec::new();
    for n in [100, 200, 400, 800] {
        let rows = compare_discrete_vs_sde(n, 2, setup, &p, 7).unwrap();
        assert_eq!(rows.len(), 6);
        means.push(rows.iter().map(|r| r.ks_distance).sum::<f64>() / rows.len() as f64);
    }
    let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{means:?}");
    assert!(means[3] < means[0], "{means:?}");
}

#[test]
fn single_group_comparison_is_scalar() {
    let p = uniform2();
    let setup = ComparisonSetup {
        paths: 2_000,
        ..ComparisonSetup::default()
    };
    let rows = compare_discrete_vs_sde(100, 1, setup, &p, 8).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].ks_distance, rows[1].ks_distance);
    assert_eq!(rows[2].ks_distance, rows[3].ks_distance);
}
