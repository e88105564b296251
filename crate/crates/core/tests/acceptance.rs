//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use plane_gibbs::asymptotics::{besq_report, besq_terminal_values, gamma_limit_samples, gamma_report, laplace_exact, laplace_expectation};
use plane_gibbs::enumerate::{forest_count, WeightedCountTable};
use plane_gibbs::infinite::{
    conditional_moment_exhaustive, conditional_moment_formula, progeny_drift_check, sample_next_level, transition_prob,
    OffspringSampler,
};
use plane_gibbs::level::{enumerate_neighborhoods, for_each_offspring_vector};
use plane_gibbs::seed::task_rng;
use plane_gibbs::stats::{chi_square_gof, ks_two_sample};
use plane_gibbs::thermo::{check_consistency, convergence_table, count_inversions, ratio_check_with};
use plane_gibbs::tree::enumerate_trees;
use plane_gibbs::{critical_params, CriticalParams, EnergyModel, LevelEncoding, PlaneTree};

const SEED: u64 = 20_100_914;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_model(rng: &mut ChaCha8Rng, max_degree: usize) -> EnergyModel {
    let d = rng.gen_range(2..=max_degree);
    let energies = (0..=d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    EnergyModel::new(d, energies, rng.gen_range(-2.0..2.0)).unwrap()
}

fn uniform2() -> (EnergyModel, CriticalParams) {
    let m = EnergyModel::uniform(2).unwrap();
    let p = critical_params(&m).unwrap();
    (m, p)
}

fn criterion_1() -> Outcome {
    let m = EnergyModel::uniform(2).unwrap();
    let start = Instant::now();
    let p = critical_params(&m).unwrap();
    let elapsed = start.elapsed();
    let rho_oracle = (0.5 * (m.log_weight(0) - m.log_weight(2))).exp();
    let errs = [
        (p.rho - rho_oracle).abs(),
        (p.c - 1.0 / 3.0).abs(),
        (p.sigma - 1.0 / 3.0).abs(),
        (p.mu - 2.0 / 3.0).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst < 1e-10 && elapsed < Duration::from_millis(1),
        format!("rho={} C={} sigma={} mu={} max_err={worst:.2e} time={elapsed:?}", p.rho, p.c, p.sigma, p.mu),
    )
}

fn catalan(n: u64) -> u64 {
    (0..n).fold(1u64, |c, i| c * 2 * (2 * i + 1) / (i + 2))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let four = enumerate_trees(4, 3).unwrap().count();
    let mut bad = Vec::new();
    for n in 1..=12usize {
        let count = enumerate_trees(n, (n - 1).max(1)).unwrap().count() as u64;
        if count != catalan(n as u64 - 1) {
            bad.push(n);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        four == 5 && bad.is_empty() && elapsed < Duration::from_secs(10),
        format!("|T_4(3)|={four} catalan_mismatches={bad:?} time={elapsed:?}"),
    )
}

/// Count ordered forests of `k` trees on `order` vertices by degree profile.
fn explicit_forest_counts(order: usize, k: usize, by_order: &[Vec<PlaneTree>]) -> HashMap<Vec<usize>, u64> {
    fn rec(
        left: usize,
        trees_left: usize,
        acc: &mut Vec<usize>,
        by_order: &[Vec<PlaneTree>],
        out: &mut HashMap<Vec<usize>, u64>,
    ) {
        if trees_left == 0 {
            if left == 0 {
                *out.entry(acc.clone()).or_default() += 1;
            }
            return;
        }
        for size in 1..=left - (trees_left - 1) {
            for t in &by_order[size] {
                let profile = t.degree_counts(acc.len() - 1);
                for (a, p) in acc.iter_mut().zip(&profile) {
                    *a += p;
                }
                rec(left - size, trees_left - 1, acc, by_order, out);
                for (a, p) in acc.iter_mut().zip(&profile) {
                    *a -= p;
                }
            }
        }
    }
    let mut out = HashMap::new();
    let mut acc = vec![0usize; order];
    rec(order, k, &mut acc, by_order, &mut out);
    out
}

fn criterion_3() -> Outcome {
    let max_n = 8usize;
    let by_order: Vec<Vec<PlaneTree>> = (0..=max_n)
        .map(|n| if n == 0 { Vec::new() } else { enumerate_trees(n, (n - 1).max(1)).unwrap().collect() })
        .collect();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for n in 1..=max_n {
        for k in 1..=n {
            let explicit = explicit_forest_counts(n, k, &by_order);
            // Every profile with Σr = N and Σ i r_i = N - k, degrees below N.
            let mut profiles = Vec::new();
            let mut r = vec![0usize; n];
            fn fill(i: usize, left: usize, r: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if i == r.len() - 1 {
                    r[i] = left;
                    out.push(r.clone());
                    return;
                }
                for c in 0..=left {
                    r[i] = c;
                    fill(i + 1, left - c, r, out);
                }
            }
            fill(0, n, &mut r, &mut profiles);
            for profile in profiles {
                let edges: usize = profile.iter().enumerate().map(|(i, c)| i * c).sum();
                if edges + k != n {
                    continue;
                }
                let formula = forest_count(n, k, &profile);
                let direct = BigUint::from(explicit.get(&profile).copied().unwrap_or(0));
                checked += 1;
                if formula != direct {
                    mismatches += 1;
                }
            }
            for (profile, &count) in &explicit {
                if forest_count(n, k, profile) != BigUint::from(count) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0 && checked > 0, format!("profiles_checked={checked} mismatches={mismatches}"))
}

fn criterion_4() -> Outcome {
    let mut rng = task_rng(SEED, 4);
    let mut pairs = 0usize;
    let mut improved = 0usize;
    for _ in 0..20 {
        let model = random_model(&mut rng, 3);
        let params = critical_params(&model).unwrap();
        let table = WeightedCountTable::new(&model, 10).unwrap();
        let atoms = enumerate_neighborhoods(1, model.max_degree(), None).unwrap();
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[i + 1..] {
                let gap = |order: usize| {
                    let (finite, limit) = ratio_check_with(a, b, order, &table, &params, &model).unwrap();
                    (finite / limit - 1.0).abs()
                };
                pairs += 1;
                if gap(10) < gap(6) {
                    improved += 1;
                }
            }
        }
    }
    let share = improved as f64 / pairs as f64;
    outcome(share >= 0.9, format!("pairs={pairs} improved={improved} share={share:.3}"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let orders: Vec<usize> = (4..=9).map(|e| 1usize << e).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (energies, beta) in [
        ([0.0, 0.0, 0.0], 0.0),
        ([0.0, 1.0, 0.5], -0.5),
        ([0.0, 1.0, 0.5], 0.0),
        ([0.0, 1.0, 0.5], 0.5),
    ] {
        let model = EnergyModel::new(2, energies.to_vec(), beta).unwrap();
        let rows = convergence_table(&orders, 1, &model).unwrap();
        let inversions = count_inversions(&rows);
        let ratio = rows[0].tv_distance / rows.last().unwrap().tv_distance;
        ok &= inversions <= 1 && ratio > 3.0;
        parts.push(format!("E={energies:?} beta={beta}: inversions={inversions} TV16/TV512={ratio:.2}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    outcome(ok, format!("{} time={elapsed:?}", parts.join("; ")))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = task_rng(SEED, 6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let model = random_model(&mut rng, 3);
        let params = critical_params(&model).unwrap();
        for n in [1, 2] {
            worst = worst.max(check_consistency(n, &params, &model).unwrap());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && elapsed < Duration::from_secs(60),
        format!("max_defect={worst:.2e} time={elapsed:?}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = task_rng(SEED, 7);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..20 {
        let model = random_model(&mut rng, 3);
        let params = critical_params(&model).unwrap();
        for width in 1..=3usize {
            let g = LevelEncoding::new((1..=width).collect()).unwrap();
            let mut total = 0.0;
            for_each_offspring_vector(width, model.max_degree(), |v| {
                total += transition_prob(&g, &LevelEncoding::from_offspring(v), &params, &model);
            });
            worst_norm = worst_norm.max((total - 1.0).abs());
        }
    }
    let model = EnergyModel::new(3, vec![0.2, -0.4, 0.1, 0.6], 0.8).unwrap();
    let params = critical_params(&model).unwrap();
    let sampler = OffspringSampler::new(&params);
    let draws = 1_000_000usize;
    let mut min_p: f64 = 1.0;
    for width in 1..=3usize {
        let g = LevelEncoding::new((1..=width).collect()).unwrap();
        let mut index = HashMap::new();
        let mut expected = Vec::new();
        for_each_offspring_vector(width, 3, |v| {
            let next = LevelEncoding::from_offspring(v);
            expected.push(transition_prob(&g, &next, &params, &model));
            index.insert(next, expected.len() - 1);
        });
        let mut observed = vec![0u64; expected.len()];
        let mut sample_rng = task_rng(SEED, 70 + width as u64);
        for _ in 0..draws {
            observed[index[&sample_next_level(&g, &sampler, &mut sample_rng)]] += 1;
        }
        min_p = min_p.min(chi_square_gof(&observed, &expected).unwrap().p_value);
    }
    outcome(
        worst_norm < 1e-10 && min_p > 1e-3,
        format!("max_norm_err={worst_norm:.2e} min_chi2_p={min_p:.4}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = task_rng(SEED, 8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let model = random_model(&mut rng, 4);
        let params = critical_params(&model).unwrap();
        for k in 1..=4 {
            for power in 1..=4 {
                let ex = conditional_moment_exhaustive(k, power, &params, &model);
                let fo = conditional_moment_formula(k, power, &params);
                worst = worst.max((ex - fo).abs() / fo.abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("max_rel_err={worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let (_, params) = uniform2();
    let far = laplace_exact(10_000, -1.0, &params).unwrap();
    let gap = (far - 9.0 / 16.0).abs();
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        for x in [-0.5, -1.0, -3.0] {
            let a = laplace_exact(n, x, &params).unwrap();
            let b = laplace_expectation(n, x, &params).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        gap < 5e-3 && worst < 1e-9,
        format!("L_10000(-1/n)={far:.6} gap={gap:.2e} oracle_err={worst:.2e}"),
    )
}

fn criterion_10(scaled: &[f64]) -> Outcome {
    let (_, params) = uniform2();
    let r = gamma_report(500, scaled, &params);
    outcome(
        r.ks_statistic < 0.02,
        format!("KS={:.4} p={:.3} mean={:.4}", r.ks_statistic, r.p_value, r.mean),
    )
}

fn criterion_11(discrete: &[f64]) -> Outcome {
    let (_, params) = uniform2();
    let z = besq_terminal_values(1.0, 1e-3, 100_000, &params, SEED ^ 11).unwrap();
    let r = besq_report(1.0, 1e-3, &z, &params);
    let mean_err = (r.mean / params.mu - 1.0).abs();
    let mut a: Vec<f64> = z.iter().map(|v| v * 2.0 / params.mu).collect();
    let mut b = discrete.to_vec();
    let two = ks_two_sample(&mut a, &mut b);
    outcome(
        mean_err < 0.01 && r.ks_statistic < 0.02 && two < 0.03,
        format!(
            "mean={:.5} rel_err={mean_err:.4} KS={:.4} two_sample_KS={two:.4}",
            r.mean, r.ks_statistic
        ),
    )
}

fn criterion_12() -> Outcome {
    let (_, params) = uniform2();
    let r = progeny_drift_check(400, 10_000, &params, SEED ^ 12).unwrap();
    let (dz, cz) = (r.drift_z(), r.cross_z());
    outcome(
        dz.abs() < 3.0 && cz.abs() < 3.0,
        format!(
            "trajectories={} steps={} drift_residual={:.3}±{:.3} (z={dz:.2}) cross={:.3}±{:.3} (z={cz:.2})",
            r.trajectories, r.steps, r.drift_residual_mean, r.drift_residual_se, r.cross_mean, r.cross_se
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {status}  {}  [{:.1?}]", o.detail, start.elapsed());
        if !o.pass {
            failures += 1;
        }
    };
    report(1, &criterion_1);
    report(2, &criterion_2);
    report(3, &criterion_3);
    report(4, &criterion_4);
    report(5, &criterion_5);
    report(6, &criterion_6);
    report(7, &criterion_7);
    report(8, &criterion_8);
    report(9, &criterion_9);
    let (_, params) = uniform2();
    let start = Instant::now();
    let scaled = gamma_limit_samples(500, 100_000, &params, SEED ^ 10);
    let sampling = start.elapsed();
    report(10, &|| {
        let mut o = criterion_10(&scaled);
        o.pass &= sampling < Duration::from_secs(300);
        o.detail.push_str(&format!(" sampling={sampling:.1?}"));
        o
    });
    report(11, &|| criterion_11(&scaled));
    report(12, &criterion_12);
    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
