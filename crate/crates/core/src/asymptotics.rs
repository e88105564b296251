//! Gamma limit of the level sizes and the diffusion approximation.
//!
//! With `v(s) = Σ p*_i e^{si}`, `w = v'`, `f = ln v` and `z = w / v`, the Laplace
//! transform `L_n(s) = E e^{s Y_n}` satisfies `L_{n+1}(s) = z(s) L_n(f(s))`, so
//! `L_n(x/n)` can be computed exactly by iterating `f`. Rescaled by `n`, the
//! level sizes approach the diffusion `dZ = μ dt + √(μZ) dW`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infinite::{exact_y_distribution, sample_final_sizes, sample_size_step, step_groups, OffspringSampler, Truncation};
use crate::model::CriticalParams;
use crate::numeric::NeumaierSum;
use crate::seed::task_rng;
use crate::stats::{gamma2_cdf, ks_test, ks_two_sample, summarize, KsResult};

/// The generating functions of `p*` used by the Laplace recursion.
#[derive(Debug, Clone)]
pub struct LaplaceIter {
    p_star: Vec<f64>,
    mu: f64,
}

impl LaplaceIter {
    pub fn new(params: &CriticalParams) -> Self {
        LaplaceIter {
            p_star: params.p_star.clone(),
            mu: params.mu,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `v(s) - 1`.
    fn v_minus_one(&self, s: f64) -> f64 {
        self.p_star
            .iter()
            .enumerate()
            .map(|(i, p)| p * (s * i as f64).exp_m1())
            .collect::<NeumaierSum>()
            .value()
    }

    /// `w(s) - v(s) = Σ (i - 1) p*_i (e^{si} - 1)`, using `Σ (i - 1) p*_i = 0`.
    fn w_minus_v(&self, s: f64) -> f64 {
        self.p_star
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - 1.0) * p * (s * i as f64).exp_m1())
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn v(&self, s: f64) -> f64 {
        1.0 + self.v_minus_one(s)
    }

    pub fn w(&self, s: f64) -> f64 {
        self.v(s) + self.w_minus_v(s)
    }

    pub fn f(&self, s: f64) -> f64 {
        self.v_minus_one(s).ln_1p()
    }

    pub fn ln_z(&self, s: f64) -> f64 {
        (self.w_minus_v(s) / self.v(s)).ln_1p()
    }

    pub fn z(&self, s: f64) -> f64 {
        self.ln_z(s).exp()
    }

    /// `x_{n,k} = f^k(x/n)` for `k = 0..=n`.
    pub fn orbit(&self, n: usize, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut s = x / n as f64;
        out.push(s);
        for _ in 0..n {
            s = self.f(s);
            out.push(s);
        }
        out
    }

    /// `ln L_n(s) = Σ_{k<n} ln z(f^k(s)) + f^n(s)`.
    pub fn log_laplace(&self, n: usize, s: f64) -> f64 {
        let mut acc = NeumaierSum::default();
        let mut t = s;
        for _ in 0..n {
            acc.add(self.ln_z(t));
            t = self.f(t);
        }
        acc.add(t);
        acc.value()
    }
}

/// `L_n(x/n) = E e^{(x/n) Y_n}` by iterating the recursion.
pub fn laplace_exact(n: usize, x: f64, params: &CriticalParams) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(Error::Domain(format!("Laplace argument must be <= 0, got {x}")));
    }
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    Ok(LaplaceIter::new(params).log_laplace(n, x / n as f64).exp())
}

/// Same quantity from the exact law of `Y_n`.
pub fn laplace_expectation(n: usize, x: f64, params: &CriticalParams) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(Error::Domain(format!("Laplace argument must be <= 0, got {x}")));
    }
    let law = exact_y_distribution(n, params, Truncation::default())?;
    Ok(law.laplace(x / n as f64))
}

/// Limit `(1 - μx/2)^{-2}` of `L_n(x/n)`.
pub fn laplace_limit(x: f64, params: &CriticalParams) -> f64 {
    (1.0 - params.mu * x / 2.0).powi(-2)
}

/// `max_{k ≤ n} |f^k(x/n) - 1/(n/x - μk/2)|`.
pub fn comparison_gap(n: usize, x: f64, params: &CriticalParams) -> f64 {
    let it = LaplaceIter::new(params);
    it.orbit(n, x)
        .iter()
        .enumerate()
        .map(|(k, &xk)| (xk - 1.0 / (n as f64 / x - params.mu * k as f64 / 2.0)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceRow {
    pub n: usize,
    pub x: f64,
    pub value: f64,
    pub limit: f64,
    pub gap: f64,
}

pub fn laplace_table(ns: &[usize], x: f64, params: &CriticalParams) -> Result<Vec<LaplaceRow>> {
    let limit = laplace_limit(x, params);
    ns.iter()
        .map(|&n| {
            let value = laplace_exact(n, x, params)?;
            Ok(LaplaceRow {
                n,
                x,
                value,
                limit,
                gap: (value - limit).abs(),
            })
        })
        .collect()
}

/// `(2/(μn)) Y_n` for `samples` independent trees.
pub fn gamma_limit_samples(n: usize, samples: usize, params: &CriticalParams, master_seed: u64) -> Vec<f64> {
    let sampler = OffspringSampler::new(params);
    let scale = 2.0 / (params.mu * n as f64);
    sample_final_sizes(n, samples, &sampler, master_seed)
        .into_iter()
        .map(|y| y as f64 * scale)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaReport {
    pub n: usize,
    pub samples: usize,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub mean: f64,
    /// `2(1 + nμ)/(μn)`, the exact mean of the rescaled sample.
    pub expected_mean: f64,
    pub mean_std_error: f64,
}

pub fn gamma_report(n: usize, scaled: &[f64], params: &CriticalParams) -> GammaReport {
    let s = summarize(scaled);
    let mut xs = scaled.to_vec();
    let ks: KsResult = ks_test(&mut xs, gamma2_cdf);
    GammaReport {
        n,
        samples: scaled.len(),
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
        mean: s.mean,
        expected_mean: 2.0 * (1.0 + n as f64 * params.mu) / (params.mu * n as f64),
        mean_std_error: s.std_error,
    }
}

pub fn gamma_limit_test(n: usize, samples: usize, params: &CriticalParams, master_seed: u64) -> Result<GammaReport> {
    if n == 0 || samples < 1000 {
        return Err(Error::Domain("need n >= 1 and at least 1000 samples".into()));
    }
    let scaled = gamma_limit_samples(n, samples, params, master_seed);
    Ok(gamma_report(n, &scaled, params))
}

/// Values of an Euler–Maruyama path on the grid `t_0 + j dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdePath {
    pub dt: f64,
    pub start_time: f64,
    pub values: Vec<f64>,
}

impl SdePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has a starting value")
    }
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !dt.is_finite() || !span.is_finite() || dt <= 0.0 || span < 0.0 {
        return Err(Error::Domain(format!("invalid time span {span} or step {dt}")));
    }
    Ok((span / dt).round() as usize)
}

#[inline]
fn besq_step<R: Rng + ?Sized>(z: f64, mu: f64, dt: f64, sqrt_dt: f64, rng: &mut R) -> f64 {
    let xi: f64 = rng.sample(StandardNormal);
    (z + mu * dt + (mu * z.max(0.0)).sqrt() * sqrt_dt * xi).max(0.0)
}

/// Euler–Maruyama for `dZ = μ dt + √(μ max(Z, 0)) dW` from `Z(0) = start`, clipped at 0.
pub fn simulate_besq<R: Rng + ?Sized>(
    t_end: f64,
    dt: f64,
    start: f64,
    params: &CriticalParams,
    rng: &mut R,
) -> Result<SdePath> {
    let steps = step_count(t_end, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut z = start.max(0.0);
    values.push(z);
    for _ in 0..steps {
        z = besq_step(z, params.mu, dt, sqrt_dt, rng);
        values.push(z);
    }
    Ok(SdePath {
        dt,
        start_time: 0.0,
        values,
    })
}

/// `Z(t_end)` for `paths` independent scalar paths from `Z(0) = 0`; path `i` uses stream `i`.
pub fn besq_terminal_values(t_end: f64, dt: f64, paths: usize, params: &CriticalParams, master_seed: u64) -> Result<Vec<f64>> {
    let steps = step_count(t_end, dt)?;
    let sqrt_dt = dt.sqrt();
    let mu = params.mu;
    Ok((0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(master_seed, i);
            let mut z = 0.0;
            for _ in 0..steps {
                z = besq_step(z, mu, dt, sqrt_dt, &mut rng);
            }
            z
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesqReport {
    pub t_end: f64,
    pub dt: f64,
    pub paths: usize,
    pub mean: f64,
    pub expected_mean: f64,
    pub variance: f64,
    pub expected_variance: f64,
    /// KS of `(2/(μt)) Z(t)` against Gamma(2, 1).
    pub ks_statistic: f64,
    pub p_value: f64,
}

pub fn besq_report(t_end: f64, dt: f64, terminal: &[f64], params: &CriticalParams) -> BesqReport {
    let s = summarize(terminal);
    let scale = 2.0 / (params.mu * t_end);
    let mut scaled: Vec<f64> = terminal.iter().map(|z| z * scale).collect();
    let ks = ks_test(&mut scaled, gamma2_cdf);
    BesqReport {
        t_end,
        dt,
        paths: terminal.len(),
        mean: s.mean,
        expected_mean: params.mu * t_end,
        variance: s.variance,
        expected_variance: (params.mu * t_end).powi(2) / 2.0,
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
    }
}

/// Vector Euler–Maruyama path, `values[j][i]` is `V_i` at grid point `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPath {
    pub dt: f64,
    pub start_time: f64,
    pub values: Vec<Vec<f64>>,
}

fn check_groups(initial: &[f64]) -> Result<()> {
    if initial.is_empty() {
        return Err(Error::Domain("need at least one group".into()));
    }
    if initial.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain("group sizes must be finite and nonnegative".into()));
    }
    if initial.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("initial group sizes are all zero".into()));
    }
    Ok(())
}

fn group_step<R: Rng + ?Sized>(v: &mut [f64], mu: f64, dt: f64, sqrt_dt: f64, rng: &mut R) {
    let total: f64 = v.iter().sum();
    let r = v.len() as f64;
    for vi in v.iter_mut() {
        let drift = if total > 0.0 { mu * *vi / total } else { mu / r };
        let xi: f64 = rng.sample(StandardNormal);
        let noise = if *vi > 0.0 { (mu * *vi).sqrt() * sqrt_dt * xi } else { 0.0 };
        *vi = (*vi + drift * dt + noise).max(0.0);
    }
}

/// Euler–Maruyama for `dV_i = μ V_i/ΣV dt + √(μ V_i) 1{V_i > 0} dW_i` with independent noises.
pub fn simulate_groups<R: Rng + ?Sized>(
    initial: &[f64],
    t_end: f64,
    dt: f64,
    params: &CriticalParams,
    rng: &mut R,
) -> Result<GroupPath> {
    check_groups(initial)?;
    let steps = step_count(t_end, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut v = initial.to_vec();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(v.clone());
    for _ in 0..steps {
        group_step(&mut v, params.mu, dt, sqrt_dt, rng);
        values.push(v.clone());
    }
    Ok(GroupPath {
        dt,
        start_time: 0.0,
        values,
    })
}

/// Discrete-vs-diffusion distance for one coordinate at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub groups: usize,
    pub time: f64,
    /// Group index, or `None` for the total `ΣV = Y`.
    pub coordinate: Option<usize>,
    pub ks_distance: f64,
}

/// Settings for [`compare_discrete_vs_sde`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonSetup {
    /// The groups are formed at level `⌊n t_start⌋`.
    pub t_start: f64,
    pub dt: f64,
    pub paths: usize,
}

impl Default for ComparisonSetup {
    fn default() -> Self {
        ComparisonSetup {
            t_start: 0.1,
            dt: 1e-3,
            paths: 20_000,
        }
    }
}

/// Split `size` vertices into `groups` contiguous blocks, some possibly empty.
fn block_counts(size: u64, groups: usize) -> Vec<u64> {
    let mut counts = vec![0u64; groups];
    for j in 0..size {
        counts[(j as u128 * groups as u128 / size as u128) as usize] += 1;
    }
    counts
}

/// Grow the discrete tree to level `n0 = ⌊n t_start⌋`, split that level into `r`
/// contiguous groups, then follow the group progeny to levels `⌊n/2⌋` and `n`.
/// From the same rescaled starting point `V/n` run the group diffusion from
/// `t_start` to 1. Reports KS distances between the two samples per coordinate
/// and for the total at `t = 0.5` and `t = 1`.
pub fn compare_discrete_vs_sde(
    n: usize,
    groups: usize,
    setup: ComparisonSetup,
    params: &CriticalParams,
    master_seed: u64,
) -> Result<Vec<ComparisonRow>> {
    if groups == 0 || n < 2 || !(0.0..0.5).contains(&setup.t_start) || setup.paths < 2 {
        return Err(Error::Domain("need r >= 1, n >= 2, 0 <= t_start < 0.5, paths >= 2".into()));
    }
    let sampler = OffspringSampler::new(params);
    let n0 = (n as f64 * setup.t_start).floor() as usize;
    let half = n / 2;
    let scale = 1.0 / n as f64;
    let t_first = n0 as f64 * scale;
    let steps_to_half = step_count(0.5 - t_first, setup.dt)?;
    let steps_to_end = step_count(0.5, setup.dt)?;
    let sqrt_dt = setup.dt.sqrt();

    type Snap = (Vec<f64>, Vec<f64>);
    let per_path: Vec<(Snap, Snap)> = (0..setup.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(master_seed, i);
            let mut y = 1u64;
            for _ in 0..n0 {
                y = sample_size_step(y, &sampler, &mut rng);
            }
            let start = block_counts(y, groups);

            let mut counts = start.clone();
            for _ in n0..half {
                step_groups(&mut counts, &sampler, &mut rng);
            }
            let disc_half: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
            for _ in half..n {
                step_groups(&mut counts, &sampler, &mut rng);
            }
            let disc_end: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();

            let mut v: Vec<f64> = start.iter().map(|&c| c as f64 * scale).collect();
            for _ in 0..steps_to_half {
                group_step(&mut v, params.mu, setup.dt, sqrt_dt, &mut rng);
            }
            let sde_half = v.clone();
            for _ in 0..steps_to_end {
                group_step(&mut v, params.mu, setup.dt, sqrt_dt, &mut rng);
            }
            ((disc_half, sde_half), (disc_end, v))
        })
        .collect();

    let mut rows = Vec::new();
    for (time, pick) in [(0.5, 0usize), (1.0, 1)] {
        let column = |disc: bool, coord: Option<usize>| -> Vec<f64> {
            per_path
                .iter()
                .map(|snaps| {
                    let (d, s) = if pick == 0 { &snaps.0 } else { &snaps.1 };
                    let src = if disc { d } else { s };
                    match coord {
                        Some(i) => src[i],
                        None => src.iter().sum(),
                    }
                })
                .collect()
        };
        let coords: Vec<Option<usize>> = std::iter::once(None).chain((0..groups).map(Some)).collect();
        for coordinate in coords {
            let mut a = column(true, coordinate);
            let mut b = column(false, coordinate);
            rows.push(ComparisonRow {
                n,
                groups,
                time,
                coordinate,
                ks_distance: ks_two_sample(&mut a, &mut b),
            });
        }
    }
    Ok(rows)
}
