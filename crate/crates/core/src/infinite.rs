//! The limiting infinite tree as a Markov chain on levels.
//!
//! Given level `g` with `|g| = k` vertices, the next level `g'` has probability
//! `(|g'|/|g|) e^{-βE(g,g')} ρ^{|g'|-|g|} σ^{|g|}`. Since
//! `Π_j p*_{i_j} = σ^k ρ^{|g'|-k} e^{-βE(g,g')}`, this is the law of the
//! offspring vector `(i_1..i_k)` weighted by `Σ i_j / k`: pick one vertex
//! uniformly, give it a size-biased number of children `i p*_i`, and give
//! every other vertex an independent `p*` number of children.

use rand::Rng;
use rand_distr::{Binomial, Distribution, WeightedAliasIndex};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::level::{for_each_offspring_vector, level_energy, LevelEncoding};
use crate::model::{CriticalParams, EnergyModel};
use crate::numeric::{stable_sum, NeumaierSum};
use crate::seed::task_rng;

/// `ln P{X_{n+1} = next | X_n = level}`, `-inf` off the support.
pub fn transition_log_prob(
    level: &LevelEncoding,
    next: &LevelEncoding,
    params: &CriticalParams,
    model: &EnergyModel,
) -> f64 {
    if level.is_empty() || next.is_empty() || !level.precedes(next) {
        return f64::NEG_INFINITY;
    }
    let Ok(energy) = level_energy(level, next, model) else {
        return f64::NEG_INFINITY;
    };
    let (k, k_next) = (level.len() as f64, next.len() as f64);
    (k_next / k).ln() - model.beta() * energy
        + (k_next - k) * params.log_rho()
        + k * params.log_sigma()
}

pub fn transition_prob(
    level: &LevelEncoding,
    next: &LevelEncoding,
    params: &CriticalParams,
    model: &EnergyModel,
) -> f64 {
    transition_log_prob(level, next, params, model).exp()
}

/// Samplers for `p*` and its size-biased version.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    p_star: Vec<f64>,
    plain: WeightedAliasIndex<f64>,
    biased: WeightedAliasIndex<f64>,
}

/// Below this many draws a sum of `p*` variables is drawn term by term.
const DIRECT_SUM_CUTOFF: u64 = 24;

impl OffspringSampler {
    pub fn new(params: &CriticalParams) -> Self {
        let plain = WeightedAliasIndex::new(params.p_star.clone()).expect("p* is a valid weight vector");
        let biased =
            WeightedAliasIndex::new(params.size_biased()).expect("size-biased law has positive mass");
        OffspringSampler {
            p_star: params.p_star.clone(),
            plain,
            biased,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.p_star.len() - 1
    }

    pub fn offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.plain.sample(rng)
    }

    pub fn size_biased_offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.biased.sample(rng)
    }

    /// Sum of `count` independent `p*` draws, via multinomial counts for large `count`.
    pub fn offspring_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        if count < DIRECT_SUM_CUTOFF {
            return (0..count).map(|_| self.offspring(rng) as u64).sum();
        }
        let mut left = count;
        let mut mass_left = 1.0;
        let mut total = 0u64;
        let last = self.p_star.len() - 1;
        for (i, &p) in self.p_star.iter().enumerate() {
            if left == 0 {
                break;
            }
            let n_i = if i == last {
                left
            } else {
                let q = (p / mass_left).clamp(0.0, 1.0);
                Binomial::new(left, q).expect("valid binomial").sample(rng)
            };
            total += i as u64 * n_i;
            left -= n_i;
            mass_left -= p;
        }
        total
    }
}

/// Draw `X_{n+1}` given `X_n = level`.
pub fn sample_next_level<R: Rng + ?Sized>(
    level: &LevelEncoding,
    sampler: &OffspringSampler,
    rng: &mut R,
) -> LevelEncoding {
    let k = level.len();
    assert!(k >= 1, "the limiting tree never has an empty level");
    let special = rng.gen_range(0..k);
    let mut parents = Vec::with_capacity(k + k / 2 + 1);
    for j in 0..k {
        let c = if j == special {
            sampler.size_biased_offspring(rng)
        } else {
            sampler.offspring(rng)
        };
        parents.extend(std::iter::repeat_n(j + 1, c));
    }
    LevelEncoding::new(parents).expect("canonical by construction")
}

/// Law of `S_k`, the sum of `k` independent `p*` draws, for `k = 0..=max_k`.
#[derive(Debug, Clone)]
pub struct SizeKernel {
    /// `sums[k][s] = P(S_k = s)`.
    sums: Vec<Vec<f64>>,
}

impl SizeKernel {
    pub fn new(params: &CriticalParams, max_k: usize) -> Self {
        let mut sums = Vec::with_capacity(max_k + 1);
        sums.push(vec![1.0]);
        for k in 1..=max_k {
            let prev: &Vec<f64> = &sums[k - 1];
            let mut next = vec![0.0; prev.len() + params.max_degree()];
            for (s, &ps) in prev.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                for (i, &pi) in params.p_star.iter().enumerate() {
                    next[s + i] += ps * pi;
                }
            }
            sums.push(next);
        }
        SizeKernel { sums }
    }

    pub fn max_k(&self) -> usize {
        self.sums.len() - 1
    }

    fn ensure(&mut self, params: &CriticalParams, k: usize) {
        if k > self.max_k() {
            let fresh = SizeKernel::new(params, k.max(2 * self.max_k()));
            *self = fresh;
        }
    }

    /// `P{Y_{n+1} = k' | Y_n = k} = (k'/k) P(S_k = k')`.
    pub fn prob(&self, k: usize, k_next: usize) -> f64 {
        assert!(k >= 1 && k <= self.max_k());
        let row = &self.sums[k];
        if k_next >= row.len() {
            return 0.0;
        }
        k_next as f64 / k as f64 * row[k_next]
    }
}

pub fn size_transition_prob(k: usize, k_next: usize, params: &CriticalParams) -> f64 {
    SizeKernel::new(params, k).prob(k, k_next)
}

/// Truncation settings for [`exact_y_distribution`].
#[derive(Debug, Clone, Copy)]
pub struct Truncation {
    /// Total probability that may be discarded over all steps.
    pub tail_budget: f64,
    /// Largest support size kept before giving up.
    pub max_support: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            tail_budget: 1e-12,
            max_support: 200_000,
        }
    }
}

/// Exact law of `Y_n` started from `Y_0 = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct YDistribution {
    pub step: usize,
    /// `probs[k] = P(Y_n = k)`.
    pub probs: Vec<f64>,
    pub dropped_mass: f64,
}

impl YDistribution {
    pub fn mean(&self) -> f64 {
        stable_sum(self.probs.iter().enumerate().map(|(k, p)| k as f64 * p))
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(self.probs.iter().copied())
    }

    /// `E e^{s Y_n}`.
    pub fn laplace(&self, s: f64) -> f64 {
        stable_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(k, p)| p * (s * k as f64).exp()),
        )
    }
}

pub fn exact_y_distribution(steps: usize, params: &CriticalParams, truncation: Truncation) -> Result<YDistribution> {
    let per_step = if steps == 0 {
        0.0
    } else {
        truncation.tail_budget / steps as f64
    };
    let mut kernel = SizeKernel::new(params, 16);
    let mut probs = vec![0.0, 1.0];
    let mut dropped = 0.0;
    for _ in 0..steps {
        let top = probs.len() - 1;
        kernel.ensure(params, top);
        let mut next = vec![NeumaierSum::default(); top * params.max_degree() + 1];
        for (k, &pk) in probs.iter().enumerate().skip(1) {
            if pk == 0.0 {
                continue;
            }
            let row = &kernel.sums[k];
            for (k_next, &ps) in row.iter().enumerate().skip(1) {
                if ps > 0.0 {
                    next[k_next].add(pk * k_next as f64 / k as f64 * ps);
                }
            }
        }
        let mut next: Vec<f64> = next.iter().map(NeumaierSum::value).collect();
        // Drop the upper tail while it stays within this step's budget.
        let mut tail = 0.0;
        while next.len() > 2 {
            let last = *next.last().unwrap();
            if tail + last > per_step {
                break;
            }
            tail += last;
            next.pop();
        }
        dropped += tail;
        if next.len() > truncation.max_support {
            return Err(Error::Resource(format!(
                "support of Y exceeds {} states",
                truncation.max_support
            )));
        }
        probs = next;
    }
    Ok(YDistribution {
        step: steps,
        probs,
        dropped_mass: dropped,
    })
}

/// `E[Y_{j+1}^p | Y_j = k]` by summing the level kernel over all offspring vectors.
pub fn conditional_moment_exhaustive(
    k: usize,
    power: u32,
    params: &CriticalParams,
    model: &EnergyModel,
) -> f64 {
    let d = model.max_degree();
    let digit: Vec<f64> = (0..=d)
        .map(|c| model.log_weight(c) + c as f64 * params.log_rho())
        .collect();
    let base = -(k as f64) * params.log_rho() + k as f64 * params.log_sigma();
    let mut acc = NeumaierSum::default();
    for_each_offspring_vector(k, d, |v| {
        let k_next: usize = v.iter().sum();
        if k_next == 0 {
            return;
        }
        let log_w: f64 = v.iter().map(|&c| digit[c]).sum::<f64>() + base;
        let w = k_next as f64 / k as f64 * log_w.exp();
        acc.add(w * (k_next as f64).powi(power as i32));
    });
    acc.value()
}

/// Closed-form conditional moments of `Y_{j+1}` given `Y_j = k`, `p = 1..=4`.
pub fn conditional_moment_formula(k: usize, power: u32, params: &CriticalParams) -> f64 {
    let (b2, b3, b4, b5) = (params.moment(2), params.moment(3), params.moment(4), params.moment(5));
    let k1 = k as f64 - 1.0;
    let k2 = k1 * (k as f64 - 2.0);
    let k3 = k2 * (k as f64 - 3.0);
    let k4 = k3 * (k as f64 - 4.0);
    match power {
        1 => params.mu + k as f64,
        2 => b3 + 3.0 * k1 * b2 + k2,
        3 => b4 + 4.0 * k1 * b3 + 6.0 * k2 * b2 + 3.0 * k1 * b2 * b2 + k3,
        4 => {
            b5 + 5.0 * k1 * b4
                + 10.0 * k2 * b3
                + 10.0 * k1 * b3 * b2
                + 15.0 * k2 * b2 * b2
                + 10.0 * k3 * b2
                + k4
        }
        _ => panic!("conditional moment formula known for powers 1..=4, got {power}"),
    }
}

/// Levels `g_1..g_n` of one sampled tree together with the stream that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTrajectory {
    pub levels: Vec<LevelEncoding>,
    pub master_seed: u64,
    pub stream: u64,
}

impl TreeTrajectory {
    /// Level sizes `Y_0..Y_n`, with `Y_0 = 1`.
    pub fn sizes(&self) -> Vec<u64> {
        std::iter::once(1)
            .chain(self.levels.iter().map(|g| g.len() as u64))
            .collect()
    }

    pub fn level(&self, step: usize) -> LevelEncoding {
        if step == 0 {
            LevelEncoding::root()
        } else {
            self.levels[step - 1].clone()
        }
    }

    /// One level per line, parent indices separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for g in &self.levels {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn sizes_csv(&self) -> String {
        let mut s = String::from("step,size\n");
        for (i, y) in self.sizes().iter().enumerate() {
            s.push_str(&format!("{i},{y}\n"));
        }
        s
    }

    /// `ln` of the probability of the first `levels.len()` levels under the kernel.
    pub fn log_prob(&self, params: &CriticalParams, model: &EnergyModel) -> f64 {
        let mut prev = LevelEncoding::root();
        let mut total = 0.0;
        for g in &self.levels {
            total += transition_log_prob(&prev, g, params, model);
            prev = g.clone();
        }
        total
    }
}

pub fn sample_trajectory(
    steps: usize,
    sampler: &OffspringSampler,
    master_seed: u64,
    stream: u64,
) -> TreeTrajectory {
    let mut rng = task_rng(master_seed, stream);
    let mut levels = Vec::with_capacity(steps);
    let mut current = LevelEncoding::root();
    for _ in 0..steps {
        current = sample_next_level(&current, sampler, &mut rng);
        levels.push(current.clone());
    }
    TreeTrajectory {
        levels,
        master_seed,
        stream,
    }
}

/// One step of the level-size chain: `Y' = (size-biased draw) + S_{Y-1}`.
pub fn sample_size_step<R: Rng + ?Sized>(size: u64, sampler: &OffspringSampler, rng: &mut R) -> u64 {
    debug_assert!(size >= 1);
    sampler.size_biased_offspring(rng) as u64 + sampler.offspring_sum(size - 1, rng)
}

/// `Y_0..Y_n` without materialising levels.
pub fn sample_sizes<R: Rng + ?Sized>(steps: usize, sampler: &OffspringSampler, rng: &mut R) -> Vec<u64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = 1u64;
    out.push(y);
    for _ in 0..steps {
        y = sample_size_step(y, sampler, rng);
        out.push(y);
    }
    out
}

/// `Y_n` for `paths` independent trees; path `i` uses stream `i`.
pub fn sample_final_sizes(steps: usize, paths: usize, sampler: &OffspringSampler, master_seed: u64) -> Vec<u64> {
    (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(master_seed, i);
            let mut y = 1u64;
            for _ in 0..steps {
                y = sample_size_step(y, sampler, &mut rng);
            }
            y
        })
        .collect()
}

/// Partition of one level's vertices into `r` nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLabeling {
    labels: Vec<usize>,
    groups: usize,
}

impl GroupLabeling {
    /// `labels[j]` is the group (0-based) of vertex `j + 1`.
    pub fn new(labels: Vec<usize>, groups: usize) -> Result<Self> {
        if groups == 0 {
            return Err(Error::Domain("need at least one group".into()));
        }
        let mut seen = vec![false; groups];
        for &l in &labels {
            if l >= groups {
                return Err(Error::Domain(format!("label {l} outside 0..{groups}")));
            }
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("every group must be nonempty".into()));
        }
        Ok(GroupLabeling { labels, groups })
    }

    /// Split `size` vertices into `groups` contiguous blocks of near-equal size.
    pub fn contiguous(size: usize, groups: usize) -> Result<Self> {
        if groups == 0 || groups > size {
            return Err(Error::Domain(format!(
                "cannot split {size} vertices into {groups} nonempty groups"
            )));
        }
        let labels = (0..size).map(|j| j * groups / size).collect();
        GroupLabeling::new(labels, groups)
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut v = vec![0u64; self.groups];
        for &l in &self.labels {
            v[l] += 1;
        }
        v
    }
}

/// Progeny `(V_1..V_r)` of the labelled groups at every step from `start` to the
/// end of the trajectory. Entry 0 is the labelling's own group sizes.
pub fn track_progeny(
    trajectory: &TreeTrajectory,
    start: usize,
    labeling: &GroupLabeling,
) -> Result<Vec<Vec<u64>>> {
    if start > trajectory.levels.len() {
        return Err(Error::Domain(format!(
            "start level {start} beyond trajectory of {} levels",
            trajectory.levels.len()
        )));
    }
    let first = trajectory.level(start);
    if first.len() != labeling.len() {
        return Err(Error::Domain(format!(
            "labelling covers {} vertices, level {start} has {}",
            labeling.len(),
            first.len()
        )));
    }
    let mut labels = labeling.labels.clone();
    let mut out = vec![labeling.counts()];
    for g in &trajectory.levels[start..] {
        labels = g.parents().iter().map(|&p| labels[p - 1]).collect();
        let mut counts = vec![0u64; labeling.groups];
        for &l in &labels {
            counts[l] += 1;
        }
        out.push(counts);
    }
    Ok(out)
}

/// One step of the group-progeny chain: the uniformly chosen special vertex
/// lies in group `i` with probability `V_i / ΣV`.
pub fn step_groups<R: Rng + ?Sized>(counts: &mut [u64], sampler: &OffspringSampler, rng: &mut R) {
    let total: u64 = counts.iter().sum();
    debug_assert!(total >= 1);
    let mut pick = rng.gen_range(0..total);
    let mut special = 0;
    for (i, &c) in counts.iter().enumerate() {
        if pick < c {
            special = i;
            break;
        }
        pick -= c;
    }
    for (i, c) in counts.iter_mut().enumerate() {
        *c = if i == special {
            sampler.size_biased_offspring(rng) as u64 + sampler.offspring_sum(*c - 1, rng)
        } else {
            sampler.offspring_sum(*c, rng)
        };
    }
}

/// Sample levels until the first level with at least `groups` vertices, split it
/// into contiguous groups, and return that level index with its group sizes.
pub fn first_splittable_level<R: Rng + ?Sized>(
    groups: usize,
    sampler: &OffspringSampler,
    rng: &mut R,
    max_steps: usize,
) -> Option<(usize, Vec<u64>)> {
    let mut y = 1u64;
    for step in 0..=max_steps {
        if y as usize >= groups {
            let lab = GroupLabeling::contiguous(y as usize, groups).ok()?;
            return Some((step, lab.counts()));
        }
        y = sample_size_step(y, sampler, rng);
    }
    None
}

/// Per-step increments of grouped progeny, pooled over trajectories.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DriftCheck {
    pub trajectories: usize,
    pub steps: u64,
    /// Mean over trajectories of `Σ_m (ΔV_1 - μ V_1 / Y) / √Y`, with `Y = ΣV` at step `m`.
    pub drift_residual_mean: f64,
    pub drift_residual_se: f64,
    /// Mean over trajectories of `Σ_m ΔV_1 ΔV_2 / Y`.
    pub cross_mean: f64,
    pub cross_se: f64,
}

impl DriftCheck {
    pub fn drift_z(&self) -> f64 {
        self.drift_residual_mean / self.drift_residual_se
    }

    pub fn cross_z(&self) -> f64 {
        self.cross_mean / self.cross_se
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = stable_sum(xs.iter().copied()) / n;
    let var = stable_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample full trajectories to `steps` levels, split the first level holding at
/// least two vertices into two contiguous groups, and measure the per-step
/// drift residual of `V_1` and the cross product of increments. Both are
/// martingale-difference sums with mean 0; weighting each step by a power of
/// the current level size keeps the summands of order one.
pub fn progeny_drift_check(
    steps: usize,
    trajectories: usize,
    params: &CriticalParams,
    master_seed: u64,
) -> Result<DriftCheck> {
    let sampler = OffspringSampler::new(params);
    let per_path: Vec<Option<(f64, f64, u64)>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let traj = sample_trajectory(steps, &sampler, master_seed, i);
            let sizes = traj.sizes();
            let start = sizes.iter().position(|&y| y >= 2)?;
            let lab = GroupLabeling::contiguous(sizes[start] as usize, 2).ok()?;
            let v = track_progeny(&traj, start, &lab).ok()?;
            let mut drift = NeumaierSum::default();
            let mut cross = NeumaierSum::default();
            for w in v.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let total = (a[0] + a[1]) as f64;
                let d1 = b[0] as f64 - a[0] as f64;
                let d2 = b[1] as f64 - a[1] as f64;
                drift.add((d1 - params.mu * a[0] as f64 / total) / total.sqrt());
                cross.add(d1 * d2 / total);
            }
            Some((drift.value(), cross.value(), (v.len() - 1) as u64))
        })
        .collect();
    let used: Vec<(f64, f64, u64)> = per_path.into_iter().flatten().collect();
    if used.len() < 2 {
        return Err(Error::Domain("too few trajectories reached two vertices".into()));
    }
    let drifts: Vec<f64> = used.iter().map(|u| u.0).collect();
    let crosses: Vec<f64> = used.iter().map(|u| u.1).collect();
    let (drift_residual_mean, drift_residual_se) = mean_se(&drifts);
    let (cross_mean, cross_se) = mean_se(&crosses);
    Ok(DriftCheck {
        trajectories: used.len(),
        steps: used.iter().map(|u| u.2).sum(),
        drift_residual_mean,
        drift_residual_se,
        cross_mean,
        cross_se,
    })
}
