//! Energy model on vertex out-degrees and its critical point.
//!
//! For an energy vector `E_0..E_D` and inverse temperature `β`, the rate
//! function `J(p) = -H(p) + β Σ p_i E_i` has a unique minimiser `p*` on the
//! critical simplex `{p : Σ p_i = 1, Σ i p_i = 1}`. It has the exponential
//! form `p*_i = C e^{-βE_i} ρ^i`, and every limit law downstream is written in
//! terms of `ρ`, `C`, `σ = e^{J(p*)} = ρC` and the moments of `p*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, stable_sum};

/// Tolerance used when checking that a vector lies in the probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct EnergyModel {
    max_degree: usize,
    energies: Vec<f64>,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    #[serde(rename = "D")]
    max_degree: usize,
    #[serde(rename = "E")]
    energies: Vec<f64>,
    beta: f64,
}

impl TryFrom<RawModel> for EnergyModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        EnergyModel::new(raw.max_degree, raw.energies, raw.beta)
    }
}

impl From<EnergyModel> for RawModel {
    fn from(m: EnergyModel) -> Self {
        RawModel {
            max_degree: m.max_degree,
            energies: m.energies,
            beta: m.beta,
        }
    }
}

impl EnergyModel {
    pub fn new(max_degree: usize, energies: Vec<f64>, beta: f64) -> Result<Self> {
        if max_degree < 2 {
            return Err(Error::InvalidModel(format!(
                "branching bound D = {max_degree}: D must be at least 2, otherwise the critical \
                 simplex is the single point p = (0, 1) and has no interior minimiser"
            )));
        }
        if energies.len() != max_degree + 1 {
            return Err(Error::InvalidModel(format!(
                "expected {} energies E_0..E_{max_degree}, got {}",
                max_degree + 1,
                energies.len()
            )));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidModel(format!("energy E_{i} is not finite")));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidModel("beta is not finite".into()));
        }
        Ok(EnergyModel {
            max_degree,
            energies,
            beta,
        })
    }

    /// Model with all energies zero, i.e. the uniform measure on trees.
    pub fn uniform(max_degree: usize) -> Result<Self> {
        EnergyModel::new(max_degree, vec![0.0; max_degree + 1], 0.0)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, degree: usize) -> f64 {
        self.energies[degree]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `-β E_i`, the log of the Boltzmann weight of a vertex with `i` children.
    ///
    /// Weights are only ever combined in log space, so this stays finite for any
    /// finite `β E_i`.
    pub fn log_weight(&self, degree: usize) -> f64 {
        -self.beta * self.energies[degree]
    }

    pub fn log_weights(&self) -> Vec<f64> {
        (0..=self.max_degree).map(|i| self.log_weight(i)).collect()
    }
}

/// Sign of `h(ρ) = Σ (i-1) e^{-βE_i} ρ^i`, evaluated in log space.
///
/// `h` is `-w_0` at zero and nondecreasing on `(0, ∞)`, so its sign is all that
/// bisection needs.
fn h_is_positive(log_w: &[f64], rho: f64) -> bool {
    if rho <= 0.0 {
        return false;
    }
    let lr = rho.ln();
    let positive: Vec<f64> = log_w
        .iter()
        .enumerate()
        .skip(2)
        .map(|(i, &lw)| ((i - 1) as f64).ln() + lw + i as f64 * lr)
        .collect();
    log_sum_exp(&positive) > log_w[0]
}

/// The unique `ρ > 0` with `Σ e^{-βE_i} ρ^i = Σ i e^{-βE_i} ρ^i`.
pub fn solve_rho(model: &EnergyModel) -> Result<f64> {
    let log_w = model.log_weights();
    let mut hi = 1.0f64;
    while !h_is_positive(&log_w, hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidModel(
                "no finite root: critical parameter rho overflows".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    // Run to full f64 resolution; this is well below the 1e-13 absolute target.
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h_is_positive(&log_w, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::InvalidModel(
            "critical parameter rho underflows to zero".into(),
        ));
    }
    Ok(rho)
}

/// Entropy `H(p) = -Σ p_i ln p_i` with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -stable_sum(
        p.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln()),
    )
}

fn check_simplex(p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|&x| x.is_nan() || x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain(format!("p_{i} = {} is not a probability", p[i])));
    }
    let total = stable_sum(p.iter().copied());
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Domain(format!("p sums to {total}, not 1")));
    }
    Ok(())
}

/// `J(p) = -H(p) + β E(p)` for a probability vector `p` indexed by out-degree.
pub fn rate_function_j(p: &[f64], model: &EnergyModel) -> Result<f64> {
    if p.len() != model.max_degree() + 1 {
        return Err(Error::Domain(format!(
            "probability vector has length {}, model needs {}",
            p.len(),
            model.max_degree() + 1
        )));
    }
    check_simplex(p)?;
    let energy = stable_sum(p.iter().zip(model.energies()).map(|(pi, e)| pi * e));
    Ok(-entropy(p) + model.beta() * energy)
}

/// Critical quantities of an [`EnergyModel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalParams {
    pub rho: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub p_star: Vec<f64>,
    pub sigma: f64,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    /// `B_1..B_5`, stored at indices `0..5`.
    #[serde(rename = "B")]
    pub b: [f64; 5],
    pub mu: f64,
    log_rho: f64,
    log_c: f64,
}

impl CriticalParams {
    pub fn max_degree(&self) -> usize {
        self.p_star.len() - 1
    }

    pub fn log_rho(&self) -> f64 {
        self.log_rho
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    /// `ln σ`, taken as `ln ρ + ln C` which equals `J(p*)` exactly in real arithmetic.
    pub fn log_sigma(&self) -> f64 {
        self.log_rho + self.log_c
    }

    /// `B_n = Σ i^n p*_i` for `n` in `1..=5`.
    pub fn moment(&self, n: usize) -> f64 {
        assert!((1..=5).contains(&n), "moment index {n} outside 1..=5");
        self.b[n - 1]
    }

    /// Size-biased offspring law `i p*_i`.
    pub fn size_biased(&self) -> Vec<f64> {
        self.p_star
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .collect()
    }

    /// Flat `(field, value)` record: rho, C, sigma, J_star, mu, p_star_i, B_n.
    pub fn record(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("rho".to_string(), self.rho),
            ("C".to_string(), self.c),
            ("sigma".to_string(), self.sigma),
            ("J_star".to_string(), self.j_star),
            ("mu".to_string(), self.mu),
        ];
        out.extend(
            self.p_star
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("p_star_{i}"), *p)),
        );
        out.extend(
            self.b
                .iter()
                .enumerate()
                .map(|(i, b)| (format!("B_{}", i + 1), *b)),
        );
        out
    }
}

/// `B_1..B_5` and `μ = B_2 - 1` of a probability vector indexed by out-degree.
pub fn moments(p_star: &[f64]) -> ([f64; 5], f64) {
    let mut b = [0.0; 5];
    for (n, slot) in b.iter_mut().enumerate() {
        *slot = stable_sum(
            p_star
                .iter()
                .enumerate()
                .map(|(i, p)| (i as f64).powi(n as i32 + 1) * p),
        );
    }
    (b, b[1] - 1.0)
}

pub fn critical_params(model: &EnergyModel) -> Result<CriticalParams> {
    let rho = solve_rho(model)?;
    let log_rho = rho.ln();
    let log_terms: Vec<f64> = (0..=model.max_degree())
        .map(|i| model.log_weight(i) + i as f64 * log_rho)
        .collect();
    let log_c = -log_sum_exp(&log_terms);
    let p_star: Vec<f64> = log_terms.iter().map(|t| (t + log_c).exp()).collect();
    if p_star.iter().any(|&p| p.is_nan() || p <= 0.0) {
        return Err(Error::InvalidModel(
            "critical distribution has a vanishing component; energies are too spread for f64"
                .into(),
        ));
    }
    let j_star = rate_function_j(&p_star, model)?;
    let (b, mu) = moments(&p_star);
    Ok(CriticalParams {
        rho,
        c: log_c.exp(),
        sigma: j_star.exp(),
        j_star,
        b,
        mu,
        p_star,
        log_rho,
        log_c,
    })
}
