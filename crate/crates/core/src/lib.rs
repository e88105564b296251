//! Gibbs measures on plane trees with bounded branching and their
//! thermodynamic limit.
//!
//! A tree `T` with at most `D` children per vertex has energy
//! `E(T) = Σ_v E_{deg(v)}`, and `μ_N{T} ∝ e^{-βE(T)}` on trees of order `N`.
//! As `N → ∞` the law of every finite root neighbourhood converges, and the
//! limits are the marginals of an infinite Markov tree whose level sizes grow
//! linearly with a gamma limit and a squared-Bessel-type diffusion limit.
//!
//! Modules:
//! - [`model`]: energy model and the critical parameters `ρ, C, p*, σ, μ`.
//! - [`tree`], [`level`]: plane trees, enumeration, level encodings.
//! - [`enumerate`]: exact finite-N partition functions and pushforwards.
//! - [`thermo`]: closed-form limit laws `P_n`, consistency, TV convergence.
//! - [`infinite`]: Markov kernel and exact sampler of the limiting tree.
//! - [`stats`]: KS and chi-square tests.
//! - [`asymptotics`]: Laplace iteration, gamma limit, diffusion approximation.

pub mod error;
pub mod model;
pub mod numeric;
pub mod tree;
pub mod level;
pub mod enumerate;
pub mod thermo;
pub mod seed;
pub mod infinite;
pub mod stats;
pub mod asymptotics;

pub use error::{Error, Result};
pub use model::{critical_params, rate_function_j, solve_rho, CriticalParams, EnergyModel};
pub use tree::PlaneTree;
pub use level::{LevelEncoding, NeighborhoodTree};
