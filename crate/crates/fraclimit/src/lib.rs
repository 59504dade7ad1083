//! Numerical toolkit for limit theorems of integrated functionals of
//! stationary Gaussian processes, with the fractional Ornstein-Uhlenbeck
//! family as the central example.
//!
//! The crate has three layers:
//!
//! * exact machinery: Hermite expansions ([`hermite`]), moments of products
//!   of Hermite polynomials via diagram enumeration ([`diagrams`]), and
//!   closed-form or quadrature-backed norming constants ([`constants`]);
//! * simulation: exact fractional Brownian motion sampling by circulant
//!   embedding and pathwise Ornstein-Uhlenbeck integration ([`fracproc`]);
//! * verification: Monte Carlo experiments that reproduce the central,
//!   boundary and noncentral limit regimes ([`mclab`]) and the near-unit-root
//!   autoregression asymptotics ([`unitroot`]).
//!
//! Everything is deterministic given a seed: replicate-level generators are
//! derived with [`seeds::replicate_seed`], so results do not depend on the
//! number of worker threads.

pub mod constants;
pub mod diagrams;
pub mod fracproc;
pub mod hermite;
pub mod mclab;
pub mod quad;
pub mod seeds;
pub mod stats;
pub mod unitroot;
