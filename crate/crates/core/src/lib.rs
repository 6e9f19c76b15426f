//! Cooperative-game model of MEV block building.
//!
//! Searchers submit bundles, a validator publishes the block, and value is
//! split according to core allocations of the resulting transferable-utility
//! game. The crate provides:
//!
//! - [`game`]: explicit games, coalition values, submodularity diagnostics
//!   and core membership (brute force and by marginal bounds);
//! - [`bundles`]: the independent-bundle special case, its validator floor
//!   and capacity-constrained variants;
//! - [`mechanisms`]: VCG, core-implementing payments, the second-price
//!   bundle auction and the misreport against non-VCG core selection;
//! - [`stochastic`]: Monte Carlo and closed-form analysis of Bernoulli
//!   searcher competition;
//! - [`empirics`]: median-profit aggregation and log-median regression for
//!   backrun data.

pub mod bundles;
pub mod coalition;
pub mod empirics;
pub mod error;
pub mod game;
pub mod generate;
pub mod mechanisms;
pub mod report;
mod roots;
pub mod stochastic;

pub use coalition::Coalition;
pub use error::{Error, Result};

/// Absolute tolerance for value comparisons (equalities and core slack).
pub const TOLERANCE: f64 = 1e-9;
