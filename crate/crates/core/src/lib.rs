//! Optimal tax deduction under an endogenous, Weibull-type probability of
//! penalisation.
//!
//! The crate evaluates the closed-form optimum through the principal branch
//! of the Lambert W function ([`lambertw`]), checks it against a
//! derivative-free maximizer and finite differences ([`solver`]), and batches
//! evaluations over parameter grids ([`sweep`]). The [`cli`] module backs the
//! `taxopt` binary.

pub mod cli;
pub mod error;
pub mod lambertw;
pub mod penalty;
mod quadrature;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use penalty::{HazardParams, Problem, TaxPolicy};
pub use solver::{Solution, StaticsReport};
