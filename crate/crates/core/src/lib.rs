//! Free-energy decision making under resource constraints.
//!
//! A decision maker with prior `p₀`, utilities `U` and inverse temperature
//! `β` trades expected utility against information cost. This crate provides
//! the closed-form equilibrium and certainty-equivalent, the adversarial
//! dual with its best-response costs, Legendre conjugates, an exact rejection
//! sampler, nested decision trees and brute-force oracles for all of them.

pub mod adversary;
pub mod error;
pub mod expected_utility;
pub mod free_energy;
pub mod legendre;
pub mod oracle;
pub mod sampler;
pub mod simplex;
pub mod tree_eval;

pub use error::{Error, Result};
pub use free_energy::DecisionProblem;
pub use simplex::{Policy, Prior};
