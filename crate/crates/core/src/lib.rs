//! mrca-lab: exact laws, samplers and Monte Carlo verification for a
//! stationary continuous-state branching population.
//!
//! The model is a sub-critical continuous-state branching process
//! conditioned on non-extinction and run from time −∞, so the population
//! size `Z` is stationary. The library computes the analytic laws of the
//! time `A` to the most recent common ancestor of the time-0 population,
//! the population sizes around that ancestor (`Z^A`, `Z^I`, `Z^O`), the
//! number of oldest families `N^A` and the number of recent ancestors
//! `M_s` — and verifies each of them by exact Monte Carlo sampling where
//! closed-form samplers exist (the quadratic mechanism) or by transform
//! identities otherwise.
//!
//! Crate layout:
//!
//! * [`mechanism`] — branching mechanisms ψ and assumption checks;
//! * [`cumulant`] — the numerical backbone: G(x) = ∫ₓ^∞ dv/ψ, the
//!   extinction function c, the cumulant u, κ* and Λ;
//! * [`laws`] — every analytic distribution at transform/pgf level;
//! * [`sampler`] — reproducible exact samplers;
//! * [`verify`] — pass/fail Monte Carlo studies and residual checks;
//! * [`cli`] — the `mrca-lab` command-line front end.

pub mod cli;
pub mod cumulant;
pub mod error;
pub mod laws;
pub mod mechanism;
mod numeric;
pub mod sampler;
pub mod verify;

pub use cumulant::{CumulantEvaluator, Tolerances};
pub use error::{Error, Result};
pub use laws::StationaryLaw;
pub use mechanism::{JumpAtom, MechanismSpec, ValidationReport};
