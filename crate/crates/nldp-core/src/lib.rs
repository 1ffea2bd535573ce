//! Monte Carlo solver for exterior-value Dirichlet problems of jump-diffusions.
//!
//! The generator is `L u = 1/2 div(A grad u) + b . grad u +
//! kappa(x) (int u(y) nu(dy) - u(x))` on a bounded open domain `D`, with data
//! `phi` prescribed on all of the complement (jumps can leave from the
//! interior and land far outside, so boundary values alone are not enough).
//! The solver simulates the underlying process by piecing together killed
//! diffusions and redistribution jumps, and averages `phi` at the exit
//! position. A deterministic finite-difference oracle and statistical
//! identity checks cross-validate the paths.
//!
//! Modules:
//! * [`problem`]: coefficient fields, domains, validation, integrability
//!   profiles.
//! * [`sim`]: seeded path simulation (full, killed, horizon-stopped).
//! * [`stats`]: deterministic sample statistics and two-sample comparisons.
//! * [`estimate`]: the solver and the identity/scaling checks built on it.
//! * [`oracle`]: finite-difference reference solutions on grids.
//! * [`config`]: strict JSON problem descriptions.
//! * [`cli`]: the `nldp` command line front end.

pub mod config;
pub mod error;
pub mod estimate;
pub mod field;
pub mod oracle;
pub mod problem;
mod quad;
pub mod sim;
pub mod stats;

pub mod cli;

pub use error::{Error, Result};
