//! Estimators built on the path simulator.
//!
//! Every operation takes a master seed and lays out disjoint per-path RNG
//! stream indices in a fixed scheme, so results are reproducible bit for bit
//! and two-sided checks really use independent sample blocks.

mod dirichlet;
mod identity;
mod resolvent;
mod scaling;

pub use dirichlet::{solve_dirichlet, PointSolve, NON_EXIT_LIMIT};
pub use identity::{check_prop_2_3, check_resolvent_identity, Prop23Params, ResolventIdentityParams};
pub use resolvent::{resolvent_full, resolvent_killed, truncation_horizon, ResolventParams};
pub use scaling::{
    alpha_decay_profile, exit_time_scaling, small_ball_kato_decay, AlphaDecayReport, KatoDecayRow,
    ScalingReport, ScalingRow,
};
