//! Path simulation for the jump-diffusion.
//!
//! Between jumps the process is the Ito diffusion
//! `dX = (b + 1/2 div A) dt + A^{1/2} dW`, whose generator is
//! `1/2 div(A grad) + b . grad`. Jumps are driven by the integrated intensity
//! `int kappa(X_s) ds` crossing an independent unit exponential threshold; at
//! a jump the path relocates by a draw from the redistribution law and the
//! clock restarts. Killed variants stop at the threshold crossing instead of
//! relocating.

mod rng;
mod walk;

pub use rng::RngStream;
pub use walk::{
    run_full_horizon, run_killed, run_killed_stopped, run_until_exit, run_until_exit_traced,
    step_diffusion, HorizonRecord, KilledOutcome, KilledRecord, StoppedRecord, TraceRow,
};

/// A jump landing within this distance of the boundary counts as an exit on
/// the boundary itself.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Rule for accumulating the jump hazard over one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HazardRule {
    /// Trapezoid in the step endpoints. Second order in dt.
    #[default]
    Trapezoid,
    /// Left endpoint only. First order, kept for step-bias experiments.
    LeftPoint,
}

/// Rule for deciding that the diffusion has left the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExitRule {
    /// Exit at the first sampled position outside the domain.
    #[default]
    FirstExteriorSample,
    /// Additionally exit between samples with the Brownian bridge crossing
    /// probability. Isotropic diffusion matrices only.
    BridgeCorrected,
}

#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Base time step.
    pub dt_base: f64,
    /// In (0, 1]; scales the quadratic shrink of dt near the boundary.
    pub dt_boundary_factor: f64,
    /// Hard cap on steps per path (plus one extra per jump).
    pub max_steps: u64,
    /// Hard cap on redistributions per path.
    pub max_jumps: u64,
    pub hazard_rule: HazardRule,
    pub exit_rule: ExitRule,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_base: 1e-3,
            dt_boundary_factor: 1.0,
            max_steps: 10_000_000,
            max_jumps: 1_000_000,
            hazard_rule: HazardRule::Trapezoid,
            exit_rule: ExitRule::FirstExteriorSample,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> crate::error::Result<()> {
        use crate::error::Error;
        if !(self.dt_base.is_finite() && self.dt_base > 0.0) {
            return Err(Error::Precondition(format!(
                "dt_base must be positive, got {}",
                self.dt_base
            )));
        }
        if !(self.dt_boundary_factor > 0.0 && self.dt_boundary_factor <= 1.0) {
            return Err(Error::Precondition(format!(
                "dt_boundary_factor must lie in (0, 1], got {}",
                self.dt_boundary_factor
            )));
        }
        if self.max_steps == 0 || self.max_jumps == 0 {
            return Err(Error::Precondition(
                "max_steps and max_jumps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Snapshot of a path between events.
#[derive(Clone, Debug)]
pub struct PathState {
    pub position: Vec<f64>,
    pub time: f64,
    /// Integrated intensity since the last jump (or the start).
    pub hazard_accum: f64,
    pub n_jumps: u64,
}

impl PathState {
    pub fn start(position: Vec<f64>) -> Self {
        PathState {
            position,
            time: 0.0,
            hazard_accum: 0.0,
            n_jumps: 0,
        }
    }
}

/// How a path left the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitMode {
    /// The diffusion crossed the boundary between jumps.
    DiffusedAcross,
    /// A redistribution draw landed outside (or exactly on) the boundary.
    JumpedOutside,
}

/// Result of running a path to its exit from the domain.
#[derive(Clone, Debug)]
pub struct ExitRecord {
    pub exit_point: Vec<f64>,
    pub exit_time: f64,
    pub n_jumps: u64,
    pub n_steps: u64,
    pub mode: ExitMode,
    /// True when a jump landed within [`BOUNDARY_TOL`] of the boundary.
    pub boundary_jump: bool,
    /// `int_0^tau kappa(X_t) dt` along the whole path.
    pub exit_hazard: f64,
}
