//! Monte Carlo vs grid-oracle agreement gate.

use super::OracleSolution;
use crate::error::Result;
use crate::estimate::PointSolve;

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub point: Vec<f64>,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub oracle_value: f64,
    pub gap: f64,
    /// `max(3 stderr, |fine - coarse| interpolated at the point)`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare sampled means against the grid solution. The oracle's own error
/// at each point is estimated by the difference between the `fine` solve
/// and a `coarse` one at twice the mesh width; the gate takes whichever of
/// statistical and discretization error is larger.
pub fn compare_with_oracle(
    mc: &[PointSolve],
    fine: &OracleSolution,
    coarse: Option<&OracleSolution>,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(mc.len());
    for solve in mc {
        let oracle_value = fine.interpolate(&solve.point)?;
        let refinement_gap = match coarse {
            Some(c) => (oracle_value - c.interpolate(&solve.point)?).abs(),
            None => 0.0,
        };
        let gap = (solve.estimate.mean - oracle_value).abs();
        let tolerance = (3.0 * solve.estimate.stderr).max(refinement_gap);
        rows.push(ComparisonRow {
            point: solve.point.clone(),
            mc_mean: solve.estimate.mean,
            mc_stderr: solve.estimate.stderr,
            oracle_value,
            gap,
            tolerance,
            pass: gap <= tolerance,
        });
    }
    Ok(rows)
}
