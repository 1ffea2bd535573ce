//! The Dirichlet solver: average exterior data over exit positions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::sim::{run_until_exit, RngStream, SimConfig};
use crate::stats::{pairwise_sum, Estimate};

/// A run fails when more than this fraction of paths exhausts its step
/// budget without exiting.
pub const NON_EXIT_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct PointSolve {
    pub point: Vec<f64>,
    pub estimate: Estimate,
}

/// Estimate `u(x) = E_x[phi(X_tau)]` at each start point with `n_paths`
/// independent paths per point. Point `j`, path `i` uses RNG stream
/// `j * n_paths + i` of the master seed.
///
/// Paths that hit the step budget are excluded from the average and counted
/// in `aux["nonexit_count"]`; the run errors out if they exceed
/// [`NON_EXIT_LIMIT`] of the total. The returned mean always lies between
/// the smallest and largest sampled value of `phi`, which is asserted.
pub fn solve_dirichlet(
    spec: &ProblemSpec,
    points: &[Vec<f64>],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<Vec<PointSolve>> {
    cfg.check()?;
    spec.check_dims()?;
    if points.is_empty() || n_paths == 0 {
        return Err(Error::Precondition(
            "solve_dirichlet needs points and n_paths >= 1".into(),
        ));
    }
    for p in points {
        if p.len() != spec.dim() {
            return Err(Error::Precondition(format!(
                "point {p:?} has dim {}, problem dim is {}",
                p.len(),
                spec.dim()
            )));
        }
        if !spec.domain.contains(p) {
            return Err(Error::Precondition(format!(
                "start point {p:?} is not inside the domain"
            )));
        }
    }

    let mut out = Vec::with_capacity(points.len());
    for (j, point) in points.iter().enumerate() {
        let base = j as u64 * n_paths;
        out.push(solve_point(spec, point, n_paths, cfg, master_seed, base)?);
    }
    Ok(out)
}

struct PathSample {
    phi: f64,
    exit_time: f64,
    n_jumps: u64,
    boundary_jump: bool,
}

fn solve_point(
    spec: &ProblemSpec,
    point: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
    stream_base: u64,
) -> Result<PointSolve> {
    let samples: Vec<Option<PathSample>> = (0..n_paths as usize)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| -> Result<Option<PathSample>> {
            let mut rng = RngStream::new(master_seed, stream_base + i as u64);
            match run_until_exit(spec, point, cfg, &mut rng) {
                Ok(rec) => {
                    let phi = spec.boundary.eval(&rec.exit_point)?;
                    Ok(Some(PathSample {
                        phi,
                        exit_time: rec.exit_time,
                        n_jumps: rec.n_jumps,
                        boundary_jump: rec.boundary_jump,
                    }))
                }
                Err(Error::NonExit { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let nonexit = samples.iter().filter(|s| s.is_none()).count() as u64;
    if nonexit as f64 > NON_EXIT_LIMIT * n_paths as f64 || nonexit == n_paths {
        return Err(Error::ExcessNonExit {
            failed: nonexit,
            total: n_paths,
            limit: NON_EXIT_LIMIT * 100.0,
        });
    }

    // reductions stay in path-index order: bit-identical across thread counts
    let n_exit = (n_paths - nonexit) as f64;
    let mut phis = Vec::with_capacity(samples.len());
    let mut times = Vec::with_capacity(samples.len());
    let mut jumps = Vec::with_capacity(samples.len());
    let mut boundary = 0u64;
    for s in samples.iter().flatten() {
        phis.push(s.phi);
        times.push(s.exit_time);
        jumps.push(s.n_jumps as f64);
        boundary += s.boundary_jump as u64;
    }
    let phi_min = phis.iter().cloned().fold(f64::INFINITY, f64::min);
    let phi_max = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let estimate = Estimate::from_samples(&phis)
        .with_aux("mean_exit_time", pairwise_sum(&times) / n_exit)
        .with_aux("mean_jumps", pairwise_sum(&jumps) / n_exit)
        .with_aux("boundary_jump_fraction", boundary as f64 / n_exit)
        .with_aux("nonexit_count", nonexit as f64)
        .with_aux("phi_min", phi_min)
        .with_aux("phi_max", phi_max);

    // the estimator is an average of sampled phi values, so this cannot fail
    let slack = 1e-12 * (1.0 + phi_min.abs().max(phi_max.abs()));
    assert!(
        estimate.mean >= phi_min - slack && estimate.mean <= phi_max + slack,
        "mean {} escaped sampled data range [{phi_min}, {phi_max}]",
        estimate.mean
    );

    Ok(PointSolve {
        point: point.to_vec(),
        estimate,
    })
}
