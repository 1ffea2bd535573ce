//! Resolvent estimators `G f(x) = E_x int_0^infty e^{-alpha t} f(X_t) dt`
//! for the full process and for the killed diffusion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::problem::ProblemSpec;
use crate::sim::{run_full_horizon, run_killed, KilledOutcome, RngStream, SimConfig};
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug)]
pub struct ResolventParams {
    pub alpha: f64,
    /// Declared bound on |f| over the reachable set; drives the truncation
    /// horizon and the reported tail bound.
    pub sup_f: f64,
    /// Target statistical resolution; the horizon is chosen so the
    /// truncation tail is at most a tenth of it.
    pub target_stderr: f64,
}

impl ResolventParams {
    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Precondition(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.sup_f >= 0.0 && self.sup_f.is_finite()) {
            return Err(Error::Precondition(format!(
                "sup_f must be nonnegative and finite, got {}",
                self.sup_f
            )));
        }
        if !(self.target_stderr > 0.0 && self.target_stderr.is_finite()) {
            return Err(Error::Precondition(format!(
                "target_stderr must be positive, got {}",
                self.target_stderr
            )));
        }
        Ok(())
    }
}

/// Horizon `T` with truncation tail `sup_f e^{-alpha T} / alpha` at most a
/// tenth of the target resolution, and never below `10 / alpha`.
pub fn truncation_horizon(params: &ResolventParams) -> f64 {
    let ResolventParams {
        alpha,
        sup_f,
        target_stderr,
    } = *params;
    let from_tail = if sup_f > 0.0 {
        (10.0 * sup_f / (alpha * target_stderr)).ln() / alpha
    } else {
        0.0
    };
    from_tail.max(10.0 / alpha)
}

/// Truncation tail bound at horizon `t`.
fn tail_bound(params: &ResolventParams, t: f64) -> f64 {
    params.sup_f * (-params.alpha * t).exp() / params.alpha
}

/// Resolvent of the full jump-diffusion, one start point. Paths use streams
/// `stream_base..stream_base + n_paths` of the master seed.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_full(
    spec: &ProblemSpec,
    f: &(dyn ScalarField + '_),
    params: &ResolventParams,
    x0: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
    stream_base: u64,
) -> Result<Estimate> {
    params.check()?;
    cfg.check()?;
    spec.check_dims()?;
    let horizon = truncation_horizon(params);
    let results: Vec<(f64, f64)> = (0..n_paths as usize)
        .into_par_iter()
        .with_min_len(16)
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = RngStream::new(master_seed, stream_base + i as u64);
            let rec = run_full_horizon(spec, x0, cfg, horizon, Some((params.alpha, f)), &mut rng)?;
            Ok((rec.integral, rec.n_jumps as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let integrals: Vec<f64> = results.iter().map(|r| r.0).collect();
    let jumps: Vec<f64> = results.iter().map(|r| r.1).collect();
    Ok(Estimate::from_samples(&integrals)
        .with_aux("horizon", horizon)
        .with_aux("tail_bound", tail_bound(params, horizon))
        .with_aux(
            "mean_jumps",
            crate::stats::pairwise_sum(&jumps) / n_paths as f64,
        ))
}

/// Resolvent of the killed diffusion (no redistribution), one start point.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_killed(
    spec: &ProblemSpec,
    f: &(dyn ScalarField + '_),
    params: &ResolventParams,
    x0: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
    stream_base: u64,
) -> Result<Estimate> {
    params.check()?;
    cfg.check()?;
    spec.check_dims()?;
    let horizon = truncation_horizon(params);
    let results: Vec<(f64, f64)> = (0..n_paths as usize)
        .into_par_iter()
        .with_min_len(16)
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = RngStream::new(master_seed, stream_base + i as u64);
            let rec = run_killed(spec, x0, cfg, horizon, Some((params.alpha, f)), &mut rng)?;
            let died = matches!(rec.outcome, KilledOutcome::Died { .. });
            Ok((rec.integral, died as u64 as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let integrals: Vec<f64> = results.iter().map(|r| r.0).collect();
    let died: f64 = results.iter().map(|r| r.1).sum();
    Ok(Estimate::from_samples(&integrals)
        .with_aux("horizon", horizon)
        .with_aux("tail_bound", tail_bound(params, horizon))
        .with_aux("died_fraction", died / n_paths as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;
    use crate::problem::{
        Atom, BoundaryData, Domain, DriftField, EllipticField, JumpKernel, RedistributionLaw,
    };
    use std::sync::Arc;

    fn free_space_with_kappa(kappa: f64) -> ProblemSpec {
        ProblemSpec {
            elliptic: EllipticField::identity(1, 1.0).unwrap(),
            drift: DriftField::zero(1),
            jumps: Some(JumpKernel {
                kappa: Arc::new(Constant(kappa)),
                kappa_bound: Some(kappa),
                nu: RedistributionLaw::new(
                    1,
                    vec![Atom {
                        weight: 1.0,
                        point: vec![0.0],
                    }],
                    None,
                )
                .unwrap(),
            }),
            domain: Domain::interval(-10.0, 10.0).unwrap(),
            boundary: BoundaryData {
                phi: Arc::new(Constant(0.0)),
                sup_bound: Some(0.0),
            },
        }
    }

    #[test]
    fn horizon_grows_with_precision() {
        let p1 = ResolventParams {
            alpha: 1.0,
            sup_f: 1.0,
            target_stderr: 1e-2,
        };
        let p2 = ResolventParams {
            target_stderr: 1e-4,
            ..p1
        };
        assert!(truncation_horizon(&p2) > truncation_horizon(&p1));
        // floor at 10 / alpha
        let cheap = ResolventParams {
            alpha: 2.0,
            sup_f: 0.0,
            target_stderr: 0.1,
        };
        assert_eq!(truncation_horizon(&cheap), 5.0);
    }

    #[test]
    fn full_resolvent_of_one_is_one_over_alpha() {
        // conservative process: G 1 = 1/alpha regardless of the dynamics
        let spec = free_space_with_kappa(2.0);
        let params = ResolventParams {
            alpha: 0.5,
            sup_f: 1.0,
            target_stderr: 5e-3,
        };
        let cfg = SimConfig {
            dt_base: 5e-3,
            ..SimConfig::default()
        };
        let one = Constant(1.0);
        let est = resolvent_full(&spec, &one, &params, &[0.3], 400, &cfg, 11, 0).unwrap();
        // integral of e^{-alpha t} to the horizon is deterministic
        let t = est.aux["horizon"];
        let expect = (1.0 - (-0.5 * t).exp()) / 0.5;
        assert!((est.mean - expect).abs() < 1e-10, "mean {}", est.mean);
        assert!(est.stderr < 1e-12);
        assert!(est.aux["tail_bound"] <= 5e-4 + 1e-12);
    }

    #[test]
    fn killed_resolvent_of_one_matches_exponential_clock() {
        // kappa constant: G^kappa_alpha 1 = E (1 - e^{-alpha zeta}) / alpha
        // with zeta ~ Exp(kappa): equals 1 / (alpha + kappa)
        let spec = free_space_with_kappa(2.0);
        let params = ResolventParams {
            alpha: 1.0,
            sup_f: 1.0,
            target_stderr: 5e-3,
        };
        let cfg = SimConfig {
            dt_base: 2e-3,
            ..SimConfig::default()
        };
        let one = Constant(1.0);
        let est = resolvent_killed(&spec, &one, &params, &[0.0], 20_000, &cfg, 13, 0).unwrap();
        // stochastic tolerance ~ 3 * stderr
        assert!(
            (est.mean - 1.0 / 3.0).abs() < 3.0 * est.stderr + 1e-3,
            "mean {} stderr {}",
            est.mean,
            est.stderr
        );
        assert!(est.aux["died_fraction"] > 0.999);
    }

    #[test]
    fn stream_blocks_are_disjoint() {
        let spec = free_space_with_kappa(1.0);
        let params = ResolventParams {
            alpha: 1.0,
            sup_f: 1.0,
            target_stderr: 1e-2,
        };
        let cfg = SimConfig {
            dt_base: 5e-3,
            ..SimConfig::default()
        };
        let f = |x: &[f64]| x[0];
        let a = resolvent_killed(&spec, &f, &params, &[0.5], 200, &cfg, 17, 0).unwrap();
        let b = resolvent_killed(&spec, &f, &params, &[0.5], 200, &cfg, 17, 200).unwrap();
        let again = resolvent_killed(&spec, &f, &params, &[0.5], 200, &cfg, 17, 0).unwrap();
        assert_eq!(a.mean.to_bits(), again.mean.to_bits());
        assert_ne!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn budget_too_small_is_reported() {
        let spec = free_space_with_kappa(1.0);
        let params = ResolventParams {
            alpha: 0.01,
            sup_f: 1.0,
            target_stderr: 1e-3,
        };
        let cfg = SimConfig {
            dt_base: 1e-3,
            max_steps: 1000,
            ..SimConfig::default()
        };
        let one = Constant(1.0);
        let err = resolvent_full(&spec, &one, &params, &[0.0], 10, &cfg, 19, 0);
        assert!(matches!(err, Err(Error::TruncationBudget { .. })));
    }
}
