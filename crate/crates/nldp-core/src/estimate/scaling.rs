//! Small-ball and large-damping asymptotics observable on sampled paths:
//! exit-time scaling in the ball radius, decay of the integrated intensity
//! before leaving a small ball, and decay of `E[e^{-alpha tau}]` in `alpha`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{Domain, ProblemSpec};
use crate::sim::{run_killed_stopped, run_until_exit, RngStream, SimConfig};
use crate::stats::{ls_slope, Estimate};

use super::dirichlet::NON_EXIT_LIMIT;

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub radius: f64,
    pub estimate: Estimate,
    pub dt_used: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub center: Vec<f64>,
    pub rows: Vec<ScalingRow>,
    /// Least squares slope of `ln(mean exit time)` against `ln r`.
    pub log_slope: f64,
}

/// Mean exit time of the diffusion part (jumps stripped) from balls
/// `B(center, r)`, with the time step scaled as `(r / r_max)^2` so the
/// relative discretization bias is comparable across radii. Radius `i` uses
/// stream block `i` of `n_paths` streams.
pub fn exit_time_scaling(
    spec: &ProblemSpec,
    center: &[f64],
    radii: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<ScalingReport> {
    cfg.check()?;
    spec.check_dims()?;
    if radii.len() < 2 || n_paths == 0 {
        return Err(Error::Precondition(
            "exit_time_scaling needs at least two radii and n_paths >= 1".into(),
        ));
    }
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let mut diffusion = spec.clone();
    diffusion.jumps = None;

    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Precondition(format!("radius must be positive, got {r}")));
        }
        let mut ball_spec = diffusion.clone();
        ball_spec.domain = Domain::ball(center.to_vec(), r)?;
        let cfg_r = SimConfig {
            dt_base: cfg.dt_base * (r / r_max) * (r / r_max),
            ..*cfg
        };
        let base = ri as u64 * n_paths;
        let times: Vec<Option<f64>> = (0..n_paths as usize)
            .into_par_iter()
            .with_min_len(32)
            .map(|i| -> Result<Option<f64>> {
                let mut rng = RngStream::new(master_seed, base + i as u64);
                match run_until_exit(&ball_spec, center, &cfg_r, &mut rng) {
                    Ok(rec) => Ok(Some(rec.exit_time)),
                    Err(Error::NonExit { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let nonexit = times.iter().filter(|t| t.is_none()).count() as u64;
        if nonexit as f64 > NON_EXIT_LIMIT * n_paths as f64 || nonexit == n_paths {
            return Err(Error::ExcessNonExit {
                failed: nonexit,
                total: n_paths,
                limit: NON_EXIT_LIMIT * 100.0,
            });
        }
        let vals: Vec<f64> = times.iter().flatten().cloned().collect();
        rows.push(ScalingRow {
            radius: r,
            estimate: Estimate::from_samples(&vals).with_aux("nonexit_count", nonexit as f64),
            dt_used: cfg_r.dt_base,
        });
    }

    let lx: Vec<f64> = rows.iter().map(|r| r.radius.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.estimate.mean.ln()).collect();
    Ok(ScalingReport {
        center: center.to_vec(),
        rows,
        log_slope: ls_slope(&lx, &ly),
    })
}

#[derive(Clone, Debug)]
pub struct KatoDecayRow {
    pub radius: f64,
    pub per_probe: Vec<Estimate>,
    /// Largest per-probe mean at this radius.
    pub sup_mean: f64,
}

/// Mean integrated intensity `E int_0^{tau_B and zeta} kappa(X_t) dt` of the
/// killed diffusion before it leaves `B(probe, r)` or dies, for each probe
/// and radius. Decreasing radius must drive the profile to zero uniformly
/// over probes when the intensity is locally integrable. Stream block
/// `ri * n_probes + pi`, each of `n_paths` streams.
pub fn small_ball_kato_decay(
    spec: &ProblemSpec,
    probes: &[Vec<f64>],
    radii: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<Vec<KatoDecayRow>> {
    cfg.check()?;
    spec.check_dims()?;
    if spec.jumps.is_none() {
        return Err(Error::Precondition(
            "the decay profile needs a jump intensity; none is defined".into(),
        ));
    }
    if probes.is_empty() || radii.is_empty() || n_paths == 0 {
        return Err(Error::Precondition(
            "need probes, radii and n_paths >= 1".into(),
        ));
    }
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let lambda = spec.elliptic.lambda();

    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Precondition(format!("radius must be positive, got {r}")));
        }
        let cfg_r = SimConfig {
            dt_base: cfg.dt_base * (r / r_max) * (r / r_max),
            ..*cfg
        };
        // exit times concentrate around r^2 / lambda; this horizon leaves
        // the truncated mass far below statistical resolution
        let horizon = 400.0 * r * r / lambda;
        let mut per_probe = Vec::with_capacity(probes.len());
        for (pi, probe) in probes.iter().enumerate() {
            let ball = Domain::ball(probe.clone(), r)?;
            let base = (ri * probes.len() + pi) as u64 * n_paths;
            let vals: Vec<f64> = (0..n_paths as usize)
                .into_par_iter()
                .with_min_len(32)
                .map(|i| -> Result<f64> {
                    let mut rng = RngStream::new(master_seed, base + i as u64);
                    let rec = run_killed_stopped(spec, &ball, probe, &cfg_r, horizon, &mut rng)?;
                    Ok(rec.total_hazard)
                })
                .collect::<Result<Vec<_>>>()?;
            per_probe.push(Estimate::from_samples(&vals).with_aux("horizon", horizon));
        }
        let sup_mean = per_probe.iter().map(|e| e.mean).fold(0.0, f64::max);
        rows.push(KatoDecayRow {
            radius: r,
            per_probe,
            sup_mean,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct AlphaDecayReport {
    pub alphas: Vec<f64>,
    /// `sup_means[a]` = max over points of the estimated `E[e^{-alpha tau}]`.
    pub sup_means: Vec<f64>,
    /// `per_point[a][j]` for alpha index `a`, point index `j`.
    pub per_point: Vec<Vec<Estimate>>,
    /// First alpha (in the given order) whose sup drops to 1/2 or below.
    pub first_at_or_below_half: Option<f64>,
}

/// Estimate `E_x[e^{-alpha tau_D}]` of the full jump-diffusion over a grid of
/// points, reusing one set of exit times for every alpha. With shared paths
/// the profile is non-increasing in alpha pathwise, hence so is every mean,
/// exactly and not just statistically. Point `j` uses stream block `j`.
///
/// Paths that exhaust the step budget contribute zero (their true weight is
/// below `e^{-alpha T}` for the budgeted horizon), counted per point in
/// `aux["nonexit_count"]`.
pub fn alpha_decay_profile(
    spec: &ProblemSpec,
    points: &[Vec<f64>],
    alphas: &[f64],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<AlphaDecayReport> {
    cfg.check()?;
    spec.check_dims()?;
    if points.is_empty() || alphas.is_empty() || n_paths == 0 {
        return Err(Error::Precondition(
            "need points, alphas and n_paths >= 1".into(),
        ));
    }
    for &a in alphas {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Precondition(format!(
                "alpha must be positive, got {a}"
            )));
        }
    }
    for p in points {
        if !spec.domain.contains(p) {
            return Err(Error::Precondition(format!(
                "point {p:?} is not inside the domain"
            )));
        }
    }

    // one simulation per point; exit times shared across alphas
    let mut exit_times: Vec<Vec<Option<f64>>> = Vec::with_capacity(points.len());
    for (j, point) in points.iter().enumerate() {
        let base = j as u64 * n_paths;
        let times: Vec<Option<f64>> = (0..n_paths as usize)
            .into_par_iter()
            .with_min_len(32)
            .map(|i| -> Result<Option<f64>> {
                let mut rng = RngStream::new(master_seed, base + i as u64);
                match run_until_exit(spec, point, cfg, &mut rng) {
                    Ok(rec) => Ok(Some(rec.exit_time)),
                    Err(Error::NonExit { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        exit_times.push(times);
    }

    let mut per_point = Vec::with_capacity(alphas.len());
    let mut sup_means = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut row = Vec::with_capacity(points.len());
        let mut sup: f64 = 0.0;
        for times in &exit_times {
            let vals: Vec<f64> = times
                .iter()
                .map(|t| t.map_or(0.0, |t| (-alpha * t).exp()))
                .collect();
            let nonexit = times.iter().filter(|t| t.is_none()).count();
            let est = Estimate::from_samples(&vals).with_aux("nonexit_count", nonexit as f64);
            sup = sup.max(est.mean);
            row.push(est);
        }
        per_point.push(row);
        sup_means.push(sup);
    }
    let first_at_or_below_half = alphas
        .iter()
        .zip(&sup_means)
        .find(|(_, s)| **s <= 0.5)
        .map(|(a, _)| *a);

    Ok(AlphaDecayReport {
        alphas: alphas.to_vec(),
        sup_means,
        per_point,
        first_at_or_below_half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;
    use crate::problem::{
        Atom, BoundaryData, DriftField, EllipticField, JumpKernel, RedistributionLaw,
    };
    use std::sync::Arc;

    fn plain_ball(dim: usize) -> ProblemSpec {
        ProblemSpec {
            elliptic: EllipticField::identity(dim, 1.0).unwrap(),
            drift: DriftField::zero(dim),
            jumps: None,
            domain: Domain::ball(vec![0.0; dim], 1.0).unwrap(),
            boundary: BoundaryData {
                phi: Arc::new(Constant(0.0)),
                sup_bound: Some(0.0),
            },
        }
    }

    #[test]
    fn exit_time_scaling_is_quadratic() {
        // E_0[tau_{B(0,r)}] = r^2 / d exactly for the unit diffusion
        let spec = plain_ball(2);
        let cfg = SimConfig {
            dt_base: 2e-3,
            ..SimConfig::default()
        };
        let radii = [0.4, 0.2, 0.1];
        let report =
            exit_time_scaling(&spec, &[0.0, 0.0], &radii, 3000, &cfg, 301).unwrap();
        for row in &report.rows {
            let expect = row.radius * row.radius / 2.0;
            assert!(
                (row.estimate.mean - expect).abs() < 3.0 * row.estimate.stderr + 0.02 * expect,
                "r {} mean {} expect {expect}",
                row.radius,
                row.estimate.mean
            );
        }
        assert!(
            (report.log_slope - 2.0).abs() < 0.1,
            "slope {}",
            report.log_slope
        );
        // dt shrinks with the ball
        assert!(report.rows[2].dt_used < report.rows[0].dt_used);
    }

    #[test]
    fn kato_decay_quarters_with_half_radius() {
        // constant kappa: E int kappa = kappa E[tau_B and zeta]; for small
        // balls death is rare so the profile tracks kappa r^2 / d
        let mut spec = plain_ball(2);
        spec.jumps = Some(JumpKernel {
            kappa: Arc::new(Constant(1.0)),
            kappa_bound: Some(1.0),
            nu: RedistributionLaw::new(
                2,
                vec![Atom {
                    weight: 1.0,
                    point: vec![0.0, 0.0],
                }],
                None,
            )
            .unwrap(),
        });
        // small dt: the mean exit time at r = 0.2 is only 0.02, and the
        // discrete exit check biases it up by O(sqrt(dt))
        let cfg = SimConfig {
            dt_base: 5e-5,
            ..SimConfig::default()
        };
        let rows = small_ball_kato_decay(
            &spec,
            &[vec![0.0, 0.0], vec![0.3, 0.0]],
            &[0.2, 0.1],
            3000,
            &cfg,
            303,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        let big = rows[0].sup_mean;
        let small = rows[1].sup_mean;
        let expect_big = 0.2 * 0.2 / 2.0;
        assert!(
            (big - expect_big).abs() < 0.05 * expect_big + 3e-4,
            "big {big} expect {expect_big}"
        );
        let ratio = big / small;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn zero_rate_profile_is_identically_zero() {
        // no hazard ever accrues, so every sample is exactly 0.0
        let mut spec = plain_ball(2);
        spec.jumps = Some(JumpKernel {
            kappa: Arc::new(Constant(0.0)),
            kappa_bound: Some(0.0),
            nu: RedistributionLaw::new(
                2,
                vec![Atom {
                    weight: 1.0,
                    point: vec![0.0, 0.0],
                }],
                None,
            )
            .unwrap(),
        });
        let cfg = SimConfig {
            dt_base: 1e-3,
            ..SimConfig::default()
        };
        let rows =
            small_ball_kato_decay(&spec, &[vec![0.0, 0.0]], &[0.2, 0.1], 500, &cfg, 304).unwrap();
        for row in &rows {
            assert_eq!(row.sup_mean, 0.0);
            for est in &row.per_probe {
                assert_eq!(est.mean, 0.0);
                assert_eq!(est.stderr, 0.0);
            }
        }
    }

    #[test]
    fn alpha_decay_is_pathwise_monotone() {
        let spec = plain_ball(1);
        let cfg = SimConfig {
            dt_base: 1e-3,
            ..SimConfig::default()
        };
        let alphas = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        let report = alpha_decay_profile(
            &spec,
            &[vec![0.0], vec![0.5]],
            &alphas,
            2000,
            &cfg,
            305,
        )
        .unwrap();
        // exact monotonicity from shared paths
        for a in 1..alphas.len() {
            assert!(report.sup_means[a] <= report.sup_means[a - 1]);
            for j in 0..2 {
                assert!(report.per_point[a][j].mean <= report.per_point[a - 1][j].mean);
            }
        }
        assert!(report.first_at_or_below_half.is_some());
        // E_0[e^{-alpha tau}] = sech(sqrt(2 alpha)) at the center of the
        // unit interval domain B(0,1) in d = 1
        let exact = 1.0 / (2.0f64).sqrt().cosh();
        let got = report.per_point[1][0].mean;
        assert!(
            (got - exact).abs() < 3.0 * report.per_point[1][0].stderr + 5e-3,
            "got {got} exact {exact}"
        );
    }
}
