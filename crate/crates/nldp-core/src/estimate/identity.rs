//! Statistical checks of the killed-versus-full process identities.
//!
//! Both checks compare two independently sampled estimates of the same
//! quantity and report a two-sample z score. The left and right sides use
//! disjoint RNG stream blocks, so the combined standard error is valid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::problem::ProblemSpec;
use crate::sim::{run_killed, KilledOutcome, RngStream, SimConfig};
use crate::stats::{
    compare_estimates, product_independent, sum_independent, Estimate, IdentityReport,
};

use super::resolvent::{resolvent_full, resolvent_killed, truncation_horizon, ResolventParams};

#[derive(Clone, Copy, Debug)]
pub struct Prop23Params {
    pub alpha: f64,
    /// Declared bound on |phi| over the reachable set.
    pub phi_sup: f64,
    pub target_stderr: f64,
    pub z_threshold: f64,
}

/// Check, at each point, that the killed process satisfies
/// `E_x[e^{-alpha zeta} phi(X_{zeta-})] = G^kappa_alpha (kappa phi)(x)`:
/// the discounted pre-death value of `phi` equals the killed resolvent of
/// `kappa phi`. Point `j` uses stream blocks `2j` (left) and `2j+1` (right),
/// each of `n_paths` streams.
pub fn check_prop_2_3(
    spec: &ProblemSpec,
    params: &Prop23Params,
    points: &[Vec<f64>],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<Vec<IdentityReport>> {
    cfg.check()?;
    spec.check_dims()?;
    let jumps = spec.jumps.as_ref().ok_or_else(|| {
        Error::Precondition("the identity needs a jump intensity; none is defined".into())
    })?;
    if points.is_empty() || n_paths == 0 {
        return Err(Error::Precondition("need points and n_paths >= 1".into()));
    }
    let kappa_sup = spec.kappa_sup_estimate();
    let res_params = ResolventParams {
        alpha: params.alpha,
        sup_f: kappa_sup * params.phi_sup,
        target_stderr: params.target_stderr,
    };
    res_params.check()?;
    // the same horizon truncates both sides
    let lhs_params = ResolventParams {
        sup_f: res_params.sup_f.max(params.phi_sup * params.alpha),
        ..res_params
    };
    let horizon = truncation_horizon(&lhs_params);

    let kappa = jumps.kappa.clone();
    let phi = spec.boundary.phi.clone();
    let kf = move |y: &[f64]| kappa.eval(y) * phi.eval(y);

    let mut out = Vec::with_capacity(points.len());
    for (j, point) in points.iter().enumerate() {
        let lhs_base = (2 * j) as u64 * n_paths;
        let rhs_base = (2 * j + 1) as u64 * n_paths;

        let values: Vec<f64> = (0..n_paths as usize)
            .into_par_iter()
            .with_min_len(16)
            .map(|i| -> Result<f64> {
                let mut rng = RngStream::new(master_seed, lhs_base + i as u64);
                let rec = run_killed(spec, point, cfg, horizon, None, &mut rng)?;
                match rec.outcome {
                    KilledOutcome::Died { time, position } => {
                        Ok((-params.alpha * time).exp() * spec.boundary.eval(&position)?)
                    }
                    // survivors contribute zero; the bias is inside tail_bound
                    KilledOutcome::Survived { .. } => Ok(0.0),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let lhs = Estimate::from_samples(&values)
            .with_aux("horizon", horizon)
            .with_aux(
                "tail_bound",
                params.phi_sup * (-params.alpha * horizon).exp(),
            );

        let rhs = resolvent_killed(
            spec,
            &kf,
            &lhs_params,
            point,
            n_paths,
            cfg,
            master_seed,
            rhs_base,
        )?;

        out.push(compare_estimates(
            "prop23",
            point,
            lhs,
            rhs,
            params.z_threshold,
        ));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct ResolventIdentityParams {
    pub alpha: f64,
    /// Declared bound on |f|.
    pub sup_f: f64,
    pub target_stderr: f64,
    pub z_threshold: f64,
}

/// Check the piecing-together resolvent identity
/// `G_alpha f = G^kappa_alpha f + G^kappa_alpha(kappa . int G_alpha f d nu)`
/// at each point. Because the redistribution law does not depend on the
/// state, `int G_alpha f d nu` is one constant `c`, estimated by nested runs
/// at each atom with a quarter of the path budget; the right side is then
/// `G^kappa_alpha f + c G^kappa_alpha kappa` with product-variance error
/// propagation.
///
/// Stream layout: atom `k` uses block `k`; point `j` uses blocks
/// `n_atoms + 3j .. n_atoms + 3j + 2` (left side, `G^kappa f`,
/// `G^kappa kappa`), each of `n_paths` streams.
pub fn check_resolvent_identity(
    spec: &ProblemSpec,
    f: &(dyn ScalarField + '_),
    params: &ResolventIdentityParams,
    points: &[Vec<f64>],
    n_paths: u64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<Vec<IdentityReport>> {
    cfg.check()?;
    spec.check_dims()?;
    let jumps = spec.jumps.as_ref().ok_or_else(|| {
        Error::Precondition("the identity needs a jump intensity; none is defined".into())
    })?;
    if jumps.nu.density().is_some() {
        return Err(Error::Precondition(
            "nested estimation is defined for atom-only redistribution laws".into(),
        ));
    }
    if points.is_empty() || n_paths == 0 {
        return Err(Error::Precondition("need points and n_paths >= 1".into()));
    }
    let kappa_sup = spec.kappa_sup_estimate();
    let res_f = ResolventParams {
        alpha: params.alpha,
        sup_f: params.sup_f,
        target_stderr: params.target_stderr,
    };
    res_f.check()?;
    let res_kappa = ResolventParams {
        sup_f: kappa_sup,
        ..res_f
    };

    // inner estimates of G_alpha f at the atoms, shared by all points
    let n_inner = (n_paths / 4).max(100);
    let atoms = jumps.nu.atoms();
    let mut inner_mean = 0.0;
    let mut inner_var = 0.0;
    let mut inner_tail = 0.0;
    for (k, atom) in atoms.iter().enumerate() {
        let est = resolvent_full(
            spec,
            f,
            &res_f,
            &atom.point,
            n_inner,
            cfg,
            master_seed,
            k as u64 * n_paths,
        )?;
        inner_mean += atom.weight * est.mean;
        inner_var += atom.weight * atom.weight * est.stderr * est.stderr;
        inner_tail = f64::max(inner_tail, est.aux["tail_bound"]);
    }
    let c = Estimate::from_moments(inner_mean, inner_var.sqrt(), n_inner);

    let kappa = jumps.kappa.clone();
    let kappa_field = move |y: &[f64]| kappa.eval(y);

    let mut out = Vec::with_capacity(points.len());
    let base0 = atoms.len() as u64 * n_paths;
    for (j, point) in points.iter().enumerate() {
        let lhs_base = base0 + (3 * j) as u64 * n_paths;
        let p_base = base0 + (3 * j + 1) as u64 * n_paths;
        let q_base = base0 + (3 * j + 2) as u64 * n_paths;

        let lhs = resolvent_full(spec, f, &res_f, point, n_paths, cfg, master_seed, lhs_base)?;
        let p = resolvent_killed(spec, f, &res_f, point, n_paths, cfg, master_seed, p_base)?;
        let q = resolvent_killed(
            spec,
            &kappa_field,
            &res_kappa,
            point,
            n_paths,
            cfg,
            master_seed,
            q_base,
        )?;

        let tail = p.aux["tail_bound"]
            + c.mean.abs() * q.aux["tail_bound"]
            + inner_tail * q.mean.abs();
        let rhs = sum_independent(&p, &product_independent(&c, &q)).with_aux("tail_bound", tail);

        out.push(compare_estimates(
            "resolvent_identity",
            point,
            lhs,
            rhs,
            params.z_threshold,
        ));
    }
    Ok(out)
}
