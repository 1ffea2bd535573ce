//! Problem validation: structural checks plus sampled field checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    /// The problem must not be run.
    Error,
    /// The problem can run but a stated hypothesis is not certified.
    Warning,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub what: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.severity, self.what)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub samples_used: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    /// Error out when any hard issue is present.
    pub fn ensure(&self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg = self
            .issues
            .iter()
            .filter(|i| i.severity == Severity::Error)
            .map(|i| i.what.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidProblem(msg))
    }

    fn error(&mut self, what: String) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            what,
        });
    }

    fn warning(&mut self, what: String) {
        self.issues.push(ValidationIssue {
            severity: Severity::Warning,
            what,
        });
    }
}

/// Check a problem: exact dimension agreement, then field behaviour at
/// `n_samples` points drawn from the domain's bounding box inflated by 25%
/// (paths overshoot the boundary, so fields must extend a little beyond it).
/// Deterministic for a fixed seed.
pub fn validate_problem(spec: &ProblemSpec, n_samples: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport {
        issues: Vec::new(),
        samples_used: n_samples,
    };
    if let Err(Error::InvalidProblem(msg)) = spec.check_dims() {
        report.error(msg);
        return report; // dimension mismatches make sampling meaningless
    }

    let dim = spec.dim();
    let (lo, hi) = spec.domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; dim];
    let mut drift = vec![0.0; dim];
    let mut corr = vec![0.0; dim];
    let lambda = spec.elliptic.lambda();

    let mut bad_entry = 0usize;
    let mut bad_drift = 0usize;
    let mut bad_kappa = 0usize;
    let mut bad_phi = 0usize;
    for _ in 0..n_samples {
        for (j, xi) in x.iter_mut().enumerate() {
            let c = 0.5 * (lo[j] + hi[j]);
            let half = 0.625 * (hi[j] - lo[j]); // 25% inflation
            let u: f64 = rng.random();
            *xi = c + (2.0 * u - 1.0) * half;
        }
        for j in 0..dim {
            let a = spec.elliptic.entry(&x, j, j);
            if !a.is_finite() || a < lambda - 1e-12 {
                bad_entry += 1;
                break;
            }
        }
        spec.elliptic.half_divergence(&x, &mut corr);
        spec.drift.eval_into(&x, &mut drift);
        if drift.iter().chain(corr.iter()).any(|v| !v.is_finite()) {
            bad_drift += 1;
        }
        if let Some(j) = &spec.jumps {
            let k = j.kappa.eval(&x);
            if !k.is_finite() || k < 0.0 {
                bad_kappa += 1;
            }
        }
        if !spec.boundary.phi.eval(&x).is_finite() {
            bad_phi += 1;
        }
    }
    if bad_entry > 0 {
        report.error(format!(
            "diffusion entries below lambda {lambda} or non-finite at {bad_entry} of {n_samples} sampled points"
        ));
    }
    if bad_drift > 0 {
        report.error(format!(
            "drift or divergence correction non-finite at {bad_drift} sampled points"
        ));
    }
    if bad_kappa > 0 {
        report.error(format!(
            "jump intensity negative or non-finite at {bad_kappa} sampled points"
        ));
    }
    if bad_phi > 0 {
        report.error(format!(
            "exterior data non-finite at {bad_phi} sampled points"
        ));
    }

    if let Some(j) = &spec.jumps {
        for (k, atom) in j.nu.atoms().iter().enumerate() {
            if !spec.domain.contains(&atom.point)
                && !spec.boundary.phi.eval(&atom.point).is_finite()
            {
                report.error(format!(
                    "exterior data non-finite at exterior redistribution atom {k} {:?}",
                    atom.point
                ));
            }
        }
        if let Some(bound) = j.kappa_bound {
            if !(bound.is_finite() && bound >= 0.0) {
                report.error(format!("declared kappa bound {bound} is not usable"));
            }
        }
    }

    if !spec.domain.regularity_declared {
        report.warning(
            "domain regularity not declared; boundary values may not be attained continuously"
                .into(),
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AffineAbs, Constant};
    use crate::problem::{Atom, BoundaryData, Domain, DriftField, EllipticField, JumpKernel,
        RedistributionLaw};
    use std::sync::Arc;

    fn base_spec() -> ProblemSpec {
        ProblemSpec {
            elliptic: EllipticField::identity(2, 1.0).unwrap(),
            drift: DriftField::zero(2),
            jumps: None,
            domain: Domain::ball(vec![0.0, 0.0], 1.0).unwrap(),
            boundary: BoundaryData {
                phi: Arc::new(Constant(1.0)),
                sup_bound: Some(1.0),
            },
        }
    }

    #[test]
    fn clean_problem_passes() {
        let report = validate_problem(&base_spec(), 200, 7);
        assert!(report.is_valid(), "{:?}", report.issues);
        assert!(report.ensure().is_ok());
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let mut spec = base_spec();
        spec.drift = DriftField::zero(3);
        let report = validate_problem(&spec, 10, 7);
        assert!(!report.is_valid());
        assert!(report.ensure().is_err());
    }

    #[test]
    fn negative_kappa_detected() {
        let mut spec = base_spec();
        spec.jumps = Some(JumpKernel {
            kappa: Arc::new(AffineAbs {
                c0: -0.5,
                coeffs: vec![0.0, 0.0],
            }),
            kappa_bound: None,
            nu: RedistributionLaw::new(
                2,
                vec![Atom {
                    weight: 1.0,
                    point: vec![3.0, 0.0],
                }],
                None,
            )
            .unwrap(),
        });
        let report = validate_problem(&spec, 200, 7);
        assert!(!report.is_valid());
    }

    #[test]
    fn non_finite_phi_at_exterior_atom_detected() {
        let mut spec = base_spec();
        spec.boundary = BoundaryData {
            phi: Arc::new(|x: &[f64]| 1.0 / (x[0] - 3.0)),
            sup_bound: None,
        };
        spec.jumps = Some(JumpKernel {
            kappa: Arc::new(Constant(1.0)),
            kappa_bound: Some(1.0),
            nu: RedistributionLaw::new(
                2,
                vec![Atom {
                    weight: 1.0,
                    point: vec![3.0, 0.0],
                }],
                None,
            )
            .unwrap(),
        });
        let report = validate_problem(&spec, 50, 7);
        assert!(!report.is_valid());
    }

    #[test]
    fn undeclared_regularity_is_only_a_warning() {
        let mut spec = base_spec();
        spec.domain.regularity_declared = false;
        let report = validate_problem(&spec, 50, 7);
        assert!(report.is_valid());
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].severity, Severity::Warning);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = base_spec();
        let a = validate_problem(&spec, 100, 42);
        let b = validate_problem(&spec, 100, 42);
        assert_eq!(a.issues.len(), b.issues.len());
    }
}
