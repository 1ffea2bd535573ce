//! Problem definition: operator coefficients, domain, and boundary data.
//!
//! A [`ProblemSpec`] describes the generator
//! `L u = 1/2 div(A grad u) + b . grad u + kappa(x) (int u d nu - u)`
//! on a bounded open domain together with exterior data `phi`. The jump part
//! is optional; without it the problem is a plain diffusion.

mod domain;
pub mod kato;
pub mod validate;

pub use domain::Domain;
pub use validate::{validate_problem, ValidationIssue, ValidationReport};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{FieldRef, Polynomial, ScalarField};

/// Symmetric uniformly elliptic diffusion matrix `A(x)` with declared lower
/// eigenvalue bound `lambda`.
#[derive(Clone)]
pub struct EllipticField {
    dim: usize,
    lambda: f64,
    form: EllipticForm,
}

#[derive(Clone)]
enum EllipticForm {
    Identity,
    ConstantDiag {
        diag: Vec<f64>,
        sqrt_diag: Vec<f64>,
    },
    Constant {
        a: DMatrix<f64>,
        sqrt: DMatrix<f64>,
    },
    /// Diagonal `A(x)` with analytic entries; `div_entries[j] = d a_jj / d x_j`
    /// so the drift correction needs no numerical differentiation.
    VariableDiag {
        entries: Vec<Arc<Polynomial>>,
        div_entries: Vec<Arc<Polynomial>>,
    },
}

impl EllipticField {
    pub fn identity(dim: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if lambda > 1.0 {
            return Err(Error::InvalidProblem(format!(
                "lambda {lambda} exceeds the identity matrix eigenvalue 1"
            )));
        }
        Ok(EllipticField {
            dim,
            lambda,
            form: EllipticForm::Identity,
        })
    }

    pub fn constant_diag(diag: Vec<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if diag.is_empty() {
            return Err(Error::InvalidProblem("empty diagonal".into()));
        }
        for &a in &diag {
            if !a.is_finite() || a < lambda {
                return Err(Error::InvalidProblem(format!(
                    "diagonal entry {a} below lambda {lambda}"
                )));
            }
        }
        let sqrt_diag = diag.iter().map(|a| a.sqrt()).collect();
        Ok(EllipticField {
            dim: diag.len(),
            lambda,
            form: EllipticForm::ConstantDiag { diag, sqrt_diag },
        })
    }

    /// Full constant matrix; must be symmetric with eigenvalues >= lambda.
    /// The square root is the symmetric one, from the eigendecomposition.
    pub fn constant(a: DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let dim = a.nrows();
        if dim == 0 || a.ncols() != dim {
            return Err(Error::InvalidProblem("matrix must be square".into()));
        }
        let scale = a.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidProblem(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let sym = 0.5 * (&a + a.transpose());
        let eig = sym.clone().symmetric_eigen();
        let mut sqrt_vals = DVector::zeros(dim);
        for (k, ev) in eig.eigenvalues.iter().enumerate() {
            if *ev < lambda - 1e-12 * scale {
                return Err(Error::InvalidProblem(format!(
                    "eigenvalue {ev} below lambda {lambda}"
                )));
            }
            sqrt_vals[k] = ev.max(0.0).sqrt();
        }
        let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        Ok(EllipticField {
            dim,
            lambda,
            form: EllipticForm::Constant { a: sym, sqrt },
        })
    }

    /// Diagonal matrix with polynomial entries `a_jj(x)`; derivative entries
    /// are taken analytically. Positivity down to `lambda` is checked by
    /// sampling in [`validate_problem`].
    pub fn variable_diag(entries: Vec<Polynomial>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if entries.is_empty() {
            return Err(Error::InvalidProblem("empty diagonal".into()));
        }
        let dim = entries.len();
        for e in &entries {
            if e.dim() != dim {
                return Err(Error::InvalidProblem(format!(
                    "diagonal entry polynomial has dim {}, expected {dim}",
                    e.dim()
                )));
            }
        }
        let div_entries = entries
            .iter()
            .enumerate()
            .map(|(j, e)| Arc::new(e.partial(j)))
            .collect();
        let entries = entries.into_iter().map(Arc::new).collect();
        Ok(EllipticField {
            dim,
            lambda,
            form: EllipticForm::VariableDiag {
                entries,
                div_entries,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Some(a)` when `A(x) = a I` everywhere.
    pub fn isotropy(&self) -> Option<f64> {
        match &self.form {
            EllipticForm::Identity => Some(1.0),
            EllipticForm::ConstantDiag { diag, .. } => {
                let a0 = diag[0];
                diag.iter().all(|a| (a - a0).abs() <= 1e-14 * a0).then_some(a0)
            }
            EllipticForm::Constant { a, .. } => {
                let a0 = a[(0, 0)];
                let scale = a.amax();
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        let want = if i == j { a0 } else { 0.0 };
                        if (a[(i, j)] - want).abs() > 1e-14 * scale {
                            return None;
                        }
                    }
                }
                Some(a0)
            }
            EllipticForm::VariableDiag { .. } => None,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.form {
            EllipticForm::Constant { a, .. } => {
                let scale = a.amax();
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        if i != j && a[(i, j)].abs() > 1e-14 * scale {
                            return false;
                        }
                    }
                }
                true
            }
            _ => true,
        }
    }

    /// Entry `a_ij(x)`.
    pub fn entry(&self, x: &[f64], i: usize, j: usize) -> f64 {
        match &self.form {
            EllipticForm::Identity => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
            EllipticForm::ConstantDiag { diag, .. } => {
                if i == j {
                    diag[i]
                } else {
                    0.0
                }
            }
            EllipticForm::Constant { a, .. } => a[(i, j)],
            EllipticForm::VariableDiag { entries, .. } => {
                if i == j {
                    entries[i].eval(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Full matrix at `x`, written into `out` (must be `dim x dim`).
    pub fn matrix_at(&self, x: &[f64], out: &mut DMatrix<f64>) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self.entry(x, i, j);
            }
        }
    }

    /// `out = A(x)^{1/2} z` using the symmetric square root.
    pub fn sqrt_mul(&self, x: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.form {
            EllipticForm::Identity => out.copy_from_slice(z),
            EllipticForm::ConstantDiag { sqrt_diag, .. } => {
                for ((o, zi), s) in out.iter_mut().zip(z).zip(sqrt_diag) {
                    *o = s * zi;
                }
            }
            EllipticForm::Constant { sqrt, .. } => {
                for i in 0..self.dim {
                    let mut acc = 0.0;
                    for j in 0..self.dim {
                        acc += sqrt[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
            }
            EllipticForm::VariableDiag { entries, .. } => {
                for (i, (o, zi)) in out.iter_mut().zip(z).enumerate() {
                    let a = entries[i].eval(x);
                    if !(a.is_finite() && a >= 0.0) {
                        return Err(Error::Evaluation {
                            what: format!("diffusion entry a_{i}{i} = {a}"),
                            point: x.to_vec(),
                        });
                    }
                    *o = a.sqrt() * zi;
                }
            }
        }
        Ok(())
    }

    /// `out = 1/2 (div A)(x)`, the Ito correction added to the drift.
    pub fn half_divergence(&self, x: &[f64], out: &mut [f64]) {
        match &self.form {
            EllipticForm::Identity
            | EllipticForm::ConstantDiag { .. }
            | EllipticForm::Constant { .. } => out.fill(0.0),
            EllipticForm::VariableDiag { div_entries, .. } => {
                for (o, d) in out.iter_mut().zip(div_entries) {
                    *o = 0.5 * d.eval(x);
                }
            }
        }
    }

    /// True when `1/2 div A` vanishes identically.
    pub fn constant_coefficients(&self) -> bool {
        !matches!(self.form, EllipticForm::VariableDiag { .. })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "ellipticity bound lambda must be finite and positive, got {lambda}"
        )));
    }
    Ok(())
}

/// First order coefficient `b(x)`.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    form: DriftForm,
    /// Caller-declared bound on |b| over the region of interest; used only
    /// for reporting and step-size sanity checks.
    pub bound_hint: Option<f64>,
}

#[derive(Clone)]
enum DriftForm {
    Zero,
    Constant(Vec<f64>),
    Variable(Vec<FieldRef>),
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        DriftField {
            dim,
            form: DriftForm::Zero,
            bound_hint: Some(0.0),
        }
    }

    pub fn constant(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() || b.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProblem(
                "constant drift must be nonempty and finite".into(),
            ));
        }
        let norm = b.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(DriftField {
            dim: b.len(),
            form: DriftForm::Constant(b),
            bound_hint: Some(norm),
        })
    }

    pub fn variable(components: Vec<FieldRef>, bound_hint: Option<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidProblem("drift needs components".into()));
        }
        Ok(DriftField {
            dim: components.len(),
            form: DriftForm::Variable(components),
            bound_hint,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.form, DriftForm::Zero)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.form {
            DriftForm::Zero => out.fill(0.0),
            DriftForm::Constant(b) => out.copy_from_slice(b),
            DriftForm::Variable(fs) => {
                for (o, f) in out.iter_mut().zip(fs) {
                    *o = f.eval(x);
                }
            }
        }
    }

    pub fn component(&self, x: &[f64], j: usize) -> f64 {
        match &self.form {
            DriftForm::Zero => 0.0,
            DriftForm::Constant(b) => b[j],
            DriftForm::Variable(fs) => fs[j].eval(x),
        }
    }
}

/// One atom of the redistribution law.
#[derive(Clone, Debug)]
pub struct Atom {
    pub weight: f64,
    pub point: Vec<f64>,
}

/// Uniform density component supported on a box.
#[derive(Clone, Debug)]
pub struct UniformComponent {
    pub weight: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Probability law `nu` that relocated paths are drawn from. The law is the
/// same at every point; state dependence of the jump part lives entirely in
/// the intensity `kappa(x)`.
#[derive(Clone)]
pub struct RedistributionLaw {
    dim: usize,
    atoms: Vec<Atom>,
    density: Option<UniformComponent>,
    /// Cumulative atom weights, for inverse-CDF sampling.
    cum: Vec<f64>,
}

impl RedistributionLaw {
    pub fn new(dim: usize, atoms: Vec<Atom>, density: Option<UniformComponent>) -> Result<Self> {
        let mut total = 0.0;
        for a in &atoms {
            if a.point.len() != dim {
                return Err(Error::InvalidProblem(format!(
                    "atom {:?} has dim {}, expected {dim}",
                    a.point,
                    a.point.len()
                )));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "atom weight must be positive and finite, got {}",
                    a.weight
                )));
            }
            if a.point.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidProblem("atom point must be finite".into()));
            }
            total += a.weight;
        }
        if let Some(d) = &density {
            if d.lo.len() != dim || d.hi.len() != dim {
                return Err(Error::InvalidProblem("density box dim mismatch".into()));
            }
            for (l, h) in d.lo.iter().zip(&d.hi) {
                if !(l < h) || !l.is_finite() || !h.is_finite() {
                    return Err(Error::InvalidProblem(
                        "density box needs finite lo < hi".into(),
                    ));
                }
            }
            if !(d.weight > 0.0) || !d.weight.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "density weight must be positive, got {}",
                    d.weight
                )));
            }
            total += d.weight;
        }
        if atoms.is_empty() && density.is_none() {
            return Err(Error::InvalidProblem(
                "redistribution law needs atoms or a density".into(),
            ));
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProblem(format!(
                "redistribution weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.weight;
            cum.push(acc);
        }
        Ok(RedistributionLaw {
            dim,
            atoms,
            density,
            cum,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&UniformComponent> {
        self.density.as_ref()
    }

    /// Draw a relocation target into `out`. Uses one uniform for the branch
    /// choice plus `dim` uniforms when the density component is hit.
    pub fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        for (k, c) in self.cum.iter().enumerate() {
            if u < *c {
                out.copy_from_slice(&self.atoms[k].point);
                return;
            }
        }
        match &self.density {
            Some(d) => {
                for ((o, l), h) in out.iter_mut().zip(&d.lo).zip(&d.hi) {
                    let v: f64 = rng.random();
                    *o = l + v * (h - l);
                }
            }
            // Rounding can push u past the last cumulative weight; fall back
            // to the final atom.
            None => out.copy_from_slice(&self.atoms[self.atoms.len() - 1].point),
        }
    }
}

/// Jump part `J(x, dy) = kappa(x) nu(dy)` of the generator.
#[derive(Clone)]
pub struct JumpKernel {
    pub kappa: FieldRef,
    /// Declared sup of kappa over the closure of the domain, used for step
    /// budgets and jump-count diagnostics.
    pub kappa_bound: Option<f64>,
    pub nu: RedistributionLaw,
}

/// Exterior data `phi`, evaluated wherever a path lands outside the domain.
#[derive(Clone)]
pub struct BoundaryData {
    pub phi: FieldRef,
    /// Declared sup |phi| over reachable exterior points, for truncation
    /// budgets in resolvent runs.
    pub sup_bound: Option<f64>,
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.phi.eval(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: format!("boundary data produced {v}"),
                point: x.to_vec(),
            });
        }
        Ok(v)
    }
}

/// Complete problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    pub elliptic: EllipticField,
    pub drift: DriftField,
    pub jumps: Option<JumpKernel>,
    pub domain: Domain,
    pub boundary: BoundaryData,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Structural dimension agreement; field-level checks live in
    /// [`validate_problem`].
    pub fn check_dims(&self) -> Result<()> {
        let d = self.domain.dim();
        if self.elliptic.dim() != d {
            return Err(Error::InvalidProblem(format!(
                "diffusion matrix dim {} != domain dim {d}",
                self.elliptic.dim()
            )));
        }
        if self.drift.dim() != d {
            return Err(Error::InvalidProblem(format!(
                "drift dim {} != domain dim {d}",
                self.drift.dim()
            )));
        }
        if let Some(j) = &self.jumps {
            if j.nu.dim() != d {
                return Err(Error::InvalidProblem(format!(
                    "redistribution law dim {} != domain dim {d}",
                    j.nu.dim()
                )));
            }
        }
        Ok(())
    }

    /// Sup of kappa to use in budgets: declared bound if present, otherwise
    /// sampled maximum over the bounding box (scaled up for safety).
    pub fn kappa_sup_estimate(&self) -> f64 {
        match &self.jumps {
            None => 0.0,
            Some(j) => j.kappa_bound.unwrap_or_else(|| {
                let (lo, hi) = self.domain.bounding_box();
                let mut sup: f64 = 0.0;
                let n = 64usize.pow(self.dim().min(3) as u32).min(4096);
                let mut x = vec![0.0; self.dim()];
                for k in 0..n {
                    // low-discrepancy-ish lattice over the box, deterministic
                    let mut idx = k;
                    for (j_axis, xi) in x.iter_mut().enumerate() {
                        let cells = 64usize.min(n);
                        let c = idx % cells;
                        idx /= cells;
                        let t = (c as f64 + 0.5) / cells as f64;
                        *xi = lo[j_axis] + t * (hi[j_axis] - lo[j_axis]);
                    }
                    sup = sup.max(j.kappa.eval(&x));
                }
                1.25 * sup
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;

    #[test]
    fn constant_matrix_sqrt_recovers_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let e = EllipticField::constant(a.clone(), 0.5).unwrap();
        // apply sqrt twice to basis vectors and compare with A columns
        for j in 0..2 {
            let mut z = [0.0, 0.0];
            z[j] = 1.0;
            let mut once = [0.0, 0.0];
            e.sqrt_mul(&[0.0, 0.0], &z, &mut once).unwrap();
            let mut twice = [0.0, 0.0];
            e.sqrt_mul(&[0.0, 0.0], &once, &mut twice).unwrap();
            for i in 0..2 {
                assert!((twice[i] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_matrix_below_lambda_rejected() {
        // eigenvalues 0.5 and 2.5
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 1.0, 1.5]);
        assert!(EllipticField::constant(a, 1.0).is_err());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.2, 1.0]);
        assert!(EllipticField::constant(a, 0.1).is_err());
    }

    #[test]
    fn isotropy_detection() {
        assert_eq!(EllipticField::identity(3, 1.0).unwrap().isotropy(), Some(1.0));
        let e = EllipticField::constant_diag(vec![2.0, 2.0], 1.0).unwrap();
        assert_eq!(e.isotropy(), Some(2.0));
        let e = EllipticField::constant_diag(vec![2.0, 1.0], 1.0).unwrap();
        assert_eq!(e.isotropy(), None);
    }

    #[test]
    fn variable_diag_divergence_is_analytic() {
        // a_00(x) = 1 + x0^2  =>  (div A)_0 = 2 x0, correction = x0
        let e = EllipticField::variable_diag(
            vec![Polynomial::new(1, vec![(1.0, vec![0]), (1.0, vec![2])]).unwrap()],
            0.5,
        )
        .unwrap();
        let mut out = [0.0];
        e.half_divergence(&[3.0], &mut out);
        assert_eq!(out[0], 3.0);
    }

    #[test]
    fn redistribution_weights_must_sum_to_one() {
        let atom = |w, p: Vec<f64>| Atom { weight: w, point: p };
        assert!(RedistributionLaw::new(1, vec![atom(0.7, vec![2.0])], None).is_err());
        let ok = RedistributionLaw::new(
            1,
            vec![atom(0.7, vec![2.0]), atom(0.3, vec![-1.0])],
            None,
        );
        assert!(ok.is_ok());
        // within the 1e-12 tolerance
        let ok2 = RedistributionLaw::new(1, vec![atom(1.0 - 5e-13, vec![2.0])], None);
        assert!(ok2.is_ok());
    }

    #[test]
    fn kappa_sup_prefers_declared_bound() {
        let spec = ProblemSpec {
            elliptic: EllipticField::identity(1, 1.0).unwrap(),
            drift: DriftField::zero(1),
            jumps: Some(JumpKernel {
                kappa: Arc::new(Constant(1.0)),
                kappa_bound: Some(7.0),
                nu: RedistributionLaw::new(
                    1,
                    vec![Atom {
                        weight: 1.0,
                        point: vec![2.0],
                    }],
                    None,
                )
                .unwrap(),
            }),
            domain: Domain::interval(0.0, 1.0).unwrap(),
            boundary: BoundaryData {
                phi: Arc::new(Constant(0.0)),
                sup_bound: Some(0.0),
            },
        };
        assert_eq!(spec.kappa_sup_estimate(), 7.0);
    }
}
