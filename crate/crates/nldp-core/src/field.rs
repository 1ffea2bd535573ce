//! Coefficient fields over `R^d`.
//!
//! Everything the solver evaluates along a path (diffusion matrix entries,
//! drift components, jump intensity, boundary data, resolvent integrands) is a
//! [`ScalarField`]. The built-in kinds are closed under the partial
//! derivatives needed for divergence corrections, which keeps the simulator
//! free of numerical differentiation.

use std::fmt;
use std::sync::Arc;

/// Real-valued function of a point in `R^d`.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F> ScalarField for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Shared handle to a scalar field; problems hold these so they stay cheap to
/// clone when an operation substitutes one component (e.g. a probe ball for
/// the domain).
pub type FieldRef = Arc<dyn ScalarField>;

/// Sum of monomial terms `coeff * prod_j x_j^powers[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self, String> {
        for (_, powers) in &terms {
            if powers.len() != dim {
                return Err(format!(
                    "polynomial term has {} powers, dim is {dim}",
                    powers.len()
                ));
            }
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Polynomial {
            dim,
            terms: vec![(value, vec![0; dim])],
        }
    }

    /// The coordinate projection `x -> x[axis]`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut powers = vec![0; dim];
        powers[axis] = 1;
        Polynomial {
            dim,
            terms: vec![(1.0, powers)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Analytic partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> Polynomial {
        let mut terms = Vec::new();
        for (coeff, powers) in &self.terms {
            let p = powers[axis];
            if p > 0 {
                let mut dp = powers.clone();
                dp[axis] = p - 1;
                terms.push((coeff * p as f64, dp));
            }
        }
        if terms.is_empty() {
            terms.push((0.0, vec![0; self.dim]));
        }
        Polynomial {
            dim: self.dim,
            terms,
        }
    }

    /// Sum of |coeff| * prod bound^power over a symmetric box `|x_j| <= bound`.
    /// Crude but safe overestimate used for sup bounds in truncation horizons.
    pub fn abs_bound_on(&self, bound: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, powers)| {
                c.abs() * powers.iter().map(|&p| bound.powi(p as i32)).product::<f64>()
            })
            .sum()
    }
}

impl ScalarField for Polynomial {
    fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (coeff, powers) in &self.terms {
            let mut term = *coeff;
            for (xi, &p) in x.iter().zip(powers) {
                match p {
                    0 => {}
                    1 => term *= xi,
                    2 => term *= xi * xi,
                    _ => term *= xi.powi(p as i32),
                }
            }
            acc += term;
        }
        acc
    }
}

/// `c0 + sum_j coeffs[j] * |x_j|`. Lipschitz but not smooth at the axes;
/// used for state-dependent jump intensities.
#[derive(Clone, Debug)]
pub struct AffineAbs {
    pub c0: f64,
    pub coeffs: Vec<f64>,
}

impl ScalarField for AffineAbs {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = self.c0;
        for (xi, c) in x.iter().zip(&self.coeffs) {
            acc += c * xi.abs();
        }
        acc
    }
}

/// Indicator of the closed box `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct IndicatorBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ScalarField for IndicatorBox {
    fn eval(&self, x: &[f64]) -> f64 {
        for ((xi, lo), hi) in x.iter().zip(&self.lo).zip(&self.hi) {
            if *xi < *lo || *xi > *hi {
                return 0.0;
            }
        }
        1.0
    }
}

/// Constant scalar.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn eval(&self, _x: &[f64]) -> f64 {
        self.0
    }
}

impl fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_eval_and_partial() {
        // 3 x0^2 x1 - 2 x1 + 5
        let p = Polynomial::new(
            2,
            vec![(3.0, vec![2, 1]), (-2.0, vec![0, 1]), (5.0, vec![0, 0])],
        )
        .unwrap();
        assert_eq!(p.eval(&[2.0, 1.0]), 3.0 * 4.0 - 2.0 + 5.0);
        let dx0 = p.partial(0); // 6 x0 x1
        assert_eq!(dx0.eval(&[2.0, 1.0]), 12.0);
        let dx1 = p.partial(1); // 3 x0^2 - 2
        assert_eq!(dx1.eval(&[2.0, 1.0]), 10.0);
        let dx0x1 = dx0.partial(1); // 6 x0
        assert_eq!(dx0x1.eval(&[2.0, 7.0]), 12.0);
    }

    #[test]
    fn partial_of_constant_is_zero() {
        let p = Polynomial::constant(3, 4.5);
        let d = p.partial(1);
        assert_eq!(d.eval(&[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn affine_abs_even_symmetry() {
        let k = AffineAbs {
            c0: 1.0,
            coeffs: vec![1.0, 0.5],
        };
        assert_eq!(k.eval(&[-2.0, 4.0]), 1.0 + 2.0 + 2.0);
        assert_eq!(k.eval(&[2.0, -4.0]), k.eval(&[-2.0, 4.0]));
    }

    #[test]
    fn indicator_box_edges_inclusive() {
        let f = IndicatorBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        assert_eq!(f.eval(&[1.0]), 1.0);
        assert_eq!(f.eval(&[-1.0]), 1.0);
        assert_eq!(f.eval(&[1.0 + 1e-12]), 0.0);
    }
}
