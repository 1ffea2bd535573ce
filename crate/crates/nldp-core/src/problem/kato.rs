//! Local integrability profiles for scalar fields.
//!
//! For a probe point `x` and radius `r` the profile value is
//!
//! * d = 1: `int_{B(x,r)} |f(y)| dy`
//! * d = 2: `int_{B(x,r)} |f(y)| ln(1/|x-y|) dy` (requires r <= 1)
//! * d >= 3: `int_{B(x,r)} |f(y)| |x-y|^{2-d} dy`
//!
//! Fields of the right class have profiles that vanish uniformly as `r -> 0`;
//! the profile table makes that decay observable. Quadrature is a fixed
//! product rule (graded radial Gauss-Legendre times a sphere rule), so
//! results are deterministic.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::quad::{gauss_legendre, graded_radial};

const RADIAL_PIECES: usize = 40;
const RADIAL_ORDER: usize = 16;

/// Profile table: `values[i][j]` is the integral at `radii[i]`, `probes[j]`.
#[derive(Clone, Debug)]
pub struct KatoProfile {
    pub radii: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl KatoProfile {
    /// Largest value across probes at radius index `i`.
    pub fn sup_at(&self, i: usize) -> f64 {
        self.values[i].iter().cloned().fold(0.0, f64::max)
    }
}

/// Evaluate the profile of `|field|` at each probe and radius.
pub fn kato_profile(
    field: &dyn ScalarField,
    dim: usize,
    probes: &[Vec<f64>],
    radii: &[f64],
) -> Result<KatoProfile> {
    if dim == 0 || probes.is_empty() || radii.is_empty() {
        return Err(Error::Precondition(
            "kato_profile needs dim >= 1, probes and radii".into(),
        ));
    }
    for p in probes {
        if p.len() != dim {
            return Err(Error::Precondition(format!(
                "probe {:?} has dim {}, expected {dim}",
                p,
                p.len()
            )));
        }
    }
    for &r in radii {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Precondition(format!("radius must be positive, got {r}")));
        }
        if dim == 2 && r > 1.0 {
            return Err(Error::Precondition(format!(
                "the d = 2 logarithmic weight needs r <= 1, got {r}"
            )));
        }
    }

    let sphere = sphere_rule(dim);
    let mut values = Vec::with_capacity(radii.len());
    let mut y = vec![0.0; dim];
    for &r in radii {
        let radial = graded_radial(r, RADIAL_PIECES, RADIAL_ORDER);
        let mut row = Vec::with_capacity(probes.len());
        for probe in probes {
            let mut acc = 0.0;
            for &(s, ws) in &radial {
                let shell = shell_factor(dim, s);
                if shell == 0.0 {
                    continue;
                }
                let mut sphere_sum = 0.0;
                for (omega, wo) in &sphere {
                    for ((yi, pi), oi) in y.iter_mut().zip(probe).zip(omega) {
                        *yi = pi + s * oi;
                    }
                    let v = field.eval(&y);
                    if !v.is_finite() {
                        return Err(Error::Evaluation {
                            what: format!("kato integrand produced {v}"),
                            point: y.clone(),
                        });
                    }
                    sphere_sum += v.abs() * wo;
                }
                acc += ws * shell * sphere_sum;
            }
            row.push(acc);
        }
        values.push(row);
    }
    Ok(KatoProfile {
        radii: radii.to_vec(),
        probes: probes.to_vec(),
        values,
    })
}

/// `s^{d-1} w(s)` with the dimension's weight folded in.
fn shell_factor(dim: usize, s: f64) -> f64 {
    match dim {
        1 => 1.0,
        2 => s * (1.0 / s).ln(),
        _ => s, // s^{d-1} * s^{2-d}
    }
}

/// Unit-sphere rule as (direction, weight) pairs whose weights sum to the
/// sphere surface measure.
fn sphere_rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    match dim {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = 64;
            (0..n)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                    (vec![th.cos(), th.sin()], 2.0 * std::f64::consts::PI / n as f64)
                })
                .collect()
        }
        3 => {
            let nu = 16;
            let nphi = 32;
            let glu = gauss_legendre(nu);
            let mut out = Vec::with_capacity(nu * nphi);
            for &(u, wu) in &glu {
                let rho = (1.0 - u * u).sqrt();
                for m in 0..nphi {
                    let phi = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / nphi as f64;
                    out.push((
                        vec![rho * phi.cos(), rho * phi.sin(), u],
                        wu * 2.0 * std::f64::consts::PI / nphi as f64,
                    ));
                }
            }
            out
        }
        d => {
            // Product rule: Gauss in each polar angle cosine would do, but
            // dimensions above 3 are outside the supported problem class.
            panic!("sphere rule not provided for dim {d}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;

    #[test]
    fn d3_constant_field_matches_closed_form() {
        // int_{B(x,r)} c |x-y|^{-1} dy = 2 pi c r^2
        let f = Constant(2.5);
        let probes = vec![vec![0.1, -0.2, 0.3]];
        let prof = kato_profile(&f, 3, &probes, &[0.5]).unwrap();
        let expect = 2.0 * std::f64::consts::PI * 2.5 * 0.25;
        assert!(
            (prof.values[0][0] - expect).abs() < 1e-10 * expect,
            "got {} want {expect}",
            prof.values[0][0]
        );
    }

    #[test]
    fn d3_inverse_norm_matches_closed_form() {
        // f(y) = 1/|y| at probe 0: integrand is constant, value 4 pi r
        let f = |y: &[f64]| 1.0 / y.iter().map(|c| c * c).sum::<f64>().sqrt();
        let prof = kato_profile(&f, 3, &[vec![0.0; 3]], &[0.8]).unwrap();
        let expect = 4.0 * std::f64::consts::PI * 0.8;
        assert!(
            (prof.values[0][0] - expect).abs() < 1e-9 * expect,
            "got {} want {expect}",
            prof.values[0][0]
        );
    }

    #[test]
    fn d2_constant_field_matches_closed_form() {
        // pi r^2 (ln(1/r) + 1/2), r = 1/2
        let prof = kato_profile(&Constant(1.0), 2, &[vec![3.0, 4.0]], &[0.5]).unwrap();
        let r: f64 = 0.5;
        let expect = std::f64::consts::PI * r * r * ((1.0 / r).ln() + 0.5);
        assert!(
            (prof.values[0][0] - expect).abs() < 1e-10 * expect,
            "got {} want {expect}",
            prof.values[0][0]
        );
    }

    #[test]
    fn d1_constant_field_matches_closed_form() {
        let prof = kato_profile(&Constant(3.0), 1, &[vec![10.0]], &[0.25]).unwrap();
        assert!((prof.values[0][0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn profile_decays_with_radius() {
        let f = |y: &[f64]| 1.0 + y[0].abs();
        let radii = [0.4, 0.2, 0.1, 0.05];
        let prof = kato_profile(&f, 3, &[vec![0.0; 3], vec![0.5, 0.0, 0.0]], &radii).unwrap();
        for i in 1..radii.len() {
            assert!(prof.sup_at(i) < prof.sup_at(i - 1));
        }
        assert!(prof.sup_at(radii.len() - 1) < 0.1 * prof.sup_at(0));
    }

    #[test]
    fn d2_large_radius_rejected() {
        let err = kato_profile(&Constant(1.0), 2, &[vec![0.0, 0.0]], &[1.5]);
        assert!(err.is_err());
    }
}
