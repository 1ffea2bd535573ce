//! Direct and iterative solvers for the assembled grid systems.
//!
//! Pure 1D stencils eliminate tridiagonally; anything small enough goes
//! through a dense factorization; large 2D systems fall back to conjugate
//! gradients on the normal equations, which tolerates the nonsymmetry
//! introduced by upwinding. All paths end behind the same residual gate.

use nalgebra::{DMatrix, DVector};

use super::{GridSystem, OracleSolution, DENSE_LIMIT, RESIDUAL_REL};
use crate::error::{Error, Result};

impl GridSystem {
    /// Solve and package the result; consumes the system.
    pub fn into_solution(self) -> Result<OracleSolution> {
        let n = self.rows.len();
        let rhs_norm = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let x = if rhs_norm == 0.0 {
            // trivial kernel avoidance: the operator is nonsingular here,
            // so zero data forces the zero solution
            vec![0.0; n]
        } else if self.tridiagonal {
            self.solve_tridiagonal()?
        } else if n <= DENSE_LIMIT {
            self.solve_dense()?
        } else {
            self.solve_cgnr()?
        };

        // one residual gate for every backend
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = -self.rhs[i];
            for (col, v) in row {
                acc += v * x[*col];
            }
            worst = worst.max(acc.abs());
        }
        if worst > RESIDUAL_REL * rhs_norm.max(1e-300) && rhs_norm > 0.0 {
            return Err(Error::SingularSystem(format!(
                "residual {worst:.3e} exceeds {RESIDUAL_REL:.1e} * {rhs_norm:.3e}; \
                 sign-pattern violations in rows {:?}",
                self.diagnostics.bad_rows.iter().take(8).collect::<Vec<_>>()
            )));
        }

        let mut values = self.lattice_data;
        for (id, &flat) in self.grid.interior.iter().enumerate() {
            values[flat] = x[id];
        }
        let mut aux = std::collections::BTreeMap::new();
        aux.insert("residual".into(), worst);
        aux.insert("n_interior".into(), n as f64);
        aux.insert("data_lo".into(), self.data_lo);
        aux.insert("data_hi".into(), self.data_hi);
        aux.insert(
            "h_max".into(),
            self.grid.h.iter().cloned().fold(0.0, f64::max),
        );
        aux.insert("snapped_atoms".into(), self.diagnostics.snapped_atoms as f64);
        Ok(OracleSolution {
            grid: self.grid,
            values,
            residual: worst,
            diagnostics: self.diagnostics,
            aux,
        })
    }

    fn solve_tridiagonal(&self) -> Result<Vec<f64>> {
        let n = self.rows.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for (i, row) in self.rows.iter().enumerate() {
            for (col, v) in row {
                if *col + 1 == i {
                    sub[i] = *v;
                } else if *col == i {
                    diag[i] = *v;
                } else {
                    sup[i] = *v;
                }
            }
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = diag[0];
        if denom == 0.0 {
            return Err(Error::SingularSystem("zero pivot in row 0".into()));
        }
        c[0] = sup[0] / denom;
        d[0] = self.rhs[0] / denom;
        for i in 1..n {
            denom = diag[i] - sub[i] * c[i - 1];
            if denom == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot in row {i}")));
            }
            c[i] = sup[i] / denom;
            d[i] = (self.rhs[i] - sub[i] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        Ok(x)
    }

    fn solve_dense(&self) -> Result<Vec<f64>> {
        let n = self.rows.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (col, v) in row {
                a[(i, *col)] = *v;
            }
        }
        let b = DVector::from_column_slice(&self.rhs);
        let lu = a.lu();
        match lu.solve(&b) {
            Some(x) => Ok(x.iter().cloned().collect()),
            None => Err(Error::SingularSystem(
                "dense factorization found no solution".into(),
            )),
        }
    }

    /// Conjugate gradients on `A^T A x = A^T b` with row equilibration.
    fn solve_cgnr(&self) -> Result<Vec<f64>> {
        let n = self.rows.len();
        let mut scale = vec![1.0; n];
        for (i, row) in self.rows.iter().enumerate() {
            for (col, v) in row {
                if *col == i && *v != 0.0 {
                    scale[i] = 1.0 / v;
                }
            }
        }
        // transpose pattern of the scaled matrix for A^T products
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for (col, v) in row {
                cols[*col].push((i, v * scale[i]));
            }
        }
        let b: Vec<f64> = self.rhs.iter().zip(&scale).map(|(v, s)| v * s).collect();

        let apply = |x: &[f64], out: &mut [f64]| {
            for (i, row) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (col, v) in row {
                    acc += v * scale[i] * x[*col];
                }
                out[i] = acc;
            }
        };
        let apply_t = |x: &[f64], out: &mut [f64]| {
            for (j, col) in cols.iter().enumerate() {
                let mut acc = 0.0;
                for (row, v) in col {
                    acc += v * x[*row];
                }
                out[j] = acc;
            }
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

        let mut x = vec![0.0; n];
        let mut r = b.clone();
        let mut z = vec![0.0; n];
        apply_t(&r, &mut z);
        let mut p = z.clone();
        let mut w = vec![0.0; n];
        let mut zz = dot(&z, &z);
        let b_norm2 = dot(&b, &b).max(1e-300);
        let target = 1e-26 * b_norm2;

        let max_iter = 40_000usize;
        for _ in 0..max_iter {
            if dot(&r, &r) <= target {
                break;
            }
            apply(&p, &mut w);
            let ww = dot(&w, &w);
            if ww == 0.0 {
                break;
            }
            let alpha = zz / ww;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * w[i];
            }
            apply_t(&r, &mut z);
            let zz_new = dot(&z, &z);
            let beta = zz_new / zz;
            zz = zz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Ok(x)
    }
}
