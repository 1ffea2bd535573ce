//! Deterministic finite-difference cross-check in one and two dimensions.
//!
//! The sampler and this grid solver approximate the same operator by
//! unrelated mechanisms, so agreement between them is evidence against
//! implementation error in either. The grid discretization uses
//! harmonic-mean fluxes on half nodes for the divergence part, upwinded
//! drift where the mesh Peclet number exceeds 2, and an explicit
//! row for the nonlocal term with redistribution atoms snapped to lattice
//! nodes (interior) or carried as exact off-lattice data points (exterior).
//!
//! Scope: `dim <= 2`; diffusion matrix diagonal (possibly variable) or
//! constant full; redistribution law atom-only. Everything else belongs to
//! the sampler, which has no such restrictions.

mod compare;
mod solve;

pub use compare::{compare_with_oracle, ComparisonRow};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{Constant, ScalarField};
use crate::problem::{Domain, ProblemSpec};

/// Node-count ceiling for the dense direct solver; larger systems go
/// through the iterative normal-equations solver.
const DENSE_LIMIT: usize = 2500;

/// Relative residual each solve must reach.
const RESIDUAL_REL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeClass {
    /// Unknown, with a dense index into the linear system.
    Interior(usize),
    /// Carries prescribed data.
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClassifyMode {
    /// Interior means membership in the open problem domain.
    Domain,
    /// Interior means strictly inside the lattice box (far-field truncation).
    BoxInterior,
}

/// Axis-aligned lattice over a box, with per-node classification.
#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Cells per axis; nodes per axis is one more.
    n: Vec<usize>,
    h: Vec<f64>,
    class: Vec<NodeClass>,
    /// Flat node index per interior unknown, in lattice order.
    interior: Vec<usize>,
    mode: ClassifyMode,
}

impl Grid {
    /// Lattice over the domain's bounding box; nodes inside the open domain
    /// become unknowns, all others carry exterior data.
    pub fn from_domain(domain: &Domain, h_target: f64) -> Result<Grid> {
        let (lo, hi) = domain.bounding_box();
        let mut grid = Grid::lattice(lo, hi, h_target, ClassifyMode::Domain)?;
        grid.classify(|x| domain.contains(x));
        Ok(grid)
    }

    /// Lattice over an explicit box; every node strictly inside the box is
    /// an unknown and the box faces carry far-field data.
    pub fn from_box(lo: Vec<f64>, hi: Vec<f64>, h_target: f64) -> Result<Grid> {
        let dim = lo.len();
        let mut grid = Grid::lattice(lo, hi, h_target, ClassifyMode::BoxInterior)?;
        let n = grid.n.clone();
        let mut idx = vec![0usize; dim];
        let mut flat = 0;
        let total = grid.class.len();
        while flat < total {
            let inside = idx.iter().zip(&n).all(|(i, n)| *i > 0 && *i < *n);
            if inside {
                grid.class[flat] = NodeClass::Interior(grid.interior.len());
                grid.interior.push(flat);
            }
            flat += 1;
            grid.bump(&mut idx);
        }
        Ok(grid)
    }

    fn lattice(lo: Vec<f64>, hi: Vec<f64>, h_target: f64, mode: ClassifyMode) -> Result<Grid> {
        let dim = lo.len();
        if dim == 0 || dim > 2 {
            return Err(Error::Unsupported(format!(
                "grid oracle covers dim 1 and 2, got {dim}"
            )));
        }
        if hi.len() != dim {
            return Err(Error::Precondition("grid box lo/hi length mismatch".into()));
        }
        if !(h_target > 0.0) || !h_target.is_finite() {
            return Err(Error::Precondition(format!(
                "mesh width must be positive, got {h_target}"
            )));
        }
        let mut n = Vec::with_capacity(dim);
        let mut h = Vec::with_capacity(dim);
        for (l, u) in lo.iter().zip(&hi) {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::Precondition(format!(
                    "grid box needs finite lo < hi, got [{l}, {u}]"
                )));
            }
            let cells = (((u - l) / h_target).round() as usize).max(2);
            n.push(cells);
            h.push((u - l) / cells as f64);
        }
        let total: usize = n.iter().map(|c| c + 1).product();
        if total > 40_000_000 {
            return Err(Error::Precondition(format!(
                "grid of {total} nodes is beyond the oracle's size envelope"
            )));
        }
        Ok(Grid {
            dim,
            lo,
            hi,
            n,
            h,
            class: vec![NodeClass::Exterior; total],
            interior: Vec::new(),
            mode,
        })
    }

    fn classify(&mut self, is_interior: impl Fn(&[f64]) -> bool) {
        let mut x = vec![0.0; self.dim];
        for flat in 0..self.class.len() {
            self.position(flat, &mut x);
            if is_interior(&x) {
                self.class[flat] = NodeClass::Interior(self.interior.len());
                self.interior.push(flat);
            }
        }
    }

    /// Advance a multi-index one node in lattice (row-major) order.
    fn bump(&self, idx: &mut [usize]) {
        for (i, n) in idx.iter_mut().zip(&self.n) {
            if *i < *n {
                *i += 1;
                return;
            }
            *i = 0;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.class.len()
    }

    pub fn mesh_width(&self) -> &[f64] {
        &self.h
    }

    fn nodes_per_axis(&self, axis: usize) -> usize {
        self.n[axis] + 1
    }

    fn flat(&self, idx: &[usize]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] + self.nodes_per_axis(0) * idx[1],
        }
    }

    fn unflatten(&self, flat: usize, idx: &mut [usize]) {
        match self.dim {
            1 => idx[0] = flat,
            _ => {
                let m0 = self.nodes_per_axis(0);
                idx[0] = flat % m0;
                idx[1] = flat / m0;
            }
        }
    }

    /// Node coordinates; the last node per axis lands on `hi` exactly.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 2];
        self.unflatten(flat, &mut idx[..self.dim]);
        for j in 0..self.dim {
            out[j] = if idx[j] == self.n[j] {
                self.hi[j]
            } else {
                self.lo[j] + idx[j] as f64 * self.h[j]
            };
        }
    }
}

/// Where an atom's value comes from during assembly.
#[derive(Clone, Copy, Debug)]
enum AtomSlot {
    /// Snapped to an interior node: couples into the matrix.
    Column(usize),
    /// Known data value (exterior point, or snapped to a data node).
    Fixed(f64),
}

/// Per-row structural health of the assembled operator.
#[derive(Clone, Debug, Default)]
pub struct RowDiagnostics {
    /// Positive diagonal and non-positive off-diagonals in every row.
    pub m_matrix_ok: bool,
    /// Rows violating the sign pattern (cross-derivative stencils do).
    pub bad_rows: Vec<usize>,
    /// Smallest row sum; weak diagonal dominance means this is >= -tol.
    pub min_row_sum: f64,
    /// Nodes where drift switched to one-sided differences.
    pub upwind_nodes: usize,
    /// Atoms moved onto a lattice node.
    pub snapped_atoms: usize,
    pub max_snap_distance: f64,
}

/// Assembled linear system over the interior unknowns.
pub struct GridSystem {
    grid: Grid,
    /// Sorted, merged sparse rows of `alpha - L_h`.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Data values at every lattice node (meaningful on exterior nodes).
    lattice_data: Vec<f64>,
    /// Range of the prescribed data actually referenced by the system.
    data_lo: f64,
    data_hi: f64,
    tridiagonal: bool,
    pub diagnostics: RowDiagnostics,
}

/// Discretize `alpha*u - L u = f` on the grid with prescribed values
/// `exterior` outside the unknown set. `f = None` means zero right-hand
/// side: the plain exterior-value problem `L u = 0`.
pub fn assemble(
    spec: &ProblemSpec,
    grid: Grid,
    alpha: f64,
    f: Option<&dyn ScalarField>,
    exterior: &dyn ScalarField,
) -> Result<GridSystem> {
    spec.check_dims()?;
    if grid.dim != spec.dim() {
        return Err(Error::Precondition(format!(
            "grid dim {} does not match problem dim {}",
            grid.dim,
            spec.dim()
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "discount rate must be finite and >= 0, got {alpha}"
        )));
    }
    if !spec.elliptic.is_diagonal() && !spec.elliptic.constant_coefficients() {
        return Err(Error::Unsupported(
            "grid oracle needs A diagonal or constant".into(),
        ));
    }
    if let Some(j) = &spec.jumps {
        if j.nu.density().is_some() {
            return Err(Error::Unsupported(
                "grid oracle covers atom-only redistribution laws".into(),
            ));
        }
    }

    let dim = grid.dim;
    let n_int = grid.n_interior();
    if n_int == 0 {
        return Err(Error::Precondition(
            "grid has no interior nodes; mesh is too coarse for the domain".into(),
        ));
    }

    // data values for every node; only exterior entries are ever read
    let mut lattice_data = vec![0.0; grid.n_nodes()];
    let mut x = vec![0.0; dim];
    let mut data_lo = f64::INFINITY;
    let mut data_hi = f64::NEG_INFINITY;
    for (flat, slot) in lattice_data.iter_mut().enumerate() {
        if let NodeClass::Exterior = grid.class[flat] {
            grid.position(flat, &mut x);
            let v = exterior.eval(&x);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    what: "exterior data is not finite".into(),
                    point: x.clone(),
                });
            }
            *slot = v;
            data_lo = data_lo.min(v);
            data_hi = data_hi.max(v);
        }
    }

    // atoms are position-independent, so their disposition is computed once
    let mut diag_extra = RowDiagnostics::default();
    let atom_slots: Vec<(f64, AtomSlot)> = match &spec.jumps {
        None => Vec::new(),
        Some(jumps) => jumps
            .nu
            .atoms()
            .iter()
            .map(|atom| -> Result<(f64, AtomSlot)> {
                let z = &atom.point;
                let off_grid = match grid.mode {
                    ClassifyMode::Domain => !spec.domain.contains(z),
                    ClassifyMode::BoxInterior => z
                        .iter()
                        .zip(grid.lo.iter().zip(&grid.hi))
                        .any(|(zj, (l, u))| zj < l || zj > u),
                };
                if off_grid {
                    let v = exterior.eval(z);
                    if !v.is_finite() {
                        return Err(Error::Evaluation {
                            what: "exterior data at redistribution atom is not finite".into(),
                            point: z.clone(),
                        });
                    }
                    data_lo = data_lo.min(v);
                    data_hi = data_hi.max(v);
                    return Ok((atom.weight, AtomSlot::Fixed(v)));
                }
                // snap per axis to the nearest lattice node (<= h/2 each way)
                let mut idx = vec![0usize; dim];
                let mut dist: f64 = 0.0;
                for j in 0..dim {
                    let t = ((z[j] - grid.lo[j]) / grid.h[j]).round();
                    let i = (t.max(0.0) as usize).min(grid.n[j]);
                    idx[j] = i;
                    let node = grid.lo[j] + i as f64 * grid.h[j];
                    dist = dist.max((z[j] - node).abs());
                }
                if dist > 1e-12 {
                    diag_extra.snapped_atoms += 1;
                    diag_extra.max_snap_distance = diag_extra.max_snap_distance.max(dist);
                }
                let flat = grid.flat(&idx);
                match grid.class[flat] {
                    NodeClass::Interior(id) => Ok((atom.weight, AtomSlot::Column(id))),
                    NodeClass::Exterior => {
                        let v = lattice_data[flat];
                        data_lo = data_lo.min(v);
                        data_hi = data_hi.max(v);
                        Ok((atom.weight, AtomSlot::Fixed(v)))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let cross = if dim == 2 && !spec.elliptic.is_diagonal() {
        spec.elliptic.entry(&[0.0, 0.0], 0, 1)
    } else {
        0.0
    };

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_int);
    let mut rhs = vec![0.0; n_int];
    let mut upwind_nodes = 0usize;
    let mut idx = vec![0usize; dim];
    let mut nb = vec![0usize; dim];
    let mut xn = vec![0.0; dim];

    for (row_id, &flat) in grid.interior.iter().enumerate() {
        grid.unflatten(flat, &mut idx);
        grid.position(flat, &mut x);
        let kappa_here = match &spec.jumps {
            Some(j) => {
                let k = j.kappa.eval(&x);
                if !(k >= 0.0) || !k.is_finite() {
                    return Err(Error::Evaluation {
                        what: format!("intensity must be finite and >= 0, got {k}"),
                        point: x.clone(),
                    });
                }
                k
            }
            None => 0.0,
        };

        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * dim + atom_slots.len() + 5);
        let mut diag = alpha + kappa_here;
        let mut b_i = match f {
            Some(field) => {
                let v = field.eval(&x);
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        what: "right-hand side is not finite".into(),
                        point: x.clone(),
                    });
                }
                v
            }
            None => 0.0,
        };

        // routes a stencil coefficient to the matrix or the right-hand side
        let route = |entries: &mut Vec<(usize, f64)>, b_i: &mut f64, nb_flat: usize, c: f64| {
            match grid.class[nb_flat] {
                NodeClass::Interior(id) => entries.push((id, c)),
                NodeClass::Exterior => *b_i -= c * lattice_data[nb_flat],
            }
        };

        let mut upwound = false;
        for j in 0..dim {
            let h = grid.h[j];
            nb.copy_from_slice(&idx);
            // interior nodes cannot sit on the lattice faces, so both
            // neighbors exist
            debug_assert!(idx[j] > 0 && idx[j] < grid.n[j]);
            nb[j] = idx[j] - 1;
            let prev = grid.flat(&nb);
            nb[j] = idx[j] + 1;
            let next = grid.flat(&nb);

            let a_c = spec.elliptic.entry(&x, j, j);
            grid.position(prev, &mut xn);
            let a_p = spec.elliptic.entry(&xn, j, j);
            grid.position(next, &mut xn);
            let a_n = spec.elliptic.entry(&xn, j, j);
            if !(a_c > 0.0 && a_p > 0.0 && a_n > 0.0) {
                return Err(Error::Evaluation {
                    what: "diffusion entry must be positive on the grid".into(),
                    point: x.clone(),
                });
            }
            let hm_minus = 2.0 * a_c * a_p / (a_c + a_p);
            let hm_plus = 2.0 * a_c * a_n / (a_c + a_n);
            let cm = hm_minus / (2.0 * h * h);
            let cp = hm_plus / (2.0 * h * h);

            let b_drift = spec.drift.component(&x, j);
            if !b_drift.is_finite() {
                return Err(Error::Evaluation {
                    what: "drift is not finite".into(),
                    point: x.clone(),
                });
            }
            // generator-form Peclet: drift vs half the flux coefficient
            let peclet = 2.0 * b_drift.abs() * h / hm_minus.min(hm_plus);
            if peclet > 2.0 {
                upwound = true;
                let bp = b_drift.max(0.0) / h;
                let bm = (-b_drift).max(0.0) / h;
                diag += cp + cm + bp + bm;
                route(&mut entries, &mut b_i, next, -(cp + bp));
                route(&mut entries, &mut b_i, prev, -(cm + bm));
            } else {
                diag += cp + cm;
                route(&mut entries, &mut b_i, next, -(cp + b_drift / (2.0 * h)));
                route(&mut entries, &mut b_i, prev, -(cm - b_drift / (2.0 * h)));
            }
        }
        if upwound {
            upwind_nodes += 1;
        }

        if cross != 0.0 {
            let co = cross / (4.0 * grid.h[0] * grid.h[1]);
            for (di, dj, sign) in [
                (1isize, 1isize, -1.0),
                (-1, -1, -1.0),
                (1, -1, 1.0),
                (-1, 1, 1.0),
            ] {
                nb[0] = (idx[0] as isize + di) as usize;
                nb[1] = (idx[1] as isize + dj) as usize;
                let corner = grid.flat(&nb);
                route(&mut entries, &mut b_i, corner, sign * co);
            }
        }

        for (w, slot) in &atom_slots {
            let c = kappa_here * w;
            if c == 0.0 {
                continue;
            }
            match slot {
                AtomSlot::Column(id) => entries.push((*id, -c)),
                AtomSlot::Fixed(v) => b_i += c * v,
            }
        }

        entries.push((row_id, diag));
        entries.sort_unstable_by_key(|(col, _)| *col);
        entries.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        rows.push(entries);
        rhs[row_id] = b_i;
    }

    // row-wise structural audit
    let mut bad_rows = Vec::new();
    let mut min_row_sum = f64::INFINITY;
    let mut scale: f64 = 0.0;
    for row in &rows {
        for (_, v) in row {
            scale = scale.max(v.abs());
        }
    }
    let tol = 1e-12 * scale;
    for (i, row) in rows.iter().enumerate() {
        let mut sum = 0.0;
        let mut ok = true;
        for (col, v) in row {
            sum += v;
            if *col == i {
                ok &= *v > 0.0;
            } else {
                ok &= *v <= tol;
            }
        }
        min_row_sum = min_row_sum.min(sum);
        if !ok {
            bad_rows.push(i);
        }
    }

    let tridiagonal = dim == 1
        && rows.iter().enumerate().all(|(i, row)| {
            row.iter()
                .all(|(col, _)| col + 1 >= i && *col <= i + 1)
        });

    Ok(GridSystem {
        grid,
        rows,
        rhs,
        lattice_data,
        data_lo,
        data_hi,
        tridiagonal,
        diagnostics: RowDiagnostics {
            m_matrix_ok: bad_rows.is_empty(),
            bad_rows,
            min_row_sum,
            upwind_nodes,
            snapped_atoms: diag_extra.snapped_atoms,
            max_snap_distance: diag_extra.max_snap_distance,
        },
    })
}

/// Grid solution with data values filled in on exterior nodes.
pub struct OracleSolution {
    grid: Grid,
    /// Value at every lattice node: solved where interior, prescribed where
    /// exterior.
    values: Vec<f64>,
    pub residual: f64,
    pub diagnostics: RowDiagnostics,
    pub aux: BTreeMap<String, f64>,
}

impl OracleSolution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    /// Solution value at an interior unknown, in lattice order.
    pub fn interior_value(&self, interior_id: usize) -> f64 {
        self.values[self.grid.interior[interior_id]]
    }

    /// Multilinear interpolation anywhere inside the grid box.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        if x.len() != g.dim {
            return Err(Error::Precondition(
                "interpolation point has wrong dimension".into(),
            ));
        }
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for j in 0..g.dim {
            let t = (x[j] - g.lo[j]) / g.h[j];
            if t < -1e-9 || t > g.n[j] as f64 + 1e-9 {
                return Err(Error::Evaluation {
                    what: "interpolation point outside the grid box".into(),
                    point: x.to_vec(),
                });
            }
            let i = (t.floor().max(0.0) as usize).min(g.n[j] - 1);
            cell[j] = i;
            frac[j] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut idx = [0usize; 2];
        match g.dim {
            1 => {
                idx[0] = cell[0];
                let v0 = self.values[g.flat(&idx[..1])];
                idx[0] = cell[0] + 1;
                let v1 = self.values[g.flat(&idx[..1])];
                Ok(v0 + frac[0] * (v1 - v0))
            }
            _ => {
                let mut corner = [0.0f64; 4];
                for (k, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
                    idx[0] = cell[0] + di;
                    idx[1] = cell[1] + dj;
                    corner[k] = self.values[g.flat(&idx)];
                }
                let lo = corner[0] + frac[0] * (corner[1] - corner[0]);
                let hi = corner[2] + frac[0] * (corner[3] - corner[2]);
                Ok(lo + frac[1] * (hi - lo))
            }
        }
    }
}

/// Solve `L u = 0` inside the domain with prescribed exterior values, on a
/// lattice over the domain's bounding box with target mesh width `h`.
pub fn dirichlet_oracle(spec: &ProblemSpec, h: f64) -> Result<OracleSolution> {
    let grid = Grid::from_domain(&spec.domain, h)?;
    let system = assemble(spec, grid, 0.0, None, spec.boundary.phi.as_ref())?;
    let sol = system.into_solution()?;
    // discrete maximum principle: valid whenever the sign pattern held
    if sol.diagnostics.m_matrix_ok {
        let lo = sol.aux["data_lo"];
        let hi = sol.aux["data_hi"];
        let slack = 1e-10 * (hi - lo).abs().max(1.0);
        for id in 0..sol.grid.n_interior() {
            let v = sol.interior_value(id);
            assert!(
                v >= lo - slack && v <= hi + slack,
                "discrete maximum principle violated: {v} outside [{lo}, {hi}]"
            );
        }
    }
    Ok(sol)
}

/// Solve `(alpha - L) g = f` on a truncated box with zero far-field data.
/// `f_support` (lo, hi per axis) tightens the reported truncation bound;
/// `sup_f` scales it.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_oracle(
    spec: &ProblemSpec,
    f: &dyn ScalarField,
    alpha: f64,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    h: f64,
    f_support: Option<(&[f64], &[f64])>,
    sup_f: f64,
) -> Result<OracleSolution> {
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "resolvent needs alpha > 0, got {alpha}"
        )));
    }
    let grid = Grid::from_box(box_lo, box_hi, h)?;
    let zero = Constant(0.0);
    let system = assemble(spec, grid, alpha, Some(f), &zero)?;
    let mut sol = system.into_solution()?;

    // crude exponential far-field estimate, reported not enforced: the
    // homogeneous solutions of alpha - (a/2) d^2 decay at rate
    // sqrt(2 alpha / a)
    let g = &sol.grid;
    let mut a_max: f64 = 0.0;
    let mut x = vec![0.0; g.dim];
    for flat in 0..g.n_nodes() {
        g.position(flat, &mut x);
        for j in 0..g.dim {
            a_max = a_max.max(spec.elliptic.entry(&x, j, j));
        }
    }
    let margin = match f_support {
        None => 0.0,
        Some((slo, shi)) => {
            let mut m = f64::INFINITY;
            for j in 0..g.dim {
                m = m.min((slo[j] - g.lo[j]).max(0.0));
                m = m.min((g.hi[j] - shi[j]).max(0.0));
            }
            m
        }
    };
    let far_field = sup_f / alpha * (-(2.0 * alpha / a_max).sqrt() * margin).exp();
    sol.aux.insert("far_field_bound".into(), far_field);
    Ok(sol)
}
