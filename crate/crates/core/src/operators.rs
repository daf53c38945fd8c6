//! Sparse symmetric operators on grid fields and the linear-algebra kernels
//! built on them: matrix-free preconditioned conjugate gradients, inverse
//! power iteration for the smallest eigenvalue, and the graph norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{dot, GridDomain, GridField};

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns are sorted and
    /// duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                if c >= nrows {
                    return Err(Error::InvalidArgument(format!("column {c} out of range for {nrows} rows")));
                }
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { nrows, row_ptr, col_idx, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// Bit-for-bit symmetry of the stored pattern and values.
    pub fn is_symmetric(&self) -> bool {
        (0..self.nrows)
            .all(|i| self.row(i).all(|(j, v)| self.row(j).any(|(c, w)| c == i && w.to_bits() == v.to_bits())))
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.nrows]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// A symmetric linear map on flat node vectors, usable by [`solve_spd`].
pub trait LinearOperator: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Diagonal used for Jacobi preconditioning.
    fn diagonal(&self) -> Vec<f64> {
        vec![1.0; self.len()]
    }
}

/// Wraps a closure `x -> y` as a [`LinearOperator`].
pub struct FnOperator<F> {
    len: usize,
    apply: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(len: usize, apply: F) -> Self {
        FnOperator { len, apply }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn len(&self) -> usize {
        self.len
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.apply)(x, y)
    }
}

/// Symmetric positive definite matrix acting on fields of one grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    domain: Arc<GridDomain>,
    matrix: CsrMatrix,
}

impl DiscreteOperator {
    /// Checks exact symmetry and a strictly positive diagonal.
    pub fn new(domain: Arc<GridDomain>, matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != domain.len() {
            return Err(Error::GridMismatch { expected: domain.len(), found: matrix.nrows() });
        }
        if !matrix.is_symmetric() {
            return Err(Error::InvalidArgument("operator matrix is not symmetric".into()));
        }
        if let Some(i) = matrix.diagonal().iter().position(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument(format!("diagonal entry {i} is not positive")));
        }
        Ok(DiscreteOperator { domain, matrix })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        u.check_grid(&self.domain)?;
        let mut out = vec![0.0; self.domain.len()];
        self.matrix.mul_into(u.values(), &mut out);
        Ok(GridField::from_raw(self.domain.clone(), out))
    }

    /// `<Au, u>_h`.
    pub fn quadratic_form(&self, u: &GridField) -> Result<f64> {
        self.apply(u)?.inner(u)
    }
}

impl LinearOperator for DiscreteOperator {
    fn len(&self) -> usize {
        self.domain.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Scratch vectors for Jacobi-preconditioned conjugate gradients. One
/// workspace serves one solve at a time.
#[derive(Debug, Default)]
pub struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl CgWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves `op x = b` starting from `x = 0` until
    /// `|b - op x| <= tol |b|`, with at most `10 n` iterations.
    pub fn solve<O: LinearOperator + ?Sized>(
        &mut self,
        op: &O,
        b: &[f64],
        x: &mut [f64],
        tol: f64,
    ) -> Result<CgOutcome> {
        let n = op.len();
        if b.len() != n || x.len() != n {
            return Err(Error::GridMismatch { expected: n, found: b.len() });
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!("CG tolerance {tol} outside (0, 1)")));
        }
        x.fill(0.0);
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
        }
        self.r.clear();
        self.r.extend_from_slice(b);
        self.z.resize(n, 0.0);
        self.p.resize(n, 0.0);
        self.ap.resize(n, 0.0);
        self.inv_diag =
            op.diagonal().into_iter().map(|d| if d > 0.0 && d.is_finite() { 1.0 / d } else { 1.0 }).collect();

        let cap = 10 * n;
        let target = tol * b_norm;
        let mut rz = self.precondition_and_restart();
        let mut rel = 1.0;
        for it in 1..=cap {
            op.apply_into(&self.p, &mut self.ap);
            let pap = dot(&self.p, &self.ap);
            if !(pap > 0.0) || !pap.is_finite() {
                return Err(Error::CgNotConverged { iterations: it, relative_residual: rel });
            }
            let step = rz / pap;
            for (((xi, ri), pi), api) in x.iter_mut().zip(&mut self.r).zip(&self.p).zip(&self.ap) {
                *xi += step * pi;
                *ri -= step * api;
            }
            let r_norm = dot(&self.r, &self.r).sqrt();
            rel = r_norm / b_norm;
            if r_norm <= target {
                // The recurrence drifts from the true residual near round-off.
                op.apply_into(x, &mut self.ap);
                for ((ri, bi), api) in self.r.iter_mut().zip(b).zip(&self.ap) {
                    *ri = bi - api;
                }
                let true_norm = dot(&self.r, &self.r).sqrt();
                rel = true_norm / b_norm;
                if true_norm <= target {
                    return Ok(CgOutcome { iterations: it, relative_residual: rel });
                }
                rz = self.precondition_and_restart();
                continue;
            }
            for i in 0..n {
                self.z[i] = self.inv_diag[i] * self.r[i];
            }
            let rz_next = dot(&self.r, &self.z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                self.p[i] = self.z[i] + beta * self.p[i];
            }
        }
        Err(Error::CgNotConverged { iterations: cap, relative_residual: rel })
    }

    fn precondition_and_restart(&mut self) -> f64 {
        for i in 0..self.r.len() {
            self.z[i] = self.inv_diag[i] * self.r[i];
            self.p[i] = self.z[i];
        }
        dot(&self.r, &self.z)
    }
}

/// Solves `op v = b` by conjugate gradients to relative residual `tol`.
pub fn solve_spd<O: LinearOperator + ?Sized>(op: &O, b: &GridField, tol: f64) -> Result<GridField> {
    let mut x = vec![0.0; b.len()];
    CgWorkspace::new().solve(op, b.values(), &mut x, tol)?;
    Ok(GridField::from_raw(b.domain().clone(), x))
}

/// Smallest eigenvalue with its eigenfield (unit discrete L² norm).
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: GridField,
    pub iterations: usize,
}

const EIGEN_MAX_ITERATIONS: usize = 500;

/// Inverse power iteration from the constant field; stops once successive
/// Rayleigh quotients agree to `tol` relative.
pub fn smallest_eigenvalue(a: &DiscreteOperator, tol: f64) -> Result<Eigenpair> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("eigenvalue tolerance {tol} outside (0, 1)")));
    }
    let n = a.len();
    let cg_tol = (tol.sqrt() * 1e-3).clamp(1e-12, 1e-8);
    let mut ws = CgWorkspace::new();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut w = vec![0.0; n];
    a.apply_into(&v, &mut av);
    let mut lambda = dot(&av, &v);
    for it in 1..=EIGEN_MAX_ITERATIONS {
        ws.solve(a, &v, &mut w, cg_tol)?;
        let w_norm = dot(&w, &w).sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / w_norm;
        }
        a.apply_into(&v, &mut av);
        let next = dot(&av, &v);
        let converged = (next - lambda).abs() < tol * next.abs();
        lambda = next;
        if converged {
            let scale = 1.0 / a.domain().cell_volume().sqrt();
            v.iter_mut().for_each(|vi| *vi *= scale);
            return Ok(Eigenpair { value: lambda, vector: GridField::from_raw(a.domain().clone(), v), iterations: it });
        }
    }
    Err(Error::EigenNotConverged { iterations: EIGEN_MAX_ITERATIONS })
}

/// `sqrt(|u|_h^2 + |Au|_h^2)`.
pub fn graph_norm(a: &DiscreteOperator, u: &GridField) -> Result<f64> {
    let au = a.apply(u)?;
    Ok(u.norm().hypot(au.norm()))
}
