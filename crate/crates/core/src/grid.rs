//! Box domains with uniform interior grids and the discrete L² fields that
//! live on them.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned box in 1 to 3 dimensions with `counts[k]` interior nodes on
/// axis `k`. Boundary nodes are not stored (homogeneous Dirichlet data).
///
/// Interior nodes are flattened row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl GridDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDomain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if upper.len() != dim || counts.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "expected {dim} upper bounds and counts, got {} and {}",
                upper.len(),
                counts.len()
            )));
        }
        for k in 0..dim {
            if !(lower[k].is_finite() && upper[k].is_finite()) || lower[k] >= upper[k] {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: bounds [{}, {}] must be finite with lower < upper",
                    lower[k], upper[k]
                )));
            }
            if counts[k] == 0 {
                return Err(Error::InvalidDomain(format!("axis {k}: need at least one interior node")));
            }
        }
        let spacing = (0..dim).map(|k| (upper[k] - lower[k]) / (counts[k] + 1) as f64).collect();
        let mut strides = vec![1; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        let len = counts.iter().product();
        Ok(GridDomain { lower, upper, counts, spacing, strides, len })
    }

    /// The unit interval `(0, 1)` with `n` interior nodes, `h = 1/(n+1)`.
    pub fn unit_interval(n: usize) -> Result<Self> {
        GridDomain::new(vec![0.0], vec![1.0], vec![n])
    }

    /// The cube `[lo, hi]^3` with `n` interior nodes per axis.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        GridDomain::new(vec![lo; 3], vec![hi; 3], vec![n; 3])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Quadrature weight of one node, `h_1 * ... * h_m`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// `len * cell_volume`, the squared discrete norm of the constant 1.
    pub fn discrete_volume(&self) -> f64 {
        self.len as f64 * self.cell_volume()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Physical coordinates of an interior node; unused axes are 0.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, i) in self.multi_index(flat).into_iter().enumerate() {
            out[k] = self.lower[k] + (i + 1) as f64 * self.spacing[k];
        }
        out
    }

    /// Same box with the spacing halved on every axis.
    pub fn refined(&self) -> GridDomain {
        let counts = self.counts.iter().map(|n| 2 * n + 1).collect();
        GridDomain::new(self.lower.clone(), self.upper.clone(), counts).expect("refining a valid domain")
    }

    pub fn contains_point(&self, point: &[f64]) -> bool {
        point.iter().zip(self.lower.iter().zip(&self.upper)).all(|(p, (l, u))| *l <= *p && *p <= *u)
    }
}

/// Values on the interior nodes of a [`GridDomain`], with the discrete inner
/// product `<u, v>_h = h^m * sum(u_i v_i)`.
#[derive(Debug, Clone)]
pub struct GridField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl GridField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::GridMismatch { expected: domain.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { node: i });
        }
        Ok(GridField { domain, values })
    }

    pub(crate) fn from_raw(domain: Arc<GridDomain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        GridField { domain, values }
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        GridField::from_raw(domain, vec![0.0; n])
    }

    pub fn constant(domain: Arc<GridDomain>, value: f64) -> Self {
        let n = domain.len();
        GridField::from_raw(domain, vec![value; n])
    }

    /// Samples `f` at every interior node's coordinates.
    pub fn from_fn(domain: Arc<GridDomain>, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..domain.len()).map(|i| f(domain.coords(i))).collect();
        GridField::from_raw(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    pub(crate) fn check_grid(&self, domain: &GridDomain) -> Result<()> {
        if *self.domain == *domain {
            Ok(())
        } else {
            Err(Error::GridMismatch { expected: domain.len(), found: self.len() })
        }
    }

    fn check_same(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch { expected: self.len(), found: other.len() })
        }
    }

    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.domain.cell_volume() * dot(&self.values, &other.values))
    }

    /// Discrete L² norm.
    pub fn norm(&self) -> f64 {
        (self.domain.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> GridField {
        let values = self.values.iter().map(|v| v * factor).collect();
        GridField::from_raw(self.domain.clone(), values)
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &GridField) -> Result<GridField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + factor * b).collect();
        Ok(GridField::from_raw(self.domain.clone(), values))
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.add_scaled(-1.0, other)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.add_scaled(1.0, other)
    }
}

/// Plain Euclidean dot product, summed left to right.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
