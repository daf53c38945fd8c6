//! Superposition operators `N_f(u)(x) = f(x, u(x))` on grid fields.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr, Var};
use crate::grid::{GridDomain, GridField};

/// Closed interval of `u` values used for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct URange {
    pub min: f64,
    pub max: f64,
}

impl URange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::InvalidArgument(format!("u-range [{min}, {max}] must be a finite nonempty interval")));
        }
        Ok(URange { min, max })
    }

    /// `count` equispaced points including both ends (`count >= 2`).
    pub fn samples(&self, count: usize) -> Vec<f64> {
        let count = count.max(2);
        (0..count)
            .map(|j| {
                let t = j as f64 / (count - 1) as f64;
                if j + 1 == count {
                    self.max
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect()
    }

    pub fn contains(&self, u: f64) -> bool {
        self.min <= u && u <= self.max
    }
}

/// A nonlinearity `f(x, u)` together with its symbolic `∂f/∂u`, bound to
/// the nodes of one grid.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    f: Expr,
    fu: Expr,
    domain: Arc<GridDomain>,
    coords: Vec<[f64; 3]>,
}

impl Nonlinearity {
    /// Differentiates `f` and checks that `f` and `f_u` evaluate finitely at
    /// every node for every sampled `u` in `range`.
    pub fn new(f: Expr, domain: Arc<GridDomain>, range: URange, samples: usize) -> Result<Self> {
        check_variables(&f, domain.dim(), true)?;
        let fu = f.differentiate_u()?;
        let coords = (0..domain.len()).map(|i| domain.coords(i)).collect();
        let nf = Nonlinearity { f, fu, domain, coords };
        for u in range.samples(samples) {
            for node in 0..nf.coords.len() {
                nf.eval_f(node, u)?;
                nf.eval_fu(node, u)?;
            }
        }
        Ok(nf)
    }

    /// Parses `text` and builds the nonlinearity.
    pub fn parse(text: &str, domain: Arc<GridDomain>, range: URange, samples: usize) -> Result<Self> {
        Nonlinearity::new(crate::expr::parse(text)?, domain, range, samples)
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn fu(&self) -> &Expr {
        &self.fu
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        self.coords[node]
    }

    /// `f` is affine in `u`, i.e. `f_u` does not depend on `u`.
    pub fn is_affine(&self) -> bool {
        !self.fu.contains(Var::U)
    }

    pub fn eval_f(&self, node: usize, u: f64) -> Result<f64> {
        self.eval(&self.f, node, u)
    }

    pub fn eval_fu(&self, node: usize, u: f64) -> Result<f64> {
        self.eval(&self.fu, node, u)
    }

    fn eval(&self, e: &Expr, node: usize, u: f64) -> Result<f64> {
        let coords = self.coords[node];
        e.evaluate(&Binding::at(coords, u)).map_err(|source| Error::Domain { node, coords, u, source })
    }

    fn map_nodes(&self, e: &Expr, u: &GridField) -> Result<GridField> {
        u.check_grid(&self.domain)?;
        let values =
            u.values().iter().enumerate().map(|(node, &ui)| self.eval(e, node, ui)).collect::<Result<Vec<_>>>()?;
        Ok(GridField::from_raw(self.domain.clone(), values))
    }

    /// `N_f(u)`.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.map_nodes(&self.f, u)
    }

    /// Node values `f_u(x_i, u_i)`: the diagonal of `N'(u)`.
    pub fn derivative_diagonal(&self, u: &GridField) -> Result<GridField> {
        self.map_nodes(&self.fu, u)
    }

    /// `N'(u) h`, a diagonal multiplier.
    pub fn apply_prime(&self, u: &GridField, h: &GridField) -> Result<GridField> {
        h.check_grid(&self.domain)?;
        let diag = self.derivative_diagonal(u)?;
        let values = diag.values().iter().zip(h.values()).map(|(d, hi)| d * hi).collect();
        Ok(GridField::from_raw(self.domain.clone(), values))
    }

    /// `|w(h)|_h` with `w(h) = N(u + h) - N(u) - N'(u) h`.
    pub fn c1_remainder(&self, u: &GridField, h: &GridField) -> Result<f64> {
        let shifted = u.add(h)?;
        let w = self.apply(&shifted)?.sub(&self.apply(u)?)?.sub(&self.apply_prime(u, h)?)?;
        Ok(w.norm())
    }
}

/// Rejects coordinate variables beyond the domain dimension (and `u` unless
/// allowed).
pub(crate) fn check_variables(e: &Expr, dim: usize, allow_u: bool) -> Result<()> {
    for var in e.variables() {
        let ok = match var {
            Var::U => allow_u,
            Var::X => dim >= 1,
            Var::Y => dim >= 2,
            Var::Z => dim >= 3,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "variable `{}` is not available in a {dim}-dimensional problem",
                var.name()
            )));
        }
    }
    Ok(())
}
