use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Binding;
use crate::grid::{GridDomain, GridField};
use crate::laplacian::build_laplacian;
use crate::nemytskii::{check_variables, Nonlinearity, URange};
use crate::operators::DiscreteOperator;

/// A discretized instance of `Au = N(u) + y` on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub operator: DiscreteOperator,
    pub nonlinearity: Nonlinearity,
    pub rhs: GridField,
}

impl Problem {
    pub fn new(operator: DiscreteOperator, nonlinearity: Nonlinearity, rhs: GridField) -> Result<Self> {
        if **operator.domain() != **nonlinearity.domain() {
            return Err(Error::GridMismatch { expected: operator.domain().len(), found: nonlinearity.domain().len() });
        }
        rhs.check_grid(operator.domain())?;
        Ok(Problem { operator, nonlinearity, rhs })
    }

    /// Builds the Dirichlet Laplacian on `domain`, parses `f`, and samples
    /// the right-hand side expression (`None` for zero).
    pub fn laplacian(domain: GridDomain, f: &str, range: URange, samples: usize, rhs: Option<&str>) -> Result<Self> {
        let domain = Arc::new(domain);
        let operator = build_laplacian(domain.clone());
        let nonlinearity = Nonlinearity::parse(f, domain.clone(), range, samples)?;
        let rhs = match rhs {
            None => GridField::zeros(domain),
            Some(text) => rhs_field(text, domain)?,
        };
        Problem::new(operator, nonlinearity, rhs)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.operator.domain()
    }

    pub fn with_rhs(&self, rhs: GridField) -> Result<Self> {
        Problem::new(self.operator.clone(), self.nonlinearity.clone(), rhs)
    }
}

/// Samples a `u`-free expression at every node.
pub fn rhs_field(text: &str, domain: Arc<GridDomain>) -> Result<GridField> {
    let e = crate::expr::parse(text)?;
    check_variables(&e, domain.dim(), false)?;
    let values = (0..domain.len())
        .map(|node| {
            let coords = domain.coords(node);
            e.evaluate(&Binding::at(coords, 0.0)).map_err(|source| Error::Domain { node, coords, u: 0.0, source })
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(domain, values)
}
