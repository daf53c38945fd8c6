//! Dirichlet Laplacian `A = -Δ` on box grids and its two structural
//! constants: the Poincaré constant (smallest eigenvalue) and the embedding
//! constant `c_m` with `|u|_∞ <= c_m |Au|_h`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{dot, GridDomain};
use crate::operators::{smallest_eigenvalue, CgWorkspace, CsrMatrix, DiscreteOperator};

/// Relative tolerance used for eigenvalue estimates across the crate.
pub const EIGEN_TOLERANCE: f64 = 1e-12;

const GREEN_CG_TOLERANCE: f64 = 1e-11;

/// Second-order central differences, `2m + 1` points, boundary values
/// eliminated.
pub fn build_laplacian(domain: Arc<GridDomain>) -> DiscreteOperator {
    let n = domain.len();
    let dim = domain.dim();
    let inv_h2: Vec<f64> = domain.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let mut rows = Vec::with_capacity(n);
    for flat in 0..n {
        let multi = domain.multi_index(flat);
        let mut row = Vec::with_capacity(2 * dim + 1);
        let mut diag = 0.0;
        for k in 0..dim {
            diag += 2.0 * inv_h2[k];
            let stride = domain.stride(k);
            if multi[k] > 0 {
                row.push((flat - stride, -inv_h2[k]));
            }
            if multi[k] + 1 < domain.counts()[k] {
                row.push((flat + stride, -inv_h2[k]));
            }
        }
        row.push((flat, diag));
        rows.push(row);
    }
    let matrix = CsrMatrix::from_rows(rows).expect("stencil columns are in range");
    DiscreteOperator::new(domain, matrix).expect("stencil is symmetric with positive diagonal")
}

/// Optimal discrete constant `c` in `<Au, u>_h >= c |u|_h^2`, i.e. the
/// smallest eigenvalue of `A`.
pub fn poincare_constant(a: &DiscreteOperator) -> Result<f64> {
    Ok(smallest_eigenvalue(a, EIGEN_TOLERANCE)?.value)
}

/// Which nodes to probe when estimating the embedding constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum EmbeddingSample {
    /// Every node. Uses the reflection symmetry of the box stencil, so only
    /// one orthant of nodes is actually solved for.
    #[default]
    All,
    /// The listed flat node indices; the result is a lower bound.
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstant {
    pub value: f64,
    /// True when every node was covered, so `value` is the optimal constant.
    pub exact: bool,
    /// Flat index of the node attaining the maximum.
    pub argmax: usize,
    pub solves: usize,
}

/// `max_i |A⁻¹ δ_i|_h` over the sampled nodes, where `δ_i` is the discrete
/// delta with value `1/h^m` at node `i` (so that `<u, δ_i>_h = u_i`).
///
/// Since `u_i = <Au, A⁻¹δ_i>_h`, Cauchy-Schwarz gives
/// `|u_i| <= |A⁻¹δ_i|_h |Au|_h`, with equality for `u = A⁻¹A⁻¹δ_i`.
pub fn embedding_constant(a: &DiscreteOperator, sample: &EmbeddingSample) -> Result<EmbeddingConstant> {
    let domain = a.domain().clone();
    let (nodes, exact) = match sample {
        EmbeddingSample::All => (orthant_representatives(&domain), true),
        EmbeddingSample::Nodes(list) => {
            let mut list: Vec<usize> = list.iter().copied().filter(|i| *i < domain.len()).collect();
            list.sort_unstable();
            list.dedup();
            let exact = list.len() == domain.len();
            (list, exact)
        }
    };
    if nodes.is_empty() {
        return Err(crate::error::Error::InvalidArgument("no valid nodes to sample".into()));
    }
    let n = domain.len();
    let weight = domain.cell_volume();
    let norms: Vec<(usize, f64)> = nodes
        .par_iter()
        .map_init(
            || (CgWorkspace::new(), vec![0.0; n], vec![0.0; n]),
            |(ws, rhs, x), &node| {
                rhs.fill(0.0);
                rhs[node] = 1.0 / weight;
                ws.solve(a, rhs, x, GREEN_CG_TOLERANCE).map(|_| (node, (weight * dot(x, x)).sqrt()))
            },
        )
        .collect::<Result<_>>()?;
    let (argmax, value) =
        norms
            .iter()
            .copied()
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(EmbeddingConstant { value, exact, argmax, solves: nodes.len() })
}

/// Nodes with `i_k <= (n_k - 1) / 2` on every axis. Every node is the mirror
/// image of one of these under axis reflections, which leave the stencil
/// invariant.
fn orthant_representatives(domain: &GridDomain) -> Vec<usize> {
    (0..domain.len())
        .filter(|&flat| domain.multi_index(flat).iter().zip(domain.counts()).all(|(i, n)| 2 * i < *n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridField;
    use std::f64::consts::PI;

    #[test]
    fn one_dimensional_stencil() {
        let a = build_laplacian(Arc::new(GridDomain::unit_interval(3).unwrap()));
        let expected = [[32.0, -16.0, 0.0], [-16.0, 32.0, -16.0], [0.0, -16.0, 32.0]];
        let dense = a.matrix().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(dense[i][j], expected[i][j], "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn two_dimensional_five_point_stencil() {
        let d = Arc::new(GridDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4]).unwrap());
        let a = build_laplacian(d.clone());
        let h2 = 0.2f64 * 0.2;
        let centre = d.flat_index(&[1, 2]);
        let row: Vec<_> = a.matrix().row(centre).collect();
        assert_eq!(row.len(), 5);
        assert_eq!(a.matrix().get(centre, centre), 4.0 / h2);
        for nb in [[0, 2], [2, 2], [1, 1], [1, 3]] {
            assert_eq!(a.matrix().get(centre, d.flat_index(&nb)), -1.0 / h2);
        }
        assert!(a.matrix().is_symmetric());
    }

    #[test]
    fn interior_rows_sum_to_zero() {
        let d = Arc::new(GridDomain::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.5, 2.5], vec![5, 4, 6]).unwrap());
        let a = build_laplacian(d.clone());
        let out = a.apply(&GridField::constant(d.clone(), 1.0)).unwrap();
        for flat in 0..d.len() {
            let m = d.multi_index(flat);
            let touches_boundary = m.iter().zip(d.counts()).any(|(i, n)| *i == 0 || *i + 1 == *n);
            if !touches_boundary {
                assert!(out.values()[flat].abs() < 1e-9);
            } else {
                assert!(out.values()[flat] > 0.0);
            }
        }
    }

    #[test]
    fn poincare_constant_coarse_closed_form() {
        let a = build_laplacian(Arc::new(GridDomain::unit_interval(3).unwrap()));
        let c = poincare_constant(&a).unwrap();
        let exact = 64.0 * (PI / 8.0).sin().powi(2);
        assert!((c - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn embedding_constant_three_nodes_all_sampled() {
        let a = build_laplacian(Arc::new(GridDomain::unit_interval(3).unwrap()));
        let c = embedding_constant(&a, &EmbeddingSample::All).unwrap();
        assert!(c.exact);
        // Middle column of the explicit inverse, see the integration tests.
        assert!((c.value - 6f64.sqrt() / 16.0).abs() < 1e-12);
        assert_eq!(c.argmax, 1);
        assert_eq!(c.solves, 2);
    }

    #[test]
    fn embedding_constant_sampled_is_lower_bound() {
        let a = build_laplacian(Arc::new(GridDomain::unit_interval(3).unwrap()));
        let c = embedding_constant(&a, &EmbeddingSample::Nodes(vec![0])).unwrap();
        assert!(!c.exact);
        assert!((c.value - 3.5f64.sqrt() / 16.0).abs() < 1e-12);
        assert!(embedding_constant(&a, &EmbeddingSample::Nodes(vec![7])).is_err());
    }

    #[test]
    fn orthant_covers_every_node_by_reflection() {
        let d = GridDomain::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![4, 5]).unwrap();
        let reps = orthant_representatives(&d);
        assert_eq!(reps.len(), 2 * 3);
        for flat in 0..d.len() {
            let m = d.multi_index(flat);
            let mirrored: Vec<usize> = m.iter().zip(d.counts()).map(|(i, n)| (*i).min(n - 1 - i)).collect();
            assert!(reps.contains(&d.flat_index(&mirrored)));
        }
    }
}
