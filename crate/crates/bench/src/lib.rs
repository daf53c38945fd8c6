//! Fixtures shared by the benchmarks.

use uniqcert_core::{GridDomain, Problem, URange};

pub const EXAMPLE: &str = "(1 - 1/(x^2+y^2+z^2))*(10*u - 1)";

/// The `c = 10` example on `[1, 2]³` with `n³` interior nodes.
pub fn example_problem(n: usize) -> Problem {
    Problem::laplacian(
        GridDomain::cube(1.0, 2.0, n).expect("valid cube"),
        EXAMPLE,
        URange::new(-10.0, 10.0).expect("valid range"),
        21,
        None,
    )
    .expect("example problem builds")
}
