//! Checks against independent oracles: closed forms, explicit inverses,
//! fixed-point iterations and finite differences.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uniqcert_core::certify::GrowthSpec;
use uniqcert_core::{
    build_laplacian, certify, embedding_constant, gauss_newton_solve, grad_phi, graph_norm, parse, phi,
    poincare_constant, residual, solve_spd, CertifySettings, EmbeddingSample, GridDomain, GridField, Nonlinearity,
    Problem, SolveGuard, SolveOptions, SolveVerdict, URange, Verdict,
};

const EXAMPLE: &str = "(1 - 1/(x^2+y^2+z^2))*(10*u - 1)";

fn random_field(domain: &Arc<GridDomain>, rng: &mut ChaCha8Rng, amplitude: f64) -> GridField {
    let values = (0..domain.len()).map(|_| rng.gen_range(-amplitude..amplitude)).collect();
    GridField::new(domain.clone(), values).unwrap()
}

fn example_problem(n: usize) -> Problem {
    Problem::laplacian(GridDomain::cube(1.0, 2.0, n).unwrap(), EXAMPLE, URange::new(-10.0, 10.0).unwrap(), 21, None)
        .unwrap()
}

fn example_settings() -> CertifySettings {
    CertifySettings {
        asserted_b3: Some(55.0 / 6.0),
        growth: GrowthSpec::Asserted { a1: parse("11/12").unwrap(), b1: parse("110/12").unwrap() },
        ..CertifySettings::default()
    }
}

/// Inverse of a 3×3 matrix by cofactors.
fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (s, v) in row.iter_mut().enumerate() {
            *v = c(s, r) / det;
        }
    }
    inv
}

#[test]
fn embedding_constant_matches_explicit_inverse() {
    let d = Arc::new(GridDomain::unit_interval(3).unwrap());
    let a = build_laplacian(d.clone());
    let dense = a.matrix().to_dense();
    let inv = inverse3([
        [dense[0][0], dense[0][1], dense[0][2]],
        [dense[1][0], dense[1][1], dense[1][2]],
        [dense[2][0], dense[2][1], dense[2][2]],
    ]);
    let h = d.spacing()[0];
    let column_norm = |j: usize| (h * (0..3).map(|i| (inv[i][j] / h).powi(2)).sum::<f64>()).sqrt();
    let expected = (0..3).map(column_norm).fold(0.0, f64::max);
    let c = embedding_constant(&a, &EmbeddingSample::All).unwrap();
    assert!((c.value - expected).abs() < 1e-13, "{} vs {expected}", c.value);
    assert!(c.value >= column_norm(0));
}

#[test]
fn embedding_inequality_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [
        GridDomain::unit_interval(17).unwrap(),
        GridDomain::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![6, 9]).unwrap(),
        GridDomain::cube(1.0, 2.0, 5).unwrap(),
    ] {
        let d = Arc::new(d);
        let a = build_laplacian(d.clone());
        let c = embedding_constant(&a, &EmbeddingSample::All).unwrap();
        assert!(c.exact);
        for _ in 0..50 {
            let u = random_field(&d, &mut rng, 1.0);
            let au = a.apply(&u).unwrap().norm();
            assert!(u.norm_inf() <= c.value * au * (1.0 + 1e-10));
        }
        // The bound is attained by u = A⁻¹A⁻¹δ at the maximizing node.
        let mut delta = GridField::zeros(d.clone());
        let mut values = delta.clone().into_values();
        values[c.argmax] = 1.0 / d.cell_volume();
        delta = GridField::new(d.clone(), values).unwrap();
        let g = solve_spd(&a, &delta, 1e-12).unwrap();
        let u = solve_spd(&a, &g, 1e-12).unwrap();
        let ratio = u.norm_inf() / a.apply(&u).unwrap().norm();
        assert!((ratio - c.value).abs() < 1e-8 * c.value);
    }
}

#[test]
fn poincare_constant_closed_form_in_one_dimension() {
    for n in [7usize, 15, 31] {
        let d = Arc::new(GridDomain::unit_interval(n).unwrap());
        let h = d.spacing()[0];
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let alpha = poincare_constant(&build_laplacian(d)).unwrap();
        assert!((alpha - exact).abs() <= 1e-8 * exact, "n = {n}: {alpha} vs {exact}");
        assert!(alpha < PI * PI);
    }
}

#[test]
fn poincare_constant_on_anisotropic_box_is_a_sum_of_axis_values() {
    let d = Arc::new(GridDomain::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 0.5], vec![7, 9, 5]).unwrap());
    let exact: f64 = d
        .spacing()
        .iter()
        .zip(d.lower().iter().zip(d.upper()))
        .map(|(h, (lo, hi))| 4.0 / (h * h) * (PI * h / (2.0 * (hi - lo))).sin().powi(2))
        .sum();
    let alpha = poincare_constant(&build_laplacian(d)).unwrap();
    assert!((alpha - exact).abs() <= 1e-8 * exact, "{alpha} vs {exact}");
}

#[test]
fn graph_norm_bound_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [
        GridDomain::unit_interval(31).unwrap(),
        GridDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![15, 15]).unwrap(),
        GridDomain::cube(1.0, 2.0, 7).unwrap(),
    ] {
        let d = Arc::new(d);
        let a = build_laplacian(d.clone());
        let alpha = poincare_constant(&a).unwrap();
        for _ in 0..100 {
            let u = random_field(&d, &mut rng, 10.0);
            let lhs = a.apply(&u).unwrap().norm();
            let rhs = alpha / (1.0 + alpha) * graph_norm(&a, &u).unwrap();
            assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }
}

#[test]
fn coercivity_chain_for_the_example() {
    let problem = example_problem(7);
    let cert = certify(&problem, &example_settings()).unwrap();
    assert_eq!(cert.overall, Verdict::Pass);
    let (a, nf) = (&problem.operator, &problem.nonlinearity);
    let d = problem.domain().clone();
    let y = GridField::from_fn(d.clone(), |c| c[0] - c[1] * c[2]);
    let (alpha, beta, delta) = (cert.alpha.value, cert.beta.value, cert.delta.value);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..100 {
        let mut u = random_field(&d, &mut rng, 1.0);
        // Spread graph norms up to about 10³.
        let scale = 10f64.powf(3.0 * k as f64 / 99.0) / graph_norm(a, &u).unwrap();
        u = u.scaled(scale);
        let lhs = residual(a, nf, &u, &y).unwrap().norm();
        let rhs = (1.0 - beta) * alpha / (1.0 + alpha) * graph_norm(a, &u).unwrap() - delta - y.norm();
        assert!(lhs >= rhs, "k = {k}: {lhs} < {rhs}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let problem = example_problem(7);
    let (a, nf) = (&problem.operator, &problem.nonlinearity);
    let d = problem.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let y = random_field(&d, &mut rng, 1.0);
    for _ in 0..20 {
        let u = random_field(&d, &mut rng, 1.0);
        let dir = random_field(&d, &mut rng, 1.0);
        let eps = 1e-6;
        let fd = (phi(a, nf, &u.add_scaled(eps, &dir).unwrap(), &y).unwrap()
            - phi(a, nf, &u.add_scaled(-eps, &dir).unwrap(), &y).unwrap())
            / (2.0 * eps);
        let g = grad_phi(a, nf, &u, &y).unwrap().inner(&dir).unwrap();
        assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "{fd} vs {g}");
        assert!((fd - g).abs() <= 1e-5 * (1.0 + phi(a, nf, &u, &y).unwrap()));
    }
}

#[test]
fn gradient_of_nonlinear_residual_matches_central_differences() {
    let d = Arc::new(GridDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![9, 9]).unwrap());
    let a = build_laplacian(d.clone());
    let nf =
        Nonlinearity::parse("sin(u)*x + u^2/4 - exp(y*u/3)", d.clone(), URange::new(-2.0, 2.0).unwrap(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let y = random_field(&d, &mut rng, 1.0);
    for _ in 0..20 {
        let u = random_field(&d, &mut rng, 1.0);
        let dir = random_field(&d, &mut rng, 1.0);
        let eps = 1e-5;
        let fd = (phi(&a, &nf, &u.add_scaled(eps, &dir).unwrap(), &y).unwrap()
            - phi(&a, &nf, &u.add_scaled(-eps, &dir).unwrap(), &y).unwrap())
            / (2.0 * eps);
        let g = grad_phi(&a, &nf, &u, &y).unwrap().inner(&dir).unwrap();
        assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "{fd} vs {g}");
    }
}

#[test]
fn c1_remainder_is_zero_for_affine_and_quadratic_otherwise() {
    let d = Arc::new(GridDomain::cube(1.0, 2.0, 5).unwrap());
    let range = URange::new(-10.0, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let affine = Nonlinearity::parse(EXAMPLE, d.clone(), range, 5).unwrap();
    for _ in 0..10 {
        let u = random_field(&d, &mut rng, 5.0);
        let h = random_field(&d, &mut rng, 5.0);
        assert!(affine.c1_remainder(&u, &h).unwrap() <= 1e-12);
    }

    let quad = Nonlinearity::parse("u^2 + u", d.clone(), range, 5).unwrap();
    let u = random_field(&d, &mut rng, 1.0);
    let h = random_field(&d, &mut rng, 1.0);
    let ratio = |t: f64| {
        let th = h.scaled(t);
        quad.c1_remainder(&u, &th).unwrap() / th.norm_inf()
    };
    let ratios: Vec<f64> = [1.0, 0.5, 0.25].into_iter().map(ratio).collect();
    for w in ratios.windows(2) {
        let factor = w[0] / w[1];
        assert!((1.8..=2.2).contains(&factor), "factor {factor}");
    }
}

#[test]
fn example_solution_matches_fixed_point_iteration() {
    let problem = example_problem(9);
    let cert = certify(&problem, &example_settings()).unwrap();
    let (a, nf) = (&problem.operator, &problem.nonlinearity);
    let d = problem.domain().clone();
    let rep = gauss_newton_solve(
        a,
        nf,
        &problem.rhs,
        &GridField::zeros(d.clone()),
        &SolveOptions::default(),
        SolveGuard::Certified(&cert),
    )
    .unwrap();
    assert_eq!(rep.verdict, SolveVerdict::Converged);
    assert!(rep.final_relative_residual <= 1e-10);
    let floor = cert.coercivity_floor() - 1e-8 * cert.alpha.value;
    assert!(rep.rayleigh_min.unwrap() >= floor);

    // u ↦ A⁻¹(N(u) + y) contracts with factor at most γ/α.
    let mut u = GridField::zeros(d);
    for _ in 0..200 {
        let next = solve_spd(a, &nf.apply(&u).unwrap().add(&problem.rhs).unwrap(), 1e-13).unwrap();
        let step = next.sub(&u).unwrap().norm();
        u = next;
        if step <= 1e-14 * u.norm() {
            break;
        }
    }
    let diff = rep.solution.sub(&u).unwrap().norm() / u.norm();
    assert!(diff < 1e-10, "relative difference {diff}");
}

#[test]
fn newton_converges_quadratically_on_a_nonlinear_problem() {
    let d = Arc::new(GridDomain::unit_interval(63).unwrap());
    let a = build_laplacian(d.clone());
    let nf = Nonlinearity::parse("2*sin(u) - u^3/10", d.clone(), URange::new(-3.0, 3.0).unwrap(), 41).unwrap();
    let y = GridField::constant(d.clone(), 40.0);
    let opts = SolveOptions { tolerance: 1e-13, ..SolveOptions::default() };
    let rep = gauss_newton_solve(&a, &nf, &y, &GridField::zeros(d), &opts, SolveGuard::Unsafe).unwrap();
    assert_eq!(rep.verdict, SolveVerdict::Converged, "{:?}", rep.residual_norms);
    for w in rep.phi.windows(2) {
        assert!(w[1] < w[0]);
    }
    // f_u = 2cos(u) - 3u²/10 <= 2 < α ≈ π².
    let bound = 1e3 / (PI * PI - 2.0);
    let scale = 1.0 + y.norm();
    let rel: Vec<f64> = rep.residual_norms.iter().map(|r| r / scale).collect();
    let mut checked = 0;
    for w in rel.windows(2) {
        if w[0] < 1e-3 && w[1] > 1e-13 {
            assert!(w[1] <= bound * w[0] * w[0], "{} > C·{}²", w[1], w[0]);
            checked += 1;
        }
    }
    assert!(checked >= 1, "{rel:?}");
}

#[test]
fn discrete_sine_is_recovered_in_one_step() {
    let d = Arc::new(GridDomain::unit_interval(31).unwrap());
    let a = build_laplacian(d.clone());
    let nf = Nonlinearity::parse("0", d.clone(), URange::new(-1.0, 1.0).unwrap(), 2).unwrap();
    let h = d.spacing()[0];
    let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let s = GridField::from_fn(d.clone(), |c| (PI * c[0]).sin());
    let y = s.scaled(lam);
    let rep =
        gauss_newton_solve(&a, &nf, &y, &GridField::zeros(d), &SolveOptions::default(), SolveGuard::Unsafe).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.solution.sub(&s).unwrap().norm() <= 1e-10 * s.norm());
}

#[test]
fn certificate_values_for_the_example() {
    let cert = certify(&example_problem(9), &example_settings()).unwrap();
    assert!((cert.gamma.value - 55.0 / 6.0).abs() < 1e-9);
    assert!(cert.alpha.value < 3.0 * PI * PI && cert.alpha.value > 0.97 * 3.0 * PI * PI);
    assert!(cert.margins.alpha_minus_gamma > 19.0);
    assert!(cert.beta.value < 1.0);
    // δ = (11/12)|1|_h.
    let d = GridDomain::cube(1.0, 2.0, 9).unwrap();
    assert!((cert.delta.value - 11.0 / 12.0 * d.discrete_volume().sqrt()).abs() < 1e-12);
}

#[test]
fn linear_growth_above_alpha_fails() {
    let problem =
        Problem::laplacian(GridDomain::cube(1.0, 2.0, 7).unwrap(), "40*u", URange::new(-1.0, 1.0).unwrap(), 5, None)
            .unwrap();
    let cert = certify(&problem, &CertifySettings::default()).unwrap();
    assert_eq!(cert.gamma.value, 40.0);
    assert_eq!(cert.verdicts.n2ii, Verdict::Fail);
    assert_eq!(cert.overall, Verdict::Fail);
}
