use cipre_conic::{
    feasibility_margin, residuals, solve, ConicError, ConicProblem, Quadratic, SocConstraint, SolverOptions, Status,
};
use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact minimum of ½‖x‖² over {E x = e, G x ≤ h}: try every subset of
/// inequality rows as active, take the least-norm point on that affine set
/// and keep the best feasible one.
fn active_set_oracle(eq: &[(DVector<f64>, f64)], ineq: &[(DVector<f64>, f64)]) -> Option<f64> {
    let n = eq.first().or(ineq.first()).map(|r| r.0.len())?;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << ineq.len()) {
        let rows: Vec<&(DVector<f64>, f64)> = eq
            .iter()
            .chain(
                ineq.iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, r)| r),
            )
            .collect();
        let x = if rows.is_empty() {
            DVector::zeros(n)
        } else {
            if rows.len() > n {
                continue;
            }
            let c = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
            let d = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            let cct = &c * c.transpose();
            let svd = cct.clone().svd(false, false);
            let smin = svd.singular_values.min();
            if smin < 1e-10 * svd.singular_values.max().max(1.0) {
                continue;
            }
            let Some(inv) = cct.try_inverse() else { continue };
            c.transpose() * (inv * d)
        };
        let feasible =
            eq.iter().all(|(a, b)| (a.dot(&x) - b).abs() < 1e-9) && ineq.iter().all(|(a, b)| a.dot(&x) <= b + 1e-9);
        if feasible {
            let v = 0.5 * x.norm_squared();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn random_rows(rng: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<(DVector<f64>, f64)> {
    (0..count)
        .map(|_| {
            let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            (a, rng.random_range(-1.0..0.5))
        })
        .collect()
}

fn build(n: usize, eq: &[(DVector<f64>, f64)], ineq: &[(DVector<f64>, f64)]) -> ConicProblem {
    let mut p = ConicProblem::min_norm(n);
    for (a, b) in eq {
        p.add_eq(a.clone(), *b);
    }
    for (a, b) in ineq {
        p.add_le(a.clone(), *b);
    }
    p
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn projection_onto_half_space() {
    let mut p = ConicProblem::min_norm(2);
    p.add_le(dvector![-1.0, 0.0], -3.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.x[0] - 3.0).abs() < 1e-8 && sol.x[1].abs() < 1e-8);
    assert!((sol.objective - 4.5).abs() < 1e-8);
    assert!(sol.residuals.primal <= opts().feas_tol);
}

#[test]
fn empty_cone_section_is_infeasible_with_certificate() {
    // ‖(x₁, x₂)‖ ≤ x₃ − 1 and x₃ ≤ 0
    let mut p = ConicProblem::min_norm(3);
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    p.add_soc(SocConstraint::new(a, DVector::zeros(2), dvector![0.0, 0.0, 1.0], -1.0));
    p.add_le(dvector![0.0, 0.0, 1.0], 0.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::PrimalInfeasible);
    let cert = sol.certificate.expect("certificate");
    assert!(cert.residual <= opts().cert_tol);
    assert!(cert.duals.inequalities.iter().all(|&z| z >= -1e-12));
    let margin = feasibility_margin(&p, &opts()).unwrap().unwrap();
    assert!(margin > 0.1, "phase one should confirm infeasibility, got {margin}");
}

#[test]
fn ball_constraint_projection() {
    // min ½‖x‖² s.t. ‖x − a‖ ≤ r with ‖a‖ > r  →  x = a (1 − r/‖a‖)
    let a = dvector![3.0, -4.0, 0.0];
    let r = 2.0;
    let mut p = ConicProblem::min_norm(3);
    p.add_soc(SocConstraint::new(DMatrix::identity(3, 3), -&a, DVector::zeros(3), r));
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    let expect = &a * (1.0 - r / a.norm());
    assert!((&sol.x - expect).amax() < 1e-8);
}

#[test]
fn linear_objective_with_norm_budget() {
    // maximize x₁ + x₂ over ‖x‖ ≤ 2
    let mut p = ConicProblem::new(2).with_linear(dvector![-1.0, -1.0]);
    p.add_soc(SocConstraint::new(
        DMatrix::identity(2, 2),
        DVector::zeros(2),
        DVector::zeros(2),
        2.0,
    ));
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective + 2.0 * 2f64.sqrt()).abs() < 1e-8);
}

#[test]
fn quadratic_factor_with_free_directions() {
    // ½‖x₁ + x₂‖² with x₁ + x₂ ≥ 1: optimum 0.5, x not unique
    let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let mut p = ConicProblem::new(2).with_quadratic(Quadratic::Factor(f));
    p.add_le(dvector![-1.0, -1.0], -1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 0.5).abs() < 1e-8);
}

#[test]
fn unbounded_linear_program_is_dual_infeasible() {
    let mut p = ConicProblem::new(2).with_linear(dvector![-1.0, 0.0]);
    p.add_le(dvector![-1.0, 0.0], 0.0);
    p.add_le(dvector![0.0, 1.0], 1.0);
    p.add_le(dvector![0.0, -1.0], 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::DualInfeasible);
}

#[test]
fn equality_constrained_least_norm() {
    let mut p = ConicProblem::min_norm(3);
    p.add_eq(dvector![1.0, 1.0, 1.0], 3.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((&sol.x - dvector![1.0, 1.0, 1.0]).amax() < 1e-8);
}

#[test]
fn malformed_dimensions_are_rejected() {
    let mut p = ConicProblem::min_norm(2);
    p.add_le(dvector![1.0, 0.0, 0.0], 1.0);
    assert!(matches!(solve(&p, &opts()), Err(ConicError::Dimension(_))));
    let mut p = ConicProblem::min_norm(2);
    p.add_soc(SocConstraint::new(
        DMatrix::zeros(2, 2),
        DVector::zeros(3),
        DVector::zeros(2),
        0.0,
    ));
    assert!(matches!(solve(&p, &opts()), Err(ConicError::Dimension(_))));
    let mut p = ConicProblem::min_norm(1);
    p.add_le(dvector![f64::NAN], 1.0);
    assert!(matches!(solve(&p, &opts()), Err(ConicError::NonFinite(_))));
}

#[test]
fn residual_report_examples() {
    let mut p = ConicProblem::min_norm(2);
    p.add_le(dvector![1.0, 0.0], 1.0);
    p.add_le(dvector![0.0, 1.0], 1.0);
    let ok = residuals(&p, &dvector![0.5, 0.5]).unwrap();
    assert_eq!(ok.max_violation(), 0.0);
    let bad = residuals(&p, &dvector![0.5, 1.5]).unwrap();
    assert_eq!(bad.inequalities, vec![0.0, 0.5]);
    assert!((bad.objective - 1.25).abs() < 1e-15);
    assert!(residuals(&p, &dvector![1.0]).is_err());
}

#[test]
fn linear_instances_match_active_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..200 {
        let n = 4;
        let ineq = random_rows(&mut rng, 6, n);
        let eq = if rng.random_bool(0.3) {
            random_rows(&mut rng, 1, n)
        } else {
            vec![]
        };
        let p = build(n, &eq, &ineq);
        let sol = solve(&p, &opts()).unwrap();
        match active_set_oracle(&eq, &ineq) {
            Some(v) => {
                assert_eq!(sol.status, Status::Optimal);
                assert!(
                    (sol.objective - v).abs() <= 1e-6 * v.abs().max(1e-12) + 1e-12,
                    "solver {} vs oracle {v}",
                    sol.objective
                );
                let audit = residuals(&p, &sol.x).unwrap();
                assert!(audit.max_violation() <= 1e-8 * (1.0 + p.data_norm_inf()));
                checked += 1;
            }
            None => assert_eq!(sol.status, Status::PrimalInfeasible),
        }
    }
    assert!(checked > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn status_is_invariant_to_positive_row_scaling(seed in 0u64..10_000, scale_seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ineq = random_rows(&mut rng, 5, 3);
        let mut srng = ChaCha8Rng::seed_from_u64(scale_seed);
        let scaled: Vec<_> = ineq
            .iter()
            .map(|(a, b)| {
                let k = srng.random_range(0.01..100.0);
                (a * k, b * k)
            })
            .collect();
        let s1 = solve(&build(3, &[], &ineq), &opts()).unwrap();
        let s2 = solve(&build(3, &[], &scaled), &opts()).unwrap();
        prop_assert_eq!(s1.status, s2.status);
        if s1.is_optimal() {
            prop_assert!((s1.objective - s2.objective).abs() <= 1e-7 * (1.0 + s1.objective));
        }
    }

    #[test]
    fn adding_constraints_never_decreases_the_optimum(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, 6, 3);
        let mut prev = 0.0;
        for k in 1..=rows.len() {
            let sol = solve(&build(3, &[], &rows[..k]), &opts()).unwrap();
            if !sol.is_optimal() {
                prop_assert_eq!(sol.status, Status::PrimalInfeasible);
                break;
            }
            prop_assert!(sol.objective >= prev - 1e-9 * (1.0 + prev));
            prev = sol.objective;
        }
    }
}

#[test]
fn polish_lands_on_the_active_face() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut polished = 0;
    for _ in 0..50 {
        let ineq = random_rows(&mut rng, 5, 4);
        let p = build(4, &[], &ineq);
        let raw = solve(
            &p,
            &SolverOptions {
                polish: false,
                ..opts()
            },
        )
        .unwrap();
        let pol = solve(&p, &opts()).unwrap();
        assert_eq!(raw.status, pol.status);
        assert!(!raw.polished);
        if pol.status != Status::Optimal {
            continue;
        }
        polished += usize::from(pol.polished);
        assert!(pol.objective <= raw.objective + 1e-9 * (1.0 + raw.objective));
        assert!((pol.objective - raw.objective).abs() <= 1e-8 * (1.0 + raw.objective));
        assert!(residuals(&p, &pol.x).unwrap().max_violation() <= 1e-11 * (1.0 + pol.x.norm()));
    }
    assert!(polished > 0);
}
