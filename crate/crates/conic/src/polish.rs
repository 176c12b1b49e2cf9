//! Active-set refinement of interior-point optima for linearly constrained
//! least-norm problems.
//!
//! With `½‖x‖² + qᵀx` and only linear rows, the optimum solves the KKT
//! system of its active rows exactly. Guessing that set from the
//! interior-point iterate (multiplier larger than slack) and solving the
//! reduced system recovers the optimum to rounding error. The guess is kept
//! only if it is primal feasible and its multipliers have the right sign.

use nalgebra::{DMatrix, DVector};

use crate::problem::{ConicProblem, Quadratic};
use crate::solver::{ConicSolution, Duals, Status};

pub(crate) fn polish(problem: &ConicProblem, sol: &ConicSolution) -> Option<ConicSolution> {
    if sol.status != Status::Optimal || problem.quadratic != Quadratic::Identity || !problem.socs.is_empty() {
        return None;
    }
    let x0 = &sol.x;
    let active: Vec<usize> = (0..problem.inequalities.len())
        .filter(|&j| {
            let row = &problem.inequalities[j];
            let slack = row.rhs - row.coeffs.dot(x0);
            sol.duals.inequalities[j] > slack
        })
        .collect();
    let rows: Vec<_> = problem
        .equalities
        .iter()
        .chain(active.iter().map(|&j| &problem.inequalities[j]))
        .collect();
    let n = problem.dim();
    let q = &problem.linear;
    let (x, nu) = if rows.is_empty() {
        (-q, DVector::zeros(0))
    } else {
        let c = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].coeffs[j]);
        let d = DVector::from_fn(rows.len(), |i, _| rows[i].rhs);
        let gram = &c * c.transpose();
        let rhs = -(&c * q) - &d;
        let svd = gram.svd(true, true);
        let cutoff = 1e-13 * svd.singular_values.max();
        let nu = svd.solve(&rhs, cutoff).ok()?;
        (-q - c.transpose() * &nu, nu)
    };

    let scale = 1.0 + x.amax();
    let row_scale = |a: &DVector<f64>, b: f64| a.amax() * scale + b.abs();
    let eq_ok = problem
        .equalities
        .iter()
        .all(|r| (r.coeffs.dot(&x) - r.rhs).abs() <= 1e-11 * row_scale(&r.coeffs, r.rhs));
    let le_ok = problem
        .inequalities
        .iter()
        .all(|r| r.coeffs.dot(&x) - r.rhs <= 1e-11 * row_scale(&r.coeffs, r.rhs));
    let n_eq = problem.equalities.len();
    let mult_tol = 1e-9 * (1.0 + nu.amax());
    let sign_ok = nu.iter().skip(n_eq).all(|&v| v >= -mult_tol);
    let objective = problem.objective(&x);
    let no_worse = objective <= sol.objective + 1e-9 * (1.0 + sol.objective.abs());
    if !(eq_ok && le_ok && sign_ok && no_worse) {
        return None;
    }

    let mut inequalities = DVector::zeros(problem.inequalities.len());
    for (k, &j) in active.iter().enumerate() {
        inequalities[j] = nu[n_eq + k].max(0.0);
    }
    Some(ConicSolution {
        x,
        objective,
        duals: Duals {
            equalities: nu.rows(0, n_eq).into_owned(),
            inequalities,
            socs: Vec::new(),
        },
        polished: true,
        ..sol.clone()
    })
}
