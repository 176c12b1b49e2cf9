//! Constraint audits that evaluate a candidate point without iterating.

use nalgebra::DVector;

use crate::error::ConicError;
use crate::problem::{ConicProblem, SocConstraint};
use crate::solver::{solve, SolverOptions, Status};

/// Per-row and per-cone constraint violations at a point.
///
/// Every entry is a violation amount: `0` when the constraint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub objective: f64,
    /// `|aᵀx − rhs|` per equality row.
    pub equalities: Vec<f64>,
    /// `max(aᵀx − rhs, 0)` per inequality row.
    pub inequalities: Vec<f64>,
    /// `max(‖Ax + b‖ − cᵀx − d, 0)` per cone.
    pub socs: Vec<f64>,
}

impl ResidualReport {
    pub fn max_violation(&self) -> f64 {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .chain(&self.socs)
            .fold(0.0, |m: f64, v| m.max(*v))
    }
}

pub fn residuals(problem: &ConicProblem, x: &DVector<f64>) -> Result<ResidualReport, ConicError> {
    problem.validate()?;
    if x.len() != problem.dim() {
        return Err(ConicError::Dimension(format!(
            "point has length {}, problem has {} variables",
            x.len(),
            problem.dim()
        )));
    }
    Ok(ResidualReport {
        objective: problem.objective(x),
        equalities: problem
            .equalities
            .iter()
            .map(|r| (r.coeffs.dot(x) - r.rhs).abs())
            .collect(),
        inequalities: problem
            .inequalities
            .iter()
            .map(|r| (r.coeffs.dot(x) - r.rhs).max(0.0))
            .collect(),
        socs: problem.socs.iter().map(|s| s.excess(x).max(0.0)).collect(),
    })
}

/// Phase-one margin: the smallest uniform relaxation `t ≥ −1` of every
/// inequality and cone constraint that admits a feasible point (equalities
/// are kept exact). Positive means the original problem is infeasible.
///
/// Returns `None` when even the relaxed problem is infeasible, which can
/// only happen through inconsistent equalities.
pub fn feasibility_margin(problem: &ConicProblem, options: &SolverOptions) -> Result<Option<f64>, ConicError> {
    problem.validate()?;
    let n = problem.dim();
    let lift = |v: &DVector<f64>, last: f64| {
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(v);
        out[n] = last;
        out
    };
    let mut objective = DVector::zeros(n + 1);
    objective[n] = 1.0;
    let mut p1 = ConicProblem::new(n + 1).with_linear(objective);
    for row in &problem.equalities {
        p1.add_eq(lift(&row.coeffs, 0.0), row.rhs);
    }
    for row in &problem.inequalities {
        p1.add_le(lift(&row.coeffs, -1.0), row.rhs);
    }
    for soc in &problem.socs {
        let mut a = nalgebra::DMatrix::zeros(soc.a.nrows(), n + 1);
        a.view_mut((0, 0), (soc.a.nrows(), n)).copy_from(&soc.a);
        p1.add_soc(SocConstraint::new(a, soc.b.clone(), lift(&soc.c, 1.0), soc.d));
    }
    let mut bound = DVector::zeros(n + 1);
    bound[n] = -1.0;
    p1.add_le(bound, 1.0);
    let sol = solve(&p1, options)?;
    Ok(match sol.status {
        Status::Optimal => Some(sol.x[n]),
        _ => None,
    })
}
