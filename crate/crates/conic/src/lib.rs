//! Dense solver for small second-order cone programs with a quadratic
//! objective:
//!
//! ```text
//! minimize    ½‖F x‖² + qᵀx
//! subject to  E x = e
//!             G x ≤ h
//!             ‖A_j x + b_j‖ ≤ c_jᵀx + d_j
//! ```
//!
//! The quadratic term is moved into an epigraph cone and the resulting
//! linear-objective conic program is solved with a homogeneous self-dual
//! interior-point method, so infeasible problems terminate with a dual
//! certificate rather than a diverging iterate.
//!
//! ```
//! use cipre_conic::{solve, ConicProblem, SolverOptions, Status};
//! use nalgebra::dvector;
//!
//! // minimize ½‖x‖² subject to x₁ ≥ 3
//! let mut p = ConicProblem::min_norm(2);
//! p.add_le(dvector![-1.0, 0.0], -3.0);
//! let sol = solve(&p, &SolverOptions::default()).unwrap();
//! assert_eq!(sol.status, Status::Optimal);
//! assert!((sol.objective - 4.5).abs() < 1e-8);
//! ```

mod cone;
mod error;
mod polish;
mod problem;
mod residuals;
mod solver;

pub use error::ConicError;
pub use problem::{ConicProblem, LinearRow, Quadratic, SocConstraint};
pub use residuals::{feasibility_margin, residuals, ResidualReport};
pub use solver::{solve, Certificate, ConicSolution, Duals, Residuals, SolverOptions, Status};
