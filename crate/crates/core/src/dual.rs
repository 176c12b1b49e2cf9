//! Dual of the relaxed sector problem and its gradient-projection solver.
//!
//! With constraints `b_jᵀw₂ + c_j ≤ 0`, the dual is the bound-constrained
//! quadratic `min f(λ) = ¼‖Bλ‖² − cᵀλ` over `λ ≥ 0`; the primal optimum is
//! `−min f` and is attained at `w₂ = −Bλ/2`. The gradient entry `∇f_j` is
//! exactly the slack of constraint `j` at that point.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ci::{rotated_margins, solve_relaxed_direct, Diagnostics, Method, MulticastSolution, Status};
use crate::error::PrecodeError;
use crate::model::{from_real, RealLifting, RotatedChannels};

#[derive(Debug, Clone)]
pub struct DualProblem {
    /// `BᵀB / 2`.
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub b: DMatrix<f64>,
    /// Dual values above this are treated as divergence.
    pub divergence_cap: f64,
    n_tx: usize,
    n_users: usize,
}

impl DualProblem {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn value(&self, lambda: &DVector<f64>) -> f64 {
        0.5 * lambda.dot(&(&self.q * lambda)) - self.c.dot(lambda)
    }

    pub fn gradient(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.q * lambda - &self.c
    }

    /// Largest eigenvalue of `Q` by power iteration.
    pub fn lipschitz(&self) -> f64 {
        let n = self.dim();
        let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut est = 0.0;
        for _ in 0..200 {
            let qv = &self.q * &v;
            let norm = qv.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = v.dot(&qv);
            v = qv / norm;
            if (next - est).abs() <= 1e-10 * next.abs() {
                est = next;
                break;
            }
            est = next;
        }
        // Rayleigh quotients approach from below; pad so 1/L stays a safe step
        est.max(self.q.diagonal().max()) * 1.000001
    }
}

pub fn build_dual(lift: &RealLifting) -> DualProblem {
    let q = lift.b.transpose() * &lift.b * 0.5;
    let max_gn0 = lift.thresholds.iter().map(|t| t * t).fold(0.0, f64::max);
    DualProblem {
        q,
        c: lift.c.clone(),
        b: lift.b.clone(),
        divergence_cap: 1e8 * max_gn0,
        n_tx: lift.n_tx(),
        n_users: lift.n_users(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepRule {
    /// Every line search starts from `1/L`.
    InverseLipschitz,
    /// Line searches start from the Barzilai–Borwein step of the previous
    /// move, falling back to `1/L` when curvature is not positive.
    BarzilaiBorwein,
}

#[derive(Debug, Clone)]
pub struct GpOptions {
    pub step: StepRule,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    /// Stop when `‖projected gradient‖ ≤ tol (1 + ‖c‖)`.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            step: StepRule::BarzilaiBorwein,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            tol: 1e-7,
            max_iter: 20_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GpVerdict {
    Converged,
    /// Dual value passed the cap: the primal is infeasible.
    Divergence,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: DVector<f64>,
    /// Lagrange dual value `−f(λ)`; equals the primal power at optimum.
    pub dual_value: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub verdict: GpVerdict,
    /// Dual values after each accepted step, when requested.
    pub trace: Vec<f64>,
}

fn projected_gradient_norm(lambda: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    lambda
        .iter()
        .zip(grad.iter())
        .map(|(&l, &g)| if l > 0.0 { g * g } else { g.min(0.0).powi(2) })
        .sum::<f64>()
        .sqrt()
}

enum Subspace {
    Stay,
    Moved(DVector<f64>, f64),
    /// A nonnegative direction with `Bd = 0` and `cᵀd > 0`.
    Ray,
}

/// Minimization over the free coordinates with the others held at zero.
/// The nonsingular part of `Q_FF` gets a Newton step; a gradient component
/// in its null space is followed as far as the orthant allows, and if
/// nothing stops it the dual is unbounded.
fn subspace_step(dual: &DualProblem, lambda: &DVector<f64>, grad: &DVector<f64>, f: f64, sigma: f64) -> Subspace {
    let free: Vec<usize> = (0..lambda.len()).filter(|&j| lambda[j] > 0.0).collect();
    let m = free.len();
    if m == 0 {
        return Subspace::Stay;
    }
    let q_ff = DMatrix::from_fn(m, m, |a, b| dual.q[(free[a], free[b])]);
    let g_f = DVector::from_fn(m, |a, _| grad[free[a]]);
    let eig = q_ff.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut newton = DVector::zeros(m);
    let mut null = DVector::zeros(m);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let coef = v.dot(&g_f);
        if ev > 1e-10 * top {
            newton -= v * (coef / ev);
        } else {
            null -= v * coef;
        }
    }
    let embed = |d: &DVector<f64>, a: f64| {
        let mut out = lambda.clone();
        for (k, &j) in free.iter().enumerate() {
            out[j] = (out[j] + a * d[k]).max(0.0);
        }
        out
    };
    if null.norm() > 1e-9 * (1.0 + g_f.norm()) {
        // f is linear along the ray; walk to the first coordinate that hits zero
        let reach = free
            .iter()
            .zip(null.iter())
            .filter(|(_, &d)| d < 0.0)
            .map(|(&j, &d)| -lambda[j] / d)
            .fold(f64::INFINITY, f64::min);
        if reach.is_infinite() {
            return Subspace::Ray;
        }
        let next = embed(&null, reach);
        let f_next = dual.value(&next);
        return if f_next < f {
            Subspace::Moved(next, f_next)
        } else {
            Subspace::Stay
        };
    }
    let mut a = 1.0;
    for _ in 0..30 {
        let next = embed(&newton, a);
        let f_next = dual.value(&next);
        if f_next < f && f_next <= f + sigma * grad.dot(&(&next - lambda)) {
            return Subspace::Moved(next, f_next);
        }
        a *= 0.5;
    }
    Subspace::Stay
}

/// Projected gradient with Armijo backtracking along the projection arc,
/// each step followed by a free-set subspace step, starting from `λ = 0`.
pub fn solve_dual_gp(dual: &DualProblem, options: &GpOptions) -> DualState {
    let n = dual.dim();
    let l = dual.lipschitz();
    let base_step = if l > 0.0 { 1.0 / l } else { 1.0 };
    let tol = options.tol * (1.0 + dual.c.norm());

    let mut lambda = DVector::zeros(n);
    let mut q_lambda = DVector::zeros(n);
    let mut grad = -&dual.c;
    let mut f = 0.0;
    let mut step = base_step;
    let mut trace = Vec::new();
    let mut trial = DVector::zeros(n);
    let mut q_trial = DVector::zeros(n);

    let mut pg = projected_gradient_norm(&lambda, &grad);
    let mut iterations = 0;
    let mut verdict = GpVerdict::MaxIterations;
    if pg <= tol {
        verdict = GpVerdict::Converged;
    }
    while verdict == GpVerdict::MaxIterations && iterations < options.max_iter {
        iterations += 1;
        let mut a = step;
        let mut accepted = false;
        let mut f_trial = f;
        for _ in 0..60 {
            for j in 0..n {
                trial[j] = (lambda[j] - a * grad[j]).max(0.0);
            }
            q_trial.gemv(1.0, &dual.q, &trial, 0.0);
            f_trial = 0.5 * trial.dot(&q_trial) - dual.c.dot(&trial);
            let decrease = grad.dot(&(&trial - &lambda));
            if f_trial <= f + options.sufficient_decrease * decrease {
                accepted = true;
                break;
            }
            a *= options.backtrack;
        }
        if !accepted {
            // no progress possible at machine precision
            break;
        }
        let s = &trial - &lambda;
        let y = &q_trial - &q_lambda;
        std::mem::swap(&mut lambda, &mut trial);
        std::mem::swap(&mut q_lambda, &mut q_trial);
        f = f_trial;
        grad = &q_lambda - &dual.c;
        if options.record_trace {
            trace.push(-f);
        }
        step = match options.step {
            StepRule::InverseLipschitz => base_step,
            StepRule::BarzilaiBorwein => {
                let sy = s.dot(&y);
                if sy > 0.0 {
                    (s.norm_squared() / sy).clamp(base_step * 1e-6, base_step * 1e12)
                } else {
                    base_step * 1e12
                }
            }
        };
        match subspace_step(dual, &lambda, &grad, f, options.sufficient_decrease) {
            Subspace::Ray => {
                verdict = GpVerdict::Divergence;
                f = f.min(-dual.divergence_cap);
                break;
            }
            Subspace::Moved(next, f_next) => {
                lambda = next;
                q_lambda.gemv(1.0, &dual.q, &lambda, 0.0);
                f = f_next;
                grad = &q_lambda - &dual.c;
                if options.record_trace {
                    trace.push(-f);
                }
            }
            Subspace::Stay => {}
        }
        if -f > dual.divergence_cap {
            verdict = GpVerdict::Divergence;
            break;
        }
        pg = projected_gradient_norm(&lambda, &grad);
        if pg <= tol {
            verdict = GpVerdict::Converged;
        }
    }
    DualState {
        lambda,
        dual_value: -f,
        pg_norm: pg,
        iterations,
        verdict,
        trace,
    }
}

/// Stationary point `Q⁻¹c` of the unconstrained dual, when `Q` is
/// nonsingular (needs `K ≤ N`).
pub fn closed_form_interior(dual: &DualProblem) -> Option<DVector<f64>> {
    if dual.n_users > dual.n_tx {
        return None;
    }
    let chol = dual.q.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    if !(lo > 1e-7 * hi) {
        return None;
    }
    Some(chol.solve(&dual.c))
}

/// `w₂ = −Bλ/2`, checked against every sector; a point that misses a
/// sector by more than `1e−6 √(Γ_i N0)` is replaced by a direct solve.
pub fn recover_w(
    lambda: &DVector<f64>,
    dual: &DualProblem,
    rot: &RotatedChannels,
    lift: &RealLifting,
    method: Method,
) -> Result<MulticastSolution, PrecodeError> {
    let w2 = -(&dual.b * lambda) * 0.5;
    let w = from_real(&w2);
    let margins = rotated_margins(rot, &w, &lift.thresholds, &lift.modulation);
    let ok = margins.iter().zip(&lift.thresholds).all(|(m, t)| m.slack >= -1e-6 * t);
    if ok {
        return Ok(MulticastSolution {
            power: w.norm_squared(),
            w,
            status: Status::Feasible,
            method,
            margins,
            diagnostics: Diagnostics::default(),
        });
    }
    let mut sol = solve_relaxed_direct(rot, lift)?;
    sol.method = method;
    sol.diagnostics.refined = true;
    Ok(sol)
}

/// Full dual path: the closed form when it is strictly positive, otherwise
/// gradient projection, then recovery.
pub fn solve_dual_path(
    rot: &RotatedChannels,
    lift: &RealLifting,
    options: &GpOptions,
) -> Result<(MulticastSolution, Option<DualState>), PrecodeError> {
    let start = Instant::now();
    let dual = build_dual(lift);
    if let Some(l) = closed_form_interior(&dual) {
        if l.iter().all(|&v| v > 0.0) {
            let mut sol = recover_w(&l, &dual, rot, lift, Method::ClosedFormInterior)?;
            sol.diagnostics.solve_time = start.elapsed();
            return Ok((sol, None));
        }
    }
    let state = solve_dual_gp(&dual, options);
    let mut sol = match state.verdict {
        GpVerdict::Divergence => {
            MulticastSolution::unsolved(lift.n_tx(), Status::Infeasible, Method::DualGp, Diagnostics::default())
        }
        _ => recover_w(&state.lambda, &dual, rot, lift, Method::DualGp)?,
    };
    sol.diagnostics.iterations = state.iterations;
    sol.diagnostics.solve_time = start.elapsed();
    Ok((sol, Some(state)))
}
