//! Worst-case robust CI precoding for channel errors bounded by `‖e_i‖ ≤ δ_i`.
//!
//! Each sector constraint splits into the two branches `±Im − tanθ Re ≤ …`.
//! The supremum of each branch over the error ball is closed form, so the
//! robust constraint becomes one second-order cone per branch in `w₂`.

use cipre_conic::{solve, ConicProblem, SocConstraint};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::ci::{conic_options, map_status, Diagnostics, Status};
use crate::error::{ModelError, PrecodeError};
use crate::model::{
    from_real, lift_row, pi_matrix, rotate_channels, thresholds, to_real, ChannelSet, ModulationSpec, SymbolFrame, C64,
};
use crate::random::uniform_on_sphere;

#[derive(Debug, Clone)]
pub struct RobustScenario {
    /// Channel estimates `ĥ_i`.
    pub estimates: ChannelSet,
    /// Error radius `δ_i` per user.
    pub delta: Vec<f64>,
}

impl RobustScenario {
    pub fn uniform(estimates: ChannelSet, delta: f64) -> Self {
        let k = estimates.n_users();
        Self {
            estimates,
            delta: vec![delta; k],
        }
    }

    fn validate(&self, modulation: &ModulationSpec) -> Result<(), PrecodeError> {
        if modulation.order() < 4 {
            return Err(ModelError::Modulation("robust sector constraints need M ≥ 4".into()).into());
        }
        if self.delta.len() != self.estimates.n_users() {
            return Err(ModelError::Dimension(format!(
                "{} error radii for {} users",
                self.delta.len(),
                self.estimates.n_users()
            ))
            .into());
        }
        if self.delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(PrecodeError::Argument(
                "error radii must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Worst case of both branches for one user.
#[derive(Debug, Clone)]
pub struct WorstCase {
    /// Supremum of the branch left-hand sides; `≤ 0` means the branch holds
    /// for every admissible error.
    pub value: [f64; 2],
    /// Errors attaining the suprema, in the original (unrotated) channel
    /// coordinates.
    pub maximizer: [DVector<C64>; 2],
}

impl WorstCase {
    pub fn margin(&self) -> f64 {
        -self.value[0].max(self.value[1])
    }
}

#[derive(Debug, Clone)]
pub struct RobustSolution {
    pub w: DVector<C64>,
    pub power: f64,
    pub status: Status,
    pub worst_case: Vec<WorstCase>,
    pub diagnostics: Diagnostics,
}

impl RobustSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Rotated lifted estimates `(f̂_i, g_i)` per user.
fn lifted_estimates(rob: &RobustScenario, symbols: &SymbolFrame) -> Vec<(DVector<f64>, DVector<f64>)> {
    let rot = rotate_channels(&rob.estimates, symbols);
    (0..rot.n_users())
        .map(|i| lift_row(&rot.h.row(i).transpose()))
        .collect()
}

/// Adds both branches of user `i` over the first `n2` coordinates of a
/// problem with `dim` variables. `level` gives the threshold `√(ΓN0)` as a
/// constant plus a coefficient on an optional extra variable.
fn add_branches(
    p: &mut ConicProblem,
    f: &DVector<f64>,
    g: &DVector<f64>,
    delta: f64,
    tan: f64,
    level: (f64, Option<(usize, f64)>),
) {
    let n2 = f.len();
    let dim = p.dim();
    let pit = pi_matrix(n2 / 2).transpose();
    for sign in [1.0, -1.0] {
        // sign = +1: δ‖(Πᵀ − τI)w₂‖ ≤ (τf̂ − g)ᵀw₂ − √(ΓN0)τ
        // sign = −1: δ‖(Πᵀ + τI)w₂‖ ≤ (τf̂ + g)ᵀw₂ − √(ΓN0)τ
        let mut c = DVector::zeros(dim);
        c.rows_mut(0, n2).copy_from(&(f * tan - g * sign));
        if let Some((idx, coef)) = level.1 {
            c[idx] = -coef * tan;
        }
        let d = -level.0 * tan;
        if delta == 0.0 {
            p.add_le(-c, d);
        } else {
            let mut a = DMatrix::zeros(n2, dim);
            let blk = (&pit - DMatrix::identity(n2, n2) * (sign * tan)) * delta;
            a.view_mut((0, 0), (n2, n2)).copy_from(&blk);
            p.add_soc(SocConstraint::new(a, DVector::zeros(n2), c, d));
        }
    }
}

/// Minimum `‖w‖²` with both branches enforced for every error in the ball.
pub fn solve_robust_powermin(
    rob: &RobustScenario,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
) -> Result<RobustSolution, PrecodeError> {
    rob.validate(modulation)?;
    let k = rob.estimates.n_users();
    if gamma.len() != k {
        return Err(ModelError::Dimension(format!("{} targets for {k} users", gamma.len())).into());
    }
    let thr = thresholds(gamma, n0);
    let tan = modulation.tan_theta();
    let n2 = 2 * rob.estimates.n_tx();
    let mut p = ConicProblem::min_norm(n2);
    for (i, (f, g)) in lifted_estimates(rob, symbols).iter().enumerate() {
        add_branches(&mut p, f, g, rob.delta[i], tan, (thr[i], None));
    }
    finish(&p, rob, symbols, gamma, n0, modulation)
}

fn finish(
    p: &ConicProblem,
    rob: &RobustScenario,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
) -> Result<RobustSolution, PrecodeError> {
    let n = rob.estimates.n_tx();
    let sol = solve(p, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok(RobustSolution {
            w: DVector::zeros(n),
            power: f64::NAN,
            status,
            worst_case: Vec::new(),
            diagnostics,
        });
    }
    let w = from_real(&sol.x.rows(0, 2 * n).into_owned());
    Ok(RobustSolution {
        power: w.norm_squared(),
        worst_case: worst_case_margin(&w, rob, symbols, gamma, n0, modulation),
        w,
        status,
        diagnostics,
    })
}

/// Max-min common target under `‖w‖² ≤ P` with robust branches; returns
/// `(Γ_t, solution)`.
pub fn solve_robust_balance(
    rob: &RobustScenario,
    symbols: &SymbolFrame,
    n0: f64,
    power_budget: f64,
    modulation: &ModulationSpec,
) -> Result<(f64, RobustSolution), PrecodeError> {
    rob.validate(modulation)?;
    if !(power_budget > 0.0) {
        return Err(PrecodeError::Argument(format!(
            "power budget must be positive, got {power_budget}"
        )));
    }
    let k = rob.estimates.n_users();
    let tan = modulation.tan_theta();
    let n2 = 2 * rob.estimates.n_tx();
    let mut q = DVector::zeros(n2 + 1);
    q[n2] = -1.0;
    let mut p = ConicProblem::new(n2 + 1).with_linear(q);
    let mut sel = DMatrix::zeros(n2, n2 + 1);
    sel.view_mut((0, 0), (n2, n2)).fill_with_identity();
    p.add_soc(SocConstraint::new(
        sel,
        DVector::zeros(n2),
        DVector::zeros(n2 + 1),
        power_budget.sqrt(),
    ));
    let mut s_nonneg = DVector::zeros(n2 + 1);
    s_nonneg[n2] = -1.0;
    p.add_le(s_nonneg, 0.0);
    for (i, (f, g)) in lifted_estimates(rob, symbols).iter().enumerate() {
        add_branches(&mut p, f, g, rob.delta[i], tan, (0.0, Some((n2, n0.sqrt()))));
    }
    let sol = solve(&p, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok((
            0.0,
            RobustSolution {
                w: DVector::zeros(n2 / 2),
                power: f64::NAN,
                status,
                worst_case: Vec::new(),
                diagnostics,
            },
        ));
    }
    let s = sol.x[n2].max(0.0);
    let gamma_t = s * s;
    let w = from_real(&sol.x.rows(0, n2).into_owned());
    // margins against the achieved level; a zero level is reported against
    // a vanishing threshold
    let gamma = vec![gamma_t.max(f64::MIN_POSITIVE); k];
    Ok((
        gamma_t,
        RobustSolution {
            power: w.norm_squared(),
            worst_case: worst_case_margin(&w, rob, symbols, &gamma, n0, modulation),
            w,
            status,
            diagnostics,
        },
    ))
}

/// Closed-form suprema of both branches over `‖e_i‖ ≤ δ_i`, with the
/// maximizing errors.
pub fn worst_case_margin(
    w: &DVector<C64>,
    rob: &RobustScenario,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
) -> Vec<WorstCase> {
    let n = w.len();
    let tan = modulation.tan_theta();
    let w2 = to_real(w);
    let w1 = pi_matrix(n).transpose() * &w2;
    let phi1 = symbols.phases[0];
    lifted_estimates(rob, symbols)
        .iter()
        .enumerate()
        .map(|(i, (f, _))| {
            let delta = rob.delta[i];
            let t = (gamma[i] * n0).sqrt();
            let im = f.dot(&w1);
            let re = f.dot(&w2);
            let dir1 = &w1 - &w2 * tan;
            let dir2 = -&w1 - &w2 * tan;
            let v1 = im - tan * re + delta * dir1.norm() + t * tan;
            let v2 = -im - tan * re + delta * dir2.norm() + t * tan;
            let back = C64::from_polar(1.0, symbols.phases[i] - phi1);
            let to_error = |d: &DVector<f64>| -> DVector<C64> {
                let norm = d.norm();
                if norm == 0.0 || delta == 0.0 {
                    return DVector::zeros(n);
                }
                let e = d * (delta / norm);
                DVector::from_fn(n, |k, _| C64::new(e[k], e[n + k]) * back)
            };
            WorstCase {
                value: [v1, v2],
                maximizer: [to_error(&dir1), to_error(&dir2)],
            }
        })
        .collect()
}

/// Branch values for the true channel `ĥ_i + e_i`, evaluated with complex
/// arithmetic.
pub fn branch_values(
    w: &DVector<C64>,
    h_true: &DVector<C64>,
    phase_shift: f64,
    threshold: f64,
    modulation: &ModulationSpec,
) -> [f64; 2] {
    let tan = modulation.tan_theta();
    let z: C64 = h_true.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<C64>() * C64::from_polar(1.0, phase_shift);
    [
        z.im - tan * z.re + threshold * tan,
        -z.im - tan * z.re + threshold * tan,
    ]
}

/// Largest branch values over `samples` random errors on each sphere
/// `‖e_i‖ = δ_i`.
pub fn sampled_worst_case<R: Rng + ?Sized>(
    w: &DVector<C64>,
    rob: &RobustScenario,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
    samples: usize,
    rng: &mut R,
) -> Vec<[f64; 2]> {
    let n = w.len();
    let phi1 = symbols.phases[0];
    (0..rob.estimates.n_users())
        .map(|i| {
            let h_hat = rob.estimates.user(i);
            let shift = phi1 - symbols.phases[i];
            let t = (gamma[i] * n0).sqrt();
            let mut best = [f64::NEG_INFINITY; 2];
            for _ in 0..samples {
                let e = uniform_on_sphere(rng, n, rob.delta[i]);
                let v = branch_values(w, &(&h_hat + e), shift, t, modulation);
                best[0] = best[0].max(v[0]);
                best[1] = best[1].max(v[1]);
            }
            best
        })
        .collect()
}
