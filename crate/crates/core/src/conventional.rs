//! SINR-constrained baselines that treat all interference as harmful.

use cipre_conic::{solve, ConicProblem, SocConstraint};
use nalgebra::{DMatrix, DVector};

use crate::ci::{conic_options, map_status, Diagnostics, Status};
use crate::error::{ModelError, PrecodeError};
use crate::model::{from_real, lift_row, ChannelSet, PrecoderSet, C64};

#[derive(Debug, Clone)]
pub struct ConventionalSolution {
    pub precoders: PrecoderSet,
    /// `Σ_k ‖t_k‖²`.
    pub power: f64,
    /// Achieved SINR per user.
    pub sinr: Vec<f64>,
    pub status: Status,
    pub diagnostics: Diagnostics,
}

impl ConventionalSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// `|h_iᵀt_i|² / (Σ_{k≠i} |h_iᵀt_k|² + N0)` for every user.
pub fn achieved_sinr(channels: &ChannelSet, precoders: &PrecoderSet, n0: f64) -> Vec<f64> {
    (0..channels.n_users())
        .map(|i| {
            let gains: Vec<f64> = precoders.t.iter().map(|t| channels.apply(i, t).norm_sqr()).collect();
            let interference: f64 = gains.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, g)| g).sum();
            gains[i] / (interference + n0)
        })
        .collect()
}

/// Minimum `Σ‖t_k‖²` subject to `SINR_i ≥ Γ_i`, in the SOC form
/// `√(1 + 1/Γ_i) Re(h_iᵀt_i) ≥ ‖(h_iᵀt_1, …, h_iᵀt_K, √N0)‖`,
/// `Im(h_iᵀt_i) = 0`.
pub fn solve_conventional_powermin(
    channels: &ChannelSet,
    gamma: &[f64],
    n0: f64,
) -> Result<ConventionalSolution, PrecodeError> {
    let (k, n) = (channels.n_users(), channels.n_tx());
    if gamma.len() != k {
        return Err(ModelError::Dimension(format!("{} targets for {k} users", gamma.len())).into());
    }
    if !(n0 > 0.0) || gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(PrecodeError::Argument(
            "targets and noise power must be positive".into(),
        ));
    }
    let n2 = 2 * n;
    let dim = n2 * k;
    let mut p = ConicProblem::min_norm(dim);
    for i in 0..k {
        let (f, g) = lift_row(&channels.user(i));
        // rows (Re, Im) of h_iᵀt_k for every k, then the noise entry
        let mut a = DMatrix::zeros(2 * k + 1, dim);
        for j in 0..k {
            a.view_mut((2 * j, n2 * j), (1, n2)).copy_from(&f.transpose());
            a.view_mut((2 * j + 1, n2 * j), (1, n2)).copy_from(&g.transpose());
        }
        let mut b = DVector::zeros(2 * k + 1);
        b[2 * k] = n0.sqrt();
        let mut c = DVector::zeros(dim);
        c.rows_mut(n2 * i, n2).copy_from(&(&f * (1.0 + 1.0 / gamma[i]).sqrt()));
        p.add_soc(SocConstraint::new(a, b, c, 0.0));
        let mut im = DVector::zeros(dim);
        im.rows_mut(n2 * i, n2).copy_from(&g);
        p.add_eq(im, 0.0);
    }
    let sol = solve(&p, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok(ConventionalSolution {
            precoders: PrecoderSet {
                t: vec![DVector::zeros(n); k],
            },
            power: f64::NAN,
            sinr: vec![0.0; k],
            status,
            diagnostics,
        });
    }
    let precoders = PrecoderSet {
        t: (0..k)
            .map(|j| from_real(&sol.x.rows(n2 * j, n2).into_owned()))
            .collect(),
    };
    Ok(ConventionalSolution {
        power: precoders.total_power(),
        sinr: achieved_sinr(channels, &precoders, n0),
        precoders,
        status,
        diagnostics,
    })
}

/// Largest common target whose conventional minimum power fits the budget,
/// to relative bracket width `tol`, starting from `[0, P max‖h_i‖²/N0]`.
///
/// Scaling every `t_k` by `s ≤ 1` keeps each SINR at least `s²` times its
/// value, so `p(Γ)/Γ` is nondecreasing. A solve at `Γ` with power `p` then
/// brackets the answer by `Γ` and `Γ P/p` on opposite sides, and the next
/// target is a log-log secant step kept strictly inside the bracket.
pub fn solve_conventional_balance(
    channels: &ChannelSet,
    n0: f64,
    power_budget: f64,
    tol: f64,
) -> Result<(f64, Option<ConventionalSolution>), PrecodeError> {
    if !(power_budget > 0.0) {
        return Err(PrecodeError::Argument(format!(
            "power budget must be positive, got {power_budget}"
        )));
    }
    let k = channels.n_users();
    let mut lo = 0.0;
    let mut hi = power_budget * channels.max_norm_sq() / n0;
    let min_norm = (0..k).map(|i| channels.norm_sq(i)).fold(f64::INFINITY, f64::min);
    // interference-free single-user level split K ways: usually close
    let mut gamma = power_budget * min_norm / (n0 * k as f64);
    let mut solved: Vec<(f64, ConventionalSolution)> = Vec::new();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for _ in 0..200 {
        if hi - lo <= tol * hi || hi < 1e-12 * power_budget / n0 {
            break;
        }
        if !(gamma > lo && gamma < hi) {
            gamma = if lo > 0.0 { (lo * hi).sqrt() } else { 0.25 * hi };
        }
        let sol = solve_conventional_powermin(channels, &vec![gamma; k], n0)?;
        let p = if sol.is_feasible() { sol.power } else { f64::INFINITY };
        if p <= power_budget {
            lo = gamma;
            hi = hi.min(gamma * power_budget / p);
        } else {
            hi = gamma;
            if p.is_finite() {
                lo = lo.max(gamma * power_budget / p);
            }
        }
        if p.is_finite() {
            points.push((gamma.ln(), p.ln()));
            solved.push((gamma, sol));
        }
        gamma = match points.as_slice() {
            [.., (g0, p0), (g1, p1)] if (g1 - g0).abs() > 1e-14 && (p1 - p0).abs() > 1e-14 => {
                let slope = (p1 - p0) / (g1 - g0);
                (g1 + (power_budget.ln() - p1) / slope).exp()
            }
            [.., (g1, p1)] => (g1 + power_budget.ln() - p1).exp(),
            [] => f64::NAN,
        };
        // stay clear of the bracket ends so both sides keep shrinking
        let margin = 0.25 * tol * hi;
        if lo + margin < hi - margin {
            gamma = gamma.clamp(lo + margin, hi - margin);
        }
    }
    // `lo` is certified even when it was never solved for directly; scale
    // the nearest solve at or above it down to it
    let best = solved
        .into_iter()
        .filter(|(g, _)| *g >= lo && lo > 0.0)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(g, mut sol)| {
            let s = (lo / g).sqrt();
            for t in &mut sol.precoders.t {
                *t *= C64::from(s);
            }
            sol.power = sol.precoders.total_power();
            sol.sinr = achieved_sinr(channels, &sol.precoders, n0);
            sol
        });
    Ok((lo, best))
}
