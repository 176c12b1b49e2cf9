//! Constructive-interference precoders with perfect channel knowledge.

use std::time::Duration;

use cipre_conic::{solve, ConicProblem, ConicSolution, Quadratic, SocConstraint, SolverOptions, Status as ConicStatus};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ModelError, PrecodeError};
use crate::model::{
    from_real, instantaneous_power, lift_row, sector_margins, thresholds, ChannelSet, ModulationSpec, PrecoderSet,
    RealLifting, RotatedChannels, SectorMargins, SymbolFrame, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Feasible,
    Infeasible,
    /// The solver stopped without a verdict.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    DirectConic,
    DualGp,
    ClosedFormInterior,
    Broadcast,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub solve_time: Duration,
    /// The dual-recovered point violated a sector and was replaced by a
    /// direct conic solve.
    pub refined: bool,
    pub reduced_accuracy: bool,
    /// Normalized residual of the infeasibility certificate, when one was
    /// produced.
    pub certificate_residual: Option<f64>,
}

impl Diagnostics {
    pub(crate) fn from_conic(sol: &ConicSolution) -> Self {
        Self {
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            refined: false,
            reduced_accuracy: sol.reduced_accuracy,
            certificate_residual: sol.certificate.as_ref().map(|c| c.residual),
        }
    }
}

/// Common vector `w` serving every user through rotated copies.
#[derive(Debug, Clone)]
pub struct MulticastSolution {
    pub w: DVector<C64>,
    /// `‖w‖²`.
    pub power: f64,
    pub status: Status,
    pub method: Method,
    pub margins: Vec<SectorMargins>,
    pub diagnostics: Diagnostics,
}

impl MulticastSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    pub(crate) fn unsolved(n_tx: usize, status: Status, method: Method, diagnostics: Diagnostics) -> Self {
        Self {
            w: DVector::zeros(n_tx),
            power: f64::NAN,
            status,
            method,
            margins: Vec::new(),
            diagnostics,
        }
    }
}

pub(crate) fn conic_options() -> SolverOptions {
    SolverOptions::default()
}

pub(crate) fn map_status(s: ConicStatus) -> Status {
    match s {
        ConicStatus::Optimal => Status::Feasible,
        ConicStatus::PrimalInfeasible => Status::Infeasible,
        ConicStatus::DualInfeasible | ConicStatus::MaxIterations => Status::Failed,
    }
}

/// Margins of `w` against rotated channels.
pub fn rotated_margins(
    rot: &RotatedChannels,
    w: &DVector<C64>,
    thresholds: &[f64],
    modulation: &ModulationSpec,
) -> Vec<SectorMargins> {
    (0..rot.n_users())
        .map(|i| sector_margins(rot.apply(i, w), thresholds[i], modulation))
        .collect()
}

/// Solves a problem over `w₂ = to_real(w)` and packages the result.
fn finish_multicast(
    problem: &ConicProblem,
    rot: &RotatedChannels,
    thr: &[f64],
    modulation: &ModulationSpec,
) -> Result<MulticastSolution, PrecodeError> {
    let sol = solve(problem, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok(MulticastSolution::unsolved(
            rot.n_tx(),
            status,
            Method::DirectConic,
            diagnostics,
        ));
    }
    let w = from_real(&sol.x.rows(0, 2 * rot.n_tx()).into_owned());
    Ok(MulticastSolution {
        power: w.norm_squared(),
        margins: rotated_margins(rot, &w, thr, modulation),
        w,
        status,
        method: Method::DirectConic,
        diagnostics,
    })
}

fn check_targets(k: usize, gamma: &[f64], n0: f64) -> Result<(), PrecodeError> {
    if gamma.len() != k {
        return Err(ModelError::Dimension(format!("{} targets for {k} users", gamma.len())).into());
    }
    if !(n0 > 0.0) || gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(PrecodeError::Argument(
            "targets and noise power must be positive".into(),
        ));
    }
    Ok(())
}

/// Zero-phase-shift form: `Im(h̃_iᵀw) = 0`, `Re(h̃_iᵀw) ≥ √(Γ_i N0)`.
pub fn solve_strict(
    rot: &RotatedChannels,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
) -> Result<MulticastSolution, PrecodeError> {
    check_targets(rot.n_users(), gamma, n0)?;
    let thr = thresholds(gamma, n0);
    let mut p = ConicProblem::min_norm(2 * rot.n_tx());
    for i in 0..rot.n_users() {
        let (f, g) = lift_row(&rot.h.row(i).transpose());
        p.add_eq(g, 0.0);
        p.add_le(-f, -thr[i]);
    }
    finish_multicast(&p, rot, &thr, modulation)
}

/// Relaxed sector form: rows `b_jᵀw₂ + c_j ≤ 0`.
pub fn solve_relaxed_direct(rot: &RotatedChannels, lift: &RealLifting) -> Result<MulticastSolution, PrecodeError> {
    let mut p = ConicProblem::min_norm(2 * lift.n_tx());
    for j in 0..lift.b.ncols() {
        p.add_le(lift.b.column(j).into_owned(), -lift.c[j]);
    }
    finish_multicast(&p, rot, &lift.thresholds, &lift.modulation)
}

/// BPSK half-plane form `Re(h̃_iᵀw) ≥ √(Γ_i N0)`.
pub fn solve_bpsk(rot: &RotatedChannels, gamma: &[f64], n0: f64) -> Result<MulticastSolution, PrecodeError> {
    check_targets(rot.n_users(), gamma, n0)?;
    let thr = thresholds(gamma, n0);
    let mut p = ConicProblem::min_norm(2 * rot.n_tx());
    for i in 0..rot.n_users() {
        let (f, _) = lift_row(&rot.h.row(i).transpose());
        p.add_le(-f, -thr[i]);
    }
    finish_multicast(&p, rot, &thr, &ModulationSpec::bpsk())
}

/// QPSK per-axis form: signed real and imaginary parts of `h_iᵀ w e^{jφ_1}`
/// each at least `√(Γ_i N0 / 2)`.
pub fn solve_qpsk_axis(
    channels: &ChannelSet,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
) -> Result<MulticastSolution, PrecodeError> {
    check_targets(channels.n_users(), gamma, n0)?;
    let modulation = ModulationSpec::qpsk();
    let phi1 = symbols.phases[0];
    let mut p = ConicProblem::min_norm(2 * channels.n_tx());
    for i in 0..channels.n_users() {
        let a = channels.user(i) * C64::from_polar(1.0, phi1);
        let (f, g) = lift_row(&a);
        let half = (gamma[i] * n0 / 2.0).sqrt();
        let d = symbols.symbol(i);
        p.add_le(-f * d.re.signum(), -half);
        p.add_le(-g * d.im.signum(), -half);
    }
    let rot = crate::model::rotate_channels(channels, symbols);
    finish_multicast(&p, &rot, &thresholds(gamma, n0), &modulation)
}

/// `t_k = w e^{j(φ_1 − φ_k)} / K`.
pub fn split_precoders(w: &DVector<C64>, symbols: &SymbolFrame) -> PrecoderSet {
    let k = symbols.len();
    let phi1 = symbols.phases[0];
    let t = (0..k)
        .map(|i| w * (C64::from_polar(1.0, phi1 - symbols.phases[i]) / k as f64))
        .collect();
    PrecoderSet { t }
}

#[derive(Debug, Clone)]
pub struct BroadcastSolution {
    pub precoders: PrecoderSet,
    /// `‖Σ_k t_k e^{j(φ_k − φ_1)}‖²`.
    pub power: f64,
    pub status: Status,
    pub diagnostics: Diagnostics,
}

/// `[[a I, b I], [−b I, a I]]`: multiplication by `a + jb` in real coordinates.
fn real_scalar_block(c: C64, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(k, k)] = c.re;
        m[(n + k, n + k)] = c.re;
        m[(k, n + k)] = c.im;
        m[(n + k, k)] = -c.im;
    }
    m
}

/// Sector problem over the `K` separate precoders, without assuming they
/// are rotated copies of one vector.
pub fn solve_broadcast(
    channels: &ChannelSet,
    symbols: &SymbolFrame,
    gamma: &[f64],
    n0: f64,
    modulation: &ModulationSpec,
) -> Result<BroadcastSolution, PrecodeError> {
    let (k, n) = (channels.n_users(), channels.n_tx());
    check_targets(k, gamma, n0)?;
    let thr = thresholds(gamma, n0);
    let phi = &symbols.phases;
    let dim = 2 * n * k;

    let mut factor = DMatrix::zeros(2 * n, dim);
    for j in 0..k {
        let blk = real_scalar_block(C64::from_polar(1.0, phi[j] - phi[0]), n) * std::f64::consts::SQRT_2;
        factor.view_mut((0, 2 * n * j), (2 * n, 2 * n)).copy_from(&blk);
    }
    let mut p = ConicProblem::new(dim).with_quadratic(Quadratic::Factor(factor.clone()));

    for i in 0..k {
        let mut re = DVector::zeros(dim);
        let mut im = DVector::zeros(dim);
        for j in 0..k {
            let a = channels.user(i) * C64::from_polar(1.0, phi[j] - phi[i]);
            let (f, g) = lift_row(&a);
            re.rows_mut(2 * n * j, 2 * n).copy_from(&f);
            im.rows_mut(2 * n * j, 2 * n).copy_from(&g);
        }
        if modulation.order() == 2 {
            p.add_le(-re, -thr[i]);
        } else {
            let t = modulation.tan_theta();
            p.add_le(&im - &re * t, -thr[i] * t);
            p.add_le(-&im - &re * t, -thr[i] * t);
        }
    }

    let sol = solve(&p, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok(BroadcastSolution {
            precoders: PrecoderSet {
                t: vec![DVector::zeros(n); k],
            },
            power: f64::NAN,
            status,
            diagnostics,
        });
    }
    let precoders = PrecoderSet {
        t: (0..k)
            .map(|j| from_real(&sol.x.rows(2 * n * j, 2 * n).into_owned()))
            .collect(),
    };
    Ok(BroadcastSolution {
        power: instantaneous_power(&precoders, symbols),
        precoders,
        status,
        diagnostics,
    })
}

/// Max-min SINR under `‖w‖² ≤ P` with a common target: maximizes `s` with
/// thresholds `s √N0`, returns `(s², solution)`.
pub fn solve_balancing_direct(
    rot: &RotatedChannels,
    lift: &RealLifting,
    power_budget: f64,
) -> Result<(f64, MulticastSolution), PrecodeError> {
    if !(power_budget > 0.0) {
        return Err(PrecodeError::Argument(format!(
            "power budget must be positive, got {power_budget}"
        )));
    }
    let n2 = 2 * lift.n_tx();
    let k = lift.n_users();
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
    let coef = lift.tan_theta * lift.n0.sqrt();
    for j in 0..2 * k {
        let mut row = DVector::zeros(n2 + 1);
        row.rows_mut(0, n2).copy_from(&lift.b.column(j));
        row[n2] = coef;
        p.add_le(row, 0.0);
    }
    let mut s_nonneg = DVector::zeros(n2 + 1);
    s_nonneg[n2] = -1.0;
    p.add_le(s_nonneg, 0.0);

    let sol = solve(&p, &conic_options())?;
    let diagnostics = Diagnostics::from_conic(&sol);
    let status = map_status(sol.status);
    if status != Status::Feasible {
        return Ok((
            0.0,
            MulticastSolution::unsolved(lift.n_tx(), status, Method::DirectConic, diagnostics),
        ));
    }
    let s = sol.x[n2].max(0.0);
    let gamma_t = s * s;
    let w = from_real(&sol.x.rows(0, n2).into_owned());
    let thr = vec![s * lift.n0.sqrt(); k];
    Ok((
        gamma_t,
        MulticastSolution {
            power: w.norm_squared(),
            margins: rotated_margins(rot, &w, &thr, &lift.modulation),
            w,
            status,
            method: Method::DirectConic,
            diagnostics,
        },
    ))
}

/// Largest common target whose minimum power fits the budget, by bisection
/// on `[0, P max‖h_i‖²/N0]` until the relative bracket width is `tol`.
pub fn solve_balancing_bisect(
    rot: &RotatedChannels,
    lift: &RealLifting,
    power_budget: f64,
    tol: f64,
) -> Result<(f64, MulticastSolution), PrecodeError> {
    if !(power_budget > 0.0) {
        return Err(PrecodeError::Argument(format!(
            "power budget must be positive, got {power_budget}"
        )));
    }
    let k = lift.n_users();
    let max_norm = (0..k).map(|i| lift.f.column(i).norm_squared()).fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = power_budget * max_norm / lift.n0;
    let mut best: Option<MulticastSolution> = None;
    let fits = |g: f64| -> Result<(bool, MulticastSolution), PrecodeError> {
        let sol = solve_relaxed_direct(rot, &lift.with_gamma(&vec![g; k]))?;
        Ok((sol.is_feasible() && sol.power <= power_budget, sol))
    };
    // the upper end is feasible only in degenerate cases
    let (ok, sol) = fits(hi)?;
    if ok {
        return Ok((hi, sol));
    }
    // sector feasibility does not depend on the target level
    if sol.status == Status::Infeasible {
        return Ok((0.0, zero_solution(lift.n_tx())));
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        let (ok, sol) = fits(mid)?;
        if ok {
            lo = mid;
            best = Some(sol);
        } else {
            hi = mid;
        }
        if hi < 1e-300 {
            break;
        }
    }
    Ok((lo, best.unwrap_or_else(|| zero_solution(lift.n_tx()))))
}

fn zero_solution(n_tx: usize) -> MulticastSolution {
    MulticastSolution {
        w: DVector::zeros(n_tx),
        power: 0.0,
        status: Status::Feasible,
        method: Method::DirectConic,
        margins: Vec::new(),
        diagnostics: Diagnostics::default(),
    }
}
