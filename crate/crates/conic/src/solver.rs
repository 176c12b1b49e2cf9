//! Primal-dual interior-point method on the homogeneous self-dual
//! embedding, with Nesterov–Todd scaling and Mehrotra predictor-corrector
//! steps. Dense linear algebra throughout; intended for problems with at
//! most a few hundred variables.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::cone::{self, Cone, Scaling};
use crate::error::ConicError;
use crate::problem::{ConicProblem, StandardForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Absolute duality-gap tolerance.
    pub abs_gap_tol: f64,
    /// Relative duality-gap tolerance.
    pub rel_gap_tol: f64,
    /// Tolerance on normalized infeasibility certificates.
    pub cert_tol: f64,
    pub max_iter: usize,
    /// Accept a stalled iterate as optimal when every measure is within
    /// this factor of its tolerance.
    pub stall_factor: f64,
    /// Refine optima of linearly constrained `½‖x‖² + qᵀx` problems by
    /// solving the KKT system of the active rows.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-10,
            abs_gap_tol: 1e-11,
            rel_gap_tol: 1e-10,
            cert_tol: 1e-9,
            max_iter: 200,
            stall_factor: 1e4,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Residuals {
    /// Relative primal residual of the returned iterate.
    pub primal: f64,
    /// Relative dual residual.
    pub dual: f64,
    /// Complementarity `sᵀz` of the normalized iterate.
    pub gap: f64,
    pub rel_gap: f64,
}

/// Multipliers of the user's constraint blocks.
#[derive(Debug, Clone)]
pub struct Duals {
    pub equalities: DVector<f64>,
    pub inequalities: DVector<f64>,
    pub socs: Vec<DVector<f64>>,
}

/// A dual ray `(y, z)` with `z` in the dual cone, `Aᵀy + Gᵀz ≈ 0` and
/// `bᵀy + hᵀz = −1`.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub duals: Duals,
    /// `‖Aᵀy + Gᵀz‖` after normalization.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    pub x: DVector<f64>,
    pub objective: f64,
    pub duals: Duals,
    pub residuals: Residuals,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub solve_time: Duration,
    /// Set when the solver stalled and accepted a slightly less accurate
    /// optimum.
    pub reduced_accuracy: bool,
    /// The optimum was refined by an active-set solve.
    pub polished: bool,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

pub fn solve(problem: &ConicProblem, options: &SolverOptions) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    let start = Instant::now();
    let sf = StandardForm::from_problem(problem);
    let mut ipm = Ipm::new(&sf, options);
    let (status, reduced) = ipm.run();
    let mut sol = ipm.finish(problem, &sf, status, reduced, start.elapsed());
    if options.polish {
        if let Some(p) = crate::polish::polish(problem, &sol) {
            sol = p;
        }
        sol.solve_time = start.elapsed();
    }
    Ok(sol)
}

struct Kkt {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    p: usize,
    m: usize,
}

const STATIC_REG: f64 = 1e-11;
const REFINE_STEPS: usize = 3;

struct Ipm<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
    iterations: usize,
    residuals: Residuals,
    cert: Option<(DVector<f64>, DVector<f64>, f64)>,
}

impl<'a> Ipm<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolverOptions) -> Self {
        let (n, p, m) = (sf.n(), sf.p(), sf.m());
        let mut ipm = Self {
            sf,
            opts,
            x: DVector::zeros(n),
            y: DVector::zeros(p),
            z: DVector::zeros(m),
            s: DVector::zeros(m),
            tau: 1.0,
            kappa: 1.0,
            iterations: 0,
            residuals: Residuals::default(),
            cert: None,
        };
        ipm.initialize();
        ipm
    }

    /// Factors the scaled system `[δI Aᵀ (W⁻¹G)ᵀ; A −δI 0; W⁻¹G 0 −I]`.
    /// Working with `u = W z` keeps the matrix well scaled near the
    /// boundary, unlike the normal equations `GᵀW⁻²G`.
    fn factor(&self, scaling: &Scaling) -> Option<Kkt> {
        let sf = self.sf;
        let (n, p, m) = (sf.n(), sf.p(), sf.m());
        let wg = scaling.apply_inv_columns(&sf.g);
        let mut reg = STATIC_REG;
        for _ in 0..4 {
            let mut mat = DMatrix::zeros(n + p + m, n + p + m);
            for i in 0..n {
                mat[(i, i)] = reg;
            }
            if p > 0 {
                mat.view_mut((0, n), (n, p)).copy_from(&sf.a.transpose());
                mat.view_mut((n, 0), (p, n)).copy_from(&sf.a);
                for i in 0..p {
                    mat[(n + i, n + i)] = -reg;
                }
            }
            mat.view_mut((0, n + p), (n, m)).copy_from(&wg.transpose());
            mat.view_mut((n + p, 0), (m, n)).copy_from(&wg);
            for i in 0..m {
                mat[(n + p + i, n + p + i)] = -1.0;
            }
            let lu = mat.lu();
            if lu.is_invertible() && lu.u().diagonal().iter().all(|d| d.is_finite()) {
                return Some(Kkt { lu, n, p, m });
            }
            reg *= 100.0;
        }
        None
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (x, y, z) = (r1, r2, r3)`.
    fn kkt_solve(
        &self,
        kkt: &Kkt,
        scaling: &Scaling,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let sf = self.sf;
        let (n, p, m) = (kkt.n, kkt.p, kkt.m);
        let reduced = |e1: &DVector<f64>, e2: &DVector<f64>, e3: &DVector<f64>| {
            let mut rhs = DVector::zeros(n + p + m);
            rhs.rows_mut(0, n).copy_from(e1);
            rhs.rows_mut(n, p).copy_from(e2);
            rhs.rows_mut(n + p, m).copy_from(&scaling.apply(e3, true));
            let sol = kkt.lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(n + p + m));
            let x = sol.rows(0, n).into_owned();
            let y = sol.rows(n, p).into_owned();
            let z = scaling.apply(&sol.rows(n + p, m).into_owned(), true);
            (x, y, z)
        };
        let (mut x, mut y, mut z) = reduced(r1, r2, r3);
        for _ in 0..REFINE_STEPS {
            let e1 = r1 - (sf.a.transpose() * &y + sf.g.transpose() * &z);
            let e2 = r2 - &sf.a * &x;
            let w2z = scaling.apply(&scaling.apply(&z, false), false);
            let e3 = r3 - (&sf.g * &x - w2z);
            let err = e1.amax().max(e2.amax()).max(e3.amax());
            if err < 1e-15 * (1.0 + r1.amax().max(r2.amax()).max(r3.amax())) {
                break;
            }
            let (dx, dy, dz) = reduced(&e1, &e2, &e3);
            x += dx;
            y += dy;
            z += dz;
        }
        (x, y, z)
    }

    fn initialize(&mut self) {
        let sf = self.sf;
        let scaling = Scaling::identity(&sf.cones);
        let Some(kkt) = self.factor(&scaling) else {
            self.s = cone::identity(&sf.cones, sf.m());
            self.z = self.s.clone();
            return;
        };
        let n = sf.n();
        let m = sf.m();
        let (x, _, zp) = self.kkt_solve(&kkt, &scaling, &DVector::zeros(n), &sf.b, &sf.h);
        let s_hat = -zp;
        let (_, y, z_hat) = self.kkt_solve(&kkt, &scaling, &(-&sf.c), &DVector::zeros(sf.p()), &DVector::zeros(m));
        self.x = x;
        self.y = y;
        self.s = shift_into_cone(&sf.cones, s_hat);
        self.z = shift_into_cone(&sf.cones, z_hat);
        self.tau = 1.0;
        self.kappa = 1.0;
    }

    fn run(&mut self) -> (Status, bool) {
        let sf = self.sf;
        let nu = cone::total_degree(&sf.cones) as f64;
        let e = cone::identity(&sf.cones, sf.m());
        let mut best: Option<BestIterate> = None;
        let mut stalls = 0;

        for it in 0..self.opts.max_iter {
            self.iterations = it;
            let r = self.hsde_residuals();
            if let Some(status) = self.check_termination() {
                return (status, false);
            }
            let score = self
                .residuals
                .primal
                .max(self.residuals.dual)
                .max(self.residuals.rel_gap.min(self.residuals.gap));
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(BestIterate::capture(self, score));
            }

            let scaling = Scaling::compute(&sf.cones, &self.s, &self.z);
            let Some(kkt) = self.factor(&scaling) else {
                break;
            };
            let mu = (self.s.dot(&self.z) + self.tau * self.kappa) / (nu + 1.0);
            let lam = scaling.lambda.clone();

            // tau-direction solve shared by predictor and corrector
            let (x1, y1, z1) = self.kkt_solve(&kkt, &scaling, &(-&sf.c), &sf.b, &sf.h);
            let denom1 = sf.c.dot(&x1) + sf.b.dot(&y1) + sf.h.dot(&z1) - self.kappa / self.tau;

            let direction = |gamma: f64, ds_rhs: &DVector<f64>, dk_rhs: f64| {
                let w_lds = scaling.apply(&cone::inv_circ(&sf.cones, &lam, ds_rhs), false);
                let (x2, y2, z2) = self.kkt_solve(
                    &kkt,
                    &scaling,
                    &(-gamma * &r.x),
                    &(-gamma * &r.y),
                    &(-gamma * &r.z - &w_lds),
                );
                let num = -gamma * r.tau - dk_rhs / self.tau - sf.c.dot(&x2) - sf.b.dot(&y2) - sf.h.dot(&z2);
                let dtau = num / denom1;
                let dx = x2 + dtau * &x1;
                let dy = y2 + dtau * &y1;
                let dz = z2 + dtau * &z1;
                // taken from the linear residual equation rather than the
                // complementarity one, so primal residuals shrink exactly
                let ds = -gamma * &r.z - &sf.g * &dx + dtau * &sf.h;
                let dkappa = (dk_rhs - self.kappa * dtau) / self.tau;
                Direction {
                    dx,
                    dy,
                    dz,
                    ds,
                    dtau,
                    dkappa,
                }
            };

            // predictor
            let lam_lam = cone::circ(&sf.cones, &lam, &lam);
            let aff = direction(1.0, &(-&lam_lam), -self.kappa * self.tau);
            let alpha_aff = self.step_length(&aff, 1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

            // corrector
            let ws = scaling.apply(&aff.ds, true);
            let wz = scaling.apply(&aff.dz, false);
            let ds_rhs = -&lam_lam - cone::circ(&sf.cones, &ws, &wz) + sigma * mu * &e;
            let dk_rhs = -self.kappa * self.tau - aff.dkappa * aff.dtau + sigma * mu;
            let dir = direction(1.0 - sigma, &ds_rhs, dk_rhs);
            let alpha = (0.99 * self.step_length(&dir, f64::INFINITY)).min(1.0);

            if !(alpha.is_finite() && dir.all_finite()) {
                break;
            }
            if alpha < 1e-10 {
                stalls += 1;
                if stalls > 3 {
                    break;
                }
            }
            self.x += alpha * &dir.dx;
            self.y += alpha * &dir.dy;
            self.z += alpha * &dir.dz;
            self.s += alpha * &dir.ds;
            self.tau += alpha * dir.dtau;
            self.kappa += alpha * dir.dkappa;

            // renormalize the embedding when it drifts
            let scale = self.tau.max(self.kappa);
            if !(1e-8..=1e8).contains(&scale) {
                let k = 1.0 / scale;
                self.x *= k;
                self.y *= k;
                self.z *= k;
                self.s *= k;
                self.tau *= k;
                self.kappa *= k;
            }
        }

        // Stalled or out of iterations: fall back to the best iterate.
        self.iterations = self.iterations.max(1);
        self.hsde_residuals();
        if let Some(status) = self.check_termination() {
            return (status, false);
        }
        if let Some(b) = best {
            b.restore(self);
            let _ = self.hsde_residuals();
        }
        let f = self.opts.stall_factor;
        let res = &self.residuals;
        let near = res.primal <= f * self.opts.feas_tol
            && res.dual <= f * self.opts.feas_tol
            && (res.gap <= f * self.opts.abs_gap_tol || res.rel_gap <= f * self.opts.rel_gap_tol);
        if near && self.tau > 0.0 {
            (Status::Optimal, true)
        } else {
            (Status::MaxIterations, false)
        }
    }

    fn step_length(&self, d: &Direction, cap: f64) -> f64 {
        let cones = &self.sf.cones;
        let mut a = cap;
        a = a.min(cone::max_step(cones, &self.s, &d.ds, a));
        a = a.min(cone::max_step(cones, &self.z, &d.dz, a));
        if d.dtau < 0.0 {
            a = a.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            a = a.min(-self.kappa / d.dkappa);
        }
        a
    }

    fn hsde_residuals(&mut self) -> HsdeResiduals {
        let sf = self.sf;
        let at_y = sf.a.transpose() * &self.y;
        let gt_z = sf.g.transpose() * &self.z;
        let ax = &sf.a * &self.x;
        let gx = &sf.g * &self.x;
        let r = HsdeResiduals {
            x: &at_y + &gt_z + self.tau * &sf.c,
            y: &ax - self.tau * &sf.b,
            z: &self.s + &gx - self.tau * &sf.h,
            tau: self.kappa + sf.c.dot(&self.x) + sf.b.dot(&self.y) + sf.h.dot(&self.z),
        };
        let t = self.tau;
        let pres = (r.y.norm() / (1.0 + sf.b.norm())).max(r.z.norm() / (1.0 + sf.h.norm())) / t;
        let dres = r.x.norm() / (1.0 + sf.c.norm()) / t;
        let pcost = sf.c.dot(&self.x) / t;
        let dcost = -(sf.b.dot(&self.y) + sf.h.dot(&self.z)) / t;
        let gap = self.s.dot(&self.z) / (t * t);
        let rel_gap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        self.residuals = Residuals {
            primal: pres,
            dual: dres,
            gap,
            rel_gap,
        };
        let by_hz = sf.b.dot(&self.y) + sf.h.dot(&self.z);
        self.cert = if by_hz < 0.0 {
            Some((self.y.clone(), self.z.clone(), (at_y + gt_z).norm() / -by_hz))
        } else {
            None
        };
        r
    }

    fn check_termination(&self) -> Option<Status> {
        let o = self.opts;
        let res = &self.residuals;
        if res.primal <= o.feas_tol
            && res.dual <= o.feas_tol
            && (res.gap <= o.abs_gap_tol || res.rel_gap <= o.rel_gap_tol)
        {
            return Some(Status::Optimal);
        }
        if let Some((_, _, infres)) = &self.cert {
            if *infres <= o.cert_tol {
                return Some(Status::PrimalInfeasible);
            }
        }
        let sf = self.sf;
        let cx = sf.c.dot(&self.x);
        if cx < 0.0 {
            let ax = (&sf.a * &self.x).norm();
            let gxs = (&sf.g * &self.x + &self.s).norm();
            if ax.max(gxs) / -cx <= o.cert_tol {
                return Some(Status::DualInfeasible);
            }
        }
        None
    }

    fn finish(
        &self,
        problem: &ConicProblem,
        sf: &StandardForm,
        status: Status,
        reduced_accuracy: bool,
        elapsed: Duration,
    ) -> ConicSolution {
        let un = sf.user_n;
        let (x, y, z, certificate) = match status {
            Status::PrimalInfeasible => {
                let (y, z, infres) = self.cert.clone().expect("certificate present");
                let by_hz = -(sf.b.dot(&y) + sf.h.dot(&z));
                let (y, z) = (y / by_hz, z / by_hz);
                let cert = Certificate {
                    duals: split_duals(problem, &y, &z),
                    residual: infres,
                };
                (self.x.rows(0, un) / self.tau.max(f64::MIN_POSITIVE), y, z, Some(cert))
            }
            Status::DualInfeasible => {
                let cx = -sf.c.dot(&self.x);
                (self.x.rows(0, un) / cx, self.y.clone(), self.z.clone(), None)
            }
            _ => {
                let t = self.tau;
                (self.x.rows(0, un) / t, &self.y / t, &self.z / t, None)
            }
        };
        let duals = split_duals(problem, &y, &z);
        ConicSolution {
            status,
            objective: problem.objective(&x),
            x,
            duals,
            residuals: self.residuals.clone(),
            certificate,
            iterations: self.iterations,
            solve_time: elapsed,
            reduced_accuracy,
            polished: false,
        }
    }
}

fn split_duals(problem: &ConicProblem, y: &DVector<f64>, z: &DVector<f64>) -> Duals {
    let nlin = problem.inequalities.len();
    let mut socs = Vec::with_capacity(problem.socs.len());
    let mut off = nlin;
    for soc in &problem.socs {
        let d = soc.a.nrows() + 1;
        socs.push(z.rows(off, d).into_owned());
        off += d;
    }
    Duals {
        equalities: y.clone(),
        inequalities: z.rows(0, nlin).into_owned(),
        socs,
    }
}

fn shift_into_cone(cones: &[Cone], mut v: DVector<f64>) -> DVector<f64> {
    let mut alpha = f64::NEG_INFINITY;
    for (off, c) in cone::blocks(cones) {
        match c {
            Cone::NonNeg(d) => {
                for i in off..off + d {
                    alpha = alpha.max(-v[i]);
                }
            }
            Cone::Soc(d) => {
                alpha = alpha.max(v.rows(off + 1, d - 1).norm() - v[off]);
            }
        }
    }
    if alpha >= -1e-8 {
        let e = cone::identity(cones, v.len());
        v += (1.0 + alpha) * e;
    }
    v
}

struct HsdeResiduals {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

impl Direction {
    fn all_finite(&self) -> bool {
        self.dtau.is_finite()
            && self.dkappa.is_finite()
            && [&self.dx, &self.dy, &self.dz, &self.ds]
                .iter()
                .all(|v| v.iter().all(|e| e.is_finite()))
    }
}

struct BestIterate {
    score: f64,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl BestIterate {
    fn capture(ipm: &Ipm<'_>, score: f64) -> Self {
        Self {
            score,
            x: ipm.x.clone(),
            y: ipm.y.clone(),
            z: ipm.z.clone(),
            s: ipm.s.clone(),
            tau: ipm.tau,
            kappa: ipm.kappa,
        }
    }

    fn restore(self, ipm: &mut Ipm<'_>) {
        ipm.x = self.x;
        ipm.y = self.y;
        ipm.z = self.z;
        ipm.s = self.s;
        ipm.tau = self.tau;
        ipm.kappa = self.kappa;
    }
}
