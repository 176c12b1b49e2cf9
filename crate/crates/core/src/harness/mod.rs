//! Monte Carlo sweeps over paired trials.
//!
//! Every scheme at a sweep point sees the same `(seed, trial)` draws, and
//! trials run in parallel but are reduced in index order, so output does not
//! depend on scheduling.

mod output;
mod trial;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::HarnessError;
use crate::model::{ModulationSpec, Scenario};

pub use output::{format_g9, write_csv, CsvTable};
pub use trial::{
    balance_trial, power_trial, ser_trial, timing_trial, BalanceOutcome, PowerOutcome, SerOutcome, TimingMethod,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "String")]
pub enum Scheme {
    CiStrict,
    CiRelaxed,
    CiDualGp,
    Conventional,
    RobustCi,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::CiStrict,
        Scheme::CiRelaxed,
        Scheme::CiDualGp,
        Scheme::Conventional,
        Scheme::RobustCi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CiStrict => "ci-strict",
            Scheme::CiRelaxed => "ci-relaxed",
            Scheme::CiDualGp => "ci-dual-gp",
            Scheme::Conventional => "conventional",
            Scheme::RobustCi => "robust-ci",
        }
    }

    /// Whether the scheme is defined for `modulation`.
    pub fn supports(self, modulation: &ModulationSpec) -> bool {
        match self {
            Scheme::CiDualGp | Scheme::RobustCi => modulation.order() >= 4,
            _ => true,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().to_string()
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Antenna counts; every sweep runs once per entry.
    pub n_tx: Vec<usize>,
    pub n_users: usize,
    pub modulation: ModulationSpec,
    pub n0: f64,
    pub gamma_db: Vec<f64>,
    pub power_budget_db: Vec<f64>,
    /// Squared CSI error radii.
    pub delta_sq: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Noise realizations per trial and user in the SER check.
    pub noise_draws: usize,
    /// Relative bracket width for bisection-based balancing.
    pub balance_tol: f64,
    /// Untimed solves before timing starts.
    pub warmup: usize,
}

impl ExperimentConfig {
    pub fn new(n_tx: usize, n_users: usize, modulation: ModulationSpec) -> Self {
        Self {
            n_tx: vec![n_tx],
            n_users,
            modulation,
            n0: 1.0,
            gamma_db: vec![10.0],
            power_budget_db: vec![10.0],
            delta_sq: vec![0.0],
            trials: 500,
            seed: 1,
            schemes: vec![Scheme::CiRelaxed, Scheme::Conventional],
            noise_draws: 250,
            balance_tol: 1e-4,
            warmup: 5,
        }
    }

    fn check(&self, need: &[(&str, bool)]) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_tx.is_empty() || self.n_tx.contains(&0) {
            return bad("n_tx must list positive antenna counts".into());
        }
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return bad(format!("n0 must be positive, got {}", self.n0));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, empty) in need {
            if *empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(d) = self.delta_sq.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return bad(format!("delta_sq entries must be nonnegative, got {d}"));
        }
        for s in &self.schemes {
            if !s.supports(&self.modulation) {
                return bad(format!("scheme {s} needs M >= 4, got {}", self.modulation.name()));
            }
        }
        Ok(())
    }

    fn scenario(&self, n_tx: usize, n_users: usize, gamma_db: f64) -> Result<Scenario, HarnessError> {
        Ok(Scenario::uniform(
            n_tx,
            n_users,
            self.n0,
            from_db(gamma_db),
            self.modulation,
            self.seed,
        )?)
    }

    fn delta(&self) -> f64 {
        self.delta_sq.first().copied().unwrap_or(0.0).sqrt()
    }
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// One aggregated output row. Columns that do not apply to a sweep are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub modulation: String,
    pub n_tx: usize,
    pub n_users: usize,
    pub gamma_db: Option<f64>,
    pub power_budget_db: Option<f64>,
    pub delta_sq: Option<f64>,
    pub trials: usize,
    pub feasible: usize,
    /// Trials where the solver stopped without a verdict.
    pub failed: usize,
    pub mean_power: Option<f64>,
    pub mean_inst_power: Option<f64>,
    pub mean_gamma: Option<f64>,
    pub mean_time: Option<Duration>,
    pub median_time: Option<Duration>,
    pub symbols: Option<u64>,
    pub ser: Option<f64>,
    pub bound: Option<f64>,
}

impl SweepRow {
    fn new(scheme: &str, cfg: &ExperimentConfig, n_tx: usize, n_users: usize) -> Self {
        Self {
            scheme: scheme.to_string(),
            modulation: cfg.modulation.name(),
            n_tx,
            n_users,
            gamma_db: None,
            power_budget_db: None,
            delta_sq: None,
            trials: cfg.trials,
            feasible: 0,
            failed: 0,
            mean_power: None,
            mean_inst_power: None,
            mean_gamma: None,
            mean_time: None,
            median_time: None,
            symbols: None,
            ser: None,
            bound: None,
        }
    }

    pub fn feasible_frac(&self) -> f64 {
        self.feasible as f64 / self.trials as f64
    }

    pub fn mean_power_db(&self) -> Option<f64> {
        self.mean_power.map(db)
    }

    pub fn mean_gamma_db(&self) -> Option<f64> {
        self.mean_gamma.map(db)
    }
}

/// A sweep point with the per-trial records its row was reduced from.
#[derive(Debug, Clone)]
pub struct PowerPoint {
    pub row: SweepRow,
    pub trials: Vec<PowerOutcome>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn times(mut ts: Vec<Duration>) -> (Option<Duration>, Option<Duration>) {
    if ts.is_empty() {
        return (None, None);
    }
    let total: Duration = ts.iter().sum();
    ts.sort();
    (Some(total / ts.len() as u32), Some(ts[ts.len() / 2]))
}

/// Reduces per-trial power results; averages run over feasible trials only.
pub fn reduce_power(mut row: SweepRow, trials: &[PowerOutcome]) -> SweepRow {
    let ok: Vec<&PowerOutcome> = trials.iter().filter(|t| t.feasible).collect();
    row.trials = trials.len();
    row.feasible = ok.len();
    row.failed = trials.iter().filter(|t| t.failed).count();
    row.mean_power = mean(ok.iter().map(|t| t.power));
    row.mean_inst_power = mean(ok.iter().map(|t| t.inst_power));
    (row.mean_time, row.median_time) = times(trials.iter().map(|t| t.time).collect());
    row
}

fn power_points(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    n_tx: usize,
    gamma_db: f64,
    delta: f64,
) -> Result<Vec<PowerPoint>, HarnessError> {
    let sc = cfg.scenario(n_tx, cfg.n_users, gamma_db)?;
    let mut out = Vec::new();
    for &scheme in schemes {
        let trials: Vec<PowerOutcome> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| power_trial(scheme, &sc, t, delta))
            .collect();
        let mut row = SweepRow::new(scheme.name(), cfg, n_tx, cfg.n_users);
        row.gamma_db = Some(gamma_db);
        out.push(PowerPoint {
            row: reduce_power(row, &trials),
            trials,
        });
    }
    Ok(out)
}

/// Mean power per scheme over the SINR grid. `robust-ci` uses the first
/// `delta_sq` entry.
pub fn run_power_sweep(cfg: &ExperimentConfig) -> Result<Vec<PowerPoint>, HarnessError> {
    cfg.check(&[
        ("gamma_db", cfg.gamma_db.is_empty()),
        ("schemes", cfg.schemes.is_empty()),
    ])?;
    let mut out = Vec::new();
    for &n in &cfg.n_tx {
        for &g in &cfg.gamma_db {
            out.extend(power_points(cfg, &cfg.schemes, n, g, cfg.delta())?);
        }
    }
    Ok(out)
}

/// Feasible fraction per scheme, antenna count and target. CI feasibility
/// comes from the direct conic path except for `ci-dual-gp`, which reports
/// the gradient-projection verdict.
pub fn run_feasibility_sweep(cfg: &ExperimentConfig) -> Result<Vec<PowerPoint>, HarnessError> {
    run_power_sweep(cfg)
}

/// Balanced SINR per scheme over the power-budget grid.
pub fn run_balance_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, HarnessError> {
    cfg.check(&[
        ("power_budget_db", cfg.power_budget_db.is_empty()),
        ("schemes", cfg.schemes.is_empty()),
    ])?;
    let mut out = Vec::new();
    for &n in &cfg.n_tx {
        // targets do not enter balancing; any valid scenario carries the draws
        let sc = cfg.scenario(n, cfg.n_users, 0.0)?;
        for &p_db in &cfg.power_budget_db {
            let budget = from_db(p_db);
            for &scheme in &cfg.schemes {
                let trials: Vec<BalanceOutcome> = (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|t| balance_trial(scheme, &sc, t, budget, cfg.delta(), cfg.balance_tol))
                    .collect();
                let mut row = SweepRow::new(scheme.name(), cfg, n, cfg.n_users);
                row.power_budget_db = Some(p_db);
                row.feasible = trials.iter().filter(|t| t.gamma_t > 0.0).count();
                row.failed = trials.iter().filter(|t| t.failed).count();
                row.mean_gamma = mean(trials.iter().map(|t| t.gamma_t));
                (row.mean_time, row.median_time) = times(trials.iter().map(|t| t.time).collect());
                out.push(row);
            }
        }
    }
    Ok(out)
}

/// Robust CI power over the `δ² × Γ` grid, plus perfect-CSI CI reference
/// rows (scheme `ci-relaxed`, `delta_sq = 0`) on the same true channels.
pub fn run_robust_sweep(cfg: &ExperimentConfig) -> Result<Vec<PowerPoint>, HarnessError> {
    cfg.check(&[
        ("gamma_db", cfg.gamma_db.is_empty()),
        ("delta_sq", cfg.delta_sq.is_empty()),
    ])?;
    if !Scheme::RobustCi.supports(&cfg.modulation) {
        return Err(HarnessError::Config(format!(
            "robust sweeps need M >= 4, got {}",
            cfg.modulation.name()
        )));
    }
    let mut out = Vec::new();
    for &n in &cfg.n_tx {
        for &d2 in &cfg.delta_sq {
            for &g in &cfg.gamma_db {
                for mut p in power_points(cfg, &[Scheme::RobustCi], n, g, d2.sqrt())? {
                    p.row.delta_sq = Some(d2);
                    out.push(p);
                }
            }
        }
        for &g in &cfg.gamma_db {
            for mut p in power_points(cfg, &[Scheme::CiRelaxed], n, g, 0.0)? {
                p.row.delta_sq = Some(0.0);
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// `2 Q(sinθ √(2Γ))`.
pub fn ser_bound(modulation: &ModulationSpec, gamma: f64) -> f64 {
    let x = modulation.theta().sin() * (2.0 * gamma).sqrt();
    statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Symbol error rate under `CN(0, N0)` noise with nearest-phase detection.
pub fn run_ser_check(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, HarnessError> {
    cfg.check(&[
        ("gamma_db", cfg.gamma_db.is_empty()),
        ("schemes", cfg.schemes.is_empty()),
    ])?;
    let mut out = Vec::new();
    for &n in &cfg.n_tx {
        for &g in &cfg.gamma_db {
            let sc = cfg.scenario(n, cfg.n_users, g)?;
            for &scheme in &cfg.schemes {
                let trials: Vec<SerOutcome> = (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|t| ser_trial(scheme, &sc, t, cfg.delta(), cfg.noise_draws))
                    .collect();
                let mut row = SweepRow::new(scheme.name(), cfg, n, cfg.n_users);
                row.gamma_db = Some(g);
                row.feasible = trials.iter().filter(|t| t.symbols > 0).count();
                row.failed = trials.iter().filter(|t| t.failed).count();
                let symbols: u64 = trials.iter().map(|t| t.symbols).sum();
                let errors: u64 = trials.iter().map(|t| t.errors).sum();
                row.symbols = Some(symbols);
                row.ser = (symbols > 0).then(|| errors as f64 / symbols as f64);
                row.bound = Some(ser_bound(&cfg.modulation, from_db(g)));
                out.push(row);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub method: TimingMethod,
    pub n_tx: usize,
    pub n_users: usize,
    pub trials: usize,
    pub median: Duration,
    pub p90: Duration,
}

/// Wall time of the broadcast and multicast conic solves and the dual
/// path on identical instances, for `K = 1..=n_users`. Runs sequentially.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<Vec<TimingRow>, HarnessError> {
    cfg.check(&[("gamma_db", cfg.gamma_db.is_empty())])?;
    if cfg.modulation.order() < 4 {
        return Err(HarnessError::Config(format!(
            "timing compares sector solvers and needs M >= 4, got {}",
            cfg.modulation.name()
        )));
    }
    let mut out = Vec::new();
    for &n in &cfg.n_tx {
        for k in 1..=cfg.n_users {
            let sc = cfg.scenario(n, k, cfg.gamma_db[0])?;
            for method in TimingMethod::ALL {
                for t in 0..cfg.warmup.min(cfg.trials) as u64 {
                    timing_trial(method, &sc, t)?;
                }
                let mut ts = (0..cfg.trials as u64)
                    .map(|t| timing_trial(method, &sc, t))
                    .collect::<Result<Vec<_>, _>>()?;
                ts.sort();
                let pick = |q: f64| ts[((ts.len() - 1) as f64 * q).round() as usize];
                out.push(TimingRow {
                    method,
                    n_tx: n,
                    n_users: k,
                    trials: ts.len(),
                    median: pick(0.5),
                    p90: pick(0.9),
                });
            }
        }
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), format_g9)
}

pub fn power_table(points: &[PowerPoint]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "scheme",
        "modulation",
        "n_tx",
        "n_users",
        "gamma_db",
        "trials",
        "feasible_frac",
        "mean_power",
        "mean_power_db",
        "mean_inst_power_db",
    ]);
    for p in points {
        let r = &p.row;
        t.push(vec![
            r.scheme.clone(),
            r.modulation.clone(),
            r.n_tx.to_string(),
            r.n_users.to_string(),
            opt(r.gamma_db),
            r.trials.to_string(),
            format_g9(r.feasible_frac()),
            opt(r.mean_power),
            opt(r.mean_power_db()),
            opt(r.mean_inst_power.map(db)),
        ]);
    }
    t
}

pub fn feasibility_table(points: &[PowerPoint]) -> CsvTable {
    let mut t = CsvTable::new(&["scheme", "n_tx", "n_users", "gamma_db", "trials", "feasible_frac"]);
    for p in points {
        let r = &p.row;
        t.push(vec![
            r.scheme.clone(),
            r.n_tx.to_string(),
            r.n_users.to_string(),
            opt(r.gamma_db),
            r.trials.to_string(),
            format_g9(r.feasible_frac()),
        ]);
    }
    t
}

pub fn balance_table(rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "scheme",
        "n_tx",
        "n_users",
        "power_budget_db",
        "trials",
        "mean_gamma_db",
    ]);
    for r in rows {
        t.push(vec![
            r.scheme.clone(),
            r.n_tx.to_string(),
            r.n_users.to_string(),
            opt(r.power_budget_db),
            r.trials.to_string(),
            opt(r.mean_gamma_db()),
        ]);
    }
    t
}

pub fn robust_table(points: &[PowerPoint]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "scheme",
        "n_tx",
        "n_users",
        "delta_sq",
        "gamma_db",
        "trials",
        "feasible_frac",
        "mean_power_db",
    ]);
    for p in points {
        let r = &p.row;
        t.push(vec![
            r.scheme.clone(),
            r.n_tx.to_string(),
            r.n_users.to_string(),
            opt(r.delta_sq),
            opt(r.gamma_db),
            r.trials.to_string(),
            format_g9(r.feasible_frac()),
            opt(r.mean_power_db()),
        ]);
    }
    t
}

pub fn ser_table(rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new(&["scheme", "gamma_db", "symbols", "ser", "bound"]);
    for r in rows {
        t.push(vec![
            r.scheme.clone(),
            opt(r.gamma_db),
            r.symbols.unwrap_or(0).to_string(),
            opt(r.ser),
            opt(r.bound),
        ]);
    }
    t
}

pub fn timing_table(rows: &[TimingRow]) -> CsvTable {
    let mut t = CsvTable::new(&["method", "n_tx", "n_users", "trials", "median_us", "p90_us"]);
    for r in rows {
        t.push(vec![
            r.method.name().to_string(),
            r.n_tx.to_string(),
            r.n_users.to_string(),
            r.trials.to_string(),
            format_g9(r.median.as_secs_f64() * 1e6),
            format_g9(r.p90.as_secs_f64() * 1e6),
        ]);
    }
    t
}
