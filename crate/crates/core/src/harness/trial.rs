use std::time::{Duration, Instant};

use serde::Serialize;

use super::Scheme;
use crate::ci::{
    solve_balancing_direct, solve_bpsk, solve_broadcast, solve_relaxed_direct, solve_strict, split_precoders,
    MulticastSolution, Status,
};
use crate::conventional::{solve_conventional_balance, solve_conventional_powermin};
use crate::dual::{solve_dual_path, GpOptions};
use crate::error::{HarnessError, PrecodeError};
use crate::model::{instantaneous_power, lift_real, rotate_channels, ChannelSet, PrecoderSet, Scenario, SymbolFrame};
use crate::random::{complex_normal, gen_channels, gen_csi_error, gen_symbols, trial_rng, Stream};
use crate::robust::{solve_robust_balance, solve_robust_powermin, RobustScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerOutcome {
    pub feasible: bool,
    pub failed: bool,
    /// `‖w‖²` for CI schemes, `Σ‖t_k‖²` for the conventional baseline.
    pub power: f64,
    /// `‖Σ_k t_k d_k‖²` for the trial's symbols.
    pub inst_power: f64,
    pub time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceOutcome {
    /// Balanced linear SINR; zero when no positive target is reachable.
    pub gamma_t: f64,
    pub failed: bool,
    pub time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SerOutcome {
    pub symbols: u64,
    pub errors: u64,
    pub failed: bool,
}

struct Draw {
    channels: ChannelSet,
    /// What the transmitter believes; equals `channels` without CSI error.
    estimates: ChannelSet,
    symbols: SymbolFrame,
}

fn draw(sc: &Scenario, trial: u64, delta: f64) -> Draw {
    let channels = gen_channels(sc, trial);
    let symbols = gen_symbols(sc, trial);
    let estimates = if delta > 0.0 {
        let e = gen_csi_error(sc, trial, &vec![delta; sc.n_users]);
        ChannelSet::new(&channels.h - e)
    } else {
        channels.clone()
    };
    Draw {
        channels,
        estimates,
        symbols,
    }
}

struct Precoded {
    status: Status,
    precoders: PrecoderSet,
    power: f64,
}

fn from_multicast(sol: MulticastSolution, symbols: &SymbolFrame) -> Precoded {
    Precoded {
        status: sol.status,
        precoders: split_precoders(&sol.w, symbols),
        power: sol.power,
    }
}

fn precode(scheme: Scheme, sc: &Scenario, d: &Draw, delta: f64) -> Result<Precoded, PrecodeError> {
    let m = &sc.modulation;
    let rot = rotate_channels(&d.channels, &d.symbols);
    Ok(match scheme {
        Scheme::CiStrict => from_multicast(solve_strict(&rot, &sc.gamma, sc.n0, m)?, &d.symbols),
        Scheme::CiRelaxed if m.order() == 2 => from_multicast(solve_bpsk(&rot, &sc.gamma, sc.n0)?, &d.symbols),
        Scheme::CiRelaxed => {
            let lift = lift_real(&rot, m, &sc.gamma, sc.n0)?;
            from_multicast(solve_relaxed_direct(&rot, &lift)?, &d.symbols)
        }
        Scheme::CiDualGp => {
            let lift = lift_real(&rot, m, &sc.gamma, sc.n0)?;
            from_multicast(solve_dual_path(&rot, &lift, &GpOptions::default())?.0, &d.symbols)
        }
        Scheme::Conventional => {
            let sol = solve_conventional_powermin(&d.channels, &sc.gamma, sc.n0)?;
            Precoded {
                status: sol.status,
                power: sol.power,
                precoders: sol.precoders,
            }
        }
        Scheme::RobustCi => {
            let rob = RobustScenario::uniform(d.estimates.clone(), delta);
            let sol = solve_robust_powermin(&rob, &d.symbols, &sc.gamma, sc.n0, m)?;
            Precoded {
                status: sol.status,
                precoders: split_precoders(&sol.w, &d.symbols),
                power: sol.power,
            }
        }
    })
}

/// Power minimization for one trial. Solver errors count as failed trials.
pub fn power_trial(scheme: Scheme, sc: &Scenario, trial: u64, delta: f64) -> PowerOutcome {
    let d = draw(sc, trial, delta);
    let start = Instant::now();
    let res = precode(scheme, sc, &d, delta);
    let time = start.elapsed();
    match res {
        Ok(p) if p.status == Status::Feasible => PowerOutcome {
            feasible: true,
            failed: false,
            power: p.power,
            inst_power: instantaneous_power(&p.precoders, &d.symbols),
            time,
        },
        Ok(p) => PowerOutcome {
            feasible: false,
            failed: p.status == Status::Failed,
            power: f64::NAN,
            inst_power: f64::NAN,
            time,
        },
        Err(_) => PowerOutcome {
            feasible: false,
            failed: true,
            power: f64::NAN,
            inst_power: f64::NAN,
            time,
        },
    }
}

/// SINR balancing for one trial. CI schemes without a dedicated balancing
/// form use homogeneity: the sector feasible set scales with `√Γ`, so the
/// minimum power at target `Γ` is `Γ` times the power at target one.
fn balance(
    scheme: Scheme,
    sc: &Scenario,
    d: &Draw,
    budget: f64,
    delta: f64,
    tol: f64,
) -> Result<(f64, Status), PrecodeError> {
    let m = &sc.modulation;
    let rot = rotate_channels(&d.channels, &d.symbols);
    let unit = vec![1.0; sc.n_users];
    let by_homogeneity = |sol: MulticastSolution| match sol.status {
        Status::Feasible if sol.power > 0.0 => (budget / sol.power, Status::Feasible),
        s => (0.0, s),
    };
    Ok(match scheme {
        Scheme::CiRelaxed if m.order() >= 4 => {
            let lift = lift_real(&rot, m, &unit, sc.n0)?;
            let (g, sol) = solve_balancing_direct(&rot, &lift, budget)?;
            (g, sol.status)
        }
        Scheme::CiRelaxed => by_homogeneity(solve_bpsk(&rot, &unit, sc.n0)?),
        Scheme::CiStrict => by_homogeneity(solve_strict(&rot, &unit, sc.n0, m)?),
        Scheme::CiDualGp => {
            let lift = lift_real(&rot, m, &unit, sc.n0)?;
            by_homogeneity(solve_dual_path(&rot, &lift, &GpOptions::default())?.0)
        }
        Scheme::Conventional => {
            let (g, _) = solve_conventional_balance(&d.channels, sc.n0, budget, tol)?;
            (g, Status::Feasible)
        }
        Scheme::RobustCi => {
            let rob = RobustScenario::uniform(d.estimates.clone(), delta);
            let (g, sol) = solve_robust_balance(&rob, &d.symbols, sc.n0, budget, m)?;
            (g, sol.status)
        }
    })
}

pub fn balance_trial(scheme: Scheme, sc: &Scenario, trial: u64, budget: f64, delta: f64, tol: f64) -> BalanceOutcome {
    let d = draw(sc, trial, delta);
    let start = Instant::now();
    let res = balance(scheme, sc, &d, budget, delta, tol);
    let time = start.elapsed();
    match res {
        Ok((g, status)) => BalanceOutcome {
            gamma_t: g,
            failed: status == Status::Failed,
            time,
        },
        Err(_) => BalanceOutcome {
            gamma_t: 0.0,
            failed: true,
            time,
        },
    }
}

/// Transmits the trial's symbols `draws` times through the true channels
/// with fresh `CN(0, N0)` noise and counts nearest-phase detection errors.
/// Infeasible trials contribute no symbols.
pub fn ser_trial(scheme: Scheme, sc: &Scenario, trial: u64, delta: f64, draws: usize) -> SerOutcome {
    let d = draw(sc, trial, delta);
    let p = match precode(scheme, sc, &d, delta) {
        Ok(p) if p.status == Status::Feasible => p,
        Ok(p) => {
            return SerOutcome {
                symbols: 0,
                errors: 0,
                failed: p.status == Status::Failed,
            }
        }
        Err(_) => {
            return SerOutcome {
                symbols: 0,
                errors: 0,
                failed: true,
            }
        }
    };
    let x = p.precoders.transmit(&d.symbols);
    let clean: Vec<_> = (0..sc.n_users).map(|i| d.channels.apply(i, &x)).collect();
    let sigma = sc.n0.sqrt();
    let mut rng = trial_rng(sc.seed, trial, Stream::Noise);
    let mut errors = 0;
    for _ in 0..draws {
        for (i, z) in clean.iter().enumerate() {
            let y = z + complex_normal(&mut rng) * sigma;
            if sc.modulation.detect(y) != d.symbols.indices[i] {
                errors += 1;
            }
        }
    }
    SerOutcome {
        symbols: (draws * sc.n_users) as u64,
        errors,
        failed: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimingMethod {
    BroadcastConic,
    MulticastConic,
    DualGp,
}

impl TimingMethod {
    pub const ALL: [TimingMethod; 3] = [
        TimingMethod::BroadcastConic,
        TimingMethod::MulticastConic,
        TimingMethod::DualGp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimingMethod::BroadcastConic => "broadcast-conic",
            TimingMethod::MulticastConic => "multicast-conic",
            TimingMethod::DualGp => "dual-gp",
        }
    }
}

/// Wall time of one relaxed power minimization by `method`. Channel
/// rotation and lifting happen outside the timed region.
pub fn timing_trial(method: TimingMethod, sc: &Scenario, trial: u64) -> Result<Duration, HarnessError> {
    let d = draw(sc, trial, 0.0);
    let rot = rotate_channels(&d.channels, &d.symbols);
    let lift = lift_real(&rot, &sc.modulation, &sc.gamma, sc.n0)?;
    let start = Instant::now();
    match method {
        TimingMethod::BroadcastConic => {
            solve_broadcast(&d.channels, &d.symbols, &sc.gamma, sc.n0, &sc.modulation)?;
        }
        TimingMethod::MulticastConic => {
            solve_relaxed_direct(&rot, &lift)?;
        }
        TimingMethod::DualGp => {
            solve_dual_path(&rot, &lift, &GpOptions::default())?;
        }
    }
    Ok(start.elapsed())
}
