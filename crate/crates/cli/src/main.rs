mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cipre_conic::SolverOptions;
use cipre_core::dual::GpOptions;
use cipre_core::harness::{
    balance_table, feasibility_table, power_table, robust_table, run_balance_sweep, run_feasibility_sweep,
    run_power_sweep, run_robust_sweep, run_ser_check, run_timing, ser_table, timing_table, write_csv, CsvTable,
    ExperimentConfig, PowerPoint,
};
use cipre_core::validate::{run_criterion, CRITERIA};
use cipre_core::HarnessError;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{ConfigError, RawConfig};

/// Monte Carlo simulator for constructive-interference symbol-level
/// precoding in the multiuser MISO downlink.
#[derive(Parser)]
#[command(name = "cipre", version)]
struct Cli {
    /// JSON object with run settings.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one setting; the value is parsed as JSON, else as a
    /// comma-separated list or a string.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Mean transmit power over the SINR grid.
    Powermin,
    /// Balanced SINR over the power-budget grid.
    Balance,
    /// Feasible fraction per antenna count and SINR target.
    Feasibility,
    /// Robust CI power over the CSI-error and SINR grids.
    Robust,
    /// Simulated symbol error rate against the analytic bound.
    Ser,
    /// Solver timing for K = 1..n_users.
    Bench,
    /// Runs the acceptance suite.
    Validate {
        /// Criterion numbers to run; all when omitted.
        criteria: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Powermin => "powermin",
            Command::Balance => "balance",
            Command::Feasibility => "feasibility",
            Command::Robust => "robust",
            Command::Ser => "ser",
            Command::Bench => "bench",
            Command::Validate { .. } => "validate",
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            Command::Powermin | Command::Feasibility | Command::Ser => &[
                "n_tx",
                "n_users",
                "modulation",
                "trials",
                "seed",
                "out_dir",
                "gamma_db",
                "schemes",
            ],
            Command::Balance => &[
                "n_tx",
                "n_users",
                "modulation",
                "trials",
                "seed",
                "out_dir",
                "power_budget_db",
                "schemes",
            ],
            Command::Robust => &[
                "n_tx",
                "n_users",
                "modulation",
                "trials",
                "seed",
                "out_dir",
                "gamma_db",
                "delta_sq",
            ],
            Command::Bench => &["n_tx", "n_users", "modulation", "trials", "seed", "out_dir", "gamma_db"],
            Command::Validate { .. } => &[],
        }
    }

    fn output(&self) -> &'static str {
        match self {
            Command::Powermin => "power_sweep.csv",
            Command::Balance => "balance.csv",
            Command::Feasibility => "feasibility.csv",
            Command::Robust => "robust.csv",
            Command::Ser => "ser.csv",
            Command::Bench => "timing.csv",
            Command::Validate { .. } => "validate.csv",
        }
    }
}

const EXIT_SWEEP: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let quiet = cli.quiet;

    let resolved = RawConfig::load(cli.config.as_deref(), &cli.set).and_then(|raw| {
        raw.require(cli.command.required())?;
        let cfg = raw.experiment()?;
        Ok((cfg, raw.out_dir()?))
    });
    let (cfg, out_dir) = match resolved {
        Ok(x) => x,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("warning: thread pool already initialized: {e}");
    }
    if let Some(dir) = &out_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(EXIT_SWEEP);
        }
    }

    let outcome = run(&cli.command, &cfg, quiet);
    let mut code = 0;
    let mut output = json!({ "file": cli.command.output() });
    match &outcome {
        Ok((table, failed_trials, passed)) => {
            output["status"] = Value::from(if *passed { "ok" } else { "failed" });
            output["failed_trials"] = Value::from(*failed_trials);
            if !passed {
                code = EXIT_SWEEP;
            }
            if !quiet {
                print!("{}", table.render());
                if *failed_trials > 0 {
                    eprintln!("{failed_trials} trials hit solver failures and were counted infeasible");
                }
            }
            if let Some(dir) = &out_dir {
                if let Err(e) = write_csv(&dir.join(cli.command.output()), table) {
                    eprintln!("error: writing {}: {e}", cli.command.output());
                    output["status"] = Value::from("failed");
                    output["error"] = Value::from(e.to_string());
                    code = EXIT_SWEEP;
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            output["status"] = Value::from("failed");
            output["error"] = Value::from(e.to_string());
            code = if matches!(e, HarnessError::Config(_)) {
                EXIT_CONFIG
            } else {
                EXIT_SWEEP
            };
        }
    }

    if let Some(dir) = &out_dir {
        let manifest = manifest(&cli.command, &cfg, dir, output, start.elapsed().as_secs_f64());
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(e) = fs::write(dir.join("manifest.json"), text + "\n") {
            eprintln!("error: writing manifest.json: {e}");
            code = code.max(EXIT_SWEEP);
        }
    }
    ExitCode::from(code)
}

/// Returns the table, the number of trials with solver failures and
/// whether the run succeeded.
fn run(command: &Command, cfg: &ExperimentConfig, quiet: bool) -> Result<(CsvTable, usize, bool), HarnessError> {
    let failed_points = |ps: &[PowerPoint]| ps.iter().map(|p| p.row.failed).sum::<usize>();
    Ok(match command {
        Command::Powermin => {
            let ps = run_power_sweep(cfg)?;
            (power_table(&ps), failed_points(&ps), true)
        }
        Command::Feasibility => {
            let ps = run_feasibility_sweep(cfg)?;
            (feasibility_table(&ps), failed_points(&ps), true)
        }
        Command::Robust => {
            let ps = run_robust_sweep(cfg)?;
            (robust_table(&ps), failed_points(&ps), true)
        }
        Command::Balance => {
            let rows = run_balance_sweep(cfg)?;
            let failed = rows.iter().map(|r| r.failed).sum();
            (balance_table(&rows), failed, true)
        }
        Command::Ser => {
            let rows = run_ser_check(cfg)?;
            let failed = rows.iter().map(|r| r.failed).sum();
            (ser_table(&rows), failed, true)
        }
        Command::Bench => (timing_table(&run_timing(cfg)?), 0, true),
        Command::Validate { criteria } => {
            let ids: Vec<u8> = if criteria.is_empty() {
                CRITERIA.iter().map(|(i, _)| *i).collect()
            } else {
                criteria.clone()
            };
            if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|(c, _)| c == *i)) {
                return Err(HarnessError::Config(format!(
                    "no acceptance criterion {bad}; valid are 1-11"
                )));
            }
            let mut table = CsvTable::new(&["criterion", "name", "passed", "seconds", "detail"]);
            let mut all = true;
            for id in ids {
                let r = run_criterion(id);
                if !quiet {
                    eprintln!("{r}");
                }
                all &= r.passed;
                table.push(vec![
                    r.id.to_string(),
                    r.name.to_string(),
                    r.passed.to_string(),
                    format!("{:.3}", r.elapsed.as_secs_f64()),
                    format!("\"{}\"", r.detail.replace('"', "'")),
                ]);
            }
            (table, 0, all)
        }
    })
}

fn manifest(command: &Command, cfg: &ExperimentConfig, out_dir: &Path, output: Value, wall: f64) -> Value {
    let solver = SolverOptions::default();
    let gp = GpOptions::default();
    json!({
        "tool": "cipre",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "seed": cfg.seed,
        "config": {
            "n_tx": cfg.n_tx,
            "n_users": cfg.n_users,
            "modulation": cfg.modulation.name(),
            "n0": cfg.n0,
            "gamma_db": cfg.gamma_db,
            "power_budget_db": cfg.power_budget_db,
            "delta_sq": cfg.delta_sq,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "schemes": cfg.schemes,
            "out_dir": out_dir.display().to_string(),
        },
        "outputs": [output],
        "wall_time_s": wall,
        "tolerances": {
            "conic_feas_tol": solver.feas_tol,
            "conic_abs_gap_tol": solver.abs_gap_tol,
            "conic_rel_gap_tol": solver.rel_gap_tol,
            "conic_cert_tol": solver.cert_tol,
            "conic_max_iter": solver.max_iter,
            "gp_tol": gp.tol,
            "gp_max_iter": gp.max_iter,
            "balance_rel_tol": cfg.balance_tol,
            "ser_noise_draws": cfg.noise_draws,
            "timing_warmup": cfg.warmup,
        },
    })
}
