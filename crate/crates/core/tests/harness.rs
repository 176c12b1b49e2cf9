use cipre_core::harness::{
    balance_table, db, feasibility_table, format_g9, power_table, power_trial, robust_table, run_balance_sweep,
    run_power_sweep, run_robust_sweep, run_ser_check, run_timing, ser_bound, ser_table, timing_table, ExperimentConfig,
    Scheme, TimingMethod,
};
use cipre_core::model::{ModulationSpec, Scenario};
use cipre_core::HarnessError;

fn small(n: usize, k: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(n, k, ModulationSpec::qpsk());
    cfg.trials = 6;
    cfg.seed = 3;
    cfg
}

#[test]
fn power_csv_is_reproducible_and_well_formed() {
    let mut cfg = small(4, 3);
    cfg.gamma_db = vec![0.0, 10.0];
    cfg.schemes = vec![
        Scheme::CiStrict,
        Scheme::CiRelaxed,
        Scheme::CiDualGp,
        Scheme::Conventional,
    ];
    let a = power_table(&run_power_sweep(&cfg).unwrap()).render();
    let b = power_table(&run_power_sweep(&cfg).unwrap()).render();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,modulation,n_tx,n_users,gamma_db,trials,feasible_frac,mean_power,mean_power_db,mean_inst_power_db"
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn aggregation_matches_per_trial_logs() {
    let mut cfg = small(3, 4);
    cfg.trials = 20;
    let points = run_power_sweep(&cfg).unwrap();
    for p in &points {
        let ok: Vec<f64> = p.trials.iter().filter(|t| t.feasible).map(|t| t.power).collect();
        assert_eq!(p.row.feasible, ok.len());
        assert_eq!(p.row.trials, 20);
        if ok.is_empty() {
            assert!(p.row.mean_power.is_none());
        } else {
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            assert!((p.row.mean_power.unwrap() - mean).abs() <= 1e-12 * mean);
        }
    }
    // conventional cannot serve 4 users with 3 antennas
    let conv = points.iter().find(|p| p.row.scheme == "conventional").unwrap();
    assert_eq!(conv.row.feasible, 0);
    let table = feasibility_table(&points);
    assert_eq!(table.column("feasible_frac").unwrap()[1], "0");
}

#[test]
fn trials_are_paired_and_schedule_independent() {
    let s = Scenario::uniform(4, 4, 1.0, 10.0, ModulationSpec::qpsk(), 8).unwrap();
    let forward: Vec<_> = (0..4).map(|t| power_trial(Scheme::CiRelaxed, &s, t, 0.0)).collect();
    let backward: Vec<_> = (0..4)
        .rev()
        .map(|t| power_trial(Scheme::CiRelaxed, &s, t, 0.0))
        .collect();
    for (a, b) in forward.iter().zip(backward.iter().rev()) {
        assert_eq!(a.power.to_bits(), b.power.to_bits());
    }
    // the relaxed optimum never exceeds the strict one on the same draw
    for t in 0..4 {
        let strict = power_trial(Scheme::CiStrict, &s, t, 0.0);
        let relaxed = power_trial(Scheme::CiRelaxed, &s, t, 0.0);
        if strict.feasible {
            assert!(relaxed.power <= strict.power * (1.0 + 1e-9));
        }
    }
}

#[test]
fn balance_rows_are_monotone_in_budget() {
    let mut cfg = small(4, 3);
    cfg.power_budget_db = vec![0.0, 10.0, 20.0];
    cfg.schemes = vec![Scheme::CiRelaxed, Scheme::CiStrict, Scheme::Conventional];
    let rows = run_balance_sweep(&cfg).unwrap();
    for scheme in ["ci-relaxed", "ci-strict", "conventional"] {
        let g: Vec<f64> = rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.mean_gamma.unwrap())
            .collect();
        assert_eq!(g.len(), 3);
        // every balanced target is linear in the budget for the CI schemes
        assert!(g.windows(2).all(|w| w[1] > w[0]), "{scheme}: {g:?}");
    }
    let ci: Vec<f64> = rows
        .iter()
        .filter(|r| r.scheme == "ci-relaxed")
        .map(|r| r.mean_gamma.unwrap())
        .collect();
    assert!((ci[1] / ci[0] - 10.0).abs() < 1e-5);
    let t = balance_table(&rows);
    assert_eq!(
        t.header.join(","),
        "scheme,n_tx,n_users,power_budget_db,trials,mean_gamma_db"
    );
    assert_eq!(t.column("mean_gamma_db").unwrap()[0], format_g9(db(ci[0])));
}

#[test]
fn robust_sweep_includes_reference_rows() {
    let mut cfg = small(4, 3);
    cfg.delta_sq = vec![1e-6, 1e-3];
    cfg.gamma_db = vec![10.0];
    let points = run_robust_sweep(&cfg).unwrap();
    assert_eq!(points.len(), 3);
    let t = robust_table(&points);
    assert_eq!(
        t.column("scheme").unwrap(),
        vec!["robust-ci", "robust-ci", "ci-relaxed"]
    );
    assert_eq!(t.column("delta_sq").unwrap(), vec!["1e-06", "0.001", "0"]);
}

#[test]
fn ser_stays_under_the_distance_bound() {
    let mut cfg = small(4, 3);
    cfg.trials = 40;
    cfg.gamma_db = vec![3.0, 9.0];
    cfg.schemes = vec![Scheme::CiRelaxed];
    let rows = run_ser_check(&cfg).unwrap();
    let ser: Vec<f64> = rows.iter().map(|r| r.ser.unwrap()).collect();
    assert!(ser[1] < ser[0]);
    for r in &rows {
        let (n, b) = (r.symbols.unwrap() as f64, r.bound.unwrap());
        assert!(r.ser.unwrap() <= b + 3.0 * (b * (1.0 - b) / n).sqrt());
    }
    assert_eq!(ser_table(&rows).header.join(","), "scheme,gamma_db,symbols,ser,bound");
    // 2Q(√Γ) for QPSK
    let q = ser_bound(&ModulationSpec::qpsk(), 10.0);
    assert!((q - 2.0 * 7.827_011_290_012_8e-4).abs() < 1e-12);
}

#[test]
fn timing_covers_every_method_and_user_count() {
    let mut cfg = small(5, 3);
    cfg.trials = 3;
    cfg.warmup = 1;
    let rows = run_timing(&cfg).unwrap();
    assert_eq!(rows.len(), 9);
    for m in TimingMethod::ALL {
        assert_eq!(rows.iter().filter(|r| r.method == m).count(), 3);
    }
    assert!(rows.iter().all(|r| r.p90 >= r.median));
    assert_eq!(
        timing_table(&rows).header.join(","),
        "method,n_tx,n_users,trials,median_us,p90_us"
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small(4, 3);
    cfg.gamma_db.clear();
    assert!(matches!(run_power_sweep(&cfg), Err(HarnessError::Config(_))));
    let mut cfg = ExperimentConfig::new(4, 3, ModulationSpec::bpsk());
    cfg.schemes = vec![Scheme::CiDualGp];
    assert!(matches!(run_power_sweep(&cfg), Err(HarnessError::Config(_))));
    cfg.schemes = vec![Scheme::CiRelaxed];
    cfg.trials = 0;
    assert!(matches!(run_power_sweep(&cfg), Err(HarnessError::Config(_))));
    assert!("ci-magic".parse::<Scheme>().is_err());
    assert_eq!("robust-ci".parse::<Scheme>().unwrap(), Scheme::RobustCi);
}
