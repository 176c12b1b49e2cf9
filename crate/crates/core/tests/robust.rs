use cipre_core::ci::solve_relaxed_direct;
use cipre_core::model::{lift_real, rotate_channels, ChannelSet, ModulationSpec, Scenario};
use cipre_core::random::{gen_channels, gen_csi_error, gen_symbols, trial_rng, Stream};
use cipre_core::robust::{
    branch_values, sampled_worst_case, solve_robust_balance, solve_robust_powermin, worst_case_margin, RobustScenario,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn zero_radius_reduces_to_nominal() {
    for m in [ModulationSpec::qpsk(), ModulationSpec::psk8()] {
        for t in 0..10 {
            let s = Scenario::uniform(4, 3, 1.0, 10.0, m, 1).unwrap();
            let (h, d) = (gen_channels(&s, t), gen_symbols(&s, t));
            let rot = rotate_channels(&h, &d);
            let nominal = solve_relaxed_direct(&rot, &lift_real(&rot, &m, &s.gamma, 1.0).unwrap()).unwrap();
            let rob = solve_robust_powermin(&RobustScenario::uniform(h, 0.0), &d, &s.gamma, 1.0, &m).unwrap();
            assert_eq!(rob.status, nominal.status);
            if nominal.is_feasible() {
                assert!(close(rob.power, nominal.power, 1e-8));
            }
        }
    }
}

#[test]
fn power_grows_with_radius_and_margins_hold() {
    let m = ModulationSpec::qpsk();
    for t in 0..10 {
        let s = Scenario::uniform(4, 4, 1.0, 10.0, m, 2).unwrap();
        let d = gen_symbols(&s, t);
        let est = gen_channels(&s, t);
        let mut last = 0.0;
        for delta in [0.0, 0.01, 0.03, 0.1] {
            let rob = RobustScenario::uniform(est.clone(), delta);
            let sol = solve_robust_powermin(&rob, &d, &s.gamma, 1.0, &m).unwrap();
            if !sol.is_feasible() {
                last = f64::INFINITY;
                continue;
            }
            assert!(
                sol.power >= last * (1.0 - 1e-9),
                "trial {t}: {} after {last}",
                sol.power
            );
            last = sol.power;
            for wc in &sol.worst_case {
                assert!(wc.margin() >= -1e-6 * s.thresholds()[0], "{wc:?}");
            }
        }
    }
}

#[test]
fn analytic_worst_case_is_attained_and_never_exceeded() {
    let m = ModulationSpec::psk8();
    let s = Scenario::uniform(3, 3, 1.0, 5.0, m, 3).unwrap();
    let mut rng = trial_rng(3, 0, Stream::Noise);
    for t in 0..10 {
        let d = gen_symbols(&s, t);
        let rob = RobustScenario::uniform(gen_channels(&s, t), 0.05);
        let sol = solve_robust_powermin(&rob, &d, &s.gamma, 1.0, &m).unwrap();
        if !sol.is_feasible() {
            continue;
        }
        let analytic = worst_case_margin(&sol.w, &rob, &d, &s.gamma, 1.0, &m);
        let sampled = sampled_worst_case(&sol.w, &rob, &d, &s.gamma, 1.0, &m, 2000, &mut rng);
        for i in 0..3 {
            let h_hat = rob.estimates.user(i);
            let shift = d.phases[0] - d.phases[i];
            let thr = s.thresholds()[i];
            for b in 0..2 {
                assert!(sampled[i][b] <= analytic[i].value[b] + 1e-9 * (1.0 + analytic[i].value[b].abs()));
                let e = &analytic[i].maximizer[b];
                assert!(e.norm() <= 0.05 * (1.0 + 1e-12));
                let at = branch_values(&sol.w, &(&h_hat + e), shift, thr, &m)[b];
                assert!(
                    (at - analytic[i].value[b]).abs() < 1e-9 * (1.0 + at.abs()),
                    "{at} vs {:?}",
                    analytic[i].value
                );
            }
        }
    }
}

#[test]
fn true_channels_inside_the_ball_stay_constructive() {
    let m = ModulationSpec::qpsk();
    let s = Scenario::uniform(4, 3, 1.0, 10.0, m, 4).unwrap();
    for t in 0..20 {
        let h = gen_channels(&s, t);
        let d = gen_symbols(&s, t);
        let est = ChannelSet::new(&h.h - gen_csi_error(&s, t, &[0.1; 3]));
        let sol = solve_robust_powermin(&RobustScenario::uniform(est, 0.1), &d, &s.gamma, 1.0, &m).unwrap();
        if !sol.is_feasible() {
            continue;
        }
        for i in 0..3 {
            let v = branch_values(&sol.w, &h.user(i), d.phases[0] - d.phases[i], s.thresholds()[i], &m);
            assert!(v[0] <= 1e-7 && v[1] <= 1e-7, "trial {t} user {i}: {v:?}");
        }
    }
}

#[test]
fn single_user_balance_closed_form() {
    // the estimate's gain shrinks by δ / sinθ in the worst direction
    for m in [ModulationSpec::qpsk(), ModulationSpec::psk8()] {
        let s = Scenario::uniform(3, 1, 1.0, 1.0, m, 5).unwrap();
        let (h, d) = (gen_channels(&s, 0), gen_symbols(&s, 0));
        let (delta, p, n0) = (0.1, 4.0, 0.5);
        let (g, sol) = solve_robust_balance(&RobustScenario::uniform(h.clone(), delta), &d, n0, p, &m).unwrap();
        let want = p * (h.norm_sq(0).sqrt() - delta / m.theta().sin()).powi(2) / n0;
        assert!(close(g, want, 1e-7), "{g} vs {want}");
        assert!(sol.power <= p * (1.0 + 1e-8));
    }
}

#[test]
fn robust_needs_sector_modulation() {
    let s = Scenario::uniform(2, 2, 1.0, 1.0, ModulationSpec::bpsk(), 6).unwrap();
    let rob = RobustScenario::uniform(gen_channels(&s, 0), 0.1);
    assert!(solve_robust_powermin(&rob, &gen_symbols(&s, 0), &s.gamma, 1.0, &ModulationSpec::bpsk()).is_err());
}
