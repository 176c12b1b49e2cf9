use cipre_core::ci::Status;
use cipre_core::conventional::{achieved_sinr, solve_conventional_balance, solve_conventional_powermin};
use cipre_core::model::{ChannelSet, ModulationSpec, Scenario, C64};
use cipre_core::random::gen_channels;
use nalgebra::DMatrix;

fn channels(n: usize, k: usize, seed: u64, trial: u64) -> ChannelSet {
    let s = Scenario::uniform(n, k, 1.0, 1.0, ModulationSpec::qpsk(), seed).unwrap();
    gen_channels(&s, trial)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn single_user_power_is_target_over_gain() {
    let h = channels(4, 1, 1, 0);
    let sol = solve_conventional_powermin(&h, &[10.0], 2.0).unwrap();
    assert!(close(sol.power, 20.0 / h.norm_sq(0), 1e-8));
    let (g, _) = solve_conventional_balance(&h, 2.0, 5.0, 1e-9).unwrap();
    assert!(close(g, 5.0 * h.norm_sq(0) / 2.0, 1e-7), "{g}");
}

#[test]
fn orthogonal_users_do_not_interact() {
    let h = ChannelSet::new(DMatrix::from_diagonal(&nalgebra::dvector![
        C64::new(2.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-0.5, 0.5)
    ]));
    let gamma = [1.0, 4.0, 2.0];
    let sol = solve_conventional_powermin(&h, &gamma, 1.0).unwrap();
    let want: f64 = (0..3).map(|i| gamma[i] / h.norm_sq(i)).sum();
    assert!(close(sol.power, want, 1e-8), "{} vs {want}", sol.power);
}

#[test]
fn sinr_constraints_are_tight_at_optimum() {
    for t in 0..10 {
        let h = channels(5, 4, 2, t);
        let gamma = [10.0, 3.0, 10.0, 30.0];
        let sol = solve_conventional_powermin(&h, &gamma, 1.0).unwrap();
        assert!(sol.is_feasible());
        let sinr = achieved_sinr(&h, &sol.precoders, 1.0);
        for i in 0..4 {
            assert!(
                close(sinr[i], gamma[i], 1e-6),
                "trial {t} user {i}: {} vs {}",
                sinr[i],
                gamma[i]
            );
            assert!(close(sol.sinr[i], sinr[i], 1e-9));
        }
        assert!(close(sol.precoders.total_power(), sol.power, 1e-10));
    }
}

#[test]
fn power_ignores_per_user_channel_phases() {
    let h = channels(4, 3, 3, 0);
    let mut rotated = h.h.clone();
    for (i, a) in [0.3f64, -2.0, 1.1].iter().enumerate() {
        let mut row = rotated.row_mut(i);
        row *= C64::from_polar(1.0, *a);
    }
    let a = solve_conventional_powermin(&h, &[5.0; 3], 1.0).unwrap();
    let b = solve_conventional_powermin(&ChannelSet::new(rotated), &[5.0; 3], 1.0).unwrap();
    assert!(close(a.power, b.power, 1e-8));
}

#[test]
fn more_users_than_antennas_is_infeasible() {
    let mut infeasible = 0;
    for t in 0..20 {
        let sol = solve_conventional_powermin(&channels(3, 4, 4, t), &[10.0; 4], 1.0).unwrap();
        infeasible += usize::from(sol.status == Status::Infeasible);
    }
    assert_eq!(infeasible, 20);
}

#[test]
fn balancing_meets_the_budget_and_is_monotone() {
    for t in 0..5 {
        let h = channels(4, 4, 5, t);
        let mut last = 0.0;
        for p in [1.0, 10.0, 100.0] {
            let (g, sol) = solve_conventional_balance(&h, 1.0, p, 1e-6).unwrap();
            let sol = sol.unwrap();
            assert!(sol.power <= p * (1.0 + 1e-6));
            assert!(achieved_sinr(&h, &sol.precoders, 1.0)
                .iter()
                .all(|s| *s >= g * (1.0 - 1e-6)));
            // the budget is nearly exhausted at the balanced target
            let again = solve_conventional_powermin(&h, &[g * (1.0 + 1e-4); 4], 1.0).unwrap();
            assert!(again.power > p);
            assert!(g > last);
            last = g;
        }
    }
}
