use cipre_core::ci::{
    solve_balancing_bisect, solve_balancing_direct, solve_bpsk, solve_broadcast, solve_qpsk_axis, solve_relaxed_direct,
    solve_strict, split_precoders, Method, Status,
};
use cipre_core::dual::{
    build_dual, closed_form_interior, solve_dual_gp, solve_dual_path, GpOptions, GpVerdict, StepRule,
};
use cipre_core::model::{
    check_constructive, instantaneous_power, lift_real, rotate_channels, ChannelSet, ModulationSpec, Scenario,
    SymbolFrame, C64,
};
use cipre_core::random::{gen_channels, gen_symbols};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn draw(
    n: usize,
    k: usize,
    gamma: f64,
    m: ModulationSpec,
    seed: u64,
    trial: u64,
) -> (Scenario, ChannelSet, SymbolFrame) {
    let s = Scenario::uniform(n, k, 1.0, gamma, m, seed).unwrap();
    let h = gen_channels(&s, trial);
    let d = gen_symbols(&s, trial);
    (s, h, d)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn single_user_is_matched_filter() {
    for m in [ModulationSpec::qpsk(), ModulationSpec::psk8()] {
        let (s, h, d) = draw(3, 1, 10.0, m, 1, 0);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let want = 10.0 / h.norm_sq(0);
        let relaxed = solve_relaxed_direct(&rot, &lift).unwrap();
        let strict = solve_strict(&rot, &s.gamma, 1.0, &m).unwrap();
        assert!(close(relaxed.power, want, 1e-9), "{} vs {want}", relaxed.power);
        assert!(close(strict.power, want, 1e-9));
        // w ∝ conj(h)
        let hc = h.user(0).map(|z| z.conj());
        let c = relaxed.w.dotc(&hc) / hc.norm_squared();
        assert!((&relaxed.w - hc * c).norm() < 1e-8 * relaxed.w.norm());
    }
}

#[test]
fn orthogonal_users_get_independent_beams() {
    let m = ModulationSpec::qpsk();
    let h = ChannelSet::new(DMatrix::identity(2, 2));
    let d = SymbolFrame::from_indices(&m, vec![0, 2]);
    let rot = rotate_channels(&h, &d);
    let lift = lift_real(&rot, &m, &[1.0, 1.0], 1.0).unwrap();
    let sol = solve_relaxed_direct(&rot, &lift).unwrap();
    assert!(close(sol.power, 2.0, 1e-10));
    // user 2 sees w₂ e^{j(φ₁ − φ₂)} = −w₂ on its own ray
    let expect = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
    assert!((&sol.w - expect).norm() < 1e-8);
}

#[test]
fn opposite_bpsk_symbols_on_one_channel_are_infeasible() {
    let b = ModulationSpec::bpsk();
    let row = [C64::new(0.3, -1.0), C64::new(1.2, 0.4)];
    let h = ChannelSet::new(DMatrix::from_row_slice(2, 2, &[row[0], row[1], row[0], row[1]]));
    let d = SymbolFrame::from_indices(&b, vec![0, 1]);
    let rot = rotate_channels(&h, &d);
    assert_eq!(solve_bpsk(&rot, &[1.0, 1.0], 1.0).unwrap().status, Status::Infeasible);
    let same = SymbolFrame::from_indices(&b, vec![1, 1]);
    assert!(solve_bpsk(&rotate_channels(&h, &same), &[1.0, 1.0], 1.0)
        .unwrap()
        .is_feasible());
}

#[test]
fn precoders_deliver_constructive_points() {
    for m in [ModulationSpec::bpsk(), ModulationSpec::qpsk(), ModulationSpec::psk8()] {
        for t in 0..20 {
            let (s, h, d) = draw(4, 4, 10.0, m, 3, t);
            let rot = rotate_channels(&h, &d);
            let sol = if m.order() == 2 {
                solve_bpsk(&rot, &s.gamma, 1.0).unwrap()
            } else {
                solve_relaxed_direct(&rot, &lift_real(&rot, &m, &s.gamma, 1.0).unwrap()).unwrap()
            };
            if !sol.is_feasible() {
                continue;
            }
            let pre = split_precoders(&sol.w, &d);
            assert!(close(instantaneous_power(&pre, &d), sol.power, 1e-10));
            let x = pre.transmit(&d);
            assert!((&x - &sol.w * C64::from_polar(1.0, d.phases[0])).norm() < 1e-10 * (1.0 + x.norm()));
            for i in 0..4 {
                let mg = check_constructive(h.apply(i, &x), d.phases[i], s.gamma[i], 1.0, &m);
                assert!(mg.holds(1e-7 * s.thresholds()[i]), "{m:?} trial {t} user {i}: {mg:?}");
                assert_eq!(m.detect(h.apply(i, &x)), d.indices[i]);
            }
        }
    }
}

#[test]
fn broadcast_matches_multicast() {
    for t in 0..10 {
        let m = ModulationSpec::qpsk();
        let (s, h, d) = draw(3, 3, 10.0, m, 4, t);
        let rot = rotate_channels(&h, &d);
        let mc = solve_relaxed_direct(&rot, &lift_real(&rot, &m, &s.gamma, 1.0).unwrap()).unwrap();
        let bc = solve_broadcast(&h, &d, &s.gamma, 1.0, &m).unwrap();
        assert_eq!(bc.status, mc.status);
        if mc.is_feasible() {
            assert!(close(bc.power, mc.power, 1e-7), "{} vs {}", bc.power, mc.power);
        }
    }
}

#[test]
fn qpsk_axis_form_matches_sector_form() {
    for t in 0..10 {
        let m = ModulationSpec::qpsk();
        let (s, h, d) = draw(4, 3, 5.0, m, 5, t);
        let rot = rotate_channels(&h, &d);
        let sector = solve_relaxed_direct(&rot, &lift_real(&rot, &m, &s.gamma, 1.0).unwrap()).unwrap();
        let axis = solve_qpsk_axis(&h, &d, &s.gamma, 1.0).unwrap();
        assert!(close(sector.power, axis.power, 1e-8));
    }
}

#[test]
fn dual_path_matches_direct_and_certifies_infeasibility() {
    let m = ModulationSpec::qpsk();
    let mut infeasible = 0;
    for t in 0..150 {
        let (s, h, d) = draw(3, 4, 10.0, m, 6, t);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let direct = solve_relaxed_direct(&rot, &lift).unwrap();
        let state = solve_dual_gp(&build_dual(&lift), &GpOptions::default());
        assert!(state.lambda.iter().all(|&l| l >= 0.0));
        match direct.status {
            Status::Feasible => {
                assert_eq!(state.verdict, GpVerdict::Converged);
                assert!((state.dual_value - direct.power).abs() <= 1e-6 * (1.0 + direct.power));
                let (path, _) = solve_dual_path(&rot, &lift, &GpOptions::default()).unwrap();
                assert!(close(path.power, direct.power, 1e-6));
            }
            Status::Infeasible => {
                infeasible += 1;
                assert_eq!(state.verdict, GpVerdict::Divergence);
                let (path, _) = solve_dual_path(&rot, &lift, &GpOptions::default()).unwrap();
                assert_eq!(path.status, Status::Infeasible);
            }
            Status::Failed => panic!("direct solve failed on trial {t}"),
        }
    }
    assert!(infeasible > 0);
}

#[test]
fn gp_objective_never_increases() {
    let m = ModulationSpec::psk8();
    for rule in [StepRule::BarzilaiBorwein, StepRule::InverseLipschitz] {
        let (s, h, d) = draw(4, 4, 10.0, m, 7, 1);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let opts = GpOptions {
            step: rule,
            record_trace: true,
            ..GpOptions::default()
        };
        let state = solve_dual_gp(&build_dual(&lift), &opts);
        assert_eq!(state.verdict, GpVerdict::Converged);
        assert!(state
            .trace
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs())));
    }
}

#[test]
fn closed_form_applies_when_all_sectors_bind() {
    let m = ModulationSpec::qpsk();
    let mut used = 0;
    for t in 0..30 {
        let (s, h, d) = draw(6, 2, 10.0, m, 8, t);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let direct = solve_relaxed_direct(&rot, &lift).unwrap();
        let (path, _) = solve_dual_path(&rot, &lift, &GpOptions::default()).unwrap();
        assert!(close(path.power, direct.power, 1e-7));
        if let Some(l) = closed_form_interior(&build_dual(&lift)) {
            if l.iter().all(|&v| v > 0.0) {
                used += 1;
                assert_eq!(path.method, Method::ClosedFormInterior);
            }
        }
    }
    assert!(used > 0);
}

#[test]
fn balancing_direct_matches_bisection_and_inverts_powermin() {
    let m = ModulationSpec::qpsk();
    for t in 0..8 {
        let (s, h, d) = draw(5, 4, 1.0, m, 9, t);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let budget = 10.0;
        let (g, sol) = solve_balancing_direct(&rot, &lift, budget).unwrap();
        let (gb, _) = solve_balancing_bisect(&rot, &lift, budget, 1e-6).unwrap();
        assert!(close(g, gb, 1e-5), "{g} vs {gb}");
        assert!(sol.power <= budget * (1.0 + 1e-8));
        let back = solve_relaxed_direct(&rot, &lift.with_gamma(&[g; 4])).unwrap();
        assert!(close(back.power, budget, 1e-6));
        // homogeneity: the balanced target scales linearly with the budget
        let (g2, _) = solve_balancing_direct(&rot, &lift, 4.0 * budget).unwrap();
        assert!(close(g2, 4.0 * g, 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn relaxed_never_costs_more_than_strict(seed in 0u64..1000, n in 2usize..6, k in 1usize..5, m8 in any::<bool>()) {
        let m = if m8 { ModulationSpec::psk8() } else { ModulationSpec::qpsk() };
        let (s, h, d) = draw(n, k, 10.0, m, seed, 0);
        let rot = rotate_channels(&h, &d);
        let relaxed = solve_relaxed_direct(&rot, &lift_real(&rot, &m, &s.gamma, 1.0).unwrap()).unwrap();
        let strict = solve_strict(&rot, &s.gamma, 1.0, &m).unwrap();
        if strict.is_feasible() {
            prop_assert!(relaxed.is_feasible());
            prop_assert!(relaxed.power <= strict.power * (1.0 + 1e-9));
        }
    }

    #[test]
    fn power_scales_linearly_with_target(seed in 0u64..1000, g in 0.1f64..100.0) {
        let m = ModulationSpec::qpsk();
        let (s, h, d) = draw(4, 3, 1.0, m, seed, 0);
        let rot = rotate_channels(&h, &d);
        let lift = lift_real(&rot, &m, &s.gamma, 1.0).unwrap();
        let one = solve_relaxed_direct(&rot, &lift).unwrap();
        let scaled = solve_relaxed_direct(&rot, &lift.with_gamma(&[g; 3])).unwrap();
        prop_assert_eq!(one.status, scaled.status);
        if one.is_feasible() {
            prop_assert!(close(scaled.power, g * one.power, 1e-7));
        }
    }
}
