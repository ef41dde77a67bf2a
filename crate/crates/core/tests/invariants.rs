//! Trajectory-level properties of the integrated flows.

use solitons::analysis::{
    completeness_diagnostic, predicted_crossing_spacing, profile_to_slice, reconstruct_metric, ricci_flat_trajectory,
    rotation_crossings, shoot, sphere_match, sphere_params, Verdict, COMPLETENESS_T_THRESHOLD,
};
use solitons::dynamics::{locus_residuals, rhs_rescaled};
use solitons::integrator::{count_omega_critical, PlanarSystem, ProfileSystem, RescaledSystem};
use solitons::{
    classify_cone_stability, cone_solutions, integrate, resolve_preset, seed_profile, seed_unstable, EventKind,
    IntegrationControls, Locus, PhaseState, Preset, PresetName, ShootSpec, Termination, TwoSummandsParams,
};

fn preset(name: PresetName, m: u32) -> TwoSummandsParams {
    resolve_preset(Preset { name, m }).unwrap()
}

fn run(p: &TwoSummandsParams, locus: Locus, controls: &IntegrationControls) -> solitons::Trajectory {
    shoot(p, &ShootSpec::new(vec![1.0, 1.0], locus), controls).unwrap()
}

#[test]
fn halving_tolerances_moves_endpoint_by_less_than_ten_tolerances() {
    let p = preset(PresetName::Hp, 1).with_c(-1.0);
    let coarse = IntegrationControls { rel_tol: 1e-8, abs_tol: 1e-10, s_max: 20.0, ..Default::default() };
    let fine = IntegrationControls { rel_tol: 5e-9, abs_tol: 5e-11, ..coarse.clone() };
    let a = run(&p, Locus::Soliton, &coarse);
    let b = run(&p, Locus::Soliton, &fine);
    for (x, y) in a.last_state().iter().zip(b.last_state()) {
        assert!((x - y).abs() < 10.0 * (coarse.rel_tol * x.abs() + coarse.abs_tol), "{x} vs {y}");
    }
}

#[test]
fn quotient_derivative_identities() {
    let p = preset(PresetName::CaP, 1).with_c(-1.0);
    let tr = run(&p, Locus::Soliton, &IntegrationControls { s_max: 30.0, ..Default::default() });
    let h = 1e-4;
    for k in 1..30 {
        let s = f64::from(k);
        let at = |s: f64| PhaseState::from_slice(&tr.eval(s).unwrap());
        let (lo, mid, hi) = (at(s - h), at(s), at(s + h));
        let w = |z: &PhaseState| z.y2 / z.y1;
        let dw = (w(&hi) - w(&lo)) / (2.0 * h);
        assert!((dw - w(&mid) * (mid.x1 - mid.x2)).abs() < 1e-6, "s = {s}");
        let v = |z: &PhaseState| z.l / z.y2;
        let dv = (v(&hi) - v(&lo)) / (2.0 * h);
        assert!((dv - v(&mid) * mid.x2).abs() < 1e-6 * (1.0 + v(&mid)), "s = {s}");
    }
}

#[test]
fn soliton_locus_and_sign_conditions_persist() {
    for name in [PresetName::Hp, PresetName::F, PresetName::CaP] {
        for eps in [0.0, 1.0] {
            let m = if name == PresetName::CaP { 1 } else { 3 };
            let p = preset(name, m).with_epsilon(eps).with_c(-1.0);
            let tr = run(&p, Locus::Soliton, &IntegrationControls { s_max: 60.0, ..Default::default() });
            assert_eq!(tr.termination, Termination::Horizon);
            let mut x2_negative = false;
            for y in &tr.states[1..] {
                let s = PhaseState::from_slice(y);
                let (s1, s2) = locus_residuals(&p, &s);
                assert!(s1 < 0.0 && s2 < 0.0, "{name} eps {eps}: S1 {s1} S2 {s2}");
                assert!(s.x1 > 0.0);
                assert!(!(x2_negative && s.x2 > 0.0), "X2 returned to positive values");
                x2_negative |= s.x2 < 0.0;
            }
        }
    }
}

#[test]
fn trapped_flows_exist_until_horizon() {
    for (name, m) in [(PresetName::Hp, 1), (PresetName::F, 3), (PresetName::CaP, 1)] {
        let base = preset(name, m);
        for (p, locus) in [
            (base, Locus::Einstein),
            (base.with_c(-1.0), Locus::Soliton),
            (base.with_epsilon(1.0).with_c(-0.5), Locus::Soliton),
        ] {
            for theta in [0.2f64, 0.8, 1.4] {
                let spec = ShootSpec::new(vec![theta.cos(), theta.sin()], locus);
                let tr = shoot(&p, &spec, &IntegrationControls::default()).unwrap();
                assert_eq!(tr.termination, Termination::Horizon, "{name}{m} {locus:?} {theta}");
                assert!(tr.first_event(EventKind::BlowUp).is_none());
            }
        }
    }
}

#[test]
fn omega_critical_events_are_simple_and_schedule_independent() {
    let p = TwoSummandsParams::doubly_warped(2, 4);
    let controls = |max_step: f64| IntegrationControls {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step,
        s_max: 300.0,
        ..Default::default()
    };
    // A larger displacement keeps the early, tiny-state phase above abs_tol;
    // errors there become pure time shifts that are never damped.
    let spec = ShootSpec { coefficients: vec![1.0, 1.0], delta: 1e-4, locus: Locus::Einstein };
    let a = shoot(&p, &spec, &controls(1.0)).unwrap();
    let b = shoot(&p, &spec, &controls(0.05)).unwrap();
    let ea: Vec<_> = a.events_of(EventKind::OmegaCritical).collect();
    let eb: Vec<_> = b.events_of(EventKind::OmegaCritical).collect();
    assert!(ea.len() >= 2);
    assert_eq!(ea.len(), eb.len());
    let mut compared = 0;
    for (x, y) in ea.iter().zip(&eb) {
        assert!(x.slope != 0.0 && x.slope.signum() == y.slope.signum());
        // Late crossings sit on an exponentially small spiral; their timing
        // is only as good as state error / slope.
        if x.slope.abs() > 1e-4 {
            compared += 1;
            assert!((x.s - y.s).abs() < 1e-8, "{} vs {}", x.s, y.s);
        }
    }
    assert!(compared >= 2);
}

#[test]
fn positive_curvature_profiles_reach_a_maximal_orbit() {
    let p = sphere_params(2, 3);
    let sys = ProfileSystem::einstein(p);
    for fbar in [0.02, 0.1, 0.5, 1.0, 3.0] {
        let y0 = seed_profile(&p, fbar, 1e-3 * fbar).unwrap();
        let controls = IntegrationControls { s_max: 20.0, max_step: 0.05, ..Default::default() };
        let tr = integrate(&sys, 1e-3 * fbar, &y0.to_array(), &controls).unwrap();
        assert!(
            tr.first_event(EventKind::MaxVolumeOrbit).is_some() || tr.first_event(EventKind::Collapse).is_some(),
            "fbar {fbar}"
        );
    }
}

#[test]
fn critical_point_counts_on_profiles() {
    let count = |d1: u32, d2: u32, fbar: f64| {
        let p = sphere_params(d1, d2);
        let (_, tr) = profile_to_slice(&p, fbar).unwrap();
        count_omega_critical(&tr)
    };
    assert!(count(2, 2, 0.02) >= 2);
    assert!(count(5, 5, 0.02) <= 1);
    assert!(count(4, 6, 0.02) <= 1);
}

#[test]
fn steady_trace_is_monotone_and_bounded() {
    let p = preset(PresetName::Hp, 1).with_c(-1.0);
    let tr = run(&p, Locus::Soliton, &IntegrationControls { s_max: 200.0, ..Default::default() });
    let n = p.nf();
    let trace = |y: &[f64]| p.d1f() * y[0] + p.d2f() * y[1];
    for w in tr.states.windows(2) {
        if w[0][4] > 0.0 {
            assert!(trace(&w[1]) - trace(&w[0]) <= 1e-10);
        }
    }
    for y in &tr.states {
        if y[5] > 0.0 {
            assert!(trace(y) * y[5] <= n * y[4] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn steady_metric_has_positive_curvature_and_is_complete() {
    let p = preset(PresetName::Hp, 1).with_c(-1.0);
    let tr = run(&p, Locus::Soliton, &IntegrationControls { s_max: 3000.0, max_step: 50.0, ..Default::default() });
    let rows = reconstruct_metric(&p, &tr);
    assert!(rows.len() > 10);
    let n = p.nf();
    let sc = (-p.c).sqrt();
    for r in &rows {
        assert!(r.r > 0.0);
        if r.t > 10.0 {
            assert!(r.r * r.t * r.t <= 2.0 * sc * n * r.t + n * n);
        }
    }
    let report = completeness_diagnostic(&p, &tr, COMPLETENESS_T_THRESHOLD);
    assert_eq!(report.verdict, Verdict::CompleteEvidence, "{report:?}");
}

#[test]
fn expanding_potential_is_negative_decreasing_concave() {
    let p = preset(PresetName::Hp, 1).with_epsilon(2.0).with_c(-1.0);
    let tr = run(&p, Locus::Soliton, &IntegrationControls { s_max: 50.0, ..Default::default() });
    let rows = reconstruct_metric(&p, &tr);
    let rows: Vec<_> = rows.iter().filter(|r| r.t > 1e-3).collect();
    assert!(rows.len() > 10);
    for r in &rows {
        assert!(r.u < 0.0 && r.du < 0.0, "{r:?}");
    }
    for w in rows.windows(2) {
        assert!(w[1].u < w[0].u);
        // Concavity through the slope: u' decreases in t.
        assert!(w[1].du < w[0].du, "{:?} {:?}", w[0], w[1]);
    }
    let bound = (1.0 / p.d1f()).max(1.0 / p.d2f());
    for y in &tr.states {
        assert!(0.5 * p.epsilon * y[4] * y[4] <= bound + 1e-9);
    }
}

#[test]
fn ricci_flat_slopes_tend_to_cone() {
    let p = preset(PresetName::Hp, 1);
    let cone = cone_solutions(&p).unwrap()[0];
    let tr = ricci_flat_trajectory(&p, 200.0).unwrap();
    let y = PhaseState::from_slice(tr.last_state());
    assert!((y.x1 / y.y1 - cone.c1).abs() < 1e-4);
    assert!((y.x2 / y.y2 - cone.c2).abs() < 1e-4);
}

#[test]
fn crossing_spacing_matches_linearisation() {
    for (d1, d2) in [(2, 2), (2, 4), (3, 3)] {
        let p = TwoSummandsParams::doubly_warped(d1, d2);
        let cone = cone_solutions(&p).unwrap()[0];
        let predicted = predicted_crossing_spacing(&classify_cone_stability(&p, &cone)).unwrap();
        let tr = ricci_flat_trajectory(&p, 300.0).unwrap();
        let crossings = rotation_crossings(&p, &tr, &cone, 0.05);
        assert!(crossings.len() >= 3);
        // Spacing of the last crossings, deepest in the linear regime.
        let tail = &crossings[crossings.len() - 3..];
        for w in tail.windows(2) {
            let spacing = w[1].s - w[0].s;
            assert!((spacing - predicted).abs() < 0.2 * predicted, "{d1}+{d2}: {spacing} vs {predicted}");
        }
    }
}

#[test]
fn planar_reduction_tracks_full_flow() {
    let p = TwoSummandsParams::doubly_warped(3, 4);
    let tr = ricci_flat_trajectory(&p, 30.0).unwrap();
    let y0 = PhaseState::from_slice(&tr.eval(5.0).unwrap());
    let controls = IntegrationControls { rel_tol: 1e-12, abs_tol: 1e-14, s_max: 30.0, ..Default::default() };
    let planar = integrate(&PlanarSystem { params: p }, 5.0, &[y0.x1, y0.y1, y0.l], &controls).unwrap();
    for s in [10.0, 20.0, 30.0] {
        let a = tr.eval(s).unwrap();
        let b = planar.eval(s).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-7 && (a[2] - b[1]).abs() < 1e-7, "s = {s}");
    }
}

#[test]
fn sphere_match_recovers_round_sphere_and_handles_empty_ranges() {
    let found = sphere_match(2, 3, (0.8, 1.25), (0.8, 1.25), 16).unwrap();
    let round = found.iter().find(|m| (m.fbar - 1.0).abs() < 1e-6).expect("round sphere");
    assert!((round.big_fbar - 1.0).abs() < 1e-6);
    assert!((round.t0 + round.t1 - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!(round.residual < 1e-6 && round.gluing_error < 1e-5);

    // Curves of a small-fbar window stay away from the round-sphere window.
    let none = sphere_match(2, 3, (1.5, 2.0), (0.8, 1.1), 8).unwrap();
    assert!(none.is_empty());
}

#[test]
fn rescaled_field_rejects_nonpositive_y1() {
    let p = preset(PresetName::Hp, 1);
    let s = PhaseState { x1: 0.1, x2: 0.1, y1: 0.0, y2: 0.1, l: 0.1, t: 0.0, u: 0.0 };
    assert!(rhs_rescaled(&p, &s).is_err());
    let sys = RescaledSystem::new(p, Locus::Unconstrained);
    let y0 = seed_unstable(&p, &ShootSpec::new(vec![1.0, 1.0], Locus::Einstein)).unwrap();
    let tr = integrate(&sys, 0.0, &y0.to_array(), &IntegrationControls { s_max: 5.0, ..Default::default() }).unwrap();
    assert!(tr.s.windows(2).all(|w| w[1] > w[0]));
}
