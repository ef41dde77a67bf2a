//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use solitons::analysis::{
    collinearity_test, ricci_flat_trajectory, rotation_count, shoot, sphere_match, symmetric_search,
    verify_asymptotics, Regime, DEFAULT_ROTATION_RADIUS,
};
use solitons::config::{classify_cone_stability, omega_hat_roots};
use solitons::dynamics::{
    functionals, kahler_residuals, linearization_initial, multi_conservation_residual, rhs_multi_into, rhs_rescaled,
    MultiState,
};
use solitons::integrator::{seed_kahler, MultiSystem, RescaledSystem};
use solitons::{
    cone_solutions, integrate, resolve_preset, seed_unstable, CircleBundleParams, IntegrationControls, Locus,
    MultiWarpedParams, PhaseState, Preset, PresetName, ShootSpec, Termination, Trajectory, TwoSummandsParams,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn preset(name: PresetName, m: u32) -> TwoSummandsParams {
    resolve_preset(Preset { name, m }).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Unit `(c_Y, c_L)` with both components bounded away from zero.
fn random_spec(rng: &mut StdRng, locus: Locus) -> ShootSpec {
    let theta: f64 = rng.gen_range(0.05..std::f64::consts::FRAC_PI_2 - 0.05);
    let delta = 10f64.powf(rng.gen_range(-8.0..-5.0));
    ShootSpec { coefficients: vec![theta.cos(), theta.sin()], delta, locus }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut check = |p: TwoSummandsParams, expected: [(f64, f64); 2]| {
        let cones = cone_solutions(&p).unwrap();
        assert_eq!(cones.len(), 2);
        for (c, (e1, e2)) in cones.iter().zip(expected) {
            worst = worst.max(rel(c.c1 * c.c1, e1)).max(rel(c.c2 * c.c2, e2));
        }
    };
    check(preset(PresetName::CaP, 1), [(57.0 / 121.0, 19.0 / 11.0), (1.0, 1.0)]);
    for m in 1..=3u32 {
        let mf = f64::from(m);
        let num = 9.0 + 14.0 * mf + 4.0 * mf * mf;
        check(
            preset(PresetName::Hp, m),
            [(num / ((1.0 + 2.0 * mf) * (3.0 + 2.0 * mf).powi(2)), num / ((1.0 + 2.0 * mf) * (3.0 + 2.0 * mf))), (1.0, 1.0)],
        );
        let a = (1.0 + mf).powi(2) + mf;
        let second = (1.0 + mf) / (1.0 + 4.0 * mf);
        check(
            preset(PresetName::F, m),
            [(a / ((1.0 + mf).powi(2) * (1.0 + 4.0 * mf)), 4.0 * a / ((2.0 * mf + 1.0).powi(2) + mf)), (second, 4.0 * second)],
        );
    }
    let elapsed = start.elapsed();
    outcome(worst < 1e-12 && elapsed < Duration::from_secs(1), format!("max rel err {worst:.2e}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for d1 in 1..=10u32 {
        let p = TwoSummandsParams::new(d1, 3, f64::from(d1 * (d1 - 1)), 6.0, 0.0);
        let lin = linearization_initial(&p);
        let d = f64::from(d1);
        let mut got: Vec<f64> = lin.eigenpairs.iter().map(|e| e.0).collect();
        got.sort_by(f64::total_cmp);
        let mut want = vec![2.0 / d, 1.0 / d - 1.0, 1.0 / d - 1.0, 1.0 / d, 1.0 / d];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        // Each pair must be an eigenpair of the returned matrix.
        for (lam, v) in &lin.eigenpairs {
            for i in 0..5 {
                let mv: f64 = (0..5).map(|j| lin.matrix[i][j] * v[j]).sum();
                worst = worst.max((mv - lam * v[i]).abs());
            }
        }
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e}"))
}

/// `(label, params, locus)` for the four regimes on one preset.
fn regimes(base: TwoSummandsParams) -> [(&'static str, TwoSummandsParams, Locus); 4] {
    [
        ("steady", base.with_c(-1.0), Locus::Soliton),
        ("expanding", base.with_epsilon(2.0).with_c(-1.0), Locus::Soliton),
        ("ricci-flat", base, Locus::Einstein),
        ("neg-einstein", base.with_epsilon(2.0), Locus::Einstein),
    ]
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let controls = IntegrationControls { s_max: 50.0, ..Default::default() };
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut runs = 0;
    'outer: for round in 0.. {
        for name in [PresetName::Hp, PresetName::CaP] {
            for (label, p, locus) in regimes(preset(name, 1)) {
                if runs == 20 {
                    break 'outer;
                }
                runs += 1;
                let spec = random_spec(&mut rng, locus);
                let tr = shoot(&p, &spec, &controls).unwrap();
                if tr.termination != Termination::Horizon || !(tr.max_residual < 1e-8) {
                    failures.push(format!("{name}/{label}#{round}: {:?} {:.2e}", tr.termination, tr.max_residual));
                }
                worst = worst.max(tr.max_residual);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!("{runs} runs, max |residual| {worst:.2e}, {elapsed:.2?} {failures:?}"),
    )
}

/// Trajectories of the trapping sweep, shared with the Lyapunov checks.
fn trapping_sweep() -> Vec<(TwoSummandsParams, Locus, Trajectory)> {
    let mut rng = StdRng::seed_from_u64(4);
    let bases = [preset(PresetName::Hp, 1), preset(PresetName::CaP, 1), preset(PresetName::F, 3), preset(PresetName::Hp, 2)];
    let controls = IntegrationControls { s_max: 60.0, ..Default::default() };
    let mut out = Vec::new();
    for k in 0..50 {
        let base = bases[k % bases.len()];
        let (_, p, locus) = regimes(base)[(k / bases.len()) % 4];
        let spec = random_spec(&mut rng, locus);
        let tr = shoot(&p, &spec, &controls).unwrap();
        out.push((p, locus, tr));
    }
    out
}

fn criterion_4(sweep: &[(TwoSummandsParams, Locus, Trajectory)]) -> Outcome {
    let mut violations = 0usize;
    let mut samples = 0usize;
    for (p, _, tr) in sweep {
        assert!(solitons::d_hat(p) > 0.0 && p.epsilon >= 0.0 && p.c <= 0.0 && p.d1 > 1);
        let (w1, _) = omega_hat_roots(p).unwrap().unwrap();
        for y in &tr.states {
            samples += 1;
            if !(y[1] > 0.0 && y[3] / y[2] < w1) {
                if violations == 0 {
                    eprintln!("violation {p:?} {y:?} w1={w1} term={:?} s={:?}", tr.termination, tr.last_s());
                }
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{} trajectories, {samples} samples, {violations} violations", sweep.len()))
}

fn criterion_5(sweep: &[(TwoSummandsParams, Locus, Trajectory)]) -> Outcome {
    const SLACK: f64 = 1e-10;
    let mut bad = Vec::new();
    let mut checked = [0usize; 4];
    for (idx, (p, locus, tr)) in sweep.iter().enumerate() {
        let fs: Vec<_> = tr.states.iter().map(|y| functionals(p, &PhaseState::from_slice(y))).collect();
        for (k, w) in tr.states.windows(2).enumerate() {
            let (a, b) = (&fs[k], &fs[k + 1]);
            if w[0][1] > 0.0 && w[1][1] > 0.0 {
                checked[0] += 1;
                if b.k > a.k + SLACK {
                    bad.push(format!("K #{idx} step {k}: {:.3e}", b.k - a.k));
                }
            }
            if *locus == Locus::Einstein && p.epsilon >= 0.0 {
                checked[1] += 1;
                // Relative slack: F0 is of size delta^(-2) near the seed.
                if b.f0 > a.f0 + SLACK * a.f0.abs().max(1.0) {
                    bad.push(format!("F0 #{idx} step {k}: {:.3e}", b.f0 - a.f0));
                }
            }
            if *locus == Locus::Einstein && p.epsilon == 0.0 {
                checked[2] += 1;
                if b.g < a.g - SLACK * a.g.abs().max(1.0) {
                    bad.push(format!("G #{idx} step {k}: {:.3e}", b.g - a.g));
                }
            }
            if p.epsilon == 0.0 {
                checked[3] += 1;
                if w[1][4] < w[0][4] - SLACK {
                    bad.push(format!("L #{idx} step {k}: {:.3e}", w[1][4] - w[0][4]));
                }
            }
        }
    }
    bad.truncate(5);
    outcome(bad.is_empty(), format!("steps checked K/F0/G/L = {checked:?} {bad:?}"))
}

fn criterion_6() -> Outcome {
    let p = preset(PresetName::Hp, 1);
    let mut parts = Vec::new();
    let mut pass = true;
    let mut run = |label: &str, params: TwoSummandsParams, locus: Locus, regime: Regime, controls: IntegrationControls, vars: &[&str]| {
        let start = Instant::now();
        let tr = shoot(&params, &ShootSpec::new(vec![1.0, 1.0], locus), &controls).unwrap();
        let elapsed = start.elapsed();
        let report = verify_asymptotics(&params, &tr, regime, 1e-3).unwrap();
        let ok = vars.iter().all(|v| report.claim(v).unwrap().pass) && elapsed < Duration::from_secs(10);
        let worst = vars
            .iter()
            .map(|v| {
                let c = report.claim(v).unwrap();
                (c.observed - c.target).abs()
            })
            .fold(0.0, f64::max);
        pass &= ok;
        parts.push(format!("{label}: {} dev {worst:.1e} at s={:.0} ({elapsed:.1?})", if ok { "ok" } else { "FAIL" }, tr.last_s()));
    };
    run(
        "steady",
        p.with_c(-1.0),
        Locus::Soliton,
        Regime::Steady,
        IntegrationControls { s_max: 3000.0, max_step: 50.0, ..Default::default() },
        &["L"],
    );
    run(
        "ricci-flat",
        p,
        Locus::Einstein,
        Regime::RicciFlat,
        IntegrationControls { s_max: 400.0, stop_on_convergence: true, ..Default::default() },
        &["X1", "X2", "Y1", "Y2"],
    );
    run(
        "neg-einstein",
        p.with_epsilon(2.0),
        Locus::Einstein,
        Regime::NegEinstein,
        IntegrationControls { s_max: 200.0, ..Default::default() },
        &["L"],
    );
    run(
        "expanding",
        p.with_epsilon(2.0).with_c(-1.0),
        Locus::Soliton,
        Regime::Expanding,
        IntegrationControls { s_max: 2e6, max_step: 1e4, ..Default::default() },
        &["X1", "X2", "Y1", "Y2", "L"],
    );
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 4..=10u32 {
        let mut counts = Vec::new();
        for d1 in 2..=n - 2 {
            let d2 = n - d1;
            let p = TwoSummandsParams::doubly_warped(d1, d2);
            let cone = cone_solutions(&p).unwrap()[0];
            let tr = ricci_flat_trajectory(&p, 300.0).unwrap();
            let count = rotation_count(&p, &tr, &cone, DEFAULT_ROTATION_RADIUS);
            let spiral = classify_cone_stability(&p, &cone).kind == solitons::StabilityKind::Spiral;
            pass &= if n <= 8 { count >= 3 && spiral } else { count <= 1 && !spiral };
            counts.push(format!("{d1}+{d2}:{count}"));
        }
        parts.push(format!("n={n} [{}]", counts.join(" ")));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_8() -> Outcome {
    let dev = |p: TwoSummandsParams| {
        let cone = cone_solutions(&p).unwrap()[0];
        let tr = ricci_flat_trajectory(&p, 200.0).unwrap();
        collinearity_test(&p, &tr, &cone)
    };
    let hp1 = dev(preset(PresetName::Hp, 1));
    let f1 = dev(preset(PresetName::F, 1));
    let hp2 = dev(preset(PresetName::Hp, 2));
    outcome(hp1 < 1e-5 && f1 < 1e-5 && hp2 > 1e-3, format!("HP1 {hp1:.2e}, F1 {f1:.2e}, HP2 control {hp2:.2e}"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let sym = symmetric_search(2, 2, 0.01, 1.0, 40).unwrap();
    let t_sym = start.elapsed();
    let verified: Vec<f64> = sym.iter().filter(|s| s.verified).map(|s| s.fbar).collect();
    let start = Instant::now();
    let matches = sphere_match(2, 3, (0.02, 1.5), (0.02, 1.5), 300).unwrap();
    let t_match = start.elapsed();
    let limit = Duration::from_secs(300);
    outcome(
        !verified.is_empty() && !matches.is_empty() && t_sym < limit && t_match < limit,
        format!(
            "symmetric fbar {verified:?} ({t_sym:.1?}); matches {:?} ({t_match:.1?})",
            matches.iter().map(|m| (format!("{:.6}", m.fbar), format!("{:.6}", m.big_fbar))).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst_rhs: f64 = 0.0;
    for _ in 0..1000 {
        let d1 = rng.gen_range(1..=8u32);
        let d2 = rng.gen_range(1..=8u32);
        let a2 = rng.gen_range(0.1..50.0);
        let p = TwoSummandsParams::new(d1, d2, f64::from(d1 * (d1 - 1)), a2, 0.0)
            .with_epsilon(rng.gen_range(-2.0..2.0))
            .with_c(rng.gen_range(-2.0..0.0));
        let s = PhaseState {
            x1: rng.gen_range(-1.0..1.0),
            x2: rng.gen_range(-1.0..1.0),
            y1: rng.gen_range(0.01..1.0),
            y2: rng.gen_range(0.0..1.0),
            l: rng.gen_range(0.0..2.0),
            t: rng.gen_range(0.0..5.0),
            u: rng.gen_range(-3.0..0.0),
        };
        let a = rhs_rescaled(&p, &s).unwrap().to_array();
        let mp = MultiWarpedParams::from_two_summands(&p, None, 0.0);
        let v = MultiState { x: vec![s.x1, s.x2], y: vec![s.y1, s.y2], l: s.l, t: s.t, u: s.u }.to_vec();
        let mut b = vec![0.0; v.len()];
        rhs_multi_into(&mp, &v, &mut b);
        // Multi layout [X1, X2, Y1, Y2, L, t, u] coincides with PhaseState.
        for (x, y) in a.iter().zip(&b) {
            worst_rhs = worst_rhs.max((x - y).abs());
        }
    }

    // Steady soliton at m = infinity versus its finite-m quasi-Einstein lift.
    let p = TwoSummandsParams::new(3, 4, 6.0, 48.0, 0.0).with_c(-1.0);
    let seed = seed_unstable(&p, &ShootSpec::new(vec![1.0, 1.0], Locus::Soliton)).unwrap();
    let controls = IntegrationControls { s_max: 40.0, ..Default::default() };
    let run = |m: Option<f64>| {
        let mp = MultiWarpedParams::from_two_summands(&p, m, m.map_or(0.0, |m| -p.c / m));
        let state = match m {
            None => MultiState { x: vec![seed.x1, seed.x2], y: vec![seed.y1, seed.y2], l: seed.l, t: 0.0, u: 0.0 },
            Some(_) => MultiState {
                x: vec![seed.x1, seed.x2, 0.0],
                y: vec![seed.y1, seed.y2, seed.l],
                l: seed.l,
                t: 0.0,
                u: 0.0,
            },
        };
        assert!(multi_conservation_residual(&mp, &state.to_vec()).abs() < 1e-13);
        let sys = MultiSystem { params: mp, constrained: true };
        integrate(&sys, 0.0, &state.to_vec(), &controls).unwrap()
    };
    let reference = run(None);
    let mut worst_cons = reference.max_residual;
    for m in [1.0, 5.0, 50.0] {
        worst_cons = worst_cons.max(run(Some(m)).max_residual);
    }
    let distance = |tr: &Trajectory| {
        let mut d: f64 = 0.0;
        for k in 0..=400 {
            let s = 0.1 * k as f64;
            let a = tr.eval(s).unwrap();
            let b = reference.eval(s).unwrap();
            // X1, X2, Y1, Y2 sit at indices (0, 1, 3, 4) with three factors.
            for (i, j) in [(0, 0), (1, 1), (3, 2), (4, 3)] {
                d = d.max((a[i] - b[j]).abs());
            }
            // L; u is left out because the virtual factor enters its trace.
            d = d.max((a[6] - b[4]).abs());
        }
        d
    };
    let dists: Vec<f64> = [5.0, 50.0, 500.0].iter().map(|m| distance(&run(Some(*m)))).collect();
    let monotone = dists.windows(2).all(|w| w[1] <= w[0] / 2.0);
    outcome(
        worst_rhs < 1e-14 && worst_cons < 1e-8 && monotone,
        format!("rhs max diff {worst_rhs:.1e}; max conservation residual {worst_cons:.1e}; sup-distance m=5,50,500: {dists:?}"),
    )
}

fn criterion_11() -> Outcome {
    let cb = CircleBundleParams { p: 4, q: 1, d: 2 };
    let (p, s0) = seed_kahler(&cb, 0.0, 0.1, 0.1, 0.5).unwrap();
    let controls = IntegrationControls { s_max: 30.0, project: false, ..Default::default() };
    let tr = integrate(&RescaledSystem::new(p, Locus::Unconstrained), 0.0, &s0.to_array(), &controls).unwrap();
    let worst = tr
        .states
        .iter()
        .map(|y| {
            let (a, b) = kahler_residuals(&cb, &PhaseState::from_slice(y), 0.0);
            a.abs().max(b.abs())
        })
        .fold(0.0, f64::max);
    outcome(
        tr.termination == Termination::Horizon && worst < 1e-8,
        format!("C = {:.4}, {} samples, max Kähler residual {worst:.2e}, {:?}", p.c, tr.len(), tr.termination),
    )
}

fn main() {
    let mut all = true;
    let mut report = |id: u32, name: &str, o: Outcome| {
        all &= o.pass;
        println!("criterion {id:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "cone solutions", criterion_1());
    report(2, "initial eigenvalues", criterion_2());
    report(3, "conservation drift", criterion_3());
    let sweep = trapping_sweep();
    report(4, "trapping", criterion_4(&sweep));
    report(5, "Lyapunov monotonicity", criterion_5(&sweep));
    report(6, "asymptotics", criterion_6());
    report(7, "spiral/node rotation", criterion_7());
    report(8, "collinearity", criterion_8());
    report(9, "symmetric and matched spheres", criterion_9());
    report(10, "quasi-Einstein reduction", criterion_10());
    report(11, "Kähler subspace", criterion_11());
    if !all {
        std::process::exit(1);
    }
}
