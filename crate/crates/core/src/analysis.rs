//! Asymptotics checks, rotation counting, symmetric and matched sphere
//! searches, metric reconstruction and completeness diagnostics.

use serde::{Deserialize, Serialize};

use crate::config::{cone_solutions, ConeSolution, ConeStability, TwoSummandsParams};
use crate::dynamics::{Locus, PhaseState, ProfileState};
use crate::error::AnalysisError;
use crate::integrator::{
    count_omega_critical, integrate, seed_profile, seed_unstable, EventKind, IntegrationControls, ProfileSystem,
    RescaledSystem, ShootSpec, Termination, Trajectory, DEFAULT_PROFILE_T0_FACTOR,
};

/// Seeds on the requested locus and integrates the rescaled system.
pub fn shoot(
    params: &TwoSummandsParams,
    spec: &ShootSpec,
    controls: &IntegrationControls,
) -> Result<Trajectory, AnalysisError> {
    let s0 = seed_unstable(params, spec)?;
    let sys = RescaledSystem::new(*params, spec.locus);
    Ok(integrate(&sys, 0.0, &s0.to_array(), controls)?)
}

fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                scope.spawn(move || c.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// `n` points spaced geometrically over `[lo, hi]`.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Steady,
    RicciFlat,
    Expanding,
    NegEinstein,
}

impl Regime {
    pub fn check(&self, params: &TwoSummandsParams) -> Result<(), AnalysisError> {
        let (eps, c) = (params.epsilon, params.c);
        let ok = match self {
            Regime::Steady => eps == 0.0 && c < 0.0,
            Regime::RicciFlat => eps == 0.0 && c == 0.0,
            Regime::Expanding => eps > 0.0 && c < 0.0,
            Regime::NegEinstein => eps > 0.0 && c == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(AnalysisError::Regime(format!("{self:?} does not match epsilon = {eps}, C = {c}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub variable: &'static str,
    pub observed: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub regime: Regime,
    pub claims: Vec<Claim>,
    pub horizon: f64,
    pub tolerance: f64,
}

impl AsymptoticsReport {
    pub fn claim(&self, variable: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.variable == variable)
    }

    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

pub const DEFAULT_WINDOW: f64 = 10.0;

/// Means of the rescaled variables over the trailing window.
pub fn trailing_means(traj: &Trajectory, window: f64) -> [f64; 5] {
    let end = traj.last_s();
    let mut acc = [0.0; 5];
    let mut count = 0.0;
    for (s, y) in traj.samples() {
        if s >= end - window {
            for (a, v) in acc.iter_mut().zip(y) {
                *a += v;
            }
            count += 1.0;
        }
    }
    acc.map(|a| a / count)
}

/// Compares trailing-window means against the limits of the given regime.
pub fn verify_asymptotics(
    params: &TwoSummandsParams,
    traj: &Trajectory,
    regime: Regime,
    tolerance: f64,
) -> Result<AsymptoticsReport, AnalysisError> {
    regime.check(params)?;
    match traj.termination {
        Termination::Horizon | Termination::Terminal(EventKind::Converged) => {}
        other => return Err(AnalysisError::Regime(format!("trajectory ended with {other:?}"))),
    }
    let n = params.nf();
    let targets: [f64; 5] = match regime {
        Regime::Steady => [0.0, 0.0, 0.0, 0.0, 1.0 / (-params.c).sqrt()],
        Regime::RicciFlat => {
            let cone = *cone_solutions(params)?
                .first()
                .ok_or_else(|| AnalysisError::Regime("no real cone solution".into()))?;
            [1.0 / n, 1.0 / n, 1.0 / (n * cone.c1), 1.0 / (n * cone.c2), f64::NAN]
        }
        Regime::Expanding => [0.0; 5],
        Regime::NegEinstein => [1.0 / n, 1.0 / n, 0.0, 0.0, (2.0 / (n * params.epsilon)).sqrt()],
    };
    let means = trailing_means(traj, DEFAULT_WINDOW);
    let names = ["X1", "X2", "Y1", "Y2", "L"];
    let claims = names
        .iter()
        .zip(means.iter().zip(targets))
        .filter(|(_, (_, t))| !t.is_nan())
        .map(|(name, (obs, target))| Claim { variable: name, observed: *obs, target, pass: (obs - target).abs() < tolerance })
        .collect();
    Ok(AsymptoticsReport { regime, claims, horizon: traj.last_s(), tolerance })
}

/// Ricci-flat trajectory on the Einstein locus leaving along
/// `e_Y2 + e_L`, at the tight tolerances used for rotation counting.
/// `L` does not feed back into `(X, Y)` when `eps = 0`.
pub fn ricci_flat_trajectory(params: &TwoSummandsParams, s_max: f64) -> Result<Trajectory, AnalysisError> {
    let p = params.with_epsilon(0.0).with_c(0.0);
    let controls = IntegrationControls { rel_tol: 1e-12, abs_tol: 1e-14, s_max, ..Default::default() };
    shoot(&p, &ShootSpec::new(vec![1.0, 1.0], Locus::Einstein), &controls)
}

/// Crossings closer to the cone point than this are round-off.
pub const ROTATION_NOISE_FLOOR: f64 = 1e-13;
pub const DEFAULT_ROTATION_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub s: f64,
    /// Distance of `(X1, Y1)` to the cone point.
    pub distance: f64,
}

/// Crossings of `X1 = 1/n` inside the `radius` neighbourhood of the cone
/// point `(1/n, 1/(n c1))`. On the Einstein locus these are exactly the
/// `X1 = X2` events.
pub fn rotation_crossings(
    params: &TwoSummandsParams,
    traj: &Trajectory,
    cone: &ConeSolution,
    radius: f64,
) -> Vec<Crossing> {
    let n = params.nf();
    let (bx, by) = (1.0 / n, 1.0 / (n * cone.c1));
    traj.events_of(EventKind::OmegaCritical)
        .map(|e| Crossing { s: e.s, distance: (e.state[0] - bx).hypot(e.state[2] - by) })
        .filter(|c| c.distance > ROTATION_NOISE_FLOOR && c.distance < radius)
        .collect()
}

pub fn rotation_count(params: &TwoSummandsParams, traj: &Trajectory, cone: &ConeSolution, radius: f64) -> usize {
    rotation_crossings(params, traj, cone, radius).len()
}

/// Half-period `pi/|Im lambda|` of the linearised spiral, the expected
/// spacing between consecutive crossings.
pub fn predicted_crossing_spacing(stability: &ConeStability) -> Option<f64> {
    let im = stability.eigenvalues[0].im.abs();
    (im > 0.0).then(|| std::f64::consts::PI / im)
}

/// Profile state at the maximal volume orbit of `c_fbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceHit {
    pub fbar: f64,
    pub t: f64,
    pub state: ProfileState,
    /// `OmegaCritical` events before the slice.
    pub count: usize,
}

fn profile_controls() -> IntegrationControls {
    IntegrationControls {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: 0.05,
        s_max: 20.0,
        terminal_events: vec![EventKind::MaxVolumeOrbit],
        ..Default::default()
    }
}

/// Integrates the smooth-collapse profile with `f2(0) = fbar` up to the
/// maximal volume orbit.
pub fn profile_to_slice(params: &TwoSummandsParams, fbar: f64) -> Result<(SliceHit, Trajectory), AnalysisError> {
    let t0 = DEFAULT_PROFILE_T0_FACTOR * fbar;
    let y0 = seed_profile(params, fbar, t0)?;
    let traj = integrate(&ProfileSystem::einstein(*params), t0, &y0.to_array(), &profile_controls())?;
    if traj.termination != Termination::Terminal(EventKind::MaxVolumeOrbit) {
        return Err(AnalysisError::NoMaxVolumeOrbit(fbar));
    }
    let hit = SliceHit {
        fbar,
        t: traj.last_s(),
        state: ProfileState::from_slice(traj.last_state()),
        count: count_omega_critical(&traj),
    };
    Ok((hit, traj))
}

/// Sphere-construction normalisation: `A_i = d_i(d_i - 1)`, `A3 = 0`,
/// `eps/2 = -n`.
pub fn sphere_params(d1: u32, d2: u32) -> TwoSummandsParams {
    let p = TwoSummandsParams::doubly_warped(d1, d2);
    p.with_epsilon(-2.0 * p.nf())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricSolution {
    pub fbar: f64,
    /// Geometric time of the maximal volume orbit.
    pub t: f64,
    pub df1: f64,
    pub df2: f64,
    pub count: usize,
    /// `|f1'|, |f2'| < 1e-8` at the slice after re-integration.
    pub verified: bool,
}

pub const SYMMETRY_TOL: f64 = 1e-8;

/// Roots of `fbar -> omega'(T(fbar))`, where `T` is the maximal volume orbit.
///
/// Brackets come from sign changes between grid neighbours; intervals where
/// the crossing count jumps by an even amount without a sign change are
/// subdivided, since the sign equals `(-1)^count`.
pub fn symmetric_search(d1: u32, d2: u32, lo: f64, hi: f64, grid: usize) -> Result<Vec<SymmetricSolution>, AnalysisError> {
    if !(lo > 0.0 && hi > lo && grid >= 2) {
        return Err(AnalysisError::Regime(format!("bad search range [{lo}, {hi}] with {grid} points")));
    }
    let params = sphere_params(d1, d2);
    let eval = |f: f64| profile_to_slice(&params, f).map(|(h, _)| h);
    let pts = geomspace(lo, hi, grid);
    let hits: Vec<SliceHit> = par_map(&pts, |f| eval(*f)).into_iter().collect::<Result<_, _>>()?;

    let mut roots: Vec<f64> = Vec::new();
    let mut stack: Vec<(SliceHit, SliceHit, u32)> = hits.windows(2).map(|w| (w[0], w[1], 0)).collect();
    stack.reverse();
    for h in &hits {
        if h.state.omega_dot().abs() < 1e-12 {
            roots.push(h.fbar);
        }
    }
    while let Some((a, b, depth)) = stack.pop() {
        let (ga, gb) = (a.state.omega_dot(), b.state.omega_dot());
        if ga * gb < 0.0 {
            roots.push(bisect_omega(&params, a, b)?);
        } else if a.count != b.count && depth < 6 {
            let sub = geomspace(a.fbar, b.fbar, 6);
            let inner: Vec<SliceHit> = sub[1..5].iter().map(|f| eval(*f)).collect::<Result<_, _>>()?;
            let mut chain = vec![a];
            chain.extend(inner);
            chain.push(b);
            for w in chain.windows(2).rev() {
                stack.push((w[0], w[1], depth + 1));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * y.abs());

    roots
        .into_iter()
        .map(|f| {
            let h = eval(f)?;
            let verified = h.state.df1.abs() < SYMMETRY_TOL && h.state.df2.abs() < SYMMETRY_TOL;
            Ok(SymmetricSolution { fbar: f, t: h.t, df1: h.state.df1, df2: h.state.df2, count: h.count, verified })
        })
        .collect()
}

fn bisect_omega(params: &TwoSummandsParams, mut a: SliceHit, mut b: SliceHit) -> Result<f64, AnalysisError> {
    let sa = a.state.omega_dot().signum();
    for _ in 0..200 {
        if (b.fbar - a.fbar) <= 1e-15 * b.fbar {
            break;
        }
        let mid = (a.fbar * b.fbar).sqrt();
        if mid <= a.fbar || mid >= b.fbar {
            break;
        }
        let m = profile_to_slice(params, mid)?.0;
        let g = m.state.omega_dot();
        if g == 0.0 {
            return Ok(mid);
        }
        if g.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    // Return the endpoint with the smaller |omega'|.
    Ok(if a.state.omega_dot().abs() <= b.state.omega_dot().abs() { a.fbar } else { b.fbar })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchResult {
    pub fbar: f64,
    #[serde(rename = "Fbar")]
    pub big_fbar: f64,
    /// Slice time of `c_fbar`.
    pub t0: f64,
    /// Slice time of `d_Fbar`.
    pub t1: f64,
    /// Max-norm mismatch of `(f1, f1', f2, f2')` at the slice.
    pub residual: f64,
    /// Max deviation between the continued `c` leg and the twisted `d` leg.
    pub gluing_error: f64,
}

pub const MATCH_TOL: f64 = 1e-6;
pub const GLUING_TOL: f64 = 1e-5;

/// `(f1'/f1, 1/f1)` at the slice.
fn c_coords(h: &SliceHit) -> [f64; 2] {
    [h.state.df1 / h.state.f1, 1.0 / h.state.f1]
}

/// Twisted `(F2, -F2', F1, -F1')` in slice coordinates.
fn d_coords(h: &SliceHit) -> [f64; 2] {
    [-h.state.df2 / h.state.f2, 1.0 / h.state.f2]
}

fn twisted(p: &ProfileState) -> [f64; 4] {
    [p.f2, -p.df2, p.f1, -p.df1]
}

fn segment_intersection(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let w = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = (w[0] * s[1] - w[1] * s[0]) / den;
    let u = (w[0] * r[1] - w[1] * r[0]) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

/// Matches of the smooth-collapse curves `c_fbar` (first sphere collapsing)
/// and twisted `d_Fbar` (second sphere collapsing) at the maximal volume
/// orbit.
pub fn sphere_match(
    d1: u32,
    d2: u32,
    fbar_range: (f64, f64),
    big_fbar_range: (f64, f64),
    grid: usize,
) -> Result<Vec<MatchResult>, AnalysisError> {
    for (lo, hi) in [fbar_range, big_fbar_range] {
        if !(lo > 0.0 && hi > lo) {
            return Err(AnalysisError::Regime(format!("bad search range [{lo}, {hi}]")));
        }
    }
    if grid < 2 {
        return Err(AnalysisError::Regime("grid needs at least 2 points".into()));
    }
    let pc = sphere_params(d1, d2);
    let pd = sphere_params(d2, d1);
    let fs = geomspace(fbar_range.0, fbar_range.1, grid);
    let gs = geomspace(big_fbar_range.0, big_fbar_range.1, grid);
    let ch: Vec<SliceHit> = par_map(&fs, |f| profile_to_slice(&pc, *f).map(|h| h.0)).into_iter().collect::<Result<_, _>>()?;
    let dh: Vec<SliceHit> = par_map(&gs, |f| profile_to_slice(&pd, *f).map(|h| h.0)).into_iter().collect::<Result<_, _>>()?;
    let cc: Vec<[f64; 2]> = ch.iter().map(c_coords).collect();
    let dc: Vec<[f64; 2]> = dh.iter().map(d_coords).collect();

    let mut guesses: Vec<(f64, f64)> = Vec::new();
    for i in 0..grid - 1 {
        for j in 0..grid - 1 {
            if let Some((a, b)) = segment_intersection(cc[i], cc[i + 1], dc[j], dc[j + 1]) {
                let f = (fs[i].ln() + a * (fs[i + 1].ln() - fs[i].ln())).exp();
                let g = (gs[j].ln() + b * (gs[j + 1].ln() - gs[j].ln())).exp();
                guesses.push((f, g));
            }
        }
    }

    let refined: Vec<Option<MatchResult>> = par_map(&guesses, |&(f, g)| refine_match(&pc, &pd, f, g).ok().flatten());
    let mut out: Vec<MatchResult> = Vec::new();
    for m in refined.into_iter().flatten() {
        let dup = out
            .iter()
            .any(|o| (o.fbar - m.fbar).abs() < 1e-8 * m.fbar && (o.big_fbar - m.big_fbar).abs() < 1e-8 * m.big_fbar);
        if !dup {
            out.push(m);
        }
    }
    out.sort_by(|a, b| a.fbar.total_cmp(&b.fbar).then(a.big_fbar.total_cmp(&b.big_fbar)));
    Ok(out)
}

/// Newton refinement in `(ln fbar, ln Fbar)` followed by the slice and
/// gluing checks; `None` when either check fails.
fn refine_match(
    pc: &TwoSummandsParams,
    pd: &TwoSummandsParams,
    f: f64,
    g: f64,
) -> Result<Option<MatchResult>, AnalysisError> {
    let residual = |lf: f64, lg: f64| -> Result<[f64; 2], AnalysisError> {
        let c = c_coords(&profile_to_slice(pc, lf.exp())?.0);
        let d = d_coords(&profile_to_slice(pd, lg.exp())?.0);
        Ok([c[0] - d[0], c[1] - d[1]])
    };
    let (mut lf, mut lg) = (f.ln(), g.ln());
    let mut r = residual(lf, lg)?;
    for _ in 0..30 {
        if r[0].abs().max(r[1].abs()) < 1e-11 {
            break;
        }
        let h = 1e-6;
        let rf = residual(lf + h, lg)?;
        let rg = residual(lf, lg + h)?;
        let j = [[(rf[0] - r[0]) / h, (rg[0] - r[0]) / h], [(rf[1] - r[1]) / h, (rg[1] - r[1]) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Ok(None);
        }
        let df = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dg = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        // Damp large steps to stay inside the searched region.
        let scale = (0.5 / df.abs().max(dg.abs())).min(1.0);
        lf -= scale * df;
        lg -= scale * dg;
        r = residual(lf, lg)?;
    }
    let (fbar, big_fbar) = (lf.exp(), lg.exp());
    let (hc, _) = profile_to_slice(pc, fbar)?;
    let (hd, td) = profile_to_slice(pd, big_fbar)?;
    let a = hc.state.to_array();
    let b = twisted(&hd.state);
    let slice_res = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    if !(slice_res < MATCH_TOL) {
        return Ok(None);
    }
    let gluing_error = gluing_check(pc, &hc, &hd, &td)?;
    if !(gluing_error < GLUING_TOL) {
        return Ok(None);
    }
    Ok(Some(MatchResult { fbar, big_fbar, t0: hc.t, t1: hd.t, residual: slice_res, gluing_error }))
}

/// Continues `c` past the slice and compares with the time-reversed,
/// twisted `d` leg over 90% of its length.
fn gluing_check(pc: &TwoSummandsParams, hc: &SliceHit, hd: &SliceHit, td: &Trajectory) -> Result<f64, AnalysisError> {
    let span = 0.9 * hd.t;
    let controls = IntegrationControls { s_max: hc.t + span, terminal_events: Vec::new(), ..profile_controls() };
    let cont = integrate(&ProfileSystem::einstein(*pc), hc.t, &hc.state.to_array(), &controls)?;
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let tau = span * k as f64 / 20.0;
        let (Some(c), Some(d)) = (cont.eval(hc.t + tau), td.eval(hd.t - tau)) else {
            return Ok(f64::INFINITY);
        };
        let tw = twisted(&ProfileState::from_slice(&d));
        for i in 0..4 {
            worst = worst.max((c[i] - tw[i]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    pub f1: f64,
    pub f2: f64,
    pub u: f64,
    pub du: f64,
    /// Scalar curvature `-C - eps u - u'^2 - ((n+1)/2) eps`.
    pub r: f64,
}

/// Metric profile `f_i = L/Y_i`, `u' = (d1 X1 + d2 X2 - 1)/L` along a
/// rescaled trajectory. Samples with `L = 0` or non-increasing `t` are
/// skipped.
pub fn reconstruct_metric(params: &TwoSummandsParams, traj: &Trajectory) -> Vec<ProfileRow> {
    let n = params.nf();
    let eps = params.epsilon;
    let mut rows: Vec<ProfileRow> = Vec::new();
    for (_, y) in traj.samples() {
        let s = PhaseState::from_slice(y);
        if !(s.l > 0.0) {
            continue;
        }
        if rows.last().is_some_and(|r| s.t <= r.t) {
            continue;
        }
        let du = (params.d1f() * s.x1 + params.d2f() * s.x2 - 1.0) / s.l;
        rows.push(ProfileRow {
            t: s.t,
            f1: s.l / s.y1,
            f2: s.l / s.y2,
            u: s.u,
            du,
            r: -params.c - eps * s.u - du * du - 0.5 * (n + 1.0) * eps,
        });
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    CompleteEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub verdict: Verdict,
    pub t_end: f64,
    /// `dt/ds` over the second half of the trajectory.
    pub growth_rate: f64,
    /// Largest violation of the monotonicity (eps = 0) or of the
    /// `(eps/2) L^2 <= max(1/d1, 1/d2)` bound (eps > 0); nonpositive is fine.
    pub worst_violation: f64,
}

pub const COMPLETENESS_T_THRESHOLD: f64 = 1e3;

pub fn completeness_diagnostic(params: &TwoSummandsParams, traj: &Trajectory, t_threshold: f64) -> CompletenessReport {
    let ls: Vec<f64> = traj.states.iter().map(|y| y[4]).collect();
    let worst_violation = if params.epsilon == 0.0 {
        let drop = ls.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        let below = ls.first().map_or(0.0, |l0| ls.iter().map(|l| l0 - l).fold(f64::NEG_INFINITY, f64::max));
        drop.max(below)
    } else {
        let bound = (1.0 / params.d1f()).max(1.0 / params.d2f());
        ls.iter().map(|l| 0.5 * params.epsilon * l * l - bound).fold(f64::NEG_INFINITY, f64::max)
    };
    let t_end = traj.last_state()[5];
    let mid = traj.len() / 2;
    let growth_rate = if traj.len() >= 2 {
        (t_end - traj.states[mid][5]) / (traj.last_s() - traj.s[mid]).max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    let slack = if params.epsilon == 0.0 { 1e-10 } else { 1e-9 };
    let ok = traj.termination == Termination::Horizon
        && ls.first().is_some_and(|l| *l > 0.0)
        && worst_violation <= slack
        && t_end > t_threshold
        && growth_rate > 0.0;
    CompletenessReport {
        verdict: if ok { Verdict::CompleteEvidence } else { Verdict::Inconclusive },
        t_end,
        growth_rate,
        worst_violation,
    }
}

/// Largest distance of `(X1 - 1/n, Y1 - 1/(n c1))` from the line through
/// the origin and the initial point `(1/d1 - 1/n, 1/d1 - 1/(n c1))`.
pub fn collinearity_test(params: &TwoSummandsParams, traj: &Trajectory, cone: &ConeSolution) -> f64 {
    let n = params.nf();
    let d1 = params.d1f();
    let (bx, by) = (1.0 / n, 1.0 / (n * cone.c1));
    let (vx, vy) = (1.0 / d1 - bx, 1.0 / d1 - by);
    let norm = vx.hypot(vy);
    traj.states
        .iter()
        .map(|y| ((y[0] - bx) * vy - (y[2] - by) * vx).abs() / norm)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve_preset, Preset, PresetName};

    fn hp(m: u32) -> TwoSummandsParams {
        resolve_preset(Preset { name: PresetName::Hp, m }).unwrap()
    }

    #[test]
    fn geomspace_endpoints() {
        let g = geomspace(0.01, 1.0, 3);
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert_eq!((g[0], g[2]), (0.01, 1.0));
    }

    #[test]
    fn regime_mismatch_rejected() {
        let p = hp(1);
        let tr = ricci_flat_trajectory(&p, 5.0).unwrap();
        assert!(verify_asymptotics(&p, &tr, Regime::Steady, 1e-3).is_err());
    }

    #[test]
    fn ricci_flat_metric_has_zero_curvature() {
        let p = hp(1);
        let tr = ricci_flat_trajectory(&p, 40.0).unwrap();
        let rows = reconstruct_metric(&p, &tr);
        assert!(!rows.is_empty());
        let worst = rows.iter().fold(0.0f64, |a, r| a.max(r.r.abs()).max(r.u.abs()));
        assert!(worst < 1e-12, "{worst:e}");
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn no_neighbourhood_no_rotation() {
        let p = hp(1);
        let cone = cone_solutions(&p).unwrap()[0];
        let tr = ricci_flat_trajectory(&p, 3.0).unwrap();
        assert_eq!(rotation_count(&p, &tr, &cone, 1e-6), 0);
    }

    #[test]
    fn truncated_run_is_inconclusive() {
        let p = hp(1).with_c(-1.0);
        let tr = shoot(&p, &ShootSpec::new(vec![1.0, 1.0], Locus::Soliton), &IntegrationControls {
            s_max: 5.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(completeness_diagnostic(&p, &tr, COMPLETENESS_T_THRESHOLD).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn segment_intersection_cases() {
        assert_eq!(segment_intersection([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]), Some((0.5, 0.5)));
        assert_eq!(segment_intersection([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]), None);
        assert_eq!(segment_intersection([0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, -1.0]), None);
    }

    #[test]
    fn empty_symmetric_range() {
        // Between 0.6 and 0.9 the count stays 0 and omega' keeps its sign.
        let r = symmetric_search(2, 2, 0.6, 0.9, 4).unwrap();
        assert!(r.is_empty());
        assert!(symmetric_search(2, 2, 0.9, 0.6, 4).is_err());
    }
}
