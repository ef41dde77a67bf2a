//! Dormand-Prince 5(4) integration with dense output, event location,
//! locus projection and seeding near the singular orbit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::{CircleBundleParams, MultiWarpedParams, QuasiParams, TwoSummandsParams};
use crate::dynamics::{
    conservation_gradient, conservation_residual, hat_constraints, locus_residuals, multi_conservation_residual,
    quasi_conservation_residual, rhs_hat, rhs_multi_into, rhs_planar, rhs_polynomial, rhs_profile, rhs_quasi,
    rhs_rescaled, HatState, Locus, PhaseState, ProfileMode, ProfileState,
};
use crate::error::{DomainExit, IntegrateError, SeedError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    X2Zero,
    /// `X1 = X2` (rescaled) or `f1'/f1 = f2'/f2` (hat, profile).
    OmegaCritical,
    /// `tr L = 0`.
    MaxVolumeOrbit,
    F2Critical,
    Collapse,
    BlowUp,
    Converged,
    DomainExit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub s: f64,
    pub state: Vec<f64>,
    /// Derivative of the event function at the root; zero for terminal
    /// conditions that are not sign changes.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Horizon,
    Terminal(EventKind),
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Integration horizon in the independent variable.
    pub s_max: f64,
    /// Blow-up guard on [`OdeSystem::blowup_components`].
    pub norm_cap: f64,
    /// Length (in the independent variable) of the trailing convergence window.
    pub convergence_window: f64,
    pub convergence_tol: f64,
    pub stop_on_convergence: bool,
    /// Sign-change events that end the integration.
    pub terminal_events: Vec<EventKind>,
    /// Apply [`OdeSystem::project`] after every accepted step.
    pub project: bool,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    pub event_tol: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        IntegrationControls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            s_max: 100.0,
            norm_cap: 1e8,
            convergence_window: 10.0,
            convergence_tol: 1e-6,
            stop_on_convergence: false,
            terminal_events: Vec::new(),
            project: true,
            initial_step: None,
            max_steps: 2_000_000,
            event_tol: 1e-10,
        }
    }
}

impl IntegrationControls {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: &str| Err(IntegrateError::InitialState(m.to_string()));
        if !(self.rel_tol >= 1e-14 && self.abs_tol >= 1e-14) {
            return bad("tolerances must be at least 1e-14");
        }
        if !(self.max_step > 0.0 && self.norm_cap > 0.0 && self.convergence_window > 0.0 && self.convergence_tol > 0.0) {
            return bad("max_step, norm_cap and convergence settings must be positive");
        }
        if !(self.event_tol > 0.0) {
            return bad("event_tol must be positive");
        }
        Ok(())
    }
}

/// A first-order system `y' = f(s, y)` with monitors.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit>;

    /// Sign-change event functions, in the order of [`Self::event_values`].
    fn event_kinds(&self) -> Vec<EventKind> {
        Vec::new()
    }
    fn event_values(&self, _y: &[f64], _out: &mut Vec<f64>) {}

    /// Monitored invariant residual (absolute value).
    fn residual(&self, _y: &[f64]) -> f64 {
        0.0
    }
    /// Pulls `y` back onto the invariant set after a step.
    fn project(&self, _y: &mut [f64]) {}

    fn convergence_components(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn collapsed(&self, _y: &[f64]) -> bool {
        false
    }
}

/// One accepted step's continuous extension.
#[derive(Debug, Clone, PartialEq)]
struct DenseSegment {
    s0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta * (self.r[1][i] + t1 * (self.r[2][i] + theta * (self.r[3][i] + t1 * self.r[4][i])));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Residual before projection at every sample.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub events: Vec<Event>,
    pub termination: Termination,
    segments: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn last_s(&self) -> f64 {
        *self.s.last().expect("trajectory has an initial sample")
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has an initial sample")
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&Event> {
        self.events_of(kind).next()
    }

    /// Dense-output evaluation inside the integrated range.
    pub fn eval(&self, s: f64) -> Option<Vec<f64>> {
        let first = self.segments.first()?;
        if s < first.s0 || s > self.last_s() {
            return None;
        }
        let idx = self.segments.partition_point(|seg| seg.s0 + seg.h < s).min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let mut out = vec![0.0; seg.r[0].len()];
        seg.eval_into(((s - seg.s0) / seg.h).clamp(0.0, 1.0), &mut out);
        Some(out)
    }

    /// Samples `(s, state)` at the integrator's accepted steps.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.s.iter().copied().zip(self.states.iter().map(|v| v.as_slice()))
    }
}

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// Stages 2..7 given `k[0] = f(s, y)`. Fills `y_new`, `k[6]` and `err`.
    fn step(&mut self, sys: &dyn OdeSystem, s: f64, y: &[f64], h: f64) -> Result<(), DomainExit> {
        let n = y.len();
        let Stages { k, tmp, y_new, err } = self;
        let combos: [(&[f64], f64); 5] = [
            (&[A21], C2),
            (&[A31, A32], C3),
            (&[A41, A42, A43], C4),
            (&[A51, A52, A53, A54], C5),
            (&[A61, A62, A63, A64, A65], 1.0),
        ];
        for (stage, (a, c)) in combos.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += aj * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let (_, rest) = k.split_at_mut(stage + 1);
            sys.rhs(s + c * h, tmp, &mut rest[0])?;
        }
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        let (head, last) = k.split_at_mut(6);
        sys.rhs(s + h, y_new, &mut last[0])?;
        for i in 0..n {
            err[i] = h
                * (E1 * head[0][i] + E3 * head[2][i] + E4 * head[3][i] + E5 * head[4][i] + E6 * head[5][i]
                    + E7 * last[0][i]);
        }
        Ok(())
    }

    fn dense(&self, s0: f64, y0: &[f64], h: f64) -> DenseSegment {
        let n = y0.len();
        let k = &self.k;
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let dy = self.y_new[i] - y0[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y0[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
        DenseSegment { s0, h, r }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], c: &IntegrationControls) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = c.abs_tol + c.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step(sys: &dyn OdeSystem, s: f64, y: &[f64], f0: &[f64], c: &IntegrationControls) -> f64 {
    let scale: Vec<f64> = y.iter().map(|v| c.abs_tol + c.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if sys.rhs(s + h0, &y1, &mut f1).is_err() {
        return h0.min(c.max_step);
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(c.max_step)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

/// Integrates `sys` from `(s0, y0)` to `controls.s_max` or the first
/// terminal condition.
pub fn integrate(
    sys: &dyn OdeSystem,
    s0: f64,
    y0: &[f64],
    controls: &IntegrationControls,
) -> Result<Trajectory, IntegrateError> {
    controls.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(IntegrateError::InitialState(format!("expected {n} components, got {}", y0.len())));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::InitialState("non-finite component".into()));
    }
    let mut st = Stages::new(n);
    sys.rhs(s0, y0, &mut st.k[0]).map_err(|e| IntegrateError::InitialState(e.to_string()))?;

    let kinds = sys.event_kinds();
    let mut g_old = Vec::with_capacity(kinds.len());
    let mut g_new = Vec::with_capacity(kinds.len());
    let mut g_tmp = Vec::with_capacity(kinds.len());
    sys.event_values(y0, &mut g_old);

    let r0 = sys.residual(y0);
    let mut traj = Trajectory {
        s: vec![s0],
        states: vec![y0.to_vec()],
        residuals: vec![r0],
        max_residual: r0,
        events: Vec::new(),
        termination: Termination::Horizon,
        segments: Vec::new(),
    };

    let mut s = s0;
    let mut y = y0.to_vec();
    let mut h = controls.initial_step.unwrap_or_else(|| initial_step(sys, s, &y, &st.k[0], controls));
    let mut window: VecDeque<(f64, Vec<f64>)> = VecDeque::new();
    window.push_back((s, sys.convergence_components(&y)));
    let mut interp = vec![0.0; n];

    for _ in 0..controls.max_steps {
        if s >= controls.s_max {
            traj.termination = Termination::Horizon;
            return Ok(traj);
        }
        let h_min = 1e-14 * s.abs().max(1.0);
        h = h.min(controls.max_step);
        let last = s + h >= controls.s_max;
        if last {
            h = controls.s_max - s;
        }
        match st.step(sys, s, &y, h) {
            Err(_) => {
                h *= 0.25;
                if h < h_min {
                    traj.events.push(Event { kind: EventKind::DomainExit, s, state: y.clone(), slope: 0.0 });
                    traj.termination = Termination::Terminal(EventKind::DomainExit);
                    return Ok(traj);
                }
                continue;
            }
            Ok(()) => {}
        }
        let err = error_norm(&st.err, &y, &st.y_new, controls);
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            if h < h_min {
                return Err(IntegrateError::StepUnderflow { s, state: y });
            }
            continue;
        }

        // Accepted.
        let seg = st.dense(s, &y, h);
        let s_new = if last { controls.s_max } else { s + h };

        // Events located on the continuous extension.
        sys.event_values(&st.y_new, &mut g_new);
        let mut found: Vec<(f64, usize, f64)> = Vec::new();
        for i in 0..kinds.len() {
            if g_old[i] * g_new[i] < 0.0 {
                let mut lo = 0.0;
                let mut hi = 1.0;
                let lo_sign = g_old[i].signum();
                while (hi - lo) * h > controls.event_tol && hi - lo > 1e-16 {
                    let mid = 0.5 * (lo + hi);
                    seg.eval_into(mid, &mut interp);
                    sys.event_values(&interp, &mut g_tmp);
                    if g_tmp[i].signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let theta = 0.5 * (lo + hi);
                let eta = 1e-3_f64.min(theta).min(1.0 - theta).max(1e-6);
                seg.eval_into((theta + eta).min(1.0), &mut interp);
                sys.event_values(&interp, &mut g_tmp);
                let gp = g_tmp[i];
                seg.eval_into((theta - eta).max(0.0), &mut interp);
                sys.event_values(&interp, &mut g_tmp);
                let gm = g_tmp[i];
                let slope = (gp - gm) / (2.0 * eta * h);
                found.push((theta, i, slope));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut stop_at: Option<(f64, EventKind)> = None;
        for (theta, i, slope) in found {
            seg.eval_into(theta, &mut interp);
            let es = s + theta * h;
            traj.events.push(Event { kind: kinds[i], s: es, state: interp.clone(), slope });
            if controls.terminal_events.contains(&kinds[i]) {
                stop_at = Some((theta, kinds[i]));
                break;
            }
        }
        if let Some((theta, kind)) = stop_at {
            let es = s + theta * h;
            seg.eval_into(theta, &mut interp);
            let r = sys.residual(&interp);
            traj.s.push(es);
            traj.states.push(interp.clone());
            traj.residuals.push(r);
            traj.max_residual = traj.max_residual.max(r);
            traj.segments.push(seg);
            traj.termination = Termination::Terminal(kind);
            return Ok(traj);
        }

        let pre = sys.residual(&st.y_new);
        let mut y_acc = st.y_new.clone();
        if controls.project {
            sys.project(&mut y_acc);
        }
        traj.segments.push(seg);
        traj.s.push(s_new);
        traj.states.push(y_acc.clone());
        traj.residuals.push(pre);
        if pre.is_nan() {
            traj.max_residual = f64::NAN;
        } else {
            traj.max_residual = traj.max_residual.max(pre);
        }

        if controls.project && y_acc != st.y_new {
            if sys.rhs(s_new, &y_acc, &mut st.k[0]).is_err() {
                traj.events.push(Event { kind: EventKind::DomainExit, s: s_new, state: y_acc, slope: 0.0 });
                traj.termination = Termination::Terminal(EventKind::DomainExit);
                return Ok(traj);
            }
        } else {
            let (first, rest) = st.k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }
        s = s_new;
        y = y_acc;
        sys.event_values(&y, &mut g_old);

        let blow = norm_inf(&sys.blowup_components(&y));
        if !(blow <= controls.norm_cap) {
            traj.events.push(Event { kind: EventKind::BlowUp, s, state: y.clone(), slope: 0.0 });
            traj.termination = Termination::Terminal(EventKind::BlowUp);
            return Ok(traj);
        }
        if sys.collapsed(&y) {
            traj.events.push(Event { kind: EventKind::Collapse, s, state: y.clone(), slope: 0.0 });
            traj.termination = Termination::Terminal(EventKind::Collapse);
            return Ok(traj);
        }
        if controls.stop_on_convergence {
            window.push_back((s, sys.convergence_components(&y)));
            while window.len() > 2 && window[1].0 <= s - controls.convergence_window {
                window.pop_front();
            }
            if s - window[0].0 >= controls.convergence_window && converged(&window, controls.convergence_tol) {
                traj.events.push(Event { kind: EventKind::Converged, s, state: y.clone(), slope: 0.0 });
                traj.termination = Termination::Terminal(EventKind::Converged);
                return Ok(traj);
            }
        }

        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    traj.termination = if s >= controls.s_max { Termination::Horizon } else { Termination::StepLimit };
    Ok(traj)
}

fn converged(window: &VecDeque<(f64, Vec<f64>)>, tol: f64) -> bool {
    let m = window[0].1.len();
    let count = window.len() as f64;
    (0..m).all(|j| {
        let mean = window.iter().map(|w| w.1[j]).sum::<f64>() / count;
        window.iter().all(|w| (w.1[j] - mean).abs() <= tol)
    })
}

/// Number of `OmegaCritical` events strictly before the first
/// `MaxVolumeOrbit` event (or before termination).
pub fn count_omega_critical(traj: &Trajectory) -> usize {
    let stop = traj.first_event(EventKind::MaxVolumeOrbit).map_or(f64::INFINITY, |e| e.s);
    traj.events_of(EventKind::OmegaCritical).filter(|e| e.s < stop).count()
}

/// Minimum-norm Gauss-Newton correction of `y[..k]` onto
/// `{g_1 = 0, ..., g_m = 0}` (`m <= 2`).
fn gauss_newton_project<F>(y: &mut [f64], k: usize, iterations: usize, eval: F)
where
    F: Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>),
{
    for _ in 0..iterations {
        let (g, jac) = eval(y);
        if g.iter().all(|v| v.abs() < 1e-16) {
            return;
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lambda = match g.len() {
            1 => {
                let nn = dot(&jac[0], &jac[0]);
                if nn == 0.0 {
                    return;
                }
                vec![g[0] / nn]
            }
            2 => {
                let a = dot(&jac[0], &jac[0]);
                let b = dot(&jac[0], &jac[1]);
                let d = dot(&jac[1], &jac[1]);
                let det = a * d - b * b;
                if det.abs() <= 1e-14 * a * d {
                    return;
                }
                vec![(d * g[0] - b * g[1]) / det, (a * g[1] - b * g[0]) / det]
            }
            _ => unreachable!("at most two constraints"),
        };
        for i in 0..k {
            let mut delta = 0.0;
            for (row, l) in jac.iter().zip(&lambda) {
                delta += row[i] * l;
            }
            y[i] -= delta;
        }
    }
}

/// Rescaled system on `[X1, X2, Y1, Y2, L, t, u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledSystem {
    pub params: TwoSummandsParams,
    pub locus: Locus,
}

impl RescaledSystem {
    pub fn new(params: TwoSummandsParams, locus: Locus) -> Self {
        RescaledSystem { params, locus }
    }
}

impl OdeSystem for RescaledSystem {
    fn dim(&self) -> usize {
        PhaseState::DIM
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        let d = rhs_rescaled(&self.params, &PhaseState::from_slice(y))?;
        dy.copy_from_slice(&d.to_array());
        Ok(())
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::X2Zero, EventKind::OmegaCritical]
    }

    fn event_values(&self, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(y[1]);
        out.push(y[0] - y[1]);
    }

    /// `|R|`, and `max(|R|, |S2|)` on the Einstein locus.
    fn residual(&self, y: &[f64]) -> f64 {
        let s = PhaseState::from_slice(y);
        let r = conservation_residual(&self.params, &s).abs();
        match self.locus {
            Locus::Einstein => r.max(locus_residuals(&self.params, &s).1.abs()),
            _ => r,
        }
    }

    fn project(&self, y: &mut [f64]) {
        let p = &self.params;
        match self.locus {
            Locus::Unconstrained => {}
            Locus::Soliton => gauss_newton_project(y, 5, 3, |v| {
                let s = PhaseState::from_slice(v);
                (vec![conservation_residual(p, &s)], vec![conservation_gradient(p, &s).to_vec()])
            }),
            Locus::Einstein => gauss_newton_project(y, 5, 3, |v| {
                let s = PhaseState::from_slice(v);
                (
                    vec![conservation_residual(p, &s), locus_residuals(p, &s).1],
                    vec![conservation_gradient(p, &s).to_vec(), vec![p.d1f(), p.d2f(), 0.0, 0.0, 0.0]],
                )
            }),
        }
    }

    /// `X, Y`, plus `L` unless the flow is Ricci-flat (where `L` grows).
    fn convergence_components(&self, y: &[f64]) -> Vec<f64> {
        if self.params.epsilon == 0.0 && self.params.c == 0.0 {
            y[..4].to_vec()
        } else {
            y[..5].to_vec()
        }
    }

    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        if self.params.epsilon == 0.0 {
            y[..4].to_vec()
        } else {
            y[..5].to_vec()
        }
    }
}

/// Polynomial form on `[X1, X2, Y1, Y2, L, t, u, W]` with `W = Y2^2/Y1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSystem {
    pub params: TwoSummandsParams,
}

impl OdeSystem for PolynomialSystem {
    fn dim(&self) -> usize {
        8
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        let (d, dw) = rhs_polynomial(&self.params, &PhaseState::from_slice(y), y[7]);
        dy[..7].copy_from_slice(&d.to_array());
        dy[7] = dw;
        Ok(())
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::X2Zero, EventKind::OmegaCritical]
    }

    fn event_values(&self, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(y[1]);
        out.push(y[0] - y[1]);
    }

    fn residual(&self, y: &[f64]) -> f64 {
        let p = &self.params;
        let (d1, d2, eps) = (p.d1f(), p.d2f(), p.epsilon);
        (d1 * y[0] * y[0] + d2 * y[1] * y[1] + p.a1 * y[2] * y[2] + p.a2 * y[3] * y[3] - p.a3 * y[7] * y[7]
            - 1.0
            - (p.c + eps * y[6] - (p.nf() - 1.0) * eps / 2.0) * y[4] * y[4])
            .abs()
    }

    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        let mut v = y[..4].to_vec();
        if self.params.epsilon != 0.0 {
            v.push(y[4]);
        }
        v.push(y[7]);
        v
    }
}

/// Unrescaled Einstein system in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatSystem {
    pub params: TwoSummandsParams,
    /// Collapse is declared once a warping function `1/Yh` drops below this.
    pub floor: f64,
}

impl OdeSystem for HatSystem {
    fn dim(&self) -> usize {
        HatState::DIM
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        dy.copy_from_slice(&rhs_hat(&self.params, &HatState::from_slice(y))?.to_array());
        Ok(())
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::OmegaCritical, EventKind::MaxVolumeOrbit]
    }

    fn event_values(&self, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(y[0] - y[1]);
        out.push(y[4]);
    }

    fn residual(&self, y: &[f64]) -> f64 {
        let (a, b) = hat_constraints(&self.params, &HatState::from_slice(y));
        a.abs().max(b.abs())
    }

    fn convergence_components(&self, _y: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn collapsed(&self, y: &[f64]) -> bool {
        y[2] * self.floor >= 1.0 || y[3] * self.floor >= 1.0
    }
}

/// Profile system on `[f1, f1', f2, f2', u, u']`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSystem {
    pub params: TwoSummandsParams,
    pub mode: ProfileMode,
    pub floor: f64,
}

impl ProfileSystem {
    pub fn einstein(params: TwoSummandsParams) -> Self {
        ProfileSystem { params, mode: ProfileMode::Einstein, floor: 1e-8 }
    }
}

impl OdeSystem for ProfileSystem {
    fn dim(&self) -> usize {
        ProfileState::DIM
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        dy.copy_from_slice(&rhs_profile(&self.params, &ProfileState::from_slice(y), self.mode)?.to_array());
        Ok(())
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::OmegaCritical, EventKind::MaxVolumeOrbit, EventKind::F2Critical]
    }

    fn event_values(&self, y: &[f64], out: &mut Vec<f64>) {
        let p = ProfileState::from_slice(y);
        let mean = match self.mode {
            ProfileMode::Einstein => p.trace_l(&self.params),
            ProfileMode::Soliton => -p.du + p.trace_l(&self.params),
        };
        out.clear();
        out.push(p.omega_dot());
        out.push(mean);
        out.push(p.df2);
    }

    /// Einstein mode: first-order conservation law. Soliton mode:
    /// `u'' + (-u' + tr L) u' - C - eps u`.
    fn residual(&self, y: &[f64]) -> f64 {
        let p = ProfileState::from_slice(y);
        if !(p.f1 > 0.0 && p.f2 > 0.0) {
            return f64::NAN;
        }
        match self.mode {
            ProfileMode::Einstein => hat_constraints(&self.params, &HatState::from_profile(&self.params, &p)).0.abs(),
            ProfileMode::Soliton => {
                let Ok(d) = rhs_profile(&self.params, &p, self.mode) else { return f64::NAN };
                let tr = p.trace_l(&self.params);
                (d.du + (-p.du + tr) * p.du - self.params.c - self.params.epsilon * p.u).abs()
            }
        }
    }

    fn convergence_components(&self, _y: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn collapsed(&self, y: &[f64]) -> bool {
        y[0] <= self.floor || y[2] <= self.floor
    }
}

/// Reduced Einstein-locus system on `[X1, Y1, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSystem {
    pub params: TwoSummandsParams,
}

impl OdeSystem for PlanarSystem {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        let (dx, dyy, dl) = rhs_planar(&self.params, y[0], y[1], self.params.epsilon * y[2] * y[2])?;
        dy[0] = dx;
        dy[1] = dyy;
        dy[2] = y[2] * dl;
        Ok(())
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::OmegaCritical]
    }

    fn event_values(&self, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(self.params.nf() * y[0] - 1.0);
    }

    fn convergence_components(&self, y: &[f64]) -> Vec<f64> {
        y[..2].to_vec()
    }

    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        if self.params.epsilon == 0.0 {
            y[..2].to_vec()
        } else {
            y.to_vec()
        }
    }
}

/// Multi-warped system on `[X.., Y.., L, t, u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSystem {
    pub params: MultiWarpedParams,
    /// Project onto the conservation law after each step.
    pub constrained: bool,
}

impl OdeSystem for MultiSystem {
    fn dim(&self) -> usize {
        2 * self.params.k() + 3
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        rhs_multi_into(&self.params, y, dy);
        Ok(())
    }

    fn residual(&self, y: &[f64]) -> f64 {
        multi_conservation_residual(&self.params, y).abs()
    }

    fn project(&self, y: &mut [f64]) {
        if !self.constrained {
            return;
        }
        let p = &self.params;
        let k = p.k();
        let dims = p.dims();
        let lambdas = p.lambdas();
        gauss_newton_project(y, 2 * k + 1, 3, |v| {
            let mut grad = vec![0.0; 2 * k + 1];
            for i in 0..k {
                grad[i] = 2.0 * dims[i] * v[i];
                grad[k + i] = 2.0 * dims[i] * lambdas[i] * v[k + i];
            }
            let mut cl = (p.n() - 1.0) * p.epsilon;
            if p.m.is_none() {
                cl -= 2.0 * (p.c + p.epsilon * v[2 * k + 2]);
            }
            grad[2 * k] = cl * v[2 * k];
            (vec![multi_conservation_residual(p, v)], vec![grad])
        });
    }

    fn convergence_components(&self, y: &[f64]) -> Vec<f64> {
        y[..2 * self.params.k()].to_vec()
    }

    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        let k = self.params.k();
        if self.params.epsilon == 0.0 {
            y[..2 * k].to_vec()
        } else {
            y[..=2 * k].to_vec()
        }
    }
}

/// Three-summand quasi-Einstein system on `[X1, X2, X3, Y1, Y2, Y3, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSystem {
    pub params: QuasiParams,
}

impl OdeSystem for QuasiSystem {
    fn dim(&self) -> usize {
        7
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainExit> {
        let v: [f64; 7] = y.try_into().expect("dimension checked by integrate");
        dy.copy_from_slice(&rhs_quasi(&self.params, &v)?);
        Ok(())
    }

    fn residual(&self, y: &[f64]) -> f64 {
        let v: [f64; 7] = y.try_into().expect("dimension checked by integrate");
        quasi_conservation_residual(&self.params, &v).abs()
    }

    fn blowup_components(&self, y: &[f64]) -> Vec<f64> {
        if self.params.epsilon == 0.0 {
            y[..6].to_vec()
        } else {
            y.to_vec()
        }
    }
}

/// Seed for a trajectory leaving the initial critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootSpec {
    /// `(c_Y, c_L)` or `(c_a, c_Y, c_L)` in the unstable eigenbasis
    /// `{(2,0,1,0,0), e_Y2, e_L}`; normalised to unit length.
    pub coefficients: Vec<f64>,
    pub delta: f64,
    pub locus: Locus,
}

pub const DEFAULT_DELTA: f64 = 1e-7;
const SEED_RESIDUAL_TOL: f64 = 1e-13;

impl ShootSpec {
    pub fn new(coefficients: Vec<f64>, locus: Locus) -> Self {
        ShootSpec { coefficients, delta: DEFAULT_DELTA, locus }
    }

    /// Coefficients normalised to `(c_a, c_Y, c_L)`.
    pub fn normalized(&self) -> Result<[f64; 3], SeedError> {
        let c = match self.coefficients.as_slice() {
            [y, l] => [0.0, *y, *l],
            [a, y, l] => [*a, *y, *l],
            _ => return Err(SeedError::Coefficients("expected 2 or 3 components")),
        };
        if c.iter().any(|v| !v.is_finite()) {
            return Err(SeedError::Coefficients("non-finite component"));
        }
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SeedError::Coefficients("coefficients orthogonal to the unstable space"));
        }
        Ok(c.map(|v| v / norm))
    }
}

/// Displaces the initial critical point along the unstable directions and
/// places the result on the requested locus.
///
/// `X2` gets the second-order correction forced by `Y2^2` and `L^2`; on the
/// Einstein locus `X1, X2` are then fixed by `S1 = S2 = 0`, on the soliton
/// locus the `(2,0,1,0,0)` component is solved for from the conservation law.
pub fn seed_unstable(params: &TwoSummandsParams, spec: &ShootSpec) -> Result<PhaseState, SeedError> {
    params.validate()?;
    let (d1, d2) = (params.d1f(), params.d2f());
    if params.a1 != d1 * (d1 - 1.0) {
        return Err(SeedError::Locus("the initial critical point requires A1 = d1(d1-1)".into()));
    }
    if !(spec.delta >= 1e-10 && spec.delta <= 1e-3) {
        return Err(SeedError::Delta(spec.delta));
    }
    let [ca, cy, cl] = spec.normalized()?;
    if cy < 0.0 || cl < 0.0 {
        return Err(SeedError::Coefficients("Y2 and L components must be nonnegative"));
    }
    let delta = spec.delta;
    let y2 = delta * cy;
    let l = delta * cl;
    let forcing = params.a2 / d2 * y2 * y2 + 0.5 * params.epsilon * l * l;
    let k = forcing / (1.0 / d1 + 1.0);
    let base = PhaseState::initial_critical_point(params);

    match spec.locus {
        Locus::Unconstrained => Ok(PhaseState {
            x1: base.x1 + 2.0 * delta * ca,
            x2: k,
            y1: base.y1 + delta * ca,
            y2,
            l,
            t: 0.0,
            u: 0.0,
        }),
        Locus::Einstein => {
            if ca.abs() > 1e-12 {
                return Err(SeedError::Coefficients("the (2,0,1,0,0) direction is not tangent to the Einstein locus"));
            }
            if params.c != 0.0 {
                return Err(SeedError::Locus("Einstein trajectories require C = 0".into()));
            }
            let y1 = base.y1;
            let w = y2 * y2 / y1;
            // S1 with X1 = (1 - d2 X2)/d1 is alpha X2^2 - beta X2 + gamma. The
            // terms 1/d1 + A1 Y1^2 - 1 cancel exactly at Y1 = 1/d1, so gamma is
            // assembled from the displacement alone to keep tiny roots.
            let alpha = d2 * params.nf() / d1;
            let beta = 2.0 * d2 / d1;
            let gamma = params.a2 * y2 * y2 - params.a3 * w * w + (params.nf() - 1.0) * 0.5 * params.epsilon * l * l;
            let disc = beta * beta - 4.0 * alpha * gamma;
            if disc < 0.0 {
                return Err(SeedError::Locus("no point of the Einstein locus over this displacement".into()));
            }
            let x2 = 2.0 * gamma / (beta + disc.sqrt());
            let s = PhaseState { x1: (1.0 - d2 * x2) / d1, x2, y1, y2, l, t: 0.0, u: 0.0 };
            let (s1, s2) = locus_residuals(params, &s);
            let r = conservation_residual(params, &s);
            let worst = s1.abs().max(s2.abs()).max(r.abs());
            if worst >= SEED_RESIDUAL_TOL {
                return Err(SeedError::Projection(worst));
            }
            Ok(s)
        }
        Locus::Soliton => {
            if ca.abs() > 1e-12 {
                return Err(SeedError::Coefficients("the (2,0,1,0,0) direction is not tangent to the soliton locus"));
            }
            if !(params.c < 0.0) {
                return Err(SeedError::Locus("soliton trajectories require C < 0".into()));
            }
            if !(cl > 0.0) {
                return Err(SeedError::Coefficients("soliton seeds need a nonzero L component"));
            }
            let at = |a: f64| PhaseState { x1: base.x1 + 2.0 * a, x2: k, y1: base.y1 + a, y2, l, t: 0.0, u: 0.0 };
            let mut a = 0.0;
            let mut s = at(a);
            let mut r = conservation_residual(params, &s);
            for _ in 0..50 {
                if r.abs() < 1e-16 {
                    break;
                }
                let g = conservation_gradient(params, &s);
                let dr = 2.0 * g[0] + g[2];
                if dr == 0.0 {
                    break;
                }
                a -= r / dr;
                s = at(a);
                r = conservation_residual(params, &s);
            }
            if !(r.abs() < SEED_RESIDUAL_TOL) {
                return Err(SeedError::Projection(r.abs()));
            }
            Ok(s)
        }
    }
}

/// Initial data `(f1, f1', f2, f2')` at `t0` for a smooth collapse of the
/// first sphere onto a singular orbit with `f2(0) = fbar`, from the
/// third-order Taylor expansion of the Einstein equations.
pub fn seed_profile(params: &TwoSummandsParams, fbar: f64, t0: f64) -> Result<ProfileState, SeedError> {
    params.validate()?;
    let (d1, d2) = (params.d1f(), params.d2f());
    if params.a1 != d1 * (d1 - 1.0) {
        return Err(SeedError::Locus("smooth collapse requires A1 = d1(d1-1)".into()));
    }
    if !(fbar > 0.0 && fbar.is_finite()) {
        return Err(SeedError::Locus(format!("fbar must be positive, got {fbar}")));
    }
    if !(t0 > 0.0 && t0 <= 1e-2 * fbar) {
        return Err(SeedError::Locus(format!("t0 must lie in (0, 1e-2 fbar], got {t0}")));
    }
    let e = 0.5 * params.epsilon;
    let a = (params.a2 / d2 / fbar + e * fbar) / (d1 + 1.0);
    let b = (e - d2 * a / fbar) / (6.0 * d1);
    Ok(ProfileState {
        f1: t0 + b * t0 * t0 * t0,
        df1: 1.0 + 3.0 * b * t0 * t0,
        f2: fbar + 0.5 * a * t0 * t0,
        df2: a * t0,
        u: 0.0,
        du: 0.0,
    })
}

pub const DEFAULT_PROFILE_T0_FACTOR: f64 = 1e-3;

/// A point on the Kähler subspace of a circle bundle with given `Y1, Y2, L`:
/// `X2 = (q/2) Y2^2/Y1` and `X1` from the second Kähler relation. The
/// conservation constant `C` (with `u = 0`) is returned in the parameters.
pub fn seed_kahler(
    cb: &CircleBundleParams,
    epsilon: f64,
    y1: f64,
    y2: f64,
    l: f64,
) -> Result<(TwoSummandsParams, PhaseState), SeedError> {
    cb.validate()?;
    if !(y1 > 0.0 && y2 > 0.0 && l > 0.0) {
        return Err(SeedError::Locus("Kähler seed needs positive Y1, Y2, L".into()));
    }
    let q = f64::from(cb.q);
    let p = f64::from(cb.p);
    let x2 = 0.5 * q * y2 * y2 / y1;
    let x1 = (p * y2 * y2 + 0.5 * epsilon * l * l) / x2 - 1.0;
    let state = PhaseState { x1, x2, y1, y2, l, t: 0.0, u: 0.0 };
    let base = cb.to_two_summands(epsilon, 0.0);
    // With C = 0 the residual is base - (-(n-1) eps/2) L^2; solve for C.
    let r0 = conservation_residual(&base, &state);
    let params = base.with_c(r0 / (l * l));
    Ok((params, state))
}
