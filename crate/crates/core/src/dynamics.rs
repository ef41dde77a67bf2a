//! State types and vector fields.
//!
//! The rescaled system lives in `(X1, X2, Y1, Y2, L)` with the geometric time
//! `t` and the soliton potential `u` carried as quadratures. Writing
//! `S = d1 X1^2 + d2 X2^2 - (eps/2) L^2`:
//!
//! ```text
//! X1' = X1 (S - 1) + (A1/d1) Y1^2 + (eps/2) L^2 + (A3/d1) Y2^4/Y1^2
//! X2' = X2 (S - 1) + (A2/d2) Y2^2 + (eps/2) L^2 - (2 A3/d2) Y2^4/Y1^2
//! Yi' = Yi (S - Xi),   L' = L S,   t' = L,   u' = d1 X1 + d2 X2 - 1
//! ```

use serde::{Deserialize, Serialize};

use crate::config::{CircleBundleParams, MultiWarpedParams, QuasiParams, TwoSummandsParams};
use crate::error::DomainExit;

/// Point of the rescaled phase space with its quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub l: f64,
    pub t: f64,
    pub u: f64,
}

impl PhaseState {
    pub const DIM: usize = 7;

    /// The stationary point at the singular orbit: `X1 = Y1 = 1/d1`.
    pub fn initial_critical_point(params: &TwoSummandsParams) -> Self {
        let inv = 1.0 / params.d1f();
        PhaseState { x1: inv, y1: inv, ..Default::default() }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.x1, self.x2, self.y1, self.y2, self.l, self.t, self.u]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PhaseState { x1: y[0], x2: y[1], y1: y[2], y2: y[3], l: y[4], t: y[5], u: y[6] }
    }

    /// `Y2/Y1`.
    pub fn omega(&self) -> f64 {
        self.y2 / self.y1
    }
}

/// Unrescaled Einstein variables `Xh_i = f_i'/f_i`, `Yh_i = 1/f_i`,
/// `Lh = tr L` (the generalized mean curvature), evolved in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HatState {
    pub hx1: f64,
    pub hx2: f64,
    pub hy1: f64,
    pub hy2: f64,
    pub hl: f64,
}

impl HatState {
    pub const DIM: usize = 5;

    pub fn to_array(&self) -> [f64; 5] {
        [self.hx1, self.hx2, self.hy1, self.hy2, self.hl]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        HatState { hx1: y[0], hx2: y[1], hy1: y[2], hy2: y[3], hl: y[4] }
    }

    pub fn from_profile(params: &TwoSummandsParams, p: &ProfileState) -> Self {
        let hx1 = p.df1 / p.f1;
        let hx2 = p.df2 / p.f2;
        HatState {
            hx1,
            hx2,
            hy1: 1.0 / p.f1,
            hy2: 1.0 / p.f2,
            hl: -p.du + params.d1f() * hx1 + params.d2f() * hx2,
        }
    }
}

/// Warping functions, their `t`-derivatives and the potential.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileState {
    pub f1: f64,
    pub df1: f64,
    pub f2: f64,
    pub df2: f64,
    pub u: f64,
    pub du: f64,
}

impl ProfileState {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [self.f1, self.df1, self.f2, self.df2, self.u, self.du]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        ProfileState { f1: y[0], df1: y[1], f2: y[2], df2: y[3], u: y[4], du: y[5] }
    }

    pub fn trace_l(&self, params: &TwoSummandsParams) -> f64 {
        params.d1f() * self.df1 / self.f1 + params.d2f() * self.df2 / self.f2
    }

    /// `d/dt log(f1/f2)`.
    pub fn omega_dot(&self) -> f64 {
        self.df1 / self.f1 - self.df2 / self.f2
    }
}

/// Invariant set a trajectory is constrained to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Locus {
    /// `S1 = S2 = 0`, requires `C = 0`.
    Einstein,
    /// Conservation law with `C < 0`, `S2 < 0`.
    Soliton,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileMode {
    /// `u` identically zero.
    Einstein,
    /// `u` evolved by the trace equation.
    Soliton,
}

/// `Y2^4 / Y1^2`, written as `(Y2^2/Y1)^2`.
#[inline]
fn submersion_term(y1: f64, y2: f64) -> f64 {
    let w = y2 * y2 / y1;
    w * w
}

#[inline]
fn s_value(params: &TwoSummandsParams, x1: f64, x2: f64, l: f64) -> f64 {
    params.d1f() * x1 * x1 + params.d2f() * x2 * x2 - 0.5 * params.epsilon * l * l
}

/// Rescaled vector field, returned as a derivative in `PhaseState` layout.
pub fn rhs_rescaled(params: &TwoSummandsParams, s: &PhaseState) -> Result<PhaseState, DomainExit> {
    if !(s.y1 > 0.0) {
        return Err(DomainExit("Y1 must be positive"));
    }
    Ok(rescaled_with_w2(params, s, submersion_term(s.y1, s.y2)))
}

fn rescaled_with_w2(params: &TwoSummandsParams, s: &PhaseState, w2: f64) -> PhaseState {
    let (d1, d2) = (params.d1f(), params.d2f());
    let sv = s_value(params, s.x1, s.x2, s.l);
    let el2 = 0.5 * params.epsilon * s.l * s.l;
    PhaseState {
        x1: s.x1 * (sv - 1.0) + params.a1 / d1 * s.y1 * s.y1 + el2 + params.a3 / d1 * w2,
        x2: s.x2 * (sv - 1.0) + params.a2 / d2 * s.y2 * s.y2 + el2 - 2.0 * params.a3 / d2 * w2,
        y1: s.y1 * (sv - s.x1),
        y2: s.y2 * (sv - s.x2),
        l: s.l * sv,
        t: s.l,
        u: d1 * s.x1 + d2 * s.x2 - 1.0,
    }
}

/// Polynomial form with `W = Y2^2/Y1` carried as an extra variable, so that
/// no division by `Y1` occurs. Returns the derivative and `W'`.
pub fn rhs_polynomial(params: &TwoSummandsParams, s: &PhaseState, w: f64) -> (PhaseState, f64) {
    let d = rescaled_with_w2(params, s, w * w);
    let sv = s_value(params, s.x1, s.x2, s.l);
    (d, w * (sv + s.x1 - 2.0 * s.x2))
}

/// Conservation law residual
/// `sum d_i X_i^2 + sum A_i Y_i^2 - A3 Y2^4/Y1^2 - 1 - (C + eps u - (n-1) eps/2) L^2`.
pub fn conservation_residual(params: &TwoSummandsParams, s: &PhaseState) -> f64 {
    let (d1, d2) = (params.d1f(), params.d2f());
    let eps = params.epsilon;
    d1 * s.x1 * s.x1 + d2 * s.x2 * s.x2 + params.a1 * s.y1 * s.y1 + params.a2 * s.y2 * s.y2
        - params.a3 * submersion_term(s.y1, s.y2)
        - 1.0
        - (params.c + eps * s.u - (params.nf() - 1.0) * eps / 2.0) * s.l * s.l
}

/// Gradient of [`conservation_residual`] with respect to `(X1, X2, Y1, Y2, L)`.
pub fn conservation_gradient(params: &TwoSummandsParams, s: &PhaseState) -> [f64; 5] {
    let (d1, d2) = (params.d1f(), params.d2f());
    let eps = params.epsilon;
    let r = s.y2 / s.y1;
    [
        2.0 * d1 * s.x1,
        2.0 * d2 * s.x2,
        2.0 * params.a1 * s.y1 + 2.0 * params.a3 * r * r * r * r * s.y1,
        2.0 * params.a2 * s.y2 - 4.0 * params.a3 * r * r * s.y2,
        -2.0 * (params.c + eps * s.u - (params.nf() - 1.0) * eps / 2.0) * s.l,
    ]
}

/// `(S1, S2)`: the Einstein locus is `S1 = S2 = 0`, the soliton locus
/// `S1 < 0, S2 < 0`.
pub fn locus_residuals(params: &TwoSummandsParams, s: &PhaseState) -> (f64, f64) {
    let (d1, d2) = (params.d1f(), params.d2f());
    let s1 = d1 * s.x1 * s.x1 + d2 * s.x2 * s.x2 + params.a1 * s.y1 * s.y1 + params.a2 * s.y2 * s.y2
        - params.a3 * submersion_term(s.y1, s.y2)
        - 1.0
        + (params.nf() - 1.0) * 0.5 * params.epsilon * s.l * s.l;
    (s1, d1 * s.x1 + d2 * s.x2 - 1.0)
}

/// Linearisation of the rescaled system at the initial critical point in
/// coordinates `(X1, X2, Y1, Y2, L)`, assuming `A1 = d1(d1-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub matrix: [[f64; 5]; 5],
    /// `(eigenvalue, eigenvector)`, one entry per basis vector.
    pub eigenpairs: Vec<(f64, [f64; 5])>,
}

impl Linearization {
    /// Eigenvectors with positive eigenvalue: `(2,0,1,0,0)`, `e_Y2`, `e_L`.
    pub fn unstable(&self) -> Vec<(f64, [f64; 5])> {
        self.eigenpairs.iter().copied().filter(|(l, _)| *l > 0.0).collect()
    }
}

pub fn linearization_initial(params: &TwoSummandsParams) -> Linearization {
    let d1 = params.d1f();
    let matrix = [
        [3.0 / d1 - 1.0, 0.0, 2.0 * (d1 - 1.0) / d1, 0.0, 0.0],
        [0.0, 1.0 / d1 - 1.0, 0.0, 0.0, 0.0],
        [1.0 / d1, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0 / d1, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0 / d1],
    ];
    let eigenpairs = vec![
        (2.0 / d1, [2.0, 0.0, 1.0, 0.0, 0.0]),
        (1.0 / d1 - 1.0, [0.0, 1.0, 0.0, 0.0, 0.0]),
        (1.0 / d1 - 1.0, [d1 - 1.0, 0.0, -1.0, 0.0, 0.0]),
        (1.0 / d1, [0.0, 0.0, 0.0, 1.0, 0.0]),
        (1.0 / d1, [0.0, 0.0, 0.0, 0.0, 1.0]),
    ];
    Linearization { matrix, eigenpairs }
}

/// Unrescaled Einstein system in `t`; stays regular through `Lh = 0`.
pub fn rhs_hat(params: &TwoSummandsParams, h: &HatState) -> Result<HatState, DomainExit> {
    if !(h.hy1 > 0.0) {
        return Err(DomainExit("hat Y1 must be positive"));
    }
    let (d1, d2) = (params.d1f(), params.d2f());
    let e = 0.5 * params.epsilon;
    let w2 = submersion_term(h.hy1, h.hy2);
    Ok(HatState {
        hx1: -h.hx1 * h.hl + params.a1 / d1 * h.hy1 * h.hy1 + e + params.a3 / d1 * w2,
        hx2: -h.hx2 * h.hl + params.a2 / d2 * h.hy2 * h.hy2 + e - 2.0 * params.a3 / d2 * w2,
        hy1: -h.hx1 * h.hy1,
        hy2: -h.hx2 * h.hy2,
        hl: e - d1 * h.hx1 * h.hx1 - d2 * h.hx2 * h.hx2,
    })
}

/// Einstein constraints of the hat system: the conservation law
/// `sum d Xh^2 + sum A Yh^2 - A3 Yh2^4/Yh1^2 + (n-1) eps/2 - Lh^2` and the
/// trace identity `Lh - sum d Xh`.
pub fn hat_constraints(params: &TwoSummandsParams, h: &HatState) -> (f64, f64) {
    let (d1, d2) = (params.d1f(), params.d2f());
    let cons = d1 * h.hx1 * h.hx1 + d2 * h.hx2 * h.hx2 + params.a1 * h.hy1 * h.hy1 + params.a2 * h.hy2 * h.hy2
        - params.a3 * submersion_term(h.hy1, h.hy2)
        + (params.nf() - 1.0) * 0.5 * params.epsilon
        - h.hl * h.hl;
    (cons, h.hl - d1 * h.hx1 - d2 * h.hx2)
}

/// Ricci endomorphism eigenvalues `(r1, r2)` of the principal orbit.
pub fn ricci_endomorphism(params: &TwoSummandsParams, f1: f64, f2: f64) -> (f64, f64) {
    let (d1, d2) = (params.d1f(), params.d2f());
    let cross = f1 * f1 / (f2 * f2 * f2 * f2);
    (
        params.a1 / d1 / (f1 * f1) + params.a3 / d1 * cross,
        params.a2 / d2 / (f2 * f2) - 2.0 * params.a3 / d2 * cross,
    )
}

/// Second-order profile system, written as a first-order system in
/// [`ProfileState`] layout.
pub fn rhs_profile(params: &TwoSummandsParams, p: &ProfileState, mode: ProfileMode) -> Result<ProfileState, DomainExit> {
    if !(p.f1 > 0.0 && p.f2 > 0.0) {
        return Err(DomainExit("warping functions must stay positive"));
    }
    let (d1, d2) = (params.d1f(), params.d2f());
    let e = 0.5 * params.epsilon;
    let (r1, r2) = ricci_endomorphism(params, p.f1, p.f2);
    let x1 = p.df1 / p.f1;
    let x2 = p.df2 / p.f2;
    let tr = d1 * x1 + d2 * x2;
    let du = match mode {
        ProfileMode::Einstein => 0.0,
        ProfileMode::Soliton => p.du,
    };
    // Shape operator derivatives dL_i/dt.
    let ld1 = r1 - tr * x1 + du * x1 + e;
    let ld2 = r2 - tr * x2 + du * x2 + e;
    let ddu = match mode {
        ProfileMode::Einstein => 0.0,
        ProfileMode::Soliton => d1 * ld1 + d2 * ld2 + d1 * x1 * x1 + d2 * x2 * x2 - e,
    };
    Ok(ProfileState {
        f1: p.df1,
        df1: p.f1 * (x1 * x1 + ld1),
        f2: p.df2,
        df2: p.f2 * (x2 * x2 + ld2),
        u: du,
        du: ddu,
    })
}

/// Residuals of the Einstein equations (`u = 0`) for given `f`, `f'`, `f''`:
/// the two shape-operator equations and the trace equation
/// `-tr(L') - tr(L^2) + eps/2 = 0`.
pub fn einstein_residuals(params: &TwoSummandsParams, f: [f64; 2], df: [f64; 2], ddf: [f64; 2]) -> [f64; 3] {
    let (d1, d2) = (params.d1f(), params.d2f());
    let e = 0.5 * params.epsilon;
    let (r1, r2) = ricci_endomorphism(params, f[0], f[1]);
    let x = [df[0] / f[0], df[1] / f[1]];
    let tr = d1 * x[0] + d2 * x[1];
    let ld = [ddf[0] / f[0] - x[0] * x[0], ddf[1] / f[1] - x[1] * x[1]];
    [
        r1 - tr * x[0] + e - ld[0],
        r2 - tr * x[1] + e - ld[1],
        -(d1 * ld[0] + d2 * ld[1]) - (d1 * x[0] * x[0] + d2 * x[1] * x[1]) + e,
    ]
}

/// `Y2^2` on the Einstein locus (`C = 0`, `u = 0`), eliminated from the
/// conservation law on the branch that starts at the critical point.
pub fn planar_y2_squared(params: &TwoSummandsParams, x1: f64, y1: f64, eps_l2: f64) -> Result<f64, DomainExit> {
    let (d1, d2) = (params.d1f(), params.d2f());
    let n = params.nf();
    let pv = n * (d1 / d2) * x1 * x1 - 2.0 * (d1 / d2) * x1 + 1.0 / d2;
    let k = pv + (n - 1.0) * 0.5 * eps_l2 - 1.0 + params.a1 * y1 * y1;
    let y2sq = if params.a3 == 0.0 {
        -k / params.a2
    } else {
        let rad = params.a2 * params.a2 * y1.powi(4) + 4.0 * params.a3 * k * y1 * y1;
        if rad < 0.0 {
            return Err(DomainExit("negative radicand in the planar reduction"));
        }
        (params.a2 * y1 * y1 - rad.sqrt()) / (2.0 * params.a3)
    };
    if y2sq < 0.0 {
        return Err(DomainExit("planar reduction left Y2^2 >= 0"));
    }
    Ok(y2sq)
}

/// Reduced system on the Einstein locus in `(X1, Y1)` with `eps L^2` as a
/// parameter. Returns `(X1', Y1', L'/L)`.
pub fn rhs_planar(params: &TwoSummandsParams, x1: f64, y1: f64, eps_l2: f64) -> Result<(f64, f64, f64), DomainExit> {
    if !(y1 > 0.0) {
        return Err(DomainExit("Y1 must be positive"));
    }
    let (d1, d2) = (params.d1f(), params.d2f());
    let n = params.nf();
    let e = 0.5 * eps_l2;
    let pv = n * (d1 / d2) * x1 * x1 - 2.0 * (d1 / d2) * x1 + 1.0 / d2;
    let y2sq = planar_y2_squared(params, x1, y1, eps_l2)?;
    let dx1 = if params.a3 == 0.0 {
        // Same elimination with the linear (A3 = 0) conservation law.
        (x1 + 1.0 / d1) * (pv - e - 1.0) + 2.0 * params.a1 * y1 * y1 / d1 + params.a2 * y2sq / d1 + e * (1.0 + n / d1)
    } else {
        let k = pv + (n - 1.0) * e - 1.0 + params.a1 * y1 * y1;
        let rad = params.a2 * params.a2 * y1.powi(4) + 4.0 * params.a3 * k * y1 * y1;
        (x1 + 1.0 / d1) * (pv - e - 1.0)
            + (2.0 * params.a1 + params.a2 * params.a2 / (2.0 * params.a3)) * y1 * y1 / d1
            + e * (1.0 + n / d1)
            - params.a2 / (2.0 * d1 * params.a3) * rad.sqrt()
    };
    Ok((dx1, y1 * (pv - e - x1), pv - e))
}

/// Multi-warped state laid out as `[X_1..X_k, Y_1..Y_k, L, t, u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: f64,
    pub t: f64,
    pub u: f64,
}

impl MultiState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.x.len() + 3);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&[self.l, self.t, self.u]);
        v
    }

    pub fn from_slice(k: usize, v: &[f64]) -> Self {
        MultiState { x: v[..k].to_vec(), y: v[k..2 * k].to_vec(), l: v[2 * k], t: v[2 * k + 1], u: v[2 * k + 2] }
    }

    pub fn initial_critical_point(params: &MultiWarpedParams) -> Self {
        let k = params.k();
        let d1 = f64::from(params.factors[0].d);
        let mut x = vec![0.0; k];
        let mut y = vec![0.0; k];
        x[0] = 1.0 / d1;
        y[0] = 1.0 / d1;
        MultiState { x, y, l: 0.0, t: 0.0, u: 0.0 }
    }
}

/// Multi-warped vector field in flat layout; `dy` receives the derivative.
pub fn rhs_multi_into(params: &MultiWarpedParams, v: &[f64], dy: &mut [f64]) {
    let k = params.k();
    let (x, rest) = v.split_at(k);
    let (y, tail) = rest.split_at(k);
    let l = tail[0];
    let dims = params.dims();
    let lambdas = params.lambdas();
    let e = 0.5 * params.epsilon * l * l;
    let sum: f64 = dims.iter().zip(x).map(|(d, xi)| d * xi * xi).sum::<f64>() - e;
    for i in 0..k {
        dy[i] = x[i] * (sum - 1.0) + lambdas[i] * y[i] * y[i] + e;
        dy[k + i] = y[i] * (sum - x[i]);
    }
    let dsum: f64 = dims.iter().zip(x).map(|(d, xi)| d * xi).sum();
    dy[2 * k] = l * sum;
    dy[2 * k + 1] = l;
    dy[2 * k + 2] = dsum - 1.0;
}

pub fn rhs_multi(params: &MultiWarpedParams, s: &MultiState) -> MultiState {
    let v = s.to_vec();
    let mut dy = vec![0.0; v.len()];
    rhs_multi_into(params, &v, &mut dy);
    MultiState::from_slice(params.k(), &dy)
}

/// `sum d X^2 + sum d lambda Y^2 + ((n-1)/2) eps L^2 - 1 - (C + eps u) L^2`;
/// the `C, u` term only enters when `m` is infinite.
pub fn multi_conservation_residual(params: &MultiWarpedParams, v: &[f64]) -> f64 {
    let k = params.k();
    let dims = params.dims();
    let lambdas = params.lambdas();
    let l = v[2 * k];
    let mut r = -1.0 + (params.n() - 1.0) * 0.5 * params.epsilon * l * l;
    for i in 0..k {
        r += dims[i] * v[i] * v[i] + dims[i] * lambdas[i] * v[k + i] * v[k + i];
    }
    if params.m.is_none() {
        r -= (params.c + params.epsilon * v[2 * k + 2]) * l * l;
    }
    r
}

/// `sum d X - 1`, zero on the Einstein locus.
pub fn multi_trace_residual(params: &MultiWarpedParams, v: &[f64]) -> f64 {
    params.dims().iter().zip(v).map(|(d, x)| d * x).sum::<f64>() - 1.0
}

/// Three-summand quasi-Einstein system on `[X1, X2, X3, Y1, Y2, Y3, L]`.
pub fn rhs_quasi(params: &QuasiParams, v: &[f64; 7]) -> Result<[f64; 7], DomainExit> {
    let [x1, x2, x3, y1, y2, y3, l] = *v;
    if !(y1 > 0.0) {
        return Err(DomainExit("Y1 must be positive"));
    }
    let d = params.d;
    let e = 0.5 * params.epsilon * l * l;
    let sv = d[0] * x1 * x1 + d[1] * x2 * x2 + d[2] * x3 * x3 - e;
    let w2 = submersion_term(y1, y2);
    Ok([
        x1 * (sv - 1.0) + params.a[0] / d[0] * y1 * y1 + e + params.cal_a / d[0] * w2,
        x2 * (sv - 1.0) + params.a[1] / d[1] * y2 * y2 + e - 2.0 * params.cal_a / d[1] * w2,
        x3 * (sv - 1.0) + params.a[2] / d[2] * y3 * y3 + e,
        y1 * (sv - x1),
        y2 * (sv - x2),
        y3 * (sv - x3),
        l * sv,
    ])
}

pub fn quasi_conservation_residual(params: &QuasiParams, v: &[f64; 7]) -> f64 {
    let [x1, x2, x3, y1, y2, y3, l] = *v;
    let d = params.d;
    let a = params.a;
    d[0] * x1 * x1 + d[1] * x2 * x2 + d[2] * x3 * x3 + a[0] * y1 * y1 + a[1] * y2 * y2 + a[2] * y3 * y3
        - params.cal_a * submersion_term(y1, y2)
        + (params.n() - 1.0) * 0.5 * params.epsilon * l * l
        - 1.0
}

/// `(X2^2 - (q^2/4) Y2^4/Y1^2, X2 (X1 + 1) - (p Y2^2 + (eps/2) L^2))`;
/// both vanish on the Kähler subspace.
pub fn kahler_residuals(params: &CircleBundleParams, s: &PhaseState, epsilon: f64) -> (f64, f64) {
    let q = f64::from(params.q);
    let p = f64::from(params.p);
    (
        s.x2 * s.x2 - q * q / 4.0 * submersion_term(s.y1, s.y2),
        s.x2 * (s.x1 + 1.0) - (p * s.y2 * s.y2 + 0.5 * epsilon * s.l * s.l),
    )
}

/// Monitor functionals evaluated at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    /// Lyapunov function built from `(X1 - X2)/Y1` and `G-hat(Y2/Y1)`.
    pub k: f64,
    /// Circle-bundle variant with `p = A2/d2`, `q^2 = 4 A3/d2`.
    pub k_tilde: f64,
    /// Scale-invariant Böhm functional; `+inf` when `Y2 = 0`.
    pub f0: f64,
    /// `Y1^d1 Y2^d2`.
    pub g: f64,
    /// Generalized mean curvature `1/L`.
    pub mean_curv: f64,
}

pub fn functionals(params: &TwoSummandsParams, s: &PhaseState) -> Functionals {
    let (d1, d2) = (params.d1f(), params.d2f());
    let n = params.nf();
    let w = s.y2 / s.y1;
    let z = (s.x1 - s.x2) / s.y1;
    let k = 0.5 * (w * w).powf(d1 - 1.0) * z * z - crate::config::g_hat(params, w);

    let p = params.a2 / d2;
    let q2 = 4.0 * params.a3 / d2;
    let k_tilde = 0.5 * z * z + 0.5 * p * w * w - (d2 + 2.0) / 16.0 * q2 * w.powi(4) - 0.5;

    let tr = d1 * s.x1 + d2 * s.x2;
    let brace = params.a1 * s.y1 * s.y1 + s.y2 * s.y2 * (params.a2 - params.a3 * w * w) + d1 * s.x1 * s.x1
        + d2 * s.x2 * s.x2
        - tr * tr / n;
    let f0 = if s.y2 > 0.0 {
        s.y1.powf(-2.0 * d1 / n) * s.y2.powf(-2.0 * d2 / n) * brace
    } else {
        f64::INFINITY
    };
    let g = s.y1.powf(d1) * s.y2.max(0.0).powf(d2);
    Functionals { k, k_tilde, f0, g, mean_curv: 1.0 / s.l }
}
