//! Geometric parameter sets, Hopf-fibration presets and the algebraic
//! quantities derived from them: the trapping discriminant, the roots that
//! bound `Y2/Y1`, cone solutions and their linear stability.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Relative residual accepted when re-verifying the cone equations.
pub const CONE_RESIDUAL_TOL: f64 = 1e-12;

/// Constants of the two-summands system.
///
/// `d1` is the dimension of the collapsing sphere, `d2` the dimension of the
/// singular orbit. `a1`, `a2`, `a3` are the curvature constants entering the
/// Ricci endomorphism of the principal orbit, `epsilon` the soliton constant
/// and `c` the integration constant of the conservation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSummandsParams {
    pub d1: u32,
    pub d2: u32,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub epsilon: f64,
    pub c: f64,
}

impl TwoSummandsParams {
    pub fn new(d1: u32, d2: u32, a1: f64, a2: f64, a3: f64) -> Self {
        TwoSummandsParams { d1, d2, a1, a2, a3, epsilon: 0.0, c: 0.0 }
    }

    /// Sphere bundle with round normalisations `A1 = d1(d1-1)`, `Ric^Q = d2-1`
    /// and no submersion term. This is the doubly warped product on which the
    /// sphere constructions run.
    pub fn doubly_warped(d1: u32, d2: u32) -> Self {
        let a1 = f64::from(d1) * (f64::from(d1) - 1.0);
        let a2 = f64::from(d2) * (f64::from(d2) - 1.0);
        TwoSummandsParams::new(d1, d2, a1, a2, 0.0)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn n(&self) -> u32 {
        self.d1 + self.d2
    }

    pub fn nf(&self) -> f64 {
        f64::from(self.n())
    }

    pub fn d1f(&self) -> f64 {
        f64::from(self.d1)
    }

    pub fn d2f(&self) -> f64 {
        f64::from(self.d2)
    }

    /// True when `A1 = d1(d1-1)`, i.e. the collapsing fibre is a round sphere.
    pub fn is_sphere_collapse(&self) -> bool {
        self.a1 == self.d1f() * (self.d1f() - 1.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d1 < 1 || self.d2 < 1 {
            return Err(ConfigError::Invalid("d1 and d2 must be positive".into()));
        }
        if self.n() < 2 {
            return Err(ConfigError::Invalid("n = d1 + d2 must be at least 2".into()));
        }
        for (name, v) in [
            ("A1", self.a1),
            ("A2", self.a2),
            ("A3", self.a3),
            ("epsilon", self.epsilon),
            ("C", self.c),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be finite")));
            }
        }
        if self.a1 < 0.0 {
            return Err(ConfigError::Invalid("A1 must be nonnegative".into()));
        }
        if self.a2 <= 0.0 {
            return Err(ConfigError::Invalid("A2 must be positive".into()));
        }
        if self.a3 < 0.0 {
            return Err(ConfigError::Invalid("A3 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Principal circle bundle over a Fano Kähler-Einstein base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleBundleParams {
    /// Fano index factor, `Ric = p g` on the base.
    pub p: u32,
    /// Euler class multiple, nonzero.
    pub q: i32,
    /// Real dimension of the base, even.
    pub d: u32,
}

impl CircleBundleParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.p == 0 {
            return Err(ConfigError::Invalid("p must be positive".into()));
        }
        if self.q == 0 {
            return Err(ConfigError::Invalid("q must be nonzero".into()));
        }
        if self.d == 0 || self.d % 2 != 0 {
            return Err(ConfigError::Invalid("d must be a positive even integer".into()));
        }
        Ok(())
    }

    /// `d1 = 1, d2 = d, A1 = 0, A2 = d p, A3 = d q^2 / 4`.
    pub fn to_two_summands(&self, epsilon: f64, c: f64) -> TwoSummandsParams {
        let d = f64::from(self.d);
        let q = f64::from(self.q);
        TwoSummandsParams {
            d1: 1,
            d2: self.d,
            a1: 0.0,
            a2: d * f64::from(self.p),
            a3: d * q * q / 4.0,
            epsilon,
            c,
        }
    }
}

/// One factor `(d_i, lambda_i)` of a multiple warped product; `lambda_i` is
/// the Einstein constant of the factor, entering the Ricci endomorphism as
/// `lambda_i / f_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub d: u32,
    pub lambda: f64,
}

/// Multiple warped product over a collapsing sphere. With finite `m` an
/// extra virtual factor of dimension `m` and Einstein constant
/// `lambda_virtual` is appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiWarpedParams {
    pub factors: Vec<Factor>,
    /// `None` stands for `m = infinity` (gradient Ricci solitons).
    pub m: Option<f64>,
    pub lambda_virtual: f64,
    pub epsilon: f64,
    /// Conservation-law constant; only meaningful when `m` is infinite.
    pub c: f64,
}

impl MultiWarpedParams {
    /// Multi-warped view of a two-summands parameter set with `A3 = 0`.
    pub fn from_two_summands(p: &TwoSummandsParams, m: Option<f64>, lambda_virtual: f64) -> Self {
        MultiWarpedParams {
            factors: vec![
                Factor { d: p.d1, lambda: p.a1 / p.d1f() },
                Factor { d: p.d2, lambda: p.a2 / p.d2f() },
            ],
            m,
            lambda_virtual,
            epsilon: p.epsilon,
            c: p.c,
        }
    }

    /// Number of factors actually evolved (`r + 1` when `m` is finite).
    pub fn k(&self) -> usize {
        self.factors.len() + usize::from(self.m.is_some())
    }

    /// Dimensions of all evolved factors, the virtual one included.
    pub fn dims(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.factors.iter().map(|f| f64::from(f.d)).collect();
        if let Some(m) = self.m {
            d.push(m);
        }
        d
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let mut l: Vec<f64> = self.factors.iter().map(|f| f.lambda).collect();
        if self.m.is_some() {
            l.push(self.lambda_virtual);
        }
        l
    }

    pub fn n(&self) -> f64 {
        self.dims().iter().sum()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let first = self
            .factors
            .first()
            .ok_or_else(|| ConfigError::Invalid("at least one factor required".into()))?;
        if self.factors.iter().any(|f| f.d == 0) {
            return Err(ConfigError::Invalid("factor dimensions must be positive".into()));
        }
        let d1 = f64::from(first.d);
        if first.lambda != d1 - 1.0 {
            return Err(ConfigError::Invalid(format!(
                "lambda_1 must equal d1 - 1 = {} for a round collapsing sphere",
                d1 - 1.0
            )));
        }
        if self.factors.iter().skip(1).any(|f| !(f.lambda > 0.0)) {
            return Err(ConfigError::Invalid("lambda_i must be positive for i >= 2".into()));
        }
        if let Some(m) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ConfigError::Invalid("m must be positive (None for infinity)".into()));
            }
        }
        if !self.epsilon.is_finite() || !self.lambda_virtual.is_finite() || !self.c.is_finite() {
            return Err(ConfigError::Invalid("parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Two summands plus the virtual factor of an m-quasi-Einstein metric.
///
/// `a[2] = m * lambda3` is the curvature constant of the virtual factor and
/// `cal_a = d2 |A|^2` the submersion constant (the `A3` of the plain
/// two-summands system).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiParams {
    pub d: [f64; 3],
    pub a: [f64; 3],
    pub cal_a: f64,
    pub epsilon: f64,
}

impl QuasiParams {
    pub fn n(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// Lifts a two-summands parameter set to the three-summand quasi-Einstein
/// system with virtual dimension `m` and virtual Einstein constant `lambda3`.
pub fn lift_quasi(params: &TwoSummandsParams, m: f64, lambda3: f64) -> Result<QuasiParams, ConfigError> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(ConfigError::Invalid(
            "quasi lift needs a finite m > 0; use the soliton system for m = infinity".into(),
        ));
    }
    if !lambda3.is_finite() {
        return Err(ConfigError::Invalid("lambda3 must be finite".into()));
    }
    Ok(QuasiParams {
        d: [params.d1f(), params.d2f(), m],
        a: [params.a1, params.a2, m * lambda3],
        cal_a: params.a3,
        epsilon: params.epsilon,
    })
}

/// Hopf-fibration families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    /// Complex projective.
    Cp,
    /// Quaternionic projective.
    Hp,
    /// Sp(1) x Sp(m+1) family with a two-dimensional collapsing sphere.
    F,
    /// Cayley plane.
    CaP,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [PresetName::Cp, PresetName::Hp, PresetName::F, PresetName::CaP];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Cp => "cp",
            PresetName::Hp => "hp",
            PresetName::F => "f",
            PresetName::CaP => "cap",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(PresetName::Cp),
            "hp" => Ok(PresetName::Hp),
            "f" => Ok(PresetName::F),
            "cap" => Ok(PresetName::CaP),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub m: u32,
}

/// Integer data of one preset row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PresetRow {
    pub d1: u32,
    pub d2: u32,
    /// `|A|^2`.
    pub a_norm2: u32,
    /// `Ric^Q`.
    pub ric_q: u32,
}

impl PresetRow {
    pub fn a1(&self) -> u64 {
        u64::from(self.d1) * u64::from(self.d1 - 1)
    }

    pub fn a2(&self) -> u64 {
        u64::from(self.d2) * u64::from(self.ric_q)
    }

    pub fn a3(&self) -> u64 {
        u64::from(self.d2) * u64::from(self.a_norm2)
    }
}

pub fn preset_row(preset: Preset) -> Result<PresetRow, ConfigError> {
    let m = preset.m;
    if m < 1 {
        return Err(ConfigError::Invalid("preset family index m must be at least 1".into()));
    }
    let row = match preset.name {
        PresetName::Cp => PresetRow { d1: 1, d2: 2 * m, a_norm2: 1, ric_q: 2 * m + 2 },
        PresetName::Hp => PresetRow { d1: 3, d2: 4 * m, a_norm2: 3, ric_q: 4 * m + 8 },
        PresetName::F => PresetRow { d1: 2, d2: 4 * m, a_norm2: 8, ric_q: 4 * m + 8 },
        PresetName::CaP => {
            if m != 1 {
                return Err(ConfigError::Invalid("the Cayley plane preset only exists for m = 1".into()));
            }
            PresetRow { d1: 7, d2: 8, a_norm2: 7, ric_q: 28 }
        }
    };
    Ok(row)
}

/// Resolves a preset to its two-summands constants with `epsilon = C = 0`.
pub fn resolve_preset(preset: Preset) -> Result<TwoSummandsParams, ConfigError> {
    let row = preset_row(preset)?;
    Ok(TwoSummandsParams::new(
        row.d1,
        row.d2,
        row.a1() as f64,
        row.a2() as f64,
        row.a3() as f64,
    ))
}

/// The trapping discriminant
/// `(A2/d2)^2 - 4 (A3/d2) (d1/(d1+1)) (2 d1 + d2)`.
///
/// Evaluated as one fraction so that integer-valued inputs give an exactly
/// signed result.
pub fn d_hat(params: &TwoSummandsParams) -> f64 {
    let (d1, d2) = (params.d1f(), params.d2f());
    let num = params.a2 * params.a2 * (d1 + 1.0) - 4.0 * params.a3 * d2 * d1 * (2.0 * d1 + d2);
    num / (d2 * d2 * (d1 + 1.0))
}

/// Positive roots `w1 < w2` bounding the quotient `Y2/Y1`.
///
/// These are the nonzero zeros of the potential
/// `G(w) = A3 (1/d1 + 2/d2) w^(2(d1+1)) / (2(d1+1)) - A2 w^(2 d1) / (2 d1 d2) + w^(2(d1-1)) / 2`,
/// i.e. `w^2 = (A2/A3) ((d1+1)/(2 d1 + d2)) (1 -+ sqrt(1 - 4 (A3/A2^2) d1 d2 (2 d1 + d2)/(d1+1))) / 2`.
/// Present exactly when `d_hat > 0`.
pub fn omega_hat_roots(params: &TwoSummandsParams) -> Result<Option<(f64, f64)>, ConfigError> {
    if params.a3 <= 0.0 {
        return Err(ConfigError::NotApplicable("omega-hat roots need A3 > 0 (warped-product case)"));
    }
    if d_hat(params) <= 0.0 {
        return Ok(None);
    }
    let (d1, d2) = (params.d1f(), params.d2f());
    let (a2, a3) = (params.a2, params.a3);
    let root = (1.0 - 4.0 * (a3 / (a2 * a2)) * d1 * d2 * (2.0 * d1 + d2) / (d1 + 1.0)).sqrt();
    let scale = 0.5 * (a2 / a3) * ((d1 + 1.0) / (2.0 * d1 + d2));
    // Product of the two w^2 roots is d1 d2 (d1+1) / (A3 (2 d1 + d2)); use it
    // for the small root to avoid cancellation.
    let w2_hi = scale * (1.0 + root);
    let w2_lo = d1 * d2 * (d1 + 1.0) / (a3 * (2.0 * d1 + d2)) / w2_hi;
    Ok(Some((w2_lo.sqrt(), w2_hi.sqrt())))
}

/// The potential whose zeros are returned by [`omega_hat_roots`].
pub fn g_hat(params: &TwoSummandsParams, w: f64) -> f64 {
    let (d1, d2) = (params.d1f(), params.d2f());
    let w2 = w * w;
    let base = w2.powf(d1 - 1.0);
    base * (params.a3 * (1.0 / d1 + 2.0 / d2) * w2 * w2 / (2.0 * (d1 + 1.0)) - params.a2 * w2 / (2.0 * d1 * d2) + 0.5)
}

/// Positive zeros of `(p/2) w^2 - ((d+2)/16) q^2 w^4 - 1/2`; present exactly
/// when `2 p^2 > (d+2) q^2`.
pub fn omega_tilde_roots(params: &CircleBundleParams) -> Result<Option<(f64, f64)>, ConfigError> {
    params.validate()?;
    let p = i64::from(params.p);
    let q2 = i64::from(params.q) * i64::from(params.q);
    let d = i64::from(params.d);
    if 2 * p * p <= (d + 2) * q2 {
        return Ok(None);
    }
    let (pf, q2f, df) = (p as f64, q2 as f64, d as f64);
    let root = (pf * pf - (df + 2.0) * q2f / 2.0).sqrt();
    let w2_hi = 4.0 * (pf + root) / ((df + 2.0) * q2f);
    // Product of the roots in w^2 is 8 / ((d+2) q^2).
    let w2_lo = 8.0 / ((df + 2.0) * q2f) / w2_hi;
    Ok(Some((w2_lo.sqrt(), w2_hi.sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    First,
    Second,
}

/// A pair `(c1, c2)` such that `f_i = c_i t` (or `c_i sin t`, `c_i sinh t`)
/// solves the Einstein equations with a conical singularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSolution {
    pub c1: f64,
    pub c2: f64,
    pub branch: Branch,
}

impl ConeSolution {
    pub fn ratio(&self) -> f64 {
        self.c1 / self.c2
    }
}

/// Relative residuals of the two cone equations
/// `(n-1) d1 = A1/c1^2 + A3 c1^2/c2^4` and `(n-1) d2 = A2/c2^2 - 2 A3 c1^2/c2^4`.
pub fn cone_residuals(params: &TwoSummandsParams, c1sq: f64, c2sq: f64) -> (f64, f64) {
    let n1 = params.nf() - 1.0;
    let (d1, d2) = (params.d1f(), params.d2f());
    let cross = params.a3 * c1sq / (c2sq * c2sq);
    let lhs1 = n1 * d1;
    let rhs1 = params.a1 / c1sq + cross;
    let lhs2 = n1 * d2;
    let rhs2 = params.a2 / c2sq - 2.0 * cross;
    ((lhs1 - rhs1).abs() / lhs1, (lhs2 - rhs2).abs() / lhs2)
}

/// A few Newton steps on both cone equations in `(c1^2, c2^2)`.
fn polish_cone(params: &TwoSummandsParams, mut x: f64, mut y: f64) -> (f64, f64) {
    let n1 = params.nf() - 1.0;
    let (a1, a2, a3) = (params.a1, params.a2, params.a3);
    for _ in 0..3 {
        let y2 = y * y;
        let f1 = a1 / x + a3 * x / y2 - n1 * params.d1f();
        let f2 = a2 / y - 2.0 * a3 * x / y2 - n1 * params.d2f();
        let j11 = -a1 / (x * x) + a3 / y2;
        let j12 = -2.0 * a3 * x / (y2 * y);
        let j21 = -2.0 * a3 / y2;
        let j22 = -a2 / y2 + 4.0 * a3 * x / (y2 * y);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let (nx, ny) = (x - (f1 * j22 - f2 * j12) / det, y - (j11 * f2 - j21 * f1) / det);
        if !(nx > 0.0 && ny > 0.0) {
            break;
        }
        (x, y) = (nx, ny);
    }
    (x, y)
}

/// All cone solutions, ordered by increasing `c1/c2`.
pub fn cone_solutions(params: &TwoSummandsParams) -> Result<Vec<ConeSolution>, ConfigError> {
    params.validate()?;
    if params.a1 <= 0.0 {
        return Err(ConfigError::Invalid("cone solutions need A1 > 0".into()));
    }
    let n = params.nf();
    let (d1, d2) = (params.d1f(), params.d2f());
    let (a1, a2, a3) = (params.a1, params.a2, params.a3);

    let mut squares: Vec<(f64, f64)> = Vec::new();
    if a3 == 0.0 {
        squares.push((a1 / ((n - 1.0) * d1), a2 / ((n - 1.0) * d2)));
    } else {
        let disc = a2 * a2 * d1 * d1 - 4.0 * a1 * a3 * d2 * (2.0 * d1 + d2);
        if disc < 0.0 {
            return Ok(Vec::new());
        }
        let sq = disc.sqrt();
        let den = d2 * (2.0 * d1 + d2) * (n - 1.0);
        let big = (a2 * n + sq) / den;
        let mut c2_candidates = vec![big];
        if disc > 0.0 {
            // Small root from the product of the roots, free of cancellation.
            let product = (a2 * a2 * (n * n - d1 * d1) + 4.0 * a1 * a3 * d2 * (2.0 * d1 + d2)) / (den * den);
            c2_candidates.push(product / big);
        }
        for c2sq in c2_candidates {
            if c2sq <= 0.0 {
                continue;
            }
            // Second cone equation is linear in c1^2.
            let c1sq = c2sq * (a2 - (n - 1.0) * d2 * c2sq) / (2.0 * a3);
            if c1sq <= 0.0 {
                continue;
            }
            squares.push(polish_cone(params, c1sq, c2sq));
        }
    }

    let mut out = Vec::with_capacity(squares.len());
    for (c1sq, c2sq) in squares {
        let (r1, r2) = cone_residuals(params, c1sq, c2sq);
        if r1 > CONE_RESIDUAL_TOL || r2 > CONE_RESIDUAL_TOL {
            return Err(ConfigError::Inconsistent(format!(
                "cone equations not satisfied: residuals {r1:e}, {r2:e}"
            )));
        }
        out.push(ConeSolution { c1: c1sq.sqrt(), c2: c2sq.sqrt(), branch: Branch::First });
    }
    out.sort_by(|a, b| a.ratio().total_cmp(&b.ratio()));
    if out.len() == 2 {
        out[1].branch = Branch::Second;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityKind {
    Spiral,
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeStability {
    pub kind: StabilityKind,
    pub eigenvalues: [Complex64; 2],
    /// `n^2` times the discriminant of the characteristic quadratic.
    pub scaled_discriminant: f64,
}

/// Linear stability of a cone point of the planar Ricci-flat system.
///
/// The eigenvalues solve
/// `l^2 + ((n-1)/n) l + (2/n^2) (n - 1 - 2 A3 R) = 0` with
/// `R = (c1^2/c2^4)(1/d1 + 1/d2)`. Its discriminant times `n^2` is
/// `(n-1)(n-9) + 16 A3 R`; a negative value gives a spiral, zero or
/// positive a node.
pub fn classify_cone_stability(params: &TwoSummandsParams, cone: &ConeSolution) -> ConeStability {
    let n = params.nf();
    let (d1, d2) = (params.d1f(), params.d2f());
    let c1sq = cone.c1 * cone.c1;
    let c2sq = cone.c2 * cone.c2;
    let r = c1sq / (c2sq * c2sq) * (1.0 / d1 + 1.0 / d2);
    let b = (n - 1.0) / n;
    let scaled = (n - 1.0) * (n - 9.0) + 16.0 * params.a3 * r;
    let disc = scaled / (n * n);
    let (kind, eigenvalues) = if scaled < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        (StabilityKind::Spiral, [Complex64::new(-b / 2.0, im), Complex64::new(-b / 2.0, -im)])
    } else {
        let sq = disc.sqrt();
        (
            StabilityKind::Node,
            [Complex64::new((-b + sq) / 2.0, 0.0), Complex64::new((-b - sq) / 2.0, 0.0)],
        )
    };
    ConeStability { kind, eigenvalues, scaled_discriminant: scaled }
}
