//! Closed-form soliton profiles and the matrix potential of the linearized
//! operator.
//!
//! Everything here is a pure function of `x` (and of the power `p` or the
//! detuning `eps = p - 3`). Hyperbolic functions are written through
//! `exp(-|x|)` so that nothing overflows at the edges of a wide domain.
//!
//! Besides the potentials themselves the module provides the *right factors*
//! `V_k |V_0|^{-1/2}` and `V^{(p)} |V_0|^{-1/2}` in simplified form. The weight
//! `|V_0|^{-1/2}` grows like `cosh x`, and multiplying it against a decaying
//! potential numerically loses everything at `|x| ~ 40`; the simplified forms
//! only ever contain decaying scalars.

use std::f64::consts::SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Symmetric matrix with equal diagonal entries `[[d, o], [o, d]]`.
    pub const fn sym(diag: f64, off: f64) -> Self {
        Mat2([[diag, off], [off, diag]])
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2([[a, 0.0], [0.0, d]])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn scale(self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a * s, b * s], [c * s, d * s]])
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a, c], [b, d]])
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Mat2([[d / det, -b / det], [-c / det, a / det]]))
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (l, r) = (self.0, rhs.0);
        Mat2([
            [l[0][0] + r[0][0], l[0][1] + r[0][1]],
            [l[1][0] + r[1][0], l[1][1] + r[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + (-rhs)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (l, r) = (self.0, rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = l[i][0] * r[0][j] + l[i][1] * r[1][j];
            }
        }
        Mat2(out)
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        rhs.scale(self)
    }
}

/// `[[1, 1], [1, 1]]`
const ONES: Mat2 = Mat2::sym(1.0, 1.0);
/// `[[2, 1], [1, 2]]`
const TWO_ONE: Mat2 = Mat2::sym(2.0, 1.0);
/// `[[sqrt3 + 1, sqrt3 - 1], [sqrt3 - 1, sqrt3 + 1]]`, so `|V_0|^{1/2} = (Q/2) * WEIGHT_SHAPE`.
const WEIGHT_SHAPE: Mat2 = Mat2::sym(SQRT_3 + 1.0, SQRT_3 - 1.0);

/// `sech(x)` without overflow for large `|x|`.
#[inline]
pub fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// `sech(x)^2`, overflow-free.
#[inline]
pub fn sech2(x: f64) -> f64 {
    let s = sech(x);
    s * s
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

fn check_power(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::param(
            "p",
            p,
            "the soliton exists only for 1 < p < infinity",
        ));
    }
    Ok(())
}

/// `Q_p^{p-1}(x) = ((p+1)/2) sech^2(((p-1)/2) x)`.
pub fn eval_soliton_power(p: f64, x: f64) -> Result<f64> {
    check_power(p)?;
    Ok(soliton_power_unchecked(p, x))
}

#[inline]
fn soliton_power_unchecked(p: f64, x: f64) -> f64 {
    0.5 * (p + 1.0) * sech2(0.5 * (p - 1.0) * x)
}

/// `Q_3(x) = sqrt(2) sech(x)`.
#[inline]
pub fn q3(x: f64) -> f64 {
    SQRT_2 * sech(x)
}

/// `Q_3(x)^2 = 2 sech^2(x)`.
#[inline]
pub fn q3_sq(x: f64) -> f64 {
    2.0 * sech2(x)
}

/// First-order coefficient of `Q_p^{p-1}` in `eps = p - 3`.
#[inline]
pub fn q1(x: f64) -> f64 {
    sech2(x) * (0.5 - 2.0 * x * tanh(x))
}

/// Second-order coefficient of `Q_p^{p-1}` in `eps = p - 3`.
#[inline]
pub fn q2(x: f64) -> f64 {
    let s2 = sech2(x);
    let t = tanh(x);
    0.5 * (2.0 * x * x * t * t * s2 - x * x * s2 * s2 - x * t * s2)
}

/// `(Q_3^2(x), q_1(x), q_2(x))`.
pub fn eval_q_series(x: f64) -> (f64, f64, f64) {
    (q3_sq(x), q1(x), q2(x))
}

/// Third-order Taylor remainder `q_R`, defined through
/// `Q_p^{p-1} = Q_3^2 + eps q_1 + eps^2 q_2 + eps^3 q_R`.
pub fn eval_q_remainder(eps: f64, x: f64) -> Result<f64> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::param("eps", eps, "q_R is only defined for eps != 0"));
    }
    if eps.abs() > 0.5 {
        return Err(Error::param("eps", eps, "q_R is only used for |eps| <= 1/2"));
    }
    let (lead, first, second) = eval_q_series(x);
    let full = soliton_power_unchecked(3.0 + eps, x);
    Ok((full - lead - eps * first - eps * eps * second) / (eps * eps * eps))
}

/// Scalar profiles appearing in the potential and its expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarProfile {
    /// `Q_p^{p-1}`
    QpPower(f64),
    /// `Q_3^2`
    Q3Sq,
    Q1,
    Q2,
    /// `q_R` at the given `eps`
    QRemainder(f64),
}

impl ScalarProfile {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match *self {
            ScalarProfile::QpPower(p) => eval_soliton_power(p, x),
            ScalarProfile::Q3Sq => Ok(q3_sq(x)),
            ScalarProfile::Q1 => Ok(q1(x)),
            ScalarProfile::Q2 => Ok(q2(x)),
            ScalarProfile::QRemainder(eps) => eval_q_remainder(eps, x),
        }
    }
}

/// Matrix-valued profiles: the potential, its expansion, and the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixProfile {
    /// `V^{(p)}`
    Vp(f64),
    V0,
    V1,
    V2,
    /// `|V_0|^{1/2}`
    WHalf,
    /// `|V_0|^{-1/2}`
    WHalfInv,
}

impl MatrixProfile {
    pub fn eval(&self, x: f64) -> Result<Mat2> {
        Ok(match *self {
            MatrixProfile::Vp(p) => eval_potential(p, x)?,
            MatrixProfile::V0 => eval_potential_series(x).0,
            MatrixProfile::V1 => eval_potential_series(x).1,
            MatrixProfile::V2 => eval_potential_series(x).2,
            MatrixProfile::WHalf => eval_weight_half(x),
            MatrixProfile::WHalfInv => eval_weight_half_inv(x),
        })
    }
}

/// `V^{(p)}(x) = -(1/2) [[p+1, p-1], [p-1, p+1]] Q_p^{p-1}(x)`.
pub fn eval_potential(p: f64, x: f64) -> Result<Mat2> {
    check_power(p)?;
    let g = soliton_power_unchecked(p, x);
    Ok(Mat2::sym(p + 1.0, p - 1.0).scale(-0.5 * g))
}

/// `(V_0(x), V_1(x), V_2(x))`.
pub fn eval_potential_series(x: f64) -> (Mat2, Mat2, Mat2) {
    let (lead, first, second) = eval_q_series(x);
    let v0 = TWO_ONE.scale(-lead);
    let v1 = ONES.scale(-0.5 * lead) - TWO_ONE.scale(first);
    let v2 = ONES.scale(-0.5 * first) - TWO_ONE.scale(second);
    (v0, v1, v2)
}

/// `|V_0|^{1/2}(x) = (1/2) [[sqrt3+1, sqrt3-1], [sqrt3-1, sqrt3+1]] Q_3(x)`.
pub fn eval_weight_half(x: f64) -> Mat2 {
    WEIGHT_SHAPE.scale(0.5 * q3(x))
}

/// `|V_0|^{-1/2}(x)` in closed form. Grows like `cosh x`; never used inside
/// operator assembly.
pub fn eval_weight_half_inv(x: f64) -> Mat2 {
    Mat2::sym(SQRT_3 + 1.0, 1.0 - SQRT_3).scale(1.0 / (2.0 * SQRT_3 * q3(x)))
}

/// Right factor `B = -(s/Q)/(2 sqrt3) [[1,1],[1,1]] - (t/Q)/2 W'` of a potential
/// written as `-(1/2) s [[1,1],[1,1]] - t [[2,1],[1,2]]`, with `s/Q` and `t/Q`
/// supplied already simplified.
#[inline]
fn right_factor(s_over_q: f64, t_over_q: f64) -> Mat2 {
    ONES.scale(-s_over_q / (2.0 * SQRT_3)) - WEIGHT_SHAPE.scale(0.5 * t_over_q)
}

/// `q_1 / Q_3`, a decaying profile.
#[inline]
fn q1_over_q3(x: f64) -> f64 {
    sech(x) * (0.5 - 2.0 * x * tanh(x)) / SQRT_2
}

/// `q_2 / Q_3`, a decaying profile.
#[inline]
fn q2_over_q3(x: f64) -> f64 {
    let s = sech(x);
    let t = tanh(x);
    s * (2.0 * x * x * t * t - x * x * s * s - x * t) / (2.0 * SQRT_2)
}

/// `Q_p^{p-1} / Q_3`, evaluated without forming `1 / sech`.
#[inline]
fn soliton_power_over_q3(p: f64, x: f64) -> f64 {
    let beta = 0.5 * (p - 1.0);
    let ax = x.abs();
    let e2 = (-2.0 * ax).exp();
    let e2b = (-2.0 * beta * ax).exp();
    let ratio = 2.0 * (-(2.0 * beta - 1.0) * ax).exp() * (1.0 + e2) / ((1.0 + e2b) * (1.0 + e2b));
    0.5 * (p + 1.0) * ratio / SQRT_2
}

/// `V_k(x) |V_0|^{-1/2}(x)` for `k = 0, 1, 2`.
///
/// `V_0 |V_0|^{-1/2} = -|V_0|^{1/2}` exactly.
pub fn series_right_factor(order: usize, x: f64) -> Mat2 {
    match order {
        0 => -eval_weight_half(x),
        1 => right_factor(q3(x), q1_over_q3(x)),
        2 => right_factor(q1_over_q3(x), q2_over_q3(x)),
        _ => panic!("potential expansion has orders 0, 1, 2 only"),
    }
}

/// `V^{(p)}(x) |V_0|^{-1/2}(x)`.
pub fn potential_right_factor(p: f64, x: f64) -> Mat2 {
    let g_over_q = soliton_power_over_q3(p, x);
    right_factor((p - 3.0) * g_over_q, g_over_q)
}
