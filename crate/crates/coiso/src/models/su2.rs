//! SU(2) in exponential coordinates `g = exp(s_j X_j)` with `[X_1, X_2] = X_3`.
//!
//! Group elements are unit quaternions; `X_j` is half the `j`-th imaginary
//! unit. Closed-form frames are cross-checked against frames obtained by
//! differentiating quaternion multiplication, and the Maurer-Cartan sign is
//! fixed by a numerical self-test rather than assumed.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

/// Chart margin: exponential coordinates are used on `|s| < pi - 0.2`.
pub const CHART_RADIUS: f64 = std::f64::consts::PI - 0.2;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

fn coeffs(t: f64) -> (f64, f64, f64) {
    // sin t / t, (1 - cos t)/t^2, (t - sin t)/t^3 with series near 0.
    if t < 1e-4 {
        let t2 = t * t;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / (t * t), (t - t.sin()) / (t * t * t))
    }
}

/// Adjoint matrix `Ad_g = exp(hat(s))`.
pub fn rotation(s: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b, _) = coeffs(s.norm());
    let k = hat(s);
    Matrix3::identity() + k * a + k * k * b
}

/// Left Maurer-Cartan matrix: `g^{-1} dg = X_j theta[j][i] ds_i`.
pub fn left_mc(s: &Vector3<f64>) -> Matrix3<f64> {
    let (_, b, c) = coeffs(s.norm());
    let k = hat(s);
    Matrix3::identity() - k * b + k * k * c
}

/// Inverse of [`left_mc`]; its columns are the left-invariant fields `X_j`.
pub fn left_mc_inverse(s: &Vector3<f64>) -> Matrix3<f64> {
    let (c, _) = inv_coeff(s.norm());
    let k = hat(s);
    Matrix3::identity() + k * 0.5 + k * k * c
}

fn inv_coeff(t: f64) -> (f64, f64) {
    // c(t) = (1 - (t/2) cot(t/2)) / t^2 and c'(t).
    if t < 1e-2 {
        let t2 = t * t;
        (1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0, t / 360.0 + t * t2 / 7560.0)
    } else {
        let u = t / 2.0;
        let f = 1.0 - u / u.tan();
        let fp = -0.5 / u.tan() + 0.5 * u / (u.sin() * u.sin());
        (f / (t * t), fp / (t * t) - 2.0 * f / (t * t * t))
    }
}

/// `d left_mc_inverse(s) / d s_b`.
pub fn left_mc_inverse_derivative(s: &Vector3<f64>, b: usize) -> Matrix3<f64> {
    let t = s.norm();
    let (c, cp) = inv_coeff(t);
    let k = hat(s);
    let mut e = Vector3::zeros();
    e[b] = 1.0;
    let eb = hat(&e);
    let dt = if t > 0.0 { s[b] / t } else { 0.0 };
    eb * 0.5 + k * k * (cp * dt) + (eb * k + k * eb) * c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub fn mul(&self, o: &Quat) -> Quat {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Quat([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    pub fn conj(&self) -> Quat {
        let [a, b, c, d] = self.0;
        Quat([a, -b, -c, -d])
    }

    pub fn sub(&self, o: &Quat) -> Quat {
        Quat(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }

    pub fn scale(&self, c: f64) -> Quat {
        Quat(self.0.map(|v| v * c))
    }

    pub fn imag(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    pub fn pure(v: &Vector3<f64>) -> Quat {
        Quat([0.0, v[0], v[1], v[2]])
    }

    /// `exp(s_j X_j)` as a unit quaternion.
    pub fn exp(s: &Vector3<f64>) -> Quat {
        let t = s.norm();
        let sinc = if t < 1e-8 { 0.5 } else { (t / 2.0).sin() / t };
        Quat([(t / 2.0).cos(), s[0] * sinc, s[1] * sinc, s[2] * sinc])
    }

    /// Principal SU(2) logarithm (`|s| < 2 pi`), inverse of [`Quat::exp`].
    pub fn log(&self) -> Vector3<f64> {
        let v = self.imag();
        let sn = v.norm();
        if sn < 1e-300 {
            return Vector3::zeros();
        }
        let half = sn.atan2(self.0[0]);
        v * (2.0 * half / sn)
    }

    /// Lie-algebra components of a pure quaternion (`X_j = e_j / 2`).
    pub fn algebra_components(&self) -> Vector3<f64> {
        self.imag() * 2.0
    }
}

/// Left frame by five-point differences of quaternion multiplication.
pub fn numeric_left_mc(s: &Vector3<f64>, h: f64) -> Matrix3<f64> {
    let gi = Quat::exp(s).conj();
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        let at = |c: f64| {
            let mut y = *s;
            y[i] += c * h;
            Quat::exp(&y)
        };
        // (-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / 12h
        let d = at(-2.0)
            .sub(&at(2.0))
            .sub(&at(-1.0).scale(8.0))
            .sub(&at(1.0).scale(-8.0))
            .scale(1.0 / (12.0 * h));
        m.set_column(i, &gi.mul(&d).algebra_components());
    }
    m
}

/// `Ad_{g^{-1}}` by conjugation: column `k` holds the components of `g^{-1} X_k g`.
pub fn numeric_adjoint_inverse(s: &Vector3<f64>) -> Matrix3<f64> {
    let g = Quat::exp(s);
    let gi = g.conj();
    let mut m = Matrix3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 0.5;
        m.set_column(k, &gi.mul(&Quat::pure(&e)).mul(&g).algebra_components());
    }
    m
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McSelfTest {
    /// `d theta^3 = sign * theta^1 ^ theta^2` (and cyclic).
    pub sign: f64,
    pub residual: f64,
    pub other_residual: f64,
}

/// Differentiates the numerical left frame and compares `d theta^j` with
/// `+/- theta^k ^ theta^l` for cyclic `(j, k, l)`; the better sign wins.
pub fn maurer_cartan_self_test(points: &[Vector3<f64>]) -> McSelfTest {
    let (hin, hout) = (1e-3, 1e-2);
    let mut res = [0.0f64; 2];
    for s in points {
        let t = numeric_left_mc(s, hin);
        let dt: Vec<Matrix3<f64>> = (0..3)
            .map(|i| {
                let at = |c: f64| {
                    let mut y = *s;
                    y[i] += c * hout;
                    numeric_left_mc(&y, hin)
                };
                (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) / (12.0 * hout)
            })
            .collect();
        for (j, k, l) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            for a in 0..3 {
                for b in 0..3 {
                    let d = dt[a][(j, b)] - dt[b][(j, a)];
                    let w = t[(k, a)] * t[(l, b)] - t[(l, a)] * t[(k, b)];
                    res[0] = res[0].max((d - w).abs());
                    res[1] = res[1].max((d + w).abs());
                }
            }
        }
    }
    if res[0] <= res[1] {
        McSelfTest { sign: 1.0, residual: res[0], other_residual: res[1] }
    } else {
        McSelfTest { sign: -1.0, residual: res[1], other_residual: res[0] }
    }
}
