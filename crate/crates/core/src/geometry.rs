//! Poincaré ball operations.
//!
//! Points are plain `f64` slices of length `d`. [`BallPoint`] and
//! [`TangentVector`] are validated owned wrappers for API boundaries; the
//! numeric routines on [`PoincareBall`] take slices so that parameter table
//! rows can be used without copying.
//!
//! Every routine that produces a ball point re-projects it to norm at most
//! `(1 - BALL_EPS) / sqrt(c)`.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Margin kept between ball points and the boundary.
pub const BALL_EPS: f64 = 1e-5;
/// Margin below 1 for `artanh` arguments.
pub const CLAMP_EPS: f64 = 1e-15;
/// Norms below this are treated as zero before dividing.
pub const ZERO_EPS: f64 = 1e-15;

// Below this argument the radial helpers switch to Taylor series.
const SERIES_CUTOFF: f64 = 1e-3;

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// Positive curvature parameter `c`; the ball has radius `1/sqrt(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(Error::InvalidArgument(format!(
                "curvature must be positive and finite, got {c}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn radius(self) -> f64 {
        1.0 / self.0.sqrt()
    }
}

/// The Poincaré ball of curvature `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareBall {
    c: f64,
    sqrt_c: f64,
}

impl PoincareBall {
    pub fn new(c: Curvature) -> Self {
        Self {
            c: c.get(),
            sqrt_c: c.get().sqrt(),
        }
    }

    pub fn curvature(&self) -> Curvature {
        Curvature(self.c)
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn sqrt_c(&self) -> f64 {
        self.sqrt_c
    }

    /// Largest norm a stored point may have.
    pub fn max_norm(&self) -> f64 {
        (1.0 - BALL_EPS) / self.sqrt_c
    }

    /// True if `c * |x|^2 < 1`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let n2 = norm_sq(x);
        n2.is_finite() && self.c * n2 < 1.0
    }

    /// Radially rescale `x` onto the `(1 - BALL_EPS)` shell if it lies outside it.
    pub fn project(&self, x: &mut [f64]) {
        let n = norm(x);
        let max = self.max_norm();
        if n > max {
            let s = max / n;
            x.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// `2 / (1 - c |x|^2)`.
    #[inline]
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        2.0 / (1.0 - self.c * norm_sq(x)).max(ZERO_EPS)
    }

    /// Möbius addition without the boundary projection. Used where the
    /// result feeds a distance rather than being stored as a point.
    pub fn mobius_add_raw_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let c = self.c;
        let xy = dot(x, y);
        let x2 = norm_sq(x);
        let y2 = norm_sq(y);
        let a = 1.0 + 2.0 * c * xy + c * y2;
        let b = 1.0 - c * x2;
        let den = (1.0 + 2.0 * c * xy + c * c * x2 * y2).max(ZERO_EPS);
        for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
            *o = (a * xi + b * yi) / den;
        }
    }

    pub fn mobius_add_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.mobius_add_raw_into(x, y, out);
        self.project(out);
    }

    pub fn mobius_add(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mobius_add_into(x, y, &mut out);
        out
    }

    /// `(2/sqrt c) artanh(sqrt c |(-x) ⊕ y|)`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut m = vec![0.0; x.len()];
        self.mobius_add_raw_into(&neg_x, y, &mut m);
        self.distance_from_norm(norm(&m))
    }

    /// Geodesic length corresponding to a gyro-difference of norm `n`.
    #[inline]
    pub fn distance_from_norm(&self, n: f64) -> f64 {
        let z = (self.sqrt_c * n).min(1.0 - CLAMP_EPS);
        2.0 / self.sqrt_c * z.atanh()
    }

    pub fn exp_map(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let vn = norm(v);
        if vn < ZERO_EPS {
            return x.to_vec();
        }
        let lambda = self.conformal_factor(x);
        let s = (self.sqrt_c * lambda * vn / 2.0).tanh() / (self.sqrt_c * vn);
        let mut step: Vec<f64> = v.iter().map(|vi| s * vi).collect();
        self.project(&mut step);
        self.mobius_add(x, &step)
    }

    pub fn log_map(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut m = vec![0.0; x.len()];
        self.mobius_add_raw_into(&neg_x, y, &mut m);
        let n = norm(&m);
        if n < ZERO_EPS {
            return vec![0.0; x.len()];
        }
        let lambda = self.conformal_factor(x);
        let z = (self.sqrt_c * n).min(1.0 - CLAMP_EPS);
        let s = 2.0 / (self.sqrt_c * lambda) * z.atanh() / n;
        m.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Exponential map at the origin.
    pub fn exp0_into(&self, v: &[f64], out: &mut [f64]) {
        let s = self.exp0_scale(norm(v));
        for (o, vi) in out.iter_mut().zip(v) {
            *o = s * vi;
        }
        self.project(out);
    }

    /// Logarithmic map at the origin.
    pub fn log0_into(&self, y: &[f64], out: &mut [f64]) {
        let s = self.log0_scale(norm(y));
        for (o, yi) in out.iter_mut().zip(y) {
            *o = s * yi;
        }
    }

    /// `exp_0(M log_0(x))` for diagonal `M`.
    pub fn mobius_matvec_into(&self, diag: &[f64], x: &[f64], out: &mut [f64]) {
        let mut u = vec![0.0; x.len()];
        self.log0_into(x, &mut u);
        u.iter_mut().zip(diag).for_each(|(ui, m)| *ui *= m);
        self.exp0_into(&u, out);
    }

    pub fn mobius_matvec(&self, diag: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mobius_matvec_into(diag, x, &mut out);
        out
    }

    /// Euclidean gradient divided by the squared conformal factor at `x`.
    pub fn riemannian_scale(&self, grad: &[f64], x: &[f64]) -> Vec<f64> {
        let lambda = self.conformal_factor(x);
        let s = 1.0 / (lambda * lambda);
        grad.iter().map(|g| g * s).collect()
    }

    /// RSGD step: `exp_x(-lr * grad / lambda_x^2)`, written back into `x`.
    pub fn rsgd_step(&self, x: &mut [f64], grad: &[f64], lr: f64) {
        let lambda = self.conformal_factor(x);
        let s = -lr / (lambda * lambda);
        let v: Vec<f64> = grad.iter().map(|g| g * s).collect();
        let next = self.exp_map(x, &v);
        x.copy_from_slice(&next);
        self.project(x);
    }

    // Radial scale factors: exp_0(v) = exp0_scale(|v|) v, log_0(y) = log0_scale(|y|) y.

    #[inline]
    pub(crate) fn exp0_scale(&self, t: f64) -> f64 {
        tanh_ratio(self.sqrt_c * t)
    }

    #[inline]
    pub(crate) fn log0_scale(&self, t: f64) -> f64 {
        artanh_ratio((self.sqrt_c * t).min(1.0 - CLAMP_EPS))
    }

    /// `(d/dt exp0_scale(t)) / t`.
    #[inline]
    pub(crate) fn exp0_scale_deriv_over_t(&self, t: f64) -> f64 {
        let z = self.sqrt_c * t;
        let h = if z < SERIES_CUTOFF {
            -2.0 / 3.0 + 8.0 * z * z / 15.0
        } else {
            let th = z.tanh();
            (z * (1.0 - th * th) - th) / (z * z * z)
        };
        self.c * h
    }

    /// `(d/dt log0_scale(t)) / t`.
    #[inline]
    pub(crate) fn log0_scale_deriv_over_t(&self, t: f64) -> f64 {
        let z = (self.sqrt_c * t).min(1.0 - CLAMP_EPS);
        let g = if z < SERIES_CUTOFF {
            2.0 / 3.0 + 4.0 * z * z / 5.0
        } else {
            (z / (1.0 - z * z) - z.atanh()) / (z * z * z)
        };
        self.c * g
    }

    /// Vector-Jacobian product of raw Möbius addition `out = x ⊕ y`.
    /// Adds the cotangent contributions for `x` and `y` into `gx` and `gy`.
    pub(crate) fn mobius_add_vjp(
        &self,
        x: &[f64],
        y: &[f64],
        out: &[f64],
        cot: &[f64],
        gx: &mut [f64],
        gy: &mut [f64],
    ) {
        let c = self.c;
        let xy = dot(x, y);
        let x2 = norm_sq(x);
        let y2 = norm_sq(y);
        let a = 1.0 + 2.0 * c * xy + c * y2;
        let b = 1.0 - c * x2;
        let den = (1.0 + 2.0 * c * xy + c * c * x2 * y2).max(ZERO_EPS);
        let gxdot = dot(x, cot) / den;
        let gydot = dot(y, cot) / den;
        let gout = dot(cot, out) / den;
        for i in 0..x.len() {
            gx[i] += a / den * cot[i] + 2.0 * c * gxdot * y[i]
                - 2.0 * c * gydot * x[i]
                - gout * (2.0 * c * y[i] + 2.0 * c * c * y2 * x[i]);
            gy[i] +=
                b / den * cot[i] + 2.0 * c * gxdot * (x[i] + y[i]) - gout * (2.0 * c * x[i] + 2.0 * c * c * x2 * y[i]);
        }
    }
}

/// `tanh(z) / z`, continuous at zero.
#[inline]
fn tanh_ratio(z: f64) -> f64 {
    if z < SERIES_CUTOFF {
        1.0 - z * z / 3.0
    } else {
        z.tanh() / z
    }
}

/// `artanh(z) / z`, continuous at zero.
#[inline]
pub(crate) fn artanh_ratio(z: f64) -> f64 {
    if z < SERIES_CUTOFF {
        1.0 + z * z / 3.0
    } else {
        z.atanh() / z
    }
}

/// An owned point strictly inside a Poincaré ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    pub fn new(coords: Vec<f64>, ball: &PoincareBall) -> Result<Self> {
        if !coords.iter().all(|v| v.is_finite()) || !ball.contains(&coords) {
            return Err(Error::InvalidArgument(format!(
                "point with norm {} is outside the ball of radius {}",
                norm(&coords),
                ball.curvature().radius()
            )));
        }
        Ok(Self(coords))
    }

    /// Projects `coords` into the ball instead of rejecting it.
    pub fn projected(mut coords: Vec<f64>, ball: &PoincareBall) -> Self {
        ball.project(&mut coords);
        Self(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for BallPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An owned tangent vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(Vec<f64>);

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|v| v.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::InvalidArgument("non-finite tangent vector".into()))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for TangentVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}
