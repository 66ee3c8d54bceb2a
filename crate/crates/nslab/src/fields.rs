//! Pointwise field abstractions shared by the norm, data and diagnostic code.
//!
//! Analytic presets and grid-backed fields both implement [`VectorFn`];
//! time-dependent flows with a pressure implement [`Flow`].
use crate::error::{LabError, Result};
use crate::geometry::norm3;
use crate::grid::{GridSpec, LagrangeInterp, ModeSum, ScalarField, SpectralField};
use std::sync::Arc;

pub trait VectorFn: Send + Sync {
    fn eval(&self, x: [f64; 3]) -> [f64; 3];

    /// Radius of the region where evaluation is meaningful (None = everywhere).
    fn domain_radius(&self) -> Option<f64> {
        None
    }
}

pub trait ScalarFn: Send + Sync {
    fn eval(&self, x: [f64; 3]) -> f64;
}

impl<F: Fn([f64; 3]) -> [f64; 3] + Send + Sync> VectorFn for F {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        self(x)
    }
}

/// Wrap a closure as a scalar function.
pub struct Scalar<F>(pub F);

impl<F: Fn([f64; 3]) -> f64 + Send + Sync> ScalarFn for Scalar<F> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        (self.0)(x)
    }
}

/// `|v|` of a vector field.
pub struct Magnitude<'a>(pub &'a dyn VectorFn);

impl ScalarFn for Magnitude<'_> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        norm3(self.0.eval(x))
    }
}

/// `λ v(λ x)`.
pub struct ScaledVector<'a> {
    pub inner: &'a dyn VectorFn,
    pub lambda: f64,
}

impl<'a> ScaledVector<'a> {
    pub fn new(inner: &'a dyn VectorFn, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(LabError::InvalidArgument(format!("scale factor {lambda} must be positive")));
        }
        Ok(Self { inner, lambda })
    }

    /// Checked evaluation against the inner field's domain.
    pub fn try_eval(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let y = x.map(|c| c * self.lambda);
        if let Some(r) = self.inner.domain_radius() {
            if norm3(y) > r {
                return Err(LabError::DomainExceeded(format!(
                    "|λx| = {} exceeds represented radius {r}",
                    norm3(y)
                )));
            }
        }
        Ok(self.inner.eval(y).map(|c| c * self.lambda))
    }
}

impl VectorFn for ScaledVector<'_> {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let y = x.map(|c| c * self.lambda);
        self.inner.eval(y).map(|c| c * self.lambda)
    }

    fn domain_radius(&self) -> Option<f64> {
        self.inner.domain_radius().map(|r| r / self.lambda)
    }
}

/// `λ^a f(λ x)` for scalar functions; `a = 1` for velocities, `2` for pressures.
pub struct ScaledScalar<'a> {
    pub inner: &'a dyn ScalarFn,
    pub lambda: f64,
    pub weight_power: i32,
}

impl ScalarFn for ScaledScalar<'_> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        self.lambda.powi(self.weight_power) * self.inner.eval(x.map(|c| c * self.lambda))
    }
}

/// A velocity–pressure pair defined on a space-time region.
pub trait Flow: Send + Sync {
    fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3];
    fn pressure(&self, x: [f64; 3], t: f64) -> f64;

    /// Time interval covered.
    fn time_extent(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Spatial cell size and snapshot spacing for resolution gates.
    fn resolution(&self) -> Option<(f64, f64)> {
        None
    }

    /// Periodic box, if any.
    fn grid(&self) -> Option<GridSpec> {
        None
    }
}

/// Closure-backed flow.
pub struct AnalyticFlow<V, P> {
    pub v: V,
    pub p: P,
}

impl<V, P> Flow for AnalyticFlow<V, P>
where
    V: Fn([f64; 3], f64) -> [f64; 3] + Send + Sync,
    P: Fn([f64; 3], f64) -> f64 + Send + Sync,
{
    fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        (self.v)(x, t)
    }
    fn pressure(&self, x: [f64; 3], t: f64) -> f64 {
        (self.p)(x, t)
    }
}

/// NS scaling `v^λ = λ v(λx, λ²t)`, `π^λ = λ² π(λx, λ²t)`.
pub struct ScaledFlow<'a> {
    pub inner: &'a dyn Flow,
    pub lambda: f64,
}

impl Flow for ScaledFlow<'_> {
    fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let l = self.lambda;
        self.inner.velocity(x.map(|c| c * l), t * l * l).map(|c| c * l)
    }
    fn pressure(&self, x: [f64; 3], t: f64) -> f64 {
        let l = self.lambda;
        l * l * self.inner.pressure(x.map(|c| c * l), t * l * l)
    }
    fn time_extent(&self) -> (f64, f64) {
        let (a, b) = self.inner.time_extent();
        let l2 = self.lambda * self.lambda;
        (a / l2, b / l2)
    }
}

/// Perturbation of a flow by a constant velocity and a time-only pressure.
pub struct GaugeShifted<'a, G> {
    pub inner: &'a dyn Flow,
    pub shift: [f64; 3],
    pub pressure_shift: G,
}

impl<G: Fn(f64) -> f64 + Send + Sync> Flow for GaugeShifted<'_, G> {
    fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let v = self.inner.velocity(x, t);
        [v[0] + self.shift[0], v[1] + self.shift[1], v[2] + self.shift[2]]
    }
    fn pressure(&self, x: [f64; 3], t: f64) -> f64 {
        self.inner.pressure(x, t) + (self.pressure_shift)(t)
    }
    fn time_extent(&self) -> (f64, f64) {
        self.inner.time_extent()
    }
    fn resolution(&self) -> Option<(f64, f64)> {
        self.inner.resolution()
    }
}

/// How grid fields are evaluated off the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointEval {
    /// Exact trigonometric sum over all stored modes.
    Exact,
    /// Periodic Lagrange interpolation of the given even order.
    Lagrange(usize),
}

/// Off-grid evaluator for a spectral vector field.
#[derive(Clone)]
pub enum GridVector {
    Exact(Arc<ModeSum>),
    Lagrange(Arc<LagrangeInterp>),
}

impl GridVector {
    pub fn new(v: &SpectralField, how: PointEval) -> Self {
        match how {
            PointEval::Exact => GridVector::Exact(Arc::new(v.mode_sum())),
            PointEval::Lagrange(o) => {
                let p = v.to_physical();
                GridVector::Lagrange(Arc::new(LagrangeInterp::new(v.grid, o, p.to_vec())))
            }
        }
    }
}

impl VectorFn for GridVector {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let mut o = [0.0; 3];
        match self {
            GridVector::Exact(m) => m.eval(x, &mut o),
            GridVector::Lagrange(l) => l.eval(x, &mut o),
        }
        o
    }
}

#[derive(Clone)]
pub enum GridScalar {
    Exact(Arc<ModeSum>),
    Lagrange(Arc<LagrangeInterp>),
}

impl GridScalar {
    pub fn new(s: &ScalarField, how: PointEval) -> Self {
        match how {
            PointEval::Exact => GridScalar::Exact(Arc::new(s.mode_sum())),
            PointEval::Lagrange(o) => {
                GridScalar::Lagrange(Arc::new(LagrangeInterp::new(s.grid, o, vec![s.to_physical()])))
            }
        }
    }
}

impl ScalarFn for GridScalar {
    fn eval(&self, x: [f64; 3]) -> f64 {
        let mut o = [0.0];
        match self {
            GridScalar::Exact(m) => m.eval(x, &mut o),
            GridScalar::Lagrange(l) => l.eval(x, &mut o),
        }
        o[0]
    }
}

/// Analytic presets used as data and as oracles.
pub mod presets {
    use super::*;
    use std::f64::consts::PI;

    /// `x/|x|²` (zero at the origin).
    pub fn inverse_radius_field(x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 == 0.0 {
            [0.0; 3]
        } else {
            x.map(|c| c / r2)
        }
    }

    /// Taylor–Green vortex in a 2π-periodic box, ν = 1.
    pub fn taylor_green(amp: f64) -> impl Fn([f64; 3], f64) -> [f64; 3] + Send + Sync + Copy {
        move |x, t| {
            let e = amp * (-2.0 * t).exp();
            [e * x[0].sin() * x[1].cos(), -e * x[0].cos() * x[1].sin(), 0.0]
        }
    }

    /// Mean-zero pressure of the Taylor–Green vortex.
    pub fn taylor_green_pressure(amp: f64) -> impl Fn([f64; 3], f64) -> f64 + Send + Sync + Copy {
        move |x, t| 0.25 * amp * amp * (-4.0 * t).exp() * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos())
    }

    /// Smooth radial bump supported in `|x| < 1`: `exp(1 − 1/(1 − |x|²))`.
    pub fn bump(r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r * r)).exp()
        }
    }

    /// Truncated copies `Σ_k ζ(x − 2^k e₁)` of a unit-height bump, centred
    /// in the box, `k = 1..=k_max`.
    pub fn bump_train(center: [f64; 3], k_max: u32, radius: f64) -> impl Fn([f64; 3]) -> f64 + Send + Sync {
        move |x| {
            let mut s = 0.0;
            for k in 1..=k_max {
                let c = [center[0] + 2f64.powi(k as i32), center[1], center[2]];
                let d = [(x[0] - c[0]) / radius, (x[1] - c[1]) / radius, (x[2] - c[2]) / radius];
                s += bump(norm3(d));
            }
            s
        }
    }

    /// Smoothly truncated radial profile: `g(|x|)` multiplied by a cutoff
    /// that switches off between `r_in/2..r_in` and `r_out..2 r_out`.
    pub fn smooth_window(r: f64, r_in: f64, r_out: f64) -> f64 {
        let inner = if r_in > 0.0 { smooth_step((r - 0.5 * r_in) / (0.5 * r_in)) } else { 1.0 };
        let outer = 1.0 - smooth_step((r - r_out) / r_out);
        inner * outer
    }

    /// C^∞ step: 0 for s ≤ 0, 1 for s ≥ 1.
    pub fn smooth_step(s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / s).exp();
            let b = (-1.0 / (1.0 - s)).exp();
            a / (a + b)
        }
    }

    pub fn two_pi() -> f64 {
        2.0 * PI
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn scale_identity_and_homogeneous_field() {
        let f = inverse_radius_field;
        let s1 = ScaledVector::new(&f, 1.0).unwrap();
        let s2 = ScaledVector::new(&f, 2.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let a = f(x);
        let b = s1.eval(x);
        let c = s2.eval(x);
        for i in 0..3 {
            assert_eq!(a[i], b[i]);
            assert!((a[i] - c[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn scale_single_mode() {
        let f = |x: [f64; 3]| [0.0, x[0].sin(), 0.0];
        let s = ScaledVector::new(&f, 2.0).unwrap();
        let v = s.eval([std::f64::consts::FRAC_PI_4, 0.0, 0.0]);
        assert!((v[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_domain_is_checked() {
        struct Bounded;
        impl VectorFn for Bounded {
            fn eval(&self, x: [f64; 3]) -> [f64; 3] {
                x
            }
            fn domain_radius(&self) -> Option<f64> {
                Some(1.0)
            }
        }
        let s = ScaledVector::new(&Bounded, 4.0).unwrap();
        assert!(s.try_eval([0.2, 0.0, 0.0]).is_ok());
        assert!(matches!(s.try_eval([0.5, 0.0, 0.0]), Err(LabError::DomainExceeded(_))));
    }

    #[test]
    fn scaled_flow_composes() {
        let tg = AnalyticFlow { v: taylor_green(1.0), p: taylor_green_pressure(1.0) };
        let a = ScaledFlow { inner: &tg, lambda: 0.5 };
        let b = ScaledFlow { inner: &a, lambda: 3.0 };
        let c = ScaledFlow { inner: &tg, lambda: 1.5 };
        let x = [0.4, 0.9, -0.3];
        let (u, w) = (b.velocity(x, 0.2), c.velocity(x, 0.2));
        for i in 0..3 {
            assert!((u[i] - w[i]).abs() < 1e-14);
        }
        assert!((b.pressure(x, 0.2) - c.pressure(x, 0.2)).abs() < 1e-14);
    }
}
