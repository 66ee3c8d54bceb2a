//! Balls, shells, parabolic cylinders and the quadrature rules over them.
use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            z = 0.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    (x.iter().map(|t| m + h * t).collect(), w.iter().map(|v| v * h).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_radial: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_radial: 16, n_polar: 16, n_azimuth: 32 }
    }
}

impl QuadratureSpec {
    pub fn new(n_radial: usize, n_polar: usize, n_azimuth: usize) -> Self {
        Self { n_radial, n_polar, n_azimuth }
    }

    /// Companion rule used for the error estimate.
    pub fn coarser(&self) -> Self {
        Self {
            n_radial: (self.n_radial * 3 / 4).max(2),
            n_polar: (self.n_polar * 3 / 4).max(2),
            n_azimuth: (self.n_azimuth * 3 / 4).max(3),
        }
    }

    pub fn finer(&self) -> Self {
        Self { n_radial: self.n_radial * 2, n_polar: self.n_polar * 2, n_azimuth: self.n_azimuth * 2 }
    }
}

/// Nodes and weights of a spatial rule.
#[derive(Clone, Debug, Default)]
pub struct PointRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl PointRule {
    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Product rule on the spherical shell `a ≤ |x − c| ≤ b` (a ball when a = 0).
pub fn shell_rule(center: [f64; 3], a: f64, b: f64, spec: &QuadratureSpec) -> PointRule {
    let (rn, rw) = gauss_interval(spec.n_radial, a, b);
    let (mu, mw) = gauss_legendre(spec.n_polar);
    let nphi = spec.n_azimuth;
    let dphi = 2.0 * PI / nphi as f64;
    let mut rule = PointRule::default();
    rule.nodes.reserve(rn.len() * mu.len() * nphi);
    for (r, wr) in rn.iter().zip(&rw) {
        for (m, wm) in mu.iter().zip(&mw) {
            let s = (1.0 - m * m).max(0.0).sqrt();
            for q in 0..nphi {
                let phi = (q as f64 + 0.5) * dphi;
                rule.nodes.push([
                    center[0] + r * s * phi.cos(),
                    center[1] + r * s * phi.sin(),
                    center[2] + r * m,
                ]);
                rule.weights.push(wr * r * r * wm * dphi);
            }
        }
    }
    rule
}

pub fn ball_rule(center: [f64; 3], radius: f64, spec: &QuadratureSpec) -> PointRule {
    shell_rule(center, 0.0, radius, spec)
}

/// Ball rule with the torus fit check.
pub fn ball_rule_checked(
    grid: Option<&GridSpec>,
    center: [f64; 3],
    radius: f64,
    spec: &QuadratureSpec,
) -> Result<PointRule> {
    if let Some(g) = grid {
        if 2.0 * radius > g.box_length {
            return Err(LabError::BallTooLarge { radius, box_length: g.box_length });
        }
    }
    Ok(ball_rule(center, radius, spec))
}

pub fn ball_volume(r: f64) -> f64 {
    4.0 / 3.0 * PI * r.powi(3)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub center_x: [f64; 3],
    pub center_t: f64,
    pub radius: f64,
}

impl ParabolicCylinder {
    pub fn new(center_x: [f64; 3], center_t: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidArgument(format!("cylinder radius {radius} must be positive")));
        }
        Ok(Self { center_x, center_t, radius })
    }

    pub fn t_start(&self) -> f64 {
        self.center_t - self.radius * self.radius
    }

    /// `|Q_r| = (4π/3) r⁵`.
    pub fn volume(&self) -> f64 {
        ball_volume(self.radius) * self.radius * self.radius
    }

    pub fn fits(&self, grid: &GridSpec) -> bool {
        2.0 * self.radius <= grid.box_length
    }

    /// NS-scaled cylinder `(λx₀, λ²t₀, λr)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            center_x: self.center_x.map(|c| c * lambda),
            center_t: self.center_t * lambda * lambda,
            radius: self.radius * lambda,
        }
    }
}

/// Dyadic shells `A_k = {2^{k−1} ≤ |x| < 2^k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDecomposition {
    pub k_min: i32,
    pub k_max: i32,
}

impl AnnulusDecomposition {
    pub fn new(k_min: i32, k_max: i32) -> Result<Self> {
        if k_min > k_max {
            return Err(LabError::InvalidArgument(format!("k_min {k_min} > k_max {k_max}")));
        }
        Ok(Self { k_min, k_max })
    }

    /// Default range for a grid: innermost shell at least two cells thick,
    /// outermost inside the half box.
    pub fn for_grid(grid: &GridSpec) -> Result<Self> {
        let h = grid.dx();
        let mut k_min = -30;
        while 2f64.powi(k_min - 1) < 2.0 * h {
            k_min += 1;
        }
        let mut k_max = k_min;
        while 2f64.powi(k_max + 1) <= 0.5 * grid.box_length {
            k_max += 1;
        }
        if 2f64.powi(k_max) > 0.5 * grid.box_length {
            return Err(LabError::ShellUnresolved { k: k_min });
        }
        Self::new(k_min, k_max)
    }

    pub fn shell(k: i32) -> (f64, f64) {
        (2f64.powi(k - 1), 2f64.powi(k))
    }

    pub fn shells(&self) -> Vec<(i32, f64, f64)> {
        (self.k_min..=self.k_max).map(|k| {
            let (a, b) = Self::shell(k);
            (k, a, b)
        }).collect()
    }

    pub fn contains(&self, x: [f64; 3]) -> Option<i32> {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return None;
        }
        let k = r.log2().floor() as i32 + 1;
        (k >= self.k_min && k <= self.k_max).then_some(k)
    }
}

#[inline]
pub fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
