//! Periodic grids, the discrete Fourier contract and spectral fields.
//!
//! Coefficients follow the Fourier-series convention
//! `f(x) = Σ_k f̂(k) e^{ik·x}`, so the forward transform carries the `1/N³`
//! factor. Storage is row-major with flat index `(ix·N + iy)·N + iz`; the
//! Nyquist plane of every axis is kept at zero.
use crate::error::{LabError, Result};
pub use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub box_length: f64,
    pub resolution: usize,
    pub dealias_fraction: f64,
}

impl GridSpec {
    pub fn new(box_length: f64, resolution: usize, dealias_fraction: f64) -> Result<Self> {
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(LabError::InvalidGrid(format!("box_length {box_length} must be positive")));
        }
        if resolution < 8 || !resolution.is_power_of_two() {
            return Err(LabError::InvalidGrid(format!(
                "resolution {resolution} must be a power of two >= 8"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(LabError::InvalidGrid(format!(
                "dealias_fraction {dealias_fraction} must lie in (0, 1]"
            )));
        }
        Ok(Self { box_length, resolution, dealias_fraction })
    }

    /// `[0, 2π)³` with the 2/3 rule.
    pub fn periodic_2pi(resolution: usize) -> Self {
        Self::new(2.0 * PI, resolution, 2.0 / 3.0).expect("valid grid")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.pow(3)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.box_length / self.resolution as f64
    }

    /// Fundamental wavenumber 2π/L.
    #[inline]
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    /// Signed integer mode of an FFT index.
    #[inline]
    pub fn mode(&self, idx: usize) -> i64 {
        let n = self.resolution;
        if idx < n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    #[inline]
    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.k0() * self.mode(idx) as f64
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        idx == self.resolution / 2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.resolution + j) * self.resolution + l
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.resolution;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        let h = self.dx();
        [i as f64 * h, j as f64 * h, l as f64 * h]
    }

    pub fn kvec(&self, idx: usize) -> [f64; 3] {
        let (i, j, l) = self.unravel(idx);
        [self.wavenumber(i), self.wavenumber(j), self.wavenumber(l)]
    }

    /// Largest retained |mode| under the dealias rule is strictly below this.
    pub fn dealias_cutoff(&self) -> f64 {
        self.dealias_fraction * (self.resolution / 2) as f64
    }

    #[inline]
    pub fn keep_mode(&self, idx: usize) -> bool {
        !self.is_nyquist(idx) && (self.mode(idx).abs() as f64) < self.dealias_cutoff()
    }

    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.resolution;
        let keep: Vec<bool> = (0..n).map(|i| self.keep_mode(i)).collect();
        let mut m = vec![false; self.len()];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    m[self.index(i, j, l)] = keep[i] && keep[j] && keep[l];
                }
            }
        }
        m
    }

    /// Flat index of `-k`.
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let n = self.resolution;
        let (i, j, l) = self.unravel(idx);
        self.index((n - i) % n, (n - j) % n, (n - l) % n)
    }

    /// Wrap a point into `[0, L)³`.
    pub fn wrap(&self, x: [f64; 3]) -> [f64; 3] {
        let l = self.box_length;
        x.map(|c| c.rem_euclid(l))
    }

    /// Minimum-image displacement `x - y`.
    pub fn min_image(&self, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        let l = self.box_length;
        let mut d = [0.0; 3];
        for a in 0..3 {
            let mut t = (x[a] - y[a]).rem_euclid(l);
            if t >= 0.5 * l {
                t -= l;
            }
            d[a] = t;
        }
        d
    }
}

struct Plan3 {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Arc<Plan3> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plan3>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plan3 { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) })
        })
        .clone()
}

/// Unnormalised in-place 3D transform.
pub fn fft3(data: &mut [C64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let p = plan(n);
    let fft = if inverse { &p.inv } else { &p.fwd };
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // z lines are contiguous
    fft.process_with_scratch(data, &mut scratch);
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    // y lines
    for i in 0..n {
        let plane = &mut data[i * n * n..(i + 1) * n * n];
        for j in 0..n {
            for l in 0..n {
                buf[l * n + j] = plane[j * n + l];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for j in 0..n {
            for l in 0..n {
                plane[j * n + l] = buf[l * n + j];
            }
        }
    }
    // x lines
    for j in 0..n {
        for i in 0..n {
            let base = (i * n + j) * n;
            for l in 0..n {
                buf[l * n + i] = data[base + l];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i in 0..n {
            let base = (i * n + j) * n;
            for l in 0..n {
                data[base + l] = buf[l * n + i];
            }
        }
    }
}

pub fn zero_nyquist(grid: &GridSpec, c: &mut [C64]) {
    let n = grid.n();
    let h = n / 2;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if i == h || j == h || l == h {
                    c[grid.index(i, j, l)] = C64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Fourier coefficients of one real field (Nyquist removed).
pub fn forward_real(grid: &GridSpec, a: &[f64]) -> Vec<C64> {
    let mut z: Vec<C64> = a.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft3(&mut z, grid.n(), false);
    let s = 1.0 / grid.len() as f64;
    z.iter_mut().for_each(|c| *c *= s);
    zero_nyquist(grid, &mut z);
    z
}

/// Two real fields through one complex transform.
pub fn forward_real_pair(grid: &GridSpec, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
    let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
    fft3(&mut z, grid.n(), false);
    let s = 0.5 / grid.len() as f64;
    let mut fa = vec![C64::new(0.0, 0.0); z.len()];
    let mut fb = vec![C64::new(0.0, 0.0); z.len()];
    for k in 0..z.len() {
        let zc = z[grid.neg_index(k)].conj();
        fa[k] = (z[k] + zc) * s;
        // (z - conj(z(-k))) / (2i)
        let d = z[k] - zc;
        fb[k] = C64::new(d.im, -d.re) * s;
    }
    zero_nyquist(grid, &mut fa);
    zero_nyquist(grid, &mut fb);
    (fa, fb)
}

/// Physical samples of a Hermitian coefficient array.
pub fn inverse_real(grid: &GridSpec, c: &[C64]) -> Vec<f64> {
    let mut z = c.to_vec();
    fft3(&mut z, grid.n(), true);
    z.iter().map(|v| v.re).collect()
}

/// Two Hermitian arrays back to physical space through one transform.
pub fn inverse_real_pair(grid: &GridSpec, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| x + C64::new(-y.im, y.re)).collect();
    fft3(&mut z, grid.n(), true);
    (z.iter().map(|v| v.re).collect(), z.iter().map(|v| v.im).collect())
}

/// Physical samples of three Hermitian arrays.
pub fn inverse_real3(grid: &GridSpec, c: [&[C64]; 3]) -> [Vec<f64>; 3] {
    let (a, b) = inverse_real_pair(grid, c[0], c[1]);
    [a, b, inverse_real(grid, c[2])]
}

pub fn forward_real3(grid: &GridSpec, v: [&[f64]; 3]) -> [Vec<C64>; 3] {
    let (a, b) = forward_real_pair(grid, v[0], v[1]);
    [a, b, forward_real(grid, v[2])]
}

/// Zero-pad coefficients onto an `m`-point grid of the same box.
///
/// `m` must be even and at least `N`; the returned grid is only used for
/// transforms (it bypasses the power-of-two check).
pub fn pad_coeffs(grid: &GridSpec, c: &[C64], m: usize) -> (GridSpec, Vec<C64>) {
    assert!(m >= grid.n() && m % 2 == 0);
    let big = GridSpec { box_length: grid.box_length, resolution: m, dealias_fraction: 1.0 };
    let n = grid.n();
    let mut out = vec![C64::new(0.0, 0.0); m * m * m];
    let map = |i: usize| -> usize {
        let md = grid.mode(i);
        if md >= 0 {
            md as usize
        } else {
            (m as i64 + md) as usize
        }
    };
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let v = c[grid.index(i, j, l)];
                if v.norm_sqr() != 0.0 {
                    out[big.index(map(i), map(j), map(l))] = v;
                }
            }
        }
    }
    (big, out)
}

/// Transform of real samples on an arbitrary even-sized grid (no Nyquist removal).
pub fn forward_real_any(grid: &GridSpec, a: &[f64]) -> Vec<C64> {
    let mut z: Vec<C64> = a.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft3(&mut z, grid.n(), false);
    let s = 1.0 / grid.len() as f64;
    z.iter_mut().for_each(|c| *c *= s);
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    MeanZero,
    BallAnchored { center: [f64; 3], radius: f64 },
    /// Samples taken as given, no normalisation applied.
    Absolute,
}

/// Real vector field in spectral representation.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub comps: [Vec<C64>; 3],
    pub time: f64,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z], time: 0.0 }
    }

    pub fn from_physical(grid: GridSpec, v: &[Vec<f64>; 3]) -> Self {
        let comps = forward_real3(&grid, [&v[0], &v[1], &v[2]]);
        Self { grid, comps, time: 0.0 }
    }

    /// Sample a vector function on the grid and transform.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let idx = grid.index(i, j, l);
                    let val = f(grid.coords(i, j, l));
                    for c in 0..3 {
                        v[c][idx] = val[c];
                    }
                }
            }
        }
        Self::from_physical(grid, &v)
    }

    /// Spectral truncation to a coarser power-of-two grid (modes `|k| < m/2`).
    pub fn truncated(&self, m: usize) -> Result<Self> {
        let small = GridSpec::new(self.grid.box_length, m, self.grid.dealias_fraction)?;
        if m > self.grid.n() {
            return Err(LabError::InvalidGrid(format!("cannot truncate {} to {m}", self.grid.n())));
        }
        let mut out = Self::zeros(small);
        out.time = self.time;
        for idx in 0..small.len() {
            let (i, j, l) = small.unravel(idx);
            if small.is_nyquist(i) || small.is_nyquist(j) || small.is_nyquist(l) {
                continue;
            }
            let wrap = |a: usize| -> usize {
                let md = small.mode(a);
                if md >= 0 {
                    md as usize
                } else {
                    (self.grid.n() as i64 + md) as usize
                }
            };
            let src = self.grid.index(wrap(i), wrap(j), wrap(l));
            for c in 0..3 {
                out.comps[c][idx] = self.comps[c][src];
            }
        }
        Ok(out)
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        inverse_real3(&self.grid, [&self.comps[0], &self.comps[1], &self.comps[2]])
    }

    /// Multiply each coefficient by `I − kkᵀ/|k|²`; the mean mode passes through.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        for idx in 0..self.grid.len() {
            let k = self.grid.kvec(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let kv = (self.comps[0][idx] * k[0] + self.comps[1][idx] * k[1] + self.comps[2][idx] * k[2]) / k2;
            for c in 0..3 {
                out.comps[c][idx] = self.comps[c][idx] - kv * k[c];
            }
        }
        out
    }

    /// `max_k |k·v̂(k)|` over `max_k |v̂(k)|` (0 for the zero field).
    pub fn divergence_residual(&self) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.kvec(idx);
            let d = self.comps[0][idx] * k[0] + self.comps[1][idx] * k[1] + self.comps[2][idx] * k[2];
            num = num.max(d.norm());
            for c in 0..3 {
                den = den.max(self.comps[c][idx].norm());
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn mean(&self) -> [f64; 3] {
        [self.comps[0][0].re, self.comps[1][0].re, self.comps[2][0].re]
    }

    /// Plancherel inner product `∫ v·w` over the box.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for c in 0..3 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                s += (a * b.conj()).re;
            }
        }
        s * self.grid.volume()
    }

    /// `½∫|v|²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.inner(self)
    }

    /// `∫|∇v|²`.
    pub fn dissipation(&self) -> f64 {
        let mut s = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.kvec(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            s += k2 * (0..3).map(|c| self.comps[c][idx].norm_sqr()).sum::<f64>();
        }
        s * self.grid.volume()
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|z| *z *= a));
        out
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for c in 0..3 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += y * a;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest relative coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..3 {
            for (x, y) in self.comps[c].iter().zip(&other.comps[c]) {
                m = m.max((x - y).norm());
            }
        }
        m
    }

    pub fn curl(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        out.time = self.time;
        let i = C64::new(0.0, 1.0);
        for idx in 0..self.grid.len() {
            let k = self.grid.kvec(idx);
            let v = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
            out.comps[0][idx] = i * (v[2] * k[1] - v[1] * k[2]);
            out.comps[1][idx] = i * (v[0] * k[2] - v[2] * k[0]);
            out.comps[2][idx] = i * (v[1] * k[0] - v[0] * k[1]);
        }
        out
    }

    /// Coefficients of `∂_a v_c` for all a, c (index `[c][a]`).
    pub fn gradient_coeffs(&self) -> [[Vec<C64>; 3]; 3] {
        let i = C64::new(0.0, 1.0);
        std::array::from_fn(|c| {
            std::array::from_fn(|a| {
                (0..self.grid.len())
                    .map(|idx| i * self.grid.kvec(idx)[a] * self.comps[c][idx])
                    .collect()
            })
        })
    }

    /// Physical samples of the spectral divergence.
    pub fn divergence_physical(&self) -> Vec<f64> {
        let i = C64::new(0.0, 1.0);
        let d: Vec<C64> = (0..self.grid.len())
            .map(|idx| {
                let k = self.grid.kvec(idx);
                i * (self.comps[0][idx] * k[0] + self.comps[1][idx] * k[1] + self.comps[2][idx] * k[2])
            })
            .collect();
        inverse_real(&self.grid, &d)
    }

    /// Zero all modes outside the dealias box.
    pub fn dealias(&mut self) {
        let mask = self.grid.dealias_mask();
        for c in 0..3 {
            for (z, &m) in self.comps[c].iter_mut().zip(&mask) {
                if !m {
                    *z = C64::new(0.0, 0.0);
                }
            }
        }
    }

    /// `max_k |v̂(k) − conj v̂(−k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..3 {
            for idx in 0..self.grid.len() {
                let d = self.comps[c][idx] - self.comps[c][self.grid.neg_index(idx)].conj();
                m = m.max(d.norm());
            }
        }
        m
    }

    pub fn max_abs_physical(&self) -> f64 {
        let v = self.to_physical();
        (0..self.grid.len())
            .map(|i| (v[0][i] * v[0][i] + v[1][i] * v[1][i] + v[2][i] * v[2][i]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn mode_sum(&self) -> ModeSum {
        ModeSum::new(&self.grid, &[&self.comps[0], &self.comps[1], &self.comps[2]])
    }
}

/// Real scalar field in spectral representation.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub coeffs: Vec<C64>,
    pub gauge: Gauge,
    pub time: f64,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: vec![C64::new(0.0, 0.0); grid.len()], gauge: Gauge::MeanZero, time: 0.0 }
    }

    pub fn from_physical(grid: GridSpec, a: &[f64]) -> Self {
        Self { grid, coeffs: forward_real(&grid, a), gauge: Gauge::MeanZero, time: 0.0 }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let n = grid.n();
        let mut a = vec![0.0; grid.len()];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    a[grid.index(i, j, l)] = f(grid.coords(i, j, l));
                }
            }
        }
        let mut s = Self::from_physical(grid, &a);
        if s.coeffs[0].norm() != 0.0 {
            s.gauge = Gauge::Absolute;
        }
        s
    }

    pub fn to_physical(&self) -> Vec<f64> {
        inverse_real(&self.grid, &self.coeffs)
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn gradient(&self) -> SpectralField {
        let i = C64::new(0.0, 1.0);
        let mut out = SpectralField::zeros(self.grid);
        out.time = self.time;
        for idx in 0..self.grid.len() {
            let k = self.grid.kvec(idx);
            for c in 0..3 {
                out.comps[c][idx] = i * k[c] * self.coeffs[idx];
            }
        }
        out
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn mode_sum(&self) -> ModeSum {
        ModeSum::new(&self.grid, &[&self.coeffs])
    }
}

/// Exact pointwise evaluation of a trigonometric polynomial.
///
/// Only the half space of modes is stored; conjugate partners are folded
/// into a factor two.
#[derive(Clone, Debug)]
pub struct ModeSum {
    k0: f64,
    half: i64,
    ncomp: usize,
    modes: Vec<[i64; 3]>,
    coeffs: Vec<C64>,
}

impl ModeSum {
    pub fn new(grid: &GridSpec, comps: &[&[C64]]) -> Self {
        let ncomp = comps.len();
        let mut modes = Vec::new();
        let mut coeffs = Vec::new();
        for idx in 0..grid.len() {
            if comps.iter().all(|c| c[idx].norm_sqr() == 0.0) {
                continue;
            }
            let (i, j, l) = grid.unravel(idx);
            let m = [grid.mode(i), grid.mode(j), grid.mode(l)];
            let upper = m[2] > 0 || (m[2] == 0 && (m[1] > 0 || (m[1] == 0 && m[0] >= 0)));
            if !upper {
                continue;
            }
            let w = if m == [0, 0, 0] { 1.0 } else { 2.0 };
            modes.push(m);
            for c in comps {
                coeffs.push(c[idx] * w);
            }
        }
        Self { k0: grid.k0(), half: (grid.n() / 2) as i64, ncomp, modes, coeffs }
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nmodes(&self) -> usize {
        self.modes.len()
    }

    fn phases(&self, x: [f64; 3]) -> [Vec<C64>; 3] {
        let h = self.half;
        std::array::from_fn(|a| {
            (-h..=h)
                .map(|m| {
                    let t = self.k0 * m as f64 * x[a];
                    C64::new(t.cos(), t.sin())
                })
                .collect()
        })
    }

    /// Values of every component at `x`.
    pub fn eval(&self, x: [f64; 3], out: &mut [f64]) {
        let ph = self.phases(x);
        let h = self.half;
        out[..self.ncomp].iter_mut().for_each(|o| *o = 0.0);
        for (q, m) in self.modes.iter().enumerate() {
            let e = ph[0][(m[0] + h) as usize] * ph[1][(m[1] + h) as usize] * ph[2][(m[2] + h) as usize];
            for c in 0..self.ncomp {
                out[c] += (self.coeffs[q * self.ncomp + c] * e).re;
            }
        }
    }

    /// Values and gradients: `grad[c][a] = ∂_a f_c`.
    pub fn eval_with_gradient(&self, x: [f64; 3], val: &mut [f64], grad: &mut [[f64; 3]]) {
        let ph = self.phases(x);
        let h = self.half;
        val[..self.ncomp].iter_mut().for_each(|o| *o = 0.0);
        grad[..self.ncomp].iter_mut().for_each(|g| *g = [0.0; 3]);
        for (q, m) in self.modes.iter().enumerate() {
            let e = ph[0][(m[0] + h) as usize] * ph[1][(m[1] + h) as usize] * ph[2][(m[2] + h) as usize];
            for c in 0..self.ncomp {
                let z = self.coeffs[q * self.ncomp + c] * e;
                val[c] += z.re;
                // d/dx e^{ikx} = ik e^{ikx}; Re(i k z) = -k Im z
                for a in 0..3 {
                    grad[c][a] -= self.k0 * m[a] as f64 * z.im;
                }
            }
        }
    }
}

/// Periodic tensor-product Lagrange interpolation of grid samples.
#[derive(Clone, Debug)]
pub struct LagrangeInterp {
    pub grid: GridSpec,
    pub order: usize,
    pub samples: Vec<Vec<f64>>,
}

impl LagrangeInterp {
    pub fn new(grid: GridSpec, order: usize, samples: Vec<Vec<f64>>) -> Self {
        assert!(order >= 2 && order % 2 == 0 && order <= grid.n());
        Self { grid, order, samples }
    }

    fn stencil(&self, x: f64) -> (i64, Vec<f64>) {
        let h = self.grid.dx();
        let s = x / h;
        let base = s.floor() as i64 - (self.order as i64 / 2 - 1);
        let w = (0..self.order)
            .map(|a| {
                let xa = (base + a as i64) as f64;
                let mut w = 1.0;
                for b in 0..self.order {
                    if b != a {
                        let xb = (base + b as i64) as f64;
                        w *= (s - xb) / (xa - xb);
                    }
                }
                w
            })
            .collect();
        (base, w)
    }

    pub fn eval(&self, x: [f64; 3], out: &mut [f64]) {
        let n = self.grid.n() as i64;
        let (b0, w0) = self.stencil(x[0]);
        let (b1, w1) = self.stencil(x[1]);
        let (b2, w2) = self.stencil(x[2]);
        out[..self.samples.len()].iter_mut().for_each(|o| *o = 0.0);
        for a in 0..self.order {
            let i = (b0 + a as i64).rem_euclid(n) as usize;
            for b in 0..self.order {
                let j = (b1 + b as i64).rem_euclid(n) as usize;
                let wab = w0[a] * w1[b];
                for c in 0..self.order {
                    let l = (b2 + c as i64).rem_euclid(n) as usize;
                    let idx = self.grid.index(i, j, l);
                    let w = wab * w2[c];
                    for (o, s) in out.iter_mut().zip(&self.samples) {
                        *o += w * s[idx];
                    }
                }
            }
        }
    }
}
