//! Divergence-free localization: a Bogovskii-type correction on a local
//! staggered grid and the Newtonian-potential correction on the torus.
use crate::error::{LabError, Result};
use crate::fields::presets::smooth_step;
use crate::fields::VectorFn;
use crate::geometry::{ball_rule, dot3, norm3, QuadratureSpec};
use crate::grid::{fft3, inverse_real, zero_nyquist, GridSpec, SpectralField, C64};
use serde::{Deserialize, Serialize};

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let g = smooth_step(s);
    g * (1.0 - g) * (1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s)))
}

/// Radial cutoff: `χ = 1` on `B_r`, `χ = 0` outside `B_{(r+R)/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub r: f64,
    pub big_r: f64,
}

impl CutoffSpec {
    pub fn new(r: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0 && r < big_r) {
            return Err(LabError::InvalidArgument(format!("cutoff needs 0 < r < R, got ({r}, {big_r})")));
        }
        Ok(Self { r, big_r })
    }

    /// Outer edge of the transition, `(r + R)/2`.
    pub fn mid(&self) -> f64 {
        0.5 * (self.r + self.big_r)
    }

    pub fn chi(&self, d: [f64; 3]) -> f64 {
        1.0 - smooth_step((norm3(d) - self.r) / (self.mid() - self.r))
    }

    pub fn grad_chi(&self, d: [f64; 3]) -> [f64; 3] {
        let rho = norm3(d);
        let w = self.mid() - self.r;
        let s = (rho - self.r) / w;
        if rho == 0.0 || s <= 0.0 || s >= 1.0 {
            return [0.0; 3];
        }
        let g = -smooth_step_derivative(s) / w / rho;
        d.map(|c| g * c)
    }

    /// `max |∇χ|`, sampled along the transition.
    pub fn gradient_bound(&self) -> f64 {
        let w = self.mid() - self.r;
        (1..2000).map(|i| smooth_step_derivative(i as f64 / 2000.0)).fold(0.0, f64::max) / w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogovskiiOptions {
    /// Cell size; default `R/32`.
    pub h: Option<f64>,
    pub cg_tol: f64,
    pub max_iter: usize,
    /// Relative size of `Σ ∇χ·v` (cell sum) tolerated before rejecting `v`.
    pub compat_tol: f64,
    pub quad: QuadratureSpec,
}

impl Default for BogovskiiOptions {
    fn default() -> Self {
        Self { h: None, cg_tol: 1e-14, max_iter: 20_000, compat_tol: 1e-6, quad: QuadratureSpec::new(24, 16, 32) }
    }
}

/// Corrected field on the cells of a local staggered grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedField {
    pub center: [f64; 3],
    pub cutoff: CutoffSpec,
    pub h: f64,
    pub n: usize,
    /// Corner of the local cube.
    pub origin: [f64; 3],
    /// `a = χv − b` at cell centres.
    pub cells: Vec<[f64; 3]>,
    /// Face values of `b`, normal component, one array per direction.
    pub faces: [Vec<f64>; 3],
}

impl LocalizedField {
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
            self.origin[2] + (k as f64 + 0.5) * self.h,
        ]
    }

    /// Value at the cell containing `x` (zero outside the cube).
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let s = ((x[a] - self.origin[a]) / self.h).floor();
            if s < 0.0 || s >= self.n as f64 {
                return [0.0; 3];
            }
            ijk[a] = s as usize;
        }
        self.cells[(ijk[0] * self.n + ijk[1]) * self.n + ijk[2]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogovskiiReport {
    pub field: LocalizedField,
    pub p: f64,
    /// `max |∇χ·v − div_h b| / max |∇χ·v|` over cells.
    pub div_residual: f64,
    /// `max_{B_r} |a − v| / ‖v‖_∞`.
    pub core_defect: f64,
    /// `max |a|` outside `B_{(r+R)/2 + h}`, relative to `‖v‖_∞`.
    pub support_leak: f64,
    pub norm_a: f64,
    /// `‖v‖_{L^p(B_R)}`.
    pub norm_v: f64,
    /// `‖a‖_p / ‖v‖_{L^p(B_R)}`.
    pub ratio: f64,
    pub compatibility_defect: f64,
    pub cg_iterations: usize,
    pub active_faces: usize,
}

struct Mac {
    n: usize,
    h: f64,
}

impl Mac {
    fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Face index in direction `a` with lower-corner cell coordinates.
    fn face(&self, a: usize, ijk: [usize; 3]) -> usize {
        let n = self.n;
        match a {
            0 => (ijk[0] * n + ijk[1]) * n + ijk[2],
            1 => (ijk[0] * (n + 1) + ijk[1]) * n + ijk[2],
            _ => (ijk[0] * n + ijk[1]) * (n + 1) + ijk[2],
        }
    }

    fn nfaces(&self) -> usize {
        self.n * self.n * (self.n + 1)
    }

    /// `div_h b` at cells.
    fn div(&self, b: &[Vec<f64>; 3], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for a in 0..3 {
                        let mut hi = [i, j, k];
                        hi[a] += 1;
                        s += b[a][self.face(a, hi)] - b[a][self.face(a, [i, j, k])];
                    }
                    out[self.cell(i, j, k)] = s / self.h;
                }
            }
        }
    }

    /// Masked adjoint: `M Dᵀ λ`.
    fn grad(&self, lam: &[f64], mask: &[Vec<bool>; 3], out: &mut [Vec<f64>; 3]) {
        let n = self.n;
        for a in 0..3 {
            for i in 0..n + usize::from(a == 0) {
                for j in 0..n + usize::from(a == 1) {
                    for k in 0..n + usize::from(a == 2) {
                        let ijk = [i, j, k];
                        let f = self.face(a, ijk);
                        if !mask[a][f] {
                            out[a][f] = 0.0;
                            continue;
                        }
                        let lo = if ijk[a] > 0 {
                            let mut c = ijk;
                            c[a] -= 1;
                            lam[self.cell(c[0], c[1], c[2])]
                        } else {
                            0.0
                        };
                        let hi = if ijk[a] < n { lam[self.cell(i.min(n - 1), j.min(n - 1), k.min(n - 1))] } else { 0.0 };
                        out[a][f] = (lo - hi) / self.h;
                    }
                }
            }
        }
    }
}

/// `a = χv − b` with `div_h b = ∇χ·v` on faces inside the transition
/// annulus; `b` is the minimum-norm solution.
pub fn bogovskii_correct(v: &dyn VectorFn, center: [f64; 3], cutoff: &CutoffSpec, p: f64, opts: &BogovskiiOptions) -> Result<BogovskiiReport> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidArgument(format!("p = {p} must be ≥ 1")));
    }
    let h = opts.h.unwrap_or(cutoff.big_r / 32.0);
    let m = cutoff.mid();
    let half = m + 2.0 * h;
    let n = (2.0 * half / h).ceil() as usize;
    let origin = center.map(|c| c - 0.5 * n as f64 * h);
    let mac = Mac { n, h };
    let ncell = n * n * n;
    let cell_x = |idx: usize| -> [f64; 3] {
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        [origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h, origin[2] + (k as f64 + 0.5) * h]
    };
    let vc: Vec<[f64; 3]> = (0..ncell).map(|i| v.eval(cell_x(i))).collect();
    let f: Vec<f64> = (0..ncell)
        .map(|i| {
            let d = crate::geometry::sub3(cell_x(i), center);
            dot3(cutoff.grad_chi(d), vc[i])
        })
        .collect();
    let fmax = f.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let fsum: f64 = f.iter().sum();
    let fabs: f64 = f.iter().map(|x| x.abs()).sum();
    let compatibility_defect = if fabs > 0.0 { fsum.abs() / fabs } else { 0.0 };
    if compatibility_defect > opts.compat_tol {
        return Err(LabError::CompatibilityViolation(compatibility_defect));
    }
    // active faces
    let lo_r = cutoff.r + 0.5 * h;
    let hi_r = m + 0.5 * h;
    let mut mask: [Vec<bool>; 3] = std::array::from_fn(|_| vec![false; mac.nfaces()]);
    let mut active_faces = 0;
    for a in 0..3 {
        for i in 0..n + usize::from(a == 0) {
            for j in 0..n + usize::from(a == 1) {
                for k in 0..n + usize::from(a == 2) {
                    let ijk = [i, j, k];
                    let mut x = [0.0; 3];
                    for c in 0..3 {
                        let off = if c == a { 0.0 } else { 0.5 };
                        x[c] = origin[c] + (ijk[c] as f64 + off) * h - center[c];
                    }
                    let rho = norm3(x);
                    if rho >= lo_r && rho <= hi_r {
                        mask[a][mac.face(a, ijk)] = true;
                        active_faces += 1;
                    }
                }
            }
        }
    }
    // CG on D M Dᵀ λ = f
    let mut lam = vec![0.0; ncell];
    let mut r = f.clone();
    let mut pdir = r.clone();
    let mut bf: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; mac.nfaces()]);
    let mut ap = vec![0.0; ncell];
    let mut rr: f64 = r.iter().map(|x| x * x).sum();
    let stop = (opts.cg_tol * fmax).powi(2) * ncell as f64;
    let mut iters = 0;
    while rr > stop && iters < opts.max_iter && fmax > 0.0 {
        mac.grad(&pdir, &mask, &mut bf);
        mac.div(&bf, &mut ap);
        let pap: f64 = pdir.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..ncell {
            lam[i] += alpha * pdir[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|x| x * x).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..ncell {
            pdir[i] = r[i] + beta * pdir[i];
        }
        iters += 1;
    }
    let mut b: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; mac.nfaces()]);
    mac.grad(&lam, &mask, &mut b);
    let mut divb = vec![0.0; ncell];
    mac.div(&b, &mut divb);
    let div_residual = if fmax > 0.0 { f.iter().zip(&divb).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs())) / fmax } else { 0.0 };

    let mut cells = vec![[0.0; 3]; ncell];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = mac.cell(i, j, k);
                let d = crate::geometry::sub3(cell_x(idx), center);
                let chi = cutoff.chi(d);
                let mut avg = [0.0; 3];
                for a in 0..3 {
                    let mut hi = [i, j, k];
                    hi[a] += 1;
                    avg[a] = 0.5 * (b[a][mac.face(a, [i, j, k])] + b[a][mac.face(a, hi)]);
                }
                cells[idx] = [chi * vc[idx][0] - avg[0], chi * vc[idx][1] - avg[1], chi * vc[idx][2] - avg[2]];
            }
        }
    }
    let vinf = vc.iter().fold(0.0_f64, |a, x| a.max(norm3(*x)));
    let scale = if vinf > 0.0 { vinf } else { 1.0 };
    let mut core: f64 = 0.0;
    let mut leak: f64 = 0.0;
    let mut acc = 0.0;
    let mut amax: f64 = 0.0;
    for idx in 0..ncell {
        let rho = norm3(crate::geometry::sub3(cell_x(idx), center));
        let a = cells[idx];
        if rho < cutoff.r {
            core = core.max(norm3(crate::geometry::sub3(a, vc[idx])));
        }
        if rho > m + h {
            leak = leak.max(norm3(a));
        }
        let na = norm3(a);
        amax = amax.max(na);
        acc += na.powf(if p.is_finite() { p } else { 1.0 }) * h * h * h;
    }
    let (norm_a, norm_v) = if p.is_finite() {
        let rule = ball_rule(center, cutoff.big_r, &opts.quad);
        let nv = rule.integrate(|x| norm3(v.eval(x)).powf(p)).powf(1.0 / p);
        (acc.powf(1.0 / p), nv)
    } else {
        let rule = ball_rule(center, cutoff.big_r, &opts.quad);
        (amax, rule.nodes.iter().fold(0.0_f64, |a, x| a.max(norm3(v.eval(*x)))))
    };
    let ratio = if norm_v > 0.0 { norm_a / norm_v } else { 0.0 };
    Ok(BogovskiiReport {
        field: LocalizedField { center, cutoff: *cutoff, h, n, origin, cells, faces: b },
        p,
        div_residual,
        core_defect: core / scale,
        support_leak: leak / scale,
        norm_a,
        norm_v,
        ratio,
        compatibility_defect,
        cg_iterations: iters,
        active_faces,
    })
}

#[derive(Clone, Debug)]
pub struct NewtonianCorrection {
    pub grad_eta: SpectralField,
    /// Box mean of `u·∇χ` removed before the solve.
    pub mean_subtracted: f64,
    /// `max |χ div u + u·∇χ − Δη|` at grid points.
    pub div_residual: f64,
    /// Spectral divergence of `FFT(χu) − ∇η` (includes the aliasing of `χu`).
    pub div_residual_spectral: f64,
    /// `max |∇η|` over grid points in `B_r`.
    pub core_correction: f64,
}

/// `∇η` with `Δη = u·∇χ − mean`, solved spectrally.
pub fn newtonian_correction(u: &SpectralField, center: [f64; 3], cutoff: &CutoffSpec) -> Result<NewtonianCorrection> {
    let g: GridSpec = u.grid;
    if 2.0 * cutoff.mid() > g.box_length {
        return Err(LabError::BallTooLarge { radius: cutoff.mid(), box_length: g.box_length });
    }
    let up = u.to_physical();
    let divu = u.divergence_physical();
    let len = g.len();
    let mut s = vec![0.0; len];
    let mut chi = vec![0.0; len];
    let mut in_core = vec![false; len];
    for idx in 0..len {
        let (i, j, k) = g.unravel(idx);
        let d = g.min_image(g.coords(i, j, k), center);
        let gc = cutoff.grad_chi(d);
        s[idx] = gc[0] * up[0][idx] + gc[1] * up[1][idx] + gc[2] * up[2][idx];
        chi[idx] = cutoff.chi(d);
        in_core[idx] = norm3(d) < cutoff.r;
    }
    let mean = s.iter().sum::<f64>() / len as f64;
    s.iter_mut().for_each(|x| *x -= mean);
    // all modes, Nyquist included, so Δη = s − mean holds at grid points
    let mut sh: Vec<C64> = s.iter().map(|x| C64::new(*x, 0.0)).collect();
    fft3(&mut sh, g.n(), false);
    let norm = 1.0 / len as f64;
    let mut eta = vec![C64::new(0.0, 0.0); len];
    for idx in 1..len {
        let k = g.kvec(idx);
        let k2 = dot3(k, k);
        if k2 > 0.0 {
            eta[idx] = -sh[idx] * norm / k2;
        }
    }
    let lap: Vec<C64> = (0..len).map(|idx| {
        let k = g.kvec(idx);
        -eta[idx] * dot3(k, k)
    }).collect();
    zero_nyquist(&g, &mut eta);
    let mut grad = SpectralField::zeros(g);
    for idx in 0..len {
        let k = g.kvec(idx);
        for a in 0..3 {
            grad.comps[a][idx] = C64::new(0.0, k[a]) * eta[idx];
        }
    }
    let lap_x = inverse_real(&g, &lap);
    let mut div_residual: f64 = 0.0;
    for idx in 0..len {
        let d = chi[idx] * divu[idx] + s[idx] + mean - lap_x[idx];
        div_residual = div_residual.max(d.abs());
    }
    let chiu: [Vec<f64>; 3] = std::array::from_fn(|a| (0..len).map(|i| chi[i] * up[a][i]).collect());
    let w = SpectralField::from_physical(g, &chiu).sub(&grad);
    let div_residual_spectral = w.divergence_physical().iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let gp = grad.to_physical();
    let core_correction = (0..len).filter(|i| in_core[*i]).fold(0.0_f64, |a, i| a.max(norm3([gp[0][i], gp[1][i], gp[2][i]])));
    Ok(NewtonianCorrection { grad_eta: grad, mean_subtracted: mean, div_residual, div_residual_spectral, core_correction })
}
