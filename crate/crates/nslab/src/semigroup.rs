//! Heat semigroup, Duhamel potentials, the two Picard engines and the
//! smoothing / Oseen kernel probes.
use crate::error::{LabError, Result};
use crate::geometry::{dot3, norm3};
use crate::grid::{forward_real_pair, forward_real, GridSpec, ScalarField, SpectralField, C64};
use crate::norms::uloc_norm_grid_comps;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Rank-two tensor coefficients, `t[j][i]` holding `F_{ji}`; the divergence
/// is `(∇·F)_i = ∂_j F_{ji}`.
pub type Tensor = [[Vec<C64>; 3]; 3];

pub fn tensor_zeros(grid: &GridSpec) -> Tensor {
    std::array::from_fn(|_| std::array::from_fn(|_| vec![C64::new(0.0, 0.0); grid.len()]))
}

pub fn tensor_from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [[f64; 3]; 3]) -> Tensor {
    let n = grid.n();
    let mut s: [[Vec<f64>; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; grid.len()]));
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let idx = grid.index(i, j, l);
                let v = f(grid.coords(i, j, l));
                for a in 0..3 {
                    for b in 0..3 {
                        s[a][b][idx] = v[a][b];
                    }
                }
            }
        }
    }
    std::array::from_fn(|a| std::array::from_fn(|b| forward_real(&grid, &s[a][b])))
}

/// `(∇·F)_i = ∂_j F_{ji}`.
pub fn tensor_divergence(grid: &GridSpec, f: &Tensor) -> SpectralField {
    let mut out = SpectralField::zeros(*grid);
    let i_unit = C64::new(0.0, 1.0);
    for idx in 0..grid.len() {
        let k = grid.kvec(idx);
        for i in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                acc += i_unit * kj * f[j][i][idx];
            }
            out.comps[i][idx] = acc;
        }
    }
    out
}

/// `∇·(u⊗w)`, i.e. `∂_j(u_j w_i)`, with dealiased products.
pub fn div_outer(u: &SpectralField, w: &SpectralField) -> SpectralField {
    let grid = u.grid;
    let pu = u.to_physical();
    let pw = w.to_physical();
    let mask = grid.dealias_mask();
    let i_unit = C64::new(0.0, 1.0);
    let mut out = SpectralField::zeros(grid);
    out.time = u.time;
    let prod = |j: usize, i: usize| -> Vec<f64> { pu[j].iter().zip(&pw[i]).map(|(a, b)| a * b).collect() };
    for i in 0..3 {
        let (c0, c1) = forward_real_pair(&grid, &prod(0, i), &prod(1, i));
        let c2 = forward_real(&grid, &prod(2, i));
        for idx in 0..grid.len() {
            if !mask[idx] {
                continue;
            }
            let k = grid.kvec(idx);
            out.comps[i][idx] = i_unit * (k[0] * c0[idx] + k[1] * c1[idx] + k[2] * c2[idx]);
        }
    }
    out
}

pub fn heat_flow(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    let mut out = f.clone();
    if t == 0.0 {
        return Ok(out);
    }
    for idx in 0..f.grid.len() {
        let k = f.grid.kvec(idx);
        let e = (-dot3(k, k) * t).exp();
        for c in 0..3 {
            out.comps[c][idx] *= e;
        }
    }
    Ok(out)
}

pub fn heat_flow_scalar(f: &ScalarField, t: f64) -> Result<ScalarField> {
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    let mut out = f.clone();
    if t == 0.0 {
        return Ok(out);
    }
    for idx in 0..f.grid.len() {
        let k = f.grid.kvec(idx);
        out.coeffs[idx] *= (-dot3(k, k) * t).exp();
    }
    Ok(out)
}

/// `(φ₁(−z), φ₂(−z))` with `φ₁(x) = (eˣ−1)/x`, `φ₂(x) = (eˣ−1−x)/x²`.
pub fn phi_functions(z: f64) -> (f64, f64) {
    if z < 0.1 {
        // Σ (−z)ⁿ/(n+1)!, Σ (−z)ⁿ/(n+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut term = 1.0;
        for n in 0..14 {
            p1 += term / (n + 1) as f64;
            term *= -z / (n + 1) as f64;
        }
        let mut term = 0.5;
        for n in 0..14 {
            p2 += term;
            term *= -z / (n + 3) as f64;
        }
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (z - 1.0 + e) / (z * z))
    }
}

/// One exponential-trapezoid Duhamel step over `h` for forcing values `fa`,
/// `fb` at the ends (linear in between, exact for constants).
pub fn duhamel_step(u: &mut SpectralField, fa: &SpectralField, fb: &SpectralField, h: f64) {
    let g = u.grid;
    for idx in 0..g.len() {
        let k = g.kvec(idx);
        let z = dot3(k, k) * h;
        let (p1, p2) = phi_functions(z);
        let e = (-z).exp();
        for c in 0..3 {
            u.comps[c][idx] = u.comps[c][idx] * e + fa.comps[c][idx] * (h * (p1 - p2)) + fb.comps[c][idx] * (h * p2);
        }
    }
}

/// Uniform time mesh `t_n = nT/steps`.
pub fn time_mesh(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|n| t_end * n as f64 / steps as f64).collect()
}

/// Duhamel potential at every mesh time for forcing samples `g_n` (already
/// projected).
pub fn duhamel_trajectory(times: &[f64], g: &[SpectralField]) -> Vec<SpectralField> {
    let mut u = SpectralField::zeros(g[0].grid);
    let mut out = Vec::with_capacity(times.len());
    out.push(u.clone());
    for n in 0..times.len() - 1 {
        duhamel_step(&mut u, &g[n], &g[n + 1], times[n + 1] - times[n]);
        u.time = times[n + 1];
        out.push(u.clone());
    }
    out
}

#[derive(Clone, Debug)]
pub struct DuhamelResult {
    pub field: SpectralField,
    /// Richardson estimate from the half-density mesh.
    pub quad_error: f64,
}

fn duhamel_at(times: &[f64], g: &[SpectralField], t: f64) -> Result<DuhamelResult> {
    if times.len() < 4 {
        return Err(LabError::MeshTooCoarse(times.len()));
    }
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    let last = *times.last().unwrap();
    if t > last * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!("t = {t} beyond the forcing mesh end {last}")));
    }
    let run = |stride: usize| -> SpectralField {
        let mut u = SpectralField::zeros(g[0].grid);
        let mut n = 0;
        while n + stride < times.len() && times[n + stride] <= t {
            duhamel_step(&mut u, &g[n], &g[n + stride], times[n + stride] - times[n]);
            n += stride;
        }
        if times[n] < t {
            // partial last interval, forcing interpolated at t
            let m = (n + stride).min(times.len() - 1);
            let th = (t - times[n]) / (times[m] - times[n]);
            let mut gt = g[n].scaled(1.0 - th);
            gt.axpy(th, &g[m]);
            duhamel_step(&mut u, &g[n], &gt, t - times[n]);
        }
        u.time = t;
        u
    };
    let fine = run(1);
    let coarse = run(2);
    let quad_error = fine.max_diff(&coarse) / 3.0;
    Ok(DuhamelResult { field: fine, quad_error })
}

/// `Φ₀f₀(t) = ∫₀ᵗ e^{(t−s)Δ} P f₀(s) ds` for forcing sampled on `times`.
pub fn phi0(times: &[f64], f0: &[SpectralField], t: f64) -> Result<DuhamelResult> {
    let g: Vec<SpectralField> = f0.iter().map(|f| f.leray_project()).collect();
    duhamel_at(times, &g, t)
}

/// `Φ₁F(t) = ∫₀ᵗ e^{(t−s)Δ} P ∇·F(s) ds`.
pub fn phi1(grid: &GridSpec, times: &[f64], f: &[Tensor], t: f64) -> Result<DuhamelResult> {
    if f.is_empty() {
        return Err(LabError::MeshTooCoarse(0));
    }
    let g: Vec<SpectralField> = f.iter().map(|x| tensor_divergence(grid, x).leray_project()).collect();
    duhamel_at(times, &g, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DuhamelOp {
    Phi0,
    GradPhi0,
    Phi1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub op: DuhamelOp,
    pub q: f64,
    /// `r` for the Φ₀ forms, `m` for Φ₁.
    pub lower: f64,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub accepted: bool,
    pub t_power: f64,
    /// `1/q − (right-hand side)`; negative means rejected.
    pub margin: f64,
}

/// Validate an exponent triple and return the power of `T` in its estimate.
pub fn admissibility_check(tr: &ExponentTriple) -> Admissibility {
    let (q, l) = (tr.q, tr.lower);
    let (rhs, t_power) = match tr.op {
        DuhamelOp::Phi0 => (3.0 / (5.0 * l) - 2.0 / 15.0, 2.5 * (1.0 / q - 3.0 / (5.0 * l) + 2.0 / 15.0)),
        DuhamelOp::GradPhi0 => (3.0 / (5.0 * l) + 1.0 / 15.0, 2.5 * (1.0 / q - 3.0 / (5.0 * l) - 1.0 / 15.0)),
        DuhamelOp::Phi1 => (1.0 / l - 1.0 / 5.0, 2.5 * (1.0 / q - 1.0 / l + 1.0 / 5.0)),
    };
    let margin = 1.0 / q - rhs;
    let range_ok = l > 1.0 && l <= q && q.is_finite();
    Admissibility { accepted: range_ok && margin >= -1e-12, t_power: if t_power.abs() < 1e-14 { 0.0 } else { t_power }, margin }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardRow {
    pub k: usize,
    pub diff_norm: f64,
    pub ratio: f64,
    pub wall_time: f64,
    /// Component norms of the difference where the engine contracts in a max.
    pub parts: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PicardState {
    pub k: usize,
    pub rows: Vec<PicardRow>,
    pub converged: bool,
    /// Successive-difference ratio at convergence.
    pub final_ratio: f64,
}

impl PicardState {
    /// `k, diff_norm, ratio, wall_time` table.
    pub fn to_csv(&self, with_wall_time: bool) -> String {
        let mut s = String::from(if with_wall_time { "k,diff_norm,ratio,wall_time\n" } else { "k,diff_norm,ratio\n" });
        for r in &self.rows {
            if with_wall_time {
                s += &format!("{},{:.17e},{:.17e},{:.6e}\n", r.k, r.diff_norm, r.ratio, r.wall_time);
            } else {
                s += &format!("{},{:.17e},{:.17e}\n", r.k, r.diff_norm, r.ratio);
            }
        }
        s
    }
}

/// Box `L^p` norm from grid samples (`p = ∞` is the sample max).
pub fn box_lp(v: &SpectralField, p: f64) -> f64 {
    let u = v.to_physical();
    let n = v.grid.len();
    if p.is_infinite() {
        return (0..n).fold(0.0_f64, |m, i| m.max((u[0][i] * u[0][i] + u[1][i] * u[1][i] + u[2][i] * u[2][i]).sqrt()));
    }
    let dv = v.grid.volume() / n as f64;
    let s: f64 = (0..n).map(|i| (u[0][i] * u[0][i] + u[1][i] * u[1][i] + u[2][i] * u[2][i]).sqrt().powf(p)).sum();
    (s * dv).powf(1.0 / p)
}

/// `(∫₀ᵀ ∫ |v|^p)^{1/p}` by the trapezoid rule in time.
pub fn space_time_lp(times: &[f64], traj: &[SpectralField], p: f64) -> f64 {
    let vals: Vec<f64> = traj.iter().map(|v| box_lp(v, p).powf(p)).collect();
    let mut s = 0.0;
    for n in 0..times.len() - 1 {
        s += 0.5 * (times[n + 1] - times[n]) * (vals[n] + vals[n + 1]);
    }
    s.powf(1.0 / p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub steps: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Smallness gate on the driving norm (box surrogate).
    pub gate: f64,
    /// Contraction horizon on `T` (perturbed engine).
    pub horizon: f64,
    /// `q` of the `L^∞L^q` component of the contraction norm.
    pub q: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { steps: 128, max_iter: 30, tol: 1e-12, gate: 0.5, horizon: 1.0, q: 3.0 }
    }
}

#[derive(Clone, Debug)]
pub struct KatoResult {
    pub state: PicardState,
    pub times: Vec<f64>,
    pub trajectory: Vec<SpectralField>,
    pub sup_sqrt_t_linf: f64,
    pub l5_norm: f64,
    pub linf_l3: f64,
    pub data_l3: f64,
}

fn ratio_of(prev: Option<f64>, cur: f64, floor: f64) -> f64 {
    match prev {
        Some(p) if p > floor => cur / p,
        _ => 0.0,
    }
}

fn push_row(state: &mut PicardState, diff: f64, parts: Vec<f64>, floor: f64, t0: Instant) -> usize {
    let prev = state.rows.last().map(|r| r.diff_norm);
    let ratio = ratio_of(prev, diff, floor);
    state.k += 1;
    state.rows.push(PicardRow { k: state.k, diff_norm: diff, ratio, wall_time: t0.elapsed().as_secs_f64(), parts });
    let n = state.rows.len();
    if n >= 3 && state.rows[n - 3..].iter().all(|r| r.ratio > 1.0) {
        return 1;
    }
    0
}

/// Mild small-data iteration `v_{k+1} = e^{tΔ}v₀ − Φ₁(v_k⊗v_k)` on `[0, T]`.
pub fn kato_picard(v0: &SpectralField, t_end: f64, opts: &PicardOptions) -> Result<KatoResult> {
    let data_l3 = box_lp(v0, 3.0);
    if data_l3 > opts.gate {
        return Err(LabError::GateViolation(format!("box L3 norm {data_l3:e} above gate {:e} (box side {})", opts.gate, v0.grid.box_length)));
    }
    let times = time_mesh(t_end, opts.steps);
    let lin: Vec<SpectralField> = times.iter().map(|&t| heat_flow(v0, t).map(|f| f.with_time(t))).collect::<Result<_>>()?;
    let mut cur = lin.clone();
    let t0 = Instant::now();
    let mut state = PicardState { k: 1, rows: Vec::new(), converged: false, final_ratio: 0.0 };
    let scale = lin.iter().fold(0.0_f64, |m, v| m.max(box_lp(v, 3.0)));
    let floor = 1e-14 * scale.max(1e-300);
    if v0.max_coeff() == 0.0 {
        state.converged = true;
    }
    while !state.converged && state.k < opts.max_iter {
        let g: Vec<SpectralField> = cur.iter().map(|v| div_outer(v, v).leray_project()).collect();
        let duh = duhamel_trajectory(&times, &g);
        let next: Vec<SpectralField> = lin.iter().zip(&duh).map(|(l, d)| l.sub(d)).collect();
        let diff = next.iter().zip(&cur).fold(0.0_f64, |m, (a, b)| m.max(box_lp(&a.sub(b), 3.0)));
        cur = next;
        if push_row(&mut state, diff, vec![diff], floor, t0) == 1 {
            return Err(LabError::NoContraction);
        }
        if diff <= opts.tol.max(floor) {
            state.converged = true;
        }
    }
    state.final_ratio = state.rows.last().map(|r| r.ratio).unwrap_or(0.0);
    let sup_sqrt_t_linf = times.iter().zip(&cur).fold(0.0_f64, |m, (t, v)| m.max(t.sqrt() * box_lp(v, f64::INFINITY)));
    let l5_norm = space_time_lp(&times, &cur, 5.0);
    let linf_l3 = cur.iter().fold(0.0_f64, |m, v| m.max(box_lp(v, 3.0)));
    Ok(KatoResult { state, times, trajectory: cur, sup_sqrt_t_linf, l5_norm, linf_l3, data_l3 })
}

/// Time-dependent inputs of the perturbed Stokes system.
pub struct PerturbedInputs<'a> {
    pub a: Option<&'a (dyn Fn(f64) -> SpectralField + Sync)>,
    pub xi: [f64; 3],
    pub f0: Option<&'a (dyn Fn(f64) -> SpectralField + Sync)>,
    pub big_f: Option<&'a (dyn Fn(f64) -> Tensor + Sync)>,
}

#[derive(Clone, Debug)]
pub struct PerturbedResult {
    pub state: PicardState,
    pub times: Vec<f64>,
    pub trajectory: Vec<SpectralField>,
    pub a_l5: f64,
    /// `L^∞L², L²Ḣ¹, L^∞L^q` of the solution.
    pub norms: [f64; 3],
}

/// The three norms of the perturbed engine's space.
pub fn energy_space_norms(times: &[f64], traj: &[SpectralField], q: f64) -> [f64; 3] {
    let l2 = traj.iter().fold(0.0_f64, |m, v| m.max((2.0 * v.energy()).sqrt()));
    let d: Vec<f64> = traj.iter().map(|v| v.dissipation()).collect();
    let mut h1 = 0.0;
    for n in 0..times.len() - 1 {
        h1 += 0.5 * (times[n + 1] - times[n]) * (d[n] + d[n + 1]);
    }
    let lq = traj.iter().fold(0.0_f64, |m, v| m.max(box_lp(v, q)));
    [l2, h1.sqrt(), lq]
}

/// `L w = Φ₁((a+ξ)⊗w + w⊗a)` forcing samples for a trajectory `w`.
fn perturbation_forcing(grid: &GridSpec, a_s: Option<&[SpectralField]>, xi: [f64; 3], w: &[SpectralField]) -> Vec<SpectralField> {
    let i_unit = C64::new(0.0, 1.0);
    w.iter()
        .enumerate()
        .map(|(n, wn)| {
            let mut g = SpectralField::zeros(*grid);
            if xi != [0.0; 3] {
                for idx in 0..grid.len() {
                    let k = grid.kvec(idx);
                    let s = i_unit * dot3(k, xi);
                    for c in 0..3 {
                        g.comps[c][idx] = s * wn.comps[c][idx];
                    }
                }
            }
            if let Some(a) = a_s {
                g.axpy(1.0, &div_outer(&a[n], wn));
                g.axpy(1.0, &div_outer(wn, &a[n]));
            }
            g.leray_project()
        })
        .collect()
}

/// Fixed point of `w_{k+1} = w₁ − Φ₁((a+ξ)⊗w_k + w_k⊗a)` with
/// `w₁ = e^{tΔ}w₀ + Φ₁F + Φ₀f₀`.
pub fn perturbed_stokes_picard(w0: &SpectralField, inputs: &PerturbedInputs, t_end: f64, opts: &PicardOptions) -> Result<PerturbedResult> {
    let grid = w0.grid;
    if norm3(inputs.xi) > 1.0 + 1e-12 {
        return Err(LabError::GateViolation(format!("|xi| = {} exceeds 1", norm3(inputs.xi))));
    }
    if t_end > opts.horizon {
        return Err(LabError::GateViolation(format!("T = {t_end} beyond the contraction horizon {}", opts.horizon)));
    }
    let times = time_mesh(t_end, opts.steps);
    let a_s: Option<Vec<SpectralField>> = inputs.a.map(|a| times.iter().map(|&t| a(t)).collect());
    let a_l5 = a_s.as_ref().map(|a| space_time_lp(&times, a, 5.0)).unwrap_or(0.0);
    if a_l5 > opts.gate {
        return Err(LabError::GateViolation(format!("L5 norm of a {a_l5:e} above gate {:e} (box side {})", opts.gate, grid.box_length)));
    }
    let mut w1: Vec<SpectralField> = times.iter().map(|&t| heat_flow(w0, t).map(|f| f.with_time(t))).collect::<Result<_>>()?;
    if let Some(f0) = inputs.f0 {
        let g: Vec<SpectralField> = times.iter().map(|&t| f0(t).leray_project()).collect();
        for (w, d) in w1.iter_mut().zip(duhamel_trajectory(&times, &g)) {
            w.axpy(1.0, &d);
        }
    }
    if let Some(ff) = inputs.big_f {
        let g: Vec<SpectralField> = times.iter().map(|&t| tensor_divergence(&grid, &ff(t)).leray_project()).collect();
        for (w, d) in w1.iter_mut().zip(duhamel_trajectory(&times, &g)) {
            w.axpy(1.0, &d);
        }
    }
    let mut cur = w1.clone();
    let mut state = PicardState { k: 1, rows: Vec::new(), converged: false, final_ratio: 0.0 };
    let scale = energy_space_norms(&times, &w1, opts.q).iter().fold(0.0_f64, |m, x| m.max(*x));
    let floor = 1e-14 * scale.max(1e-300);
    let trivial = inputs.a.is_none() && inputs.xi == [0.0; 3];
    if trivial || scale == 0.0 {
        state.converged = true;
    }
    let t0 = Instant::now();
    while !state.converged && state.k < opts.max_iter {
        let g = perturbation_forcing(&grid, a_s.as_deref(), inputs.xi, &cur);
        let duh = duhamel_trajectory(&times, &g);
        let next: Vec<SpectralField> = w1.iter().zip(&duh).map(|(w, d)| w.sub(d)).collect();
        let dtraj: Vec<SpectralField> = next.iter().zip(&cur).map(|(a, b)| a.sub(b)).collect();
        let parts = energy_space_norms(&times, &dtraj, opts.q);
        let diff = parts.iter().fold(0.0_f64, |m, x| m.max(*x));
        cur = next;
        if push_row(&mut state, diff, parts.to_vec(), floor, t0) == 1 {
            return Err(LabError::NoContraction);
        }
        if diff <= opts.tol.max(floor) {
            state.converged = true;
        }
    }
    state.final_ratio = state.rows.last().map(|r| r.ratio).unwrap_or(0.0);
    let norms = energy_space_norms(&times, &cur, opts.q);
    Ok(PerturbedResult { state, times, trajectory: cur, a_l5, norms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorProbe {
    pub horizon: f64,
    /// `(|k|, ‖Lw‖/‖w‖)` for each test mode.
    pub per_mode: Vec<(f64, f64)>,
    pub sup: f64,
}

/// Size of the linear part `w ↦ Φ₁((a+ξ)⊗w + w⊗a)` on `[0, T]`, probed with
/// time-independent shear modes `w = ê₂ sin(k x₁)` in the `L^∞L²` norm.
pub fn perturbed_operator_probe(
    grid: &GridSpec,
    a: Option<&(dyn Fn(f64) -> SpectralField + Sync)>,
    xi: [f64; 3],
    t_end: f64,
    steps: usize,
) -> Result<OperatorProbe> {
    let times = time_mesh(t_end, steps);
    let a_s: Option<Vec<SpectralField>> = a.map(|a| times.iter().map(|&t| a(t)).collect());
    let m_max = (grid.dealias_cutoff().ceil() as i64 - 1).max(1);
    let mut per_mode = Vec::new();
    for m in 1..=m_max {
        let k = m as f64 * grid.k0();
        let w = SpectralField::from_fn(*grid, |x| [0.0, (k * x[0]).sin(), 0.0]);
        let wn = (2.0 * w.energy()).sqrt();
        if wn == 0.0 {
            continue;
        }
        let traj: Vec<SpectralField> = times.iter().map(|_| w.clone()).collect();
        let g = perturbation_forcing(grid, a_s.as_deref(), xi, &traj);
        let duh = duhamel_trajectory(&times, &g);
        let out = duh.iter().fold(0.0_f64, |mx, d| mx.max((2.0 * d.energy()).sqrt()));
        per_mode.push((k, out / wn));
    }
    let sup = per_mode.iter().fold(0.0_f64, |m, x| m.max(x.1));
    Ok(OperatorProbe { horizon: t_end, per_mode, sup })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProbe {
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    /// `(t, ratio for m = 0, ratio for m = 1)`.
    pub ladder: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
}

fn uloc_of(grid: &GridSpec, comps: &[&[C64]], p: f64, rho: f64) -> Result<f64> {
    if p.is_infinite() {
        let mut acc = vec![0.0; grid.len()];
        for c in comps {
            let s = crate::grid::inverse_real(grid, c);
            acc.iter_mut().zip(&s).for_each(|(a, x)| *a += x * x);
        }
        return Ok(acc.iter().fold(0.0_f64, |m, x| m.max(x.sqrt())));
    }
    Ok(uloc_norm_grid_comps(grid, comps, p, rho)?.value)
}

/// Measured constants of `‖∇^m e^{tΔ}f‖_{uloc,p} ≤ C t^{−m/2}(1 + t^{−(3/2)(1/q−1/p)})‖f‖_{uloc,q}`.
pub fn uloc_smoothing_probe(f: &SpectralField, p: f64, q: f64, rho: f64, ladder: &[f64]) -> Result<SmoothingProbe> {
    if q > p {
        return Err(LabError::ExponentOrder { p, q });
    }
    let grid = f.grid;
    let fq = uloc_of(&grid, &[&f.comps[0], &f.comps[1], &f.comps[2]], q, rho)?;
    let mut rows = Vec::new();
    for &t in ladder {
        if !(t > 0.0) {
            return Err(LabError::NegativeTime(t));
        }
        let h = heat_flow(f, t)?;
        let u0 = uloc_of(&grid, &[&h.comps[0], &h.comps[1], &h.comps[2]], p, rho)?;
        let gc = h.gradient_coeffs();
        let refs: Vec<&[C64]> = gc.iter().flat_map(|c| c.iter().map(|v| v.as_slice())).collect();
        let u1 = uloc_of(&grid, &refs, p, rho)?;
        let inv_q = 1.0 / q;
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        let bound = 1.0 + t.powf(-1.5 * (inv_q - inv_p));
        let (r0, r1) = if fq == 0.0 { (0.0, 0.0) } else { (u0 / (bound * fq), u1 / (t.powf(-0.5) * bound * fq)) };
        rows.push((t, r0, r1));
    }
    let max_ratio = rows.iter().fold(0.0_f64, |m, r| m.max(r.1).max(r.2));
    Ok(SmoothingProbe { p, q, rho, ladder: rows, max_ratio })
}

/// `∂_k S_ij(x, t)` of the Oseen kernel `S_ij = δ_ij Γ + ∂_i∂_j ψ`,
/// `ψ = erf(|x|/2√t)/(4π|x|)`, in closed form. Index order `[k][i][j]`.
pub fn oseen_gradient(x: [f64; 3], t: f64) -> Result<[[[f64; 3]; 3]; 3]> {
    let r = norm3(x);
    if r == 0.0 || t <= 0.0 {
        return Err(LabError::SingularPoint);
    }
    let s = 2.0 * t.sqrt();
    let g = libm::erf(r / s);
    let g1 = (-(r * r) / (4.0 * t)).exp() / (PI * t).sqrt();
    let g2 = -r / (2.0 * t) * g1;
    let g3 = (-1.0 / (2.0 * t) + r * r / (4.0 * t * t)) * g1;
    let c = 1.0 / (4.0 * PI);
    let p1 = c * (g1 / r - g / (r * r));
    let p2 = c * (g2 / r - 2.0 * g1 / (r * r) + 2.0 * g / (r * r * r));
    let p3 = c * (g3 / r - 3.0 * g2 / (r * r) + 6.0 * g1 / (r * r * r) - 6.0 * g / r.powi(4));
    // ∂_i∂_j ψ = A x_i x_j + B δ_ij
    let a = (p2 - p1 / r) / (r * r);
    let da = (p3 - p2 / r + p1 / (r * r)) / (r * r) - 2.0 * (p2 - p1 / r) / (r * r * r);
    let db = (p2 - p1 / r) / r;
    let gam = (4.0 * PI * t).powf(-1.5) * (-(r * r) / (4.0 * t)).exp();
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let dki = if k == i { 1.0 } else { 0.0 };
                let dkj = if k == j { 1.0 } else { 0.0 };
                let dij = if i == j { 1.0 } else { 0.0 };
                let third = da * x[k] / r * x[i] * x[j] + a * (dki * x[j] + dkj * x[i]) + db * x[k] / r * dij;
                out[k][i][j] = third + dij * (-x[k] / (2.0 * t)) * gam;
            }
        }
    }
    Ok(out)
}

/// Periodic counterpart of `oseen_gradient` on a box, by direct mode sum.
pub fn oseen_gradient_fourier(grid: &GridSpec, x: [f64; 3], t: f64) -> [[[f64; 3]; 3]; 3] {
    let mut out = [[[0.0; 3]; 3]; 3];
    let vol = grid.volume();
    let k0 = grid.k0();
    let mmax = ((40.0 / t).sqrt() / k0).ceil() as i64;
    for a in -mmax..=mmax {
        for b in -mmax..=mmax {
            for c in -mmax..=mmax {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let k = [a as f64 * k0, b as f64 * k0, c as f64 * k0];
                let k2 = dot3(k, k);
                let e = (-k2 * t).exp();
                if e < 1e-18 {
                    continue;
                }
                let ph = dot3(k, x);
                // Re(i k_k e^{ikx}) = −k_k sin(kx)
                let s = -ph.sin() * e / vol;
                for kk in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            let p = if i == j { 1.0 } else { 0.0 } - k[i] * k[j] / k2;
                            out[kk][i][j] += k[kk] * s * p;
                        }
                    }
                }
            }
        }
    }
    out
}

fn frob27(g: &[[[f64; 3]; 3]; 3]) -> f64 {
    g.iter().flatten().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OseenProbe {
    /// `(|x|, |∇S|(|x|+√t)⁴)` at fixed `t`.
    pub x_ladder: Vec<(f64, f64)>,
    /// `(t, product)` at fixed `x`.
    pub t_ladder: Vec<(f64, f64)>,
    pub sup: f64,
    /// Spread `max/min − 1` over the last three points of each ladder.
    pub x_tail_growth: f64,
    pub t_tail_growth: f64,
    /// `max |λ⁴∇S(λx, λ²t) − ∇S(x, t)| / |∇S(x, t)|` at `λ = 2` over both ladders.
    pub homogeneity_defect: f64,
}

fn tail_growth(v: &[(f64, f64)]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let last = &v[v.len() - 3..];
    let mx = last.iter().fold(0.0_f64, |m, x| m.max(x.1));
    let mn = last.iter().fold(f64::INFINITY, |m, x| m.min(x.1));
    mx / mn - 1.0
}

/// Sup of `|∇S(x,t)|(|x| + √t)⁴` along an `x`-ladder (direction `dir`, time
/// `t_fixed`) and a `t`-ladder (point `x_fixed`).
pub fn oseen_gradient_probe(
    dir: [f64; 3],
    x_ladder: &[f64],
    t_fixed: f64,
    x_fixed: [f64; 3],
    t_ladder: &[f64],
) -> Result<OseenProbe> {
    let d = norm3(dir);
    if d == 0.0 {
        return Err(LabError::InvalidArgument("zero direction".into()));
    }
    let u = dir.map(|c| c / d);
    let product = |x: [f64; 3], t: f64| -> Result<f64> { Ok(frob27(&oseen_gradient(x, t)?) * (norm3(x) + t.sqrt()).powi(4)) };
    let homog = |x: [f64; 3], t: f64| -> Result<f64> {
        let a = oseen_gradient(x, t)?;
        let b = oseen_gradient(x.map(|c| 2.0 * c), 4.0 * t)?;
        let mut num: f64 = 0.0;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    num = num.max((16.0 * b[k][i][j] - a[k][i][j]).abs());
                }
            }
        }
        Ok(num / frob27(&a))
    };
    let mut xs = Vec::new();
    let mut hd: f64 = 0.0;
    for &r in x_ladder {
        let x = u.map(|c| c * r);
        xs.push((r, product(x, t_fixed)?));
        hd = hd.max(homog(x, t_fixed)?);
    }
    let mut ts = Vec::new();
    for &t in t_ladder {
        ts.push((t, product(x_fixed, t)?));
        hd = hd.max(homog(x_fixed, t)?);
    }
    let sup = xs.iter().chain(&ts).fold(0.0_f64, |m, x| m.max(x.1));
    Ok(OseenProbe { x_tail_growth: tail_growth(&xs), t_tail_growth: tail_growth(&ts), x_ladder: xs, t_ladder: ts, sup, homogeneity_defect: hd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_eigenmode_and_composition() {
        let g = GridSpec::periodic_2pi(16);
        let f = SpectralField::from_fn(g, |x| [x[0].sin(), 0.0, 0.0]);
        let h = heat_flow(&f, 1.0).unwrap();
        let want = f.scaled((-1.0f64).exp());
        assert!(h.max_diff(&want) < 1e-15);
        let a = heat_flow(&heat_flow(&f, 0.3).unwrap(), 0.4).unwrap();
        let b = heat_flow(&f, 0.7).unwrap();
        assert!(a.max_diff(&b) < 1e-15);
        assert!(matches!(heat_flow(&f, -1.0), Err(LabError::NegativeTime(_))));
    }

    #[test]
    fn admissibility_examples() {
        let t = |q: f64, m: f64| ExponentTriple { op: DuhamelOp::Phi1, q, lower: m, horizon: 1.0 };
        let a = admissibility_check(&t(3.0, 3.0));
        assert!(a.accepted && (a.t_power - 0.5).abs() < 1e-14);
        // 1/m − 1/q = 1/5
        let a = admissibility_check(&t(5.0, 2.5));
        assert!(a.accepted && a.t_power == 0.0);
        // 1/m − 1/q = 1/4
        let a = admissibility_check(&t(4.0, 2.0));
        assert!(!a.accepted);
    }

    #[test]
    fn phi_functions_are_continuous() {
        let (a, b) = phi_functions(0.1 * (1.0 - 1e-12));
        let (c, d) = phi_functions(0.1 * (1.0 + 1e-12));
        assert!((a - c).abs() < 1e-13 && (b - d).abs() < 1e-13);
    }

    #[test]
    fn oseen_matches_periodic_sum() {
        let g = GridSpec::new(40.0, 32, 2.0 / 3.0).unwrap();
        let x = [0.7, -0.4, 1.1];
        let t = 0.2;
        let a = oseen_gradient(x, t).unwrap();
        let b = oseen_gradient_fourier(&g, x, t);
        let s = frob27(&a);
        let mut d: f64 = 0.0;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    d = d.max((a[k][i][j] - b[k][i][j]).abs());
                }
            }
        }
        assert!(d < 1e-3 * s, "{d} vs {s}");
    }
}
