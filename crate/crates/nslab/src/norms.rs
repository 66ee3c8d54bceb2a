//! Lebesgue, weak-Lebesgue, uniformly-local and Herz norms, plus the data
//! quantity `N_r` and its time schedule.
use crate::error::{LabError, Result};
use crate::fields::{Magnitude, ScalarFn, VectorFn};
use crate::geometry::{
    ball_rule, gauss_interval, norm3, shell_rule, AnnulusDecomposition, ParabolicCylinder, PointRule,
    QuadratureSpec,
};
use crate::grid::{fft3, forward_real_any, inverse_real, pad_coeffs, GridSpec, ModeSum, SpectralField};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Default)]
pub struct NormContext {
    /// Periodic box the field lives on; enables the fit checks.
    pub grid: Option<GridSpec>,
    pub quad: QuadratureSpec,
}

impl NormContext {
    pub fn analytic(quad: QuadratureSpec) -> Self {
        Self { grid: None, quad }
    }

    fn check_radius(&self, radius: f64) -> Result<()> {
        if let Some(g) = &self.grid {
            if 2.0 * radius > g.box_length {
                return Err(LabError::BallTooLarge { radius, box_length: g.box_length });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownEntry {
    pub label: String,
    pub location: Option<[f64; 3]>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm_id: String,
    pub params: BTreeMap<String, f64>,
    pub value: f64,
    pub argmax_location: Option<[f64; 3]>,
    pub quadrature_error: f64,
    pub breakdown: Vec<BreakdownEntry>,
}

impl NormReport {
    fn new(norm_id: &str, params: &[(&str, f64)], value: f64, quadrature_error: f64) -> Self {
        Self {
            norm_id: norm_id.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
            argmax_location: None,
            quadrature_error,
            breakdown: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Ball { center: [f64; 3], radius: f64 },
    Shell { center: [f64; 3], inner: f64, outer: f64 },
}

impl Region {
    pub fn rule(&self, spec: &QuadratureSpec) -> PointRule {
        match *self {
            Region::Ball { center, radius } => ball_rule(center, radius, spec),
            Region::Shell { center, inner, outer } => shell_rule(center, inner, outer, spec),
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match *self {
            Region::Ball { radius, .. } => radius,
            Region::Shell { outer, .. } => outer,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Region::Ball { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Region::Shell { inner, outer, .. } => 4.0 / 3.0 * PI * (outer.powi(3) - inner.powi(3)),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("exponent p = {p} must be >= 1")))
    }
}

/// `(Σ w |f|^p)^{1/p}` or the max for `p = ∞`.
pub fn lp_from_samples(values: &[f64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        let s: f64 = values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }
}

fn lp_on_rule(f: &dyn ScalarFn, rule: &PointRule, p: f64) -> f64 {
    let vals: Vec<f64> = rule.nodes.iter().map(|x| f.eval(*x)).collect();
    lp_from_samples(&vals, &rule.weights, p)
}

pub fn lp_norm(f: &dyn ScalarFn, region: &Region, p: f64, ctx: &NormContext) -> Result<NormReport> {
    check_p(p)?;
    ctx.check_radius(region.outer_radius())?;
    let v = lp_on_rule(f, &region.rule(&ctx.quad), p);
    let vc = lp_on_rule(f, &region.rule(&ctx.quad.coarser()), p);
    Ok(NormReport::new("lp", &[("p", p)], v, (v - vc).abs()))
}

/// `L^p` norm of a space-time function over a parabolic cylinder.
pub fn lp_norm_cylinder(
    f: &(dyn Fn([f64; 3], f64) -> f64 + Sync),
    cyl: &ParabolicCylinder,
    p: f64,
    ctx: &NormContext,
    n_time: usize,
) -> Result<NormReport> {
    check_p(p)?;
    ctx.check_radius(cyl.radius)?;
    let eval = |spec: &QuadratureSpec, nt: usize| {
        let rule = ball_rule(cyl.center_x, cyl.radius, spec);
        let (tn, tw) = gauss_interval(nt, cyl.t_start(), cyl.center_t);
        let mut vals = Vec::with_capacity(rule.len() * nt);
        let mut wts = Vec::with_capacity(rule.len() * nt);
        for (t, wt) in tn.iter().zip(&tw) {
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                vals.push(f(*x, *t));
                wts.push(w * wt);
            }
        }
        lp_from_samples(&vals, &wts, p)
    };
    let v = eval(&ctx.quad, n_time);
    let vc = eval(&ctx.quad.coarser(), (n_time * 3 / 4).max(2));
    Ok(NormReport::new("lp-cylinder", &[("p", p), ("r", cyl.radius)], v, (v - vc).abs()))
}

/// `sup_λ λ·|{|f| > λ}|^{1/p}` from weighted samples, exact sort.
pub fn weak_lp_from_samples(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().map(|v| v.abs()).zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    if p.is_infinite() {
        return pairs.first().map(|x| x.0).unwrap_or(0.0);
    }
    let mut best: f64 = 0.0;
    let mut cum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == v {
            cum += pairs[j].1;
            j += 1;
        }
        best = best.max(v * cum.powf(1.0 / p));
        i = j;
    }
    best
}

pub fn weak_lp_norm(f: &dyn ScalarFn, region: &Region, p: f64, ctx: &NormContext) -> Result<NormReport> {
    check_p(p)?;
    ctx.check_radius(region.outer_radius())?;
    let run = |spec: &QuadratureSpec| {
        let rule = region.rule(spec);
        let vals: Vec<f64> = rule.nodes.iter().map(|x| f.eval(*x)).collect();
        weak_lp_from_samples(&vals, &rule.weights, p)
    };
    let v = run(&ctx.quad);
    let vc = run(&ctx.quad.coarser());
    Ok(NormReport::new("weak-lp", &[("p", p)], v, (v - vc).abs()))
}

/// Rectangular lattice of ball centres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterLattice {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub spacing: f64,
}

impl CenterLattice {
    pub fn cube(center: [f64; 3], half_width: f64, spacing: f64) -> Self {
        Self { lo: center.map(|c| c - half_width), hi: center.map(|c| c + half_width), spacing }
    }

    pub fn single(center: [f64; 3]) -> Self {
        Self { lo: center, hi: center, spacing: 1.0 }
    }

    /// Points in lexicographic order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let counts: Vec<usize> =
            (0..3).map(|a| ((self.hi[a] - self.lo[a]) / self.spacing + 1e-9).floor() as usize + 1).collect();
        let mut out = Vec::with_capacity(counts.iter().product());
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for l in 0..counts[2] {
                    out.push([
                        self.lo[0] + i as f64 * self.spacing,
                        self.lo[1] + j as f64 * self.spacing,
                        self.lo[2] + l as f64 * self.spacing,
                    ]);
                }
            }
        }
        out
    }
}

/// Deterministic argmax: first maximal entry in input order.
fn argmax(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    best
}

/// Maximise `g` over a lattice, then refine with a shrinking pattern search.
pub fn sup_over_centers(
    g: &(dyn Fn([f64; 3]) -> f64 + Sync),
    lattice: &CenterLattice,
    refine_steps: usize,
) -> ([f64; 3], f64) {
    let pts = lattice.points();
    let vals: Vec<f64> = pts.par_iter().map(|x| g(*x)).collect();
    let i = argmax(&vals);
    let (mut x, mut best) = (pts[i], vals[i]);
    let mut h = 0.5 * lattice.spacing;
    for _ in 0..refine_steps {
        let mut moved = false;
        for a in 0..3 {
            for s in [-1.0, 1.0] {
                let mut y = x;
                y[a] += s * h;
                let v = g(y);
                if v > best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (x, best)
}

/// `sup_x ‖f‖_{L^q(B_ρ(x))}` over a lattice of centres (spacing ≤ ρ/4
/// enforced) followed by local refinement.
pub fn uloc_norm(
    f: &dyn ScalarFn,
    q: f64,
    rho: f64,
    lattice: &CenterLattice,
    ctx: &NormContext,
) -> Result<NormReport> {
    check_p(q)?;
    if !(rho > 0.0) {
        return Err(LabError::InvalidArgument(format!("rho = {rho} must be positive")));
    }
    ctx.check_radius(rho)?;
    let mut lat = *lattice;
    lat.spacing = lat.spacing.min(0.25 * rho);
    let base = ball_rule([0.0; 3], rho, &ctx.quad);
    let coarse = ball_rule([0.0; 3], rho, &ctx.quad.coarser());
    let at = |rule: &PointRule, c: [f64; 3]| {
        let vals: Vec<f64> = rule.nodes.iter().map(|x| f.eval([x[0] + c[0], x[1] + c[1], x[2] + c[2]])).collect();
        lp_from_samples(&vals, &rule.weights, q)
    };
    let g = |c: [f64; 3]| at(&base, c);
    let (x, v) = sup_over_centers(&g, &lat, 12);
    let err = (v - at(&coarse, x)).abs();
    let mut rep = NormReport::new("uloc", &[("q", q), ("rho", rho)], v, err);
    rep.argmax_location = Some(x);
    rep.breakdown.push(BreakdownEntry { label: "argmax".into(), location: Some(x), value: v });
    Ok(rep)
}

/// Fourier transform of the indicator of a ball of radius `r`.
pub fn ball_multiplier(k: f64, r: f64) -> f64 {
    let x = k * r;
    if x < 1e-3 {
        let x2 = x * x;
        4.0 / 3.0 * PI * r.powi(3) * (1.0 - x2 / 10.0 + x2 * x2 / 280.0)
    } else {
        4.0 * PI * (x.sin() - x * x.cos()) / (k * k * k)
    }
}

/// Coefficients of `x ↦ ∫_{B_r(x)} g` from those of `g`.
pub fn ball_average_coeffs(grid: &GridSpec, g: &[C64], r: f64) -> Vec<C64> {
    (0..grid.len())
        .map(|idx| {
            let k = norm3(grid.kvec(idx));
            g[idx] * ball_multiplier(k, r)
        })
        .collect()
}

/// Samples of `|v|^q` on a grid padded by 3/2 (products of dealiased fields
/// are then alias free for q = 2).
pub fn padded_power_samples(v: &SpectralField, q: f64) -> (GridSpec, Vec<f64>) {
    padded_power_samples_comps(&v.grid, &[&v.comps[0], &v.comps[1], &v.comps[2]], q)
}

/// As `padded_power_samples` for any number of components (`|·|` is the
/// Euclidean norm over components).
pub fn padded_power_samples_comps(grid: &GridSpec, comps: &[&[C64]], q: f64) -> (GridSpec, Vec<f64>) {
    let m = 3 * grid.n() / 2;
    let big = GridSpec { box_length: grid.box_length, resolution: m, dealias_fraction: 1.0 };
    let mut acc = vec![0.0; big.len()];
    for c in comps {
        let (_, pc) = pad_coeffs(grid, c, m);
        let mut z = pc;
        fft3(&mut z, m, true);
        acc.iter_mut().zip(&z).for_each(|(a, x)| *a += x.re * x.re);
    }
    if q != 2.0 {
        acc.iter_mut().for_each(|a| *a = a.sqrt().powf(q));
    }
    (big, acc)
}

/// Ball integrals of `|v|^q` centred at every point of the padded grid, plus
/// an exact evaluator of the same trigonometric polynomial for refinement.
pub fn ball_integrals_grid(v: &SpectralField, q: f64, r: f64) -> (GridSpec, Vec<f64>, ModeSum) {
    ball_integrals_grid_comps(&v.grid, &[&v.comps[0], &v.comps[1], &v.comps[2]], q, r)
}

pub fn ball_integrals_grid_comps(grid: &GridSpec, comps: &[&[C64]], q: f64, r: f64) -> (GridSpec, Vec<f64>, ModeSum) {
    let (big, s) = padded_power_samples_comps(grid, comps, q);
    let c = forward_real_any(&big, &s);
    let conv = ball_average_coeffs(&big, &c, r);
    let vals = inverse_real(&big, &conv);
    let ms = ModeSum::new(&big, &[&conv]);
    (big, vals, ms)
}

fn refine_grid_sup(big: &GridSpec, vals: &[f64], ms: &ModeSum) -> ([f64; 3], f64) {
    let i = argmax(vals);
    let (a, b, c) = big.unravel(i);
    let x0 = big.coords(a, b, c);
    let g = |x: [f64; 3]| {
        let mut o = [0.0];
        ms.eval(x, &mut o);
        o[0]
    };
    let lat = CenterLattice::single(x0);
    let mut l2 = lat;
    l2.spacing = big.dx();
    let (x, v) = sup_over_centers(&g, &l2, 16);
    if v >= vals[i] {
        (x, v)
    } else {
        (x0, vals[i])
    }
}

/// Uniformly-local norm of a grid field over all centres of the torus.
pub fn uloc_norm_grid(v: &SpectralField, q: f64, rho: f64) -> Result<NormReport> {
    uloc_norm_grid_comps(&v.grid, &[&v.comps[0], &v.comps[1], &v.comps[2]], q, rho)
}

/// `uloc_norm_grid` for a field with any number of components.
pub fn uloc_norm_grid_comps(grid: &GridSpec, comps: &[&[C64]], q: f64, rho: f64) -> Result<NormReport> {
    check_p(q)?;
    if 2.0 * rho > grid.box_length {
        return Err(LabError::BallTooLarge { radius: rho, box_length: grid.box_length });
    }
    let (big, vals, ms) = ball_integrals_grid_comps(grid, comps, q, rho);
    let (x, best) = refine_grid_sup(&big, &vals, &ms);
    let value = best.max(0.0).powf(1.0 / q);
    let coarse = vals.iter().fold(0.0_f64, |m, x| m.max(*x)).max(0.0).powf(1.0 / q);
    let mut rep = NormReport::new("uloc-grid", &[("q", q), ("rho", rho)], value, (value - coarse).abs());
    rep.argmax_location = Some(x);
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HerzFlavor {
    ShellSup,
    BallEquivalent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerzParams {
    pub s: f64,
    pub p: f64,
    pub flavor: HerzFlavor,
}

impl HerzParams {
    /// `K_p`: s = 1 − 3/p.
    pub fn kp(p: f64, flavor: HerzFlavor) -> Self {
        Self { s: 1.0 - 3.0 / p, p, flavor }
    }
}

/// Herz norm, shell (`sup_k 2^{ks}‖f‖_{L^p(A_k)}`) or ball
/// (`sup_x |x|^s ‖f‖_{L^p(B_{|x|/2}(x))}`) flavor.
///
/// The ball flavor samples `|x| = 2^{j/8}` over the shell range along
/// `directions` (default: the six axis directions).
pub fn herz_norm(
    f: &dyn ScalarFn,
    params: &HerzParams,
    decomp: &AnnulusDecomposition,
    ctx: &NormContext,
    directions: Option<&[[f64; 3]]>,
) -> Result<NormReport> {
    check_p(params.p)?;
    if let Some(g) = &ctx.grid {
        let (a, _) = AnnulusDecomposition::shell(decomp.k_min);
        if a < g.dx() {
            return Err(LabError::ShellUnresolved { k: decomp.k_min });
        }
        let (_, b) = AnnulusDecomposition::shell(decomp.k_max);
        if b > 0.5 * g.box_length {
            return Err(LabError::BallTooLarge { radius: b, box_length: g.box_length });
        }
    }
    let params_list = [("s", params.s), ("p", params.p)];
    match params.flavor {
        HerzFlavor::ShellSup => {
            let shells = decomp.shells();
            let entries: Vec<(f64, f64)> = shells
                .par_iter()
                .map(|&(k, a, b)| {
                    let w = 2f64.powf(k as f64 * params.s);
                    let v = lp_on_rule(f, &shell_rule([0.0; 3], a, b, &ctx.quad), params.p);
                    let vc = lp_on_rule(f, &shell_rule([0.0; 3], a, b, &ctx.quad.coarser()), params.p);
                    (w * v, w * (v - vc).abs())
                })
                .collect();
            let vals: Vec<f64> = entries.iter().map(|e| e.0).collect();
            let i = argmax(&vals);
            let mut rep = NormReport::new("herz-shell", &params_list, vals[i], entries[i].1);
            rep.breakdown = shells
                .iter()
                .zip(&entries)
                .map(|(&(k, _, _), e)| BreakdownEntry { label: format!("A_{k}"), location: None, value: e.0 })
                .collect();
            Ok(rep)
        }
        HerzFlavor::BallEquivalent => {
            let axes = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [
                0.0, 0.0, -1.0,
            ]];
            let dirs = directions.unwrap_or(&axes);
            // |x| = 2^{j/8} with B_{|x|/2}(x) inside the shell range
            let inner = 2f64.powi(decomp.k_min - 1);
            let outer = 2f64.powi(decomp.k_max);
            let mut pts = Vec::new();
            for j in (8 * (decomp.k_min - 1))..=(8 * decomp.k_max) {
                let rad = 2f64.powf(j as f64 / 8.0);
                if 0.5 * rad < inner * (1.0 - 1e-12) || 1.5 * rad > outer * (1.0 + 1e-12) {
                    continue;
                }
                for d in dirs {
                    let n = norm3(*d);
                    pts.push(d.map(|c| c * rad / n));
                }
            }
            if pts.is_empty() {
                return Err(LabError::InvalidArgument("shell range too narrow for the ball flavor".into()));
            }
            let entries: Vec<(f64, f64)> = pts
                .par_iter()
                .map(|x| {
                    let r = norm3(*x);
                    let w = r.powf(params.s);
                    let v = lp_on_rule(f, &ball_rule(*x, 0.5 * r, &ctx.quad), params.p);
                    let vc = lp_on_rule(f, &ball_rule(*x, 0.5 * r, &ctx.quad.coarser()), params.p);
                    (w * v, w * (v - vc).abs())
                })
                .collect();
            let vals: Vec<f64> = entries.iter().map(|e| e.0).collect();
            let i = argmax(&vals);
            let mut rep = NormReport::new("herz-ball", &params_list, vals[i], entries[i].1);
            rep.argmax_location = Some(pts[i]);
            rep.breakdown = pts
                .iter()
                .zip(&entries)
                .map(|(x, e)| BreakdownEntry { label: "center".into(), location: Some(*x), value: e.0 })
                .collect();
            Ok(rep)
        }
    }
}

/// `N_r = (1/r) sup_x ∫_{B_r(x)} |v₀|²` over a lattice of centres.
pub fn data_quantity_nr(v0: &dyn VectorFn, r: f64, lattice: &CenterLattice, ctx: &NormContext) -> Result<NormReport> {
    if !(r > 0.0) {
        return Err(LabError::InvalidArgument(format!("r = {r} must be positive")));
    }
    ctx.check_radius(r)?;
    let mag = Magnitude(v0);
    let mut rep = uloc_norm(&mag, 2.0, r, lattice, ctx)?;
    let v = rep.value;
    rep.norm_id = "N_r".into();
    rep.value = v * v / r;
    rep.quadrature_error = 2.0 * v * rep.quadrature_error / r;
    Ok(rep)
}

/// `N_r` of a grid field, sup over every centre of the torus.
pub fn data_quantity_nr_grid(v0: &SpectralField, r: f64) -> Result<NormReport> {
    if !(r > 0.0) {
        return Err(LabError::InvalidArgument(format!("r = {r} must be positive")));
    }
    let mut rep = uloc_norm_grid(v0, 2.0, r)?;
    let v = rep.value;
    rep.norm_id = "N_r".into();
    rep.value = v * v / r;
    rep.quadrature_error = 2.0 * v * rep.quadrature_error / r;
    rep.params.insert("r".into(), r);
    Ok(rep)
}

/// `σ(r) = c₀ min(N_r⁻², 1)`.
pub fn sigma_schedule(n_r: f64, c0: f64) -> f64 {
    if n_r <= 1.0 {
        c0
    } else {
        c0 / (n_r * n_r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerzNrCheck {
    pub n_r: f64,
    /// `‖v₀‖²_{K₃}`.
    pub herz_value: f64,
    pub measured_ratio: f64,
    pub budget: f64,
    pub violated: bool,
}

/// Compare `N_R` with `R‖v₀‖²_{K₃}`.
pub fn herz_controls_nr_check(
    v0: &dyn VectorFn,
    r: f64,
    lattice: &CenterLattice,
    decomp: &AnnulusDecomposition,
    ctx: &NormContext,
    budget: f64,
) -> Result<HerzNrCheck> {
    let nr = data_quantity_nr(v0, r, lattice, ctx)?.value;
    let mag = Magnitude(v0);
    let h = herz_norm(&mag, &HerzParams::kp(3.0, HerzFlavor::ShellSup), decomp, ctx, None)?.value;
    let h2 = h * h;
    let ratio = if nr == 0.0 { 0.0 } else { nr / (r * h2) };
    Ok(HerzNrCheck { n_r: nr, herz_value: h2, measured_ratio: ratio, budget, violated: ratio > budget })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `max_{ρ' ≥ ρ}` of the profile.
    pub envelope: Vec<f64>,
    /// Tail envelope relative to the profile maximum.
    pub tail_ratio: f64,
    pub decays: bool,
}

/// Fibonacci directions on the sphere, the six axis directions first.
pub fn sphere_directions(n: usize) -> Vec<[f64; 3]> {
    let mut d = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let s = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        d.push([s * th.cos(), s * th.sin(), z]);
    }
    d
}

/// `ρ ↦ sup_{|x| = ρ} ‖f‖_{L^q(B_1(x))}` about `origin`.
pub fn e2_decay_indicator(
    f: &dyn ScalarFn,
    q: f64,
    origin: [f64; 3],
    radii: &[f64],
    n_dirs: usize,
    ctx: &NormContext,
    tail_tol: f64,
) -> Result<DecayProfile> {
    check_p(q)?;
    let dirs = sphere_directions(n_dirs);
    let base = ball_rule([0.0; 3], 1.0, &ctx.quad);
    let values: Vec<f64> = radii
        .par_iter()
        .map(|&rho| {
            dirs.iter()
                .map(|d| {
                    let c = [origin[0] + rho * d[0], origin[1] + rho * d[1], origin[2] + rho * d[2]];
                    let vals: Vec<f64> =
                        base.nodes.iter().map(|x| f.eval([x[0] + c[0], x[1] + c[1], x[2] + c[2]])).collect();
                    lp_from_samples(&vals, &base.weights, q)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let mut envelope = values.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let tail = envelope.last().copied().unwrap_or(0.0);
    let tail_ratio = if peak == 0.0 { 0.0 } else { tail / peak };
    Ok(DecayProfile { radii: radii.to_vec(), values, envelope, tail_ratio, decays: tail_ratio <= tail_tol })
}
