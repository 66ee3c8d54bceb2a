//! Dimensionless regularity quantities on parabolic cylinders
//! `Q_r(z) = B_r(x) × (t − r², t)` evaluated on solver trajectories.
use crate::error::{LabError, Result};
use crate::geometry::{ball_rule, ball_volume, norm3, sub3, ParabolicCylinder, PointRule, QuadratureSpec};
use crate::grid::LagrangeInterp;
use crate::norms::{ball_integrals_grid_comps, data_quantity_nr_grid, sigma_schedule};
use crate::solver::{snapshot_interp, window_weights, TrajectoryLedger};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which pressure enters `D(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DForm {
    /// `|π − (π)_{B_r}(t)|^{3/2}`.
    Oscillation,
    /// `|π|^{3/2}` in the stored gauge.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderOptions {
    pub quad: QuadratureSpec,
    pub interp_order: usize,
    pub d_form: DForm,
    /// Minimum radius in grid cells.
    pub min_cells: f64,
    /// Minimum number of snapshots inside the time window.
    pub min_samples: usize,
}

impl Default for CylinderOptions {
    fn default() -> Self {
        Self { quad: QuadratureSpec::new(12, 12, 24), interp_order: 8, d_form: DForm::Oscillation, min_cells: 4.0, min_samples: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadErrors {
    pub c: f64,
    pub d: f64,
    pub phi: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderQuantities {
    pub cylinder: ParabolicCylinder,
    pub c: f64,
    pub d: f64,
    pub phi: f64,
    pub b: f64,
    /// `(u)_{Q_r}`.
    pub mean_u: [f64; 3],
    /// `(t, (π)_{B_r}(t))` at the snapshots used.
    pub pressure_means: Vec<(f64, f64)>,
    pub d_form: DForm,
    /// Measure of the (possibly clipped) cylinder actually integrated.
    pub measure: f64,
    pub time_samples: usize,
    pub quad_error: QuadErrors,
}

/// Clipping region `B_ρ(c) × (0, T₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub center: [f64; 3],
    pub radius: f64,
    pub t1: f64,
}

impl Slab {
    pub fn unit(t1: f64) -> Self {
        Self { center: [0.0; 3], radius: 1.0, t1 }
    }
}

struct RawIntegrals {
    c: f64,
    d_raw: f64,
    d_osc: f64,
    u_osc: f64,
    mean_u: [f64; 3],
    p_means: Vec<(f64, f64)>,
    measure: f64,
    samples: usize,
}

fn spatial_rule(led: &TrajectoryLedger, cyl: &ParabolicCylinder, clip: Option<&Slab>, quad: &QuadratureSpec) -> PointRule {
    let g = &led.grid;
    let r = cyl.radius;
    match clip {
        None => ball_rule(cyl.center_x, r, quad),
        Some(s) => {
            let d = norm3(g.min_image(cyl.center_x, s.center));
            // integrate over the smaller ball, mask by the larger
            let (rule, other_c, other_r) =
                if r <= s.radius { (ball_rule(cyl.center_x, r, quad), s.center, s.radius) } else { (ball_rule(s.center, s.radius, quad), cyl.center_x, r) };
            if d + r.min(s.radius) <= r.max(s.radius) {
                return rule;
            }
            let mut out = PointRule::default();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                if norm3(g.min_image(*x, other_c)) < other_r {
                    out.nodes.push(*x);
                    out.weights.push(*w);
                }
            }
            out
        }
    }
}

fn check_cylinder(led: &TrajectoryLedger, cyl: &ParabolicCylinder, opts: &CylinderOptions) -> Result<()> {
    let g = &led.grid;
    if cyl.radius < opts.min_cells * g.dx() {
        return Err(LabError::UnresolvedCylinder(format!("radius {} below {} cells", cyl.radius, opts.min_cells)));
    }
    if !cyl.fits(g) {
        return Err(LabError::BallTooLarge { radius: cyl.radius, box_length: g.box_length });
    }
    Ok(())
}

fn integrate(led: &TrajectoryLedger, cyl: &ParabolicCylinder, clip: Option<&Slab>, quad: &QuadratureSpec, opts: &CylinderOptions) -> Result<RawIntegrals> {
    check_cylinder(led, cyl, opts)?;
    let times = led.times();
    let eps = 1e-12 * times.last().copied().unwrap_or(1.0).abs().max(1.0);
    let mut a = cyl.t_start();
    let mut b = cyl.center_t;
    if let Some(s) = clip {
        a = a.max(0.0);
        b = b.min(s.t1);
    }
    let empty = RawIntegrals { c: 0.0, d_raw: 0.0, d_osc: 0.0, u_osc: 0.0, mean_u: [0.0; 3], p_means: vec![], measure: 0.0, samples: 0 };
    if clip.is_some() && b <= a {
        return Ok(empty);
    }
    if a < times[0] - eps || b > times[times.len() - 1] + eps {
        return Err(LabError::UnresolvedCylinder(format!("window [{a}, {b}] outside ledger [{}, {}]", times[0], times[times.len() - 1])));
    }
    let samples = times.iter().filter(|t| **t >= a - eps && **t <= b + eps).count();
    if samples < opts.min_samples {
        return Err(LabError::UnresolvedCylinder(format!("{samples} snapshots in [{a}, {b}], need {}", opts.min_samples)));
    }
    let tw = window_weights(&times, a, b);
    let rule = spatial_rule(led, cyl, clip, quad);
    if rule.is_empty() {
        return Ok(empty);
    }
    let ball_w: f64 = rule.total_weight();
    // node values per snapshot used
    let mut vals: Vec<(f64, Vec<[f64; 4]>)> = Vec::with_capacity(tw.len());
    for (n, w) in &tw {
        let it: LagrangeInterp = snapshot_interp(&led.snapshots[*n], opts.interp_order);
        let mut out = [0.0; 4];
        let node_vals = rule
            .nodes
            .iter()
            .map(|x| {
                it.eval(*x, &mut out);
                out
            })
            .collect();
        vals.push((*w, node_vals));
    }
    let measure: f64 = tw.iter().map(|(_, w)| w * ball_w).sum();
    let mut mean_u = [0.0; 3];
    for (wt, nv) in &vals {
        for (f, wx) in nv.iter().zip(&rule.weights) {
            for c in 0..3 {
                mean_u[c] += wt * wx * f[c];
            }
        }
    }
    mean_u.iter_mut().for_each(|m| *m /= measure);
    let (mut c, mut d_raw, mut d_osc, mut u_osc) = (0.0, 0.0, 0.0, 0.0);
    let mut p_means = Vec::with_capacity(vals.len());
    for ((n, _), (wt, nv)) in tw.iter().zip(&vals) {
        let pm: f64 = nv.iter().zip(&rule.weights).map(|(f, w)| w * f[3]).sum::<f64>() / ball_w;
        p_means.push((times[*n], pm));
        for (f, wx) in nv.iter().zip(&rule.weights) {
            let w = wt * wx;
            let u = [f[0], f[1], f[2]];
            c += w * norm3(u).powi(3);
            u_osc += w * norm3(sub3(u, mean_u)).powi(3);
            d_raw += w * f[3].abs().powf(1.5);
            d_osc += w * (f[3] - pm).abs().powf(1.5);
        }
    }
    let r2 = cyl.radius * cyl.radius;
    Ok(RawIntegrals { c: c / r2, d_raw: d_raw / r2, d_osc: d_osc / r2, u_osc: u_osc / r2, mean_u, p_means, measure, samples })
}

fn assemble(cyl: &ParabolicCylinder, raw: RawIntegrals, form: DForm) -> CylinderQuantities {
    let phi = raw.u_osc.cbrt() + raw.d_osc.powf(2.0 / 3.0);
    CylinderQuantities {
        cylinder: *cyl,
        c: raw.c,
        d: match form {
            DForm::Oscillation => raw.d_osc,
            DForm::Raw => raw.d_raw,
        },
        phi,
        b: cyl.radius * norm3(raw.mean_u),
        mean_u: raw.mean_u,
        pressure_means: raw.p_means,
        d_form: form,
        measure: raw.measure,
        time_samples: raw.samples,
        quad_error: QuadErrors { c: 0.0, d: 0.0, phi: 0.0, b: 0.0 },
    }
}

fn quantities(led: &TrajectoryLedger, cyl: &ParabolicCylinder, clip: Option<&Slab>, opts: &CylinderOptions) -> Result<CylinderQuantities> {
    let fine = assemble(cyl, integrate(led, cyl, clip, &opts.quad, opts)?, opts.d_form);
    let coarse = assemble(cyl, integrate(led, cyl, clip, &opts.quad.coarser(), opts)?, opts.d_form);
    let mut q = fine;
    q.quad_error = QuadErrors {
        c: (q.c - coarse.c).abs(),
        d: (q.d - coarse.d).abs(),
        phi: (q.phi - coarse.phi).abs(),
        b: (q.b - coarse.b).abs(),
    };
    Ok(q)
}

/// `C(r)`, `D(r)`, `φ(u, p, r, z)` and `B(r)` on one cylinder.
pub fn cylinder_quantities(led: &TrajectoryLedger, cyl: &ParabolicCylinder, opts: &CylinderOptions) -> Result<CylinderQuantities> {
    quantities(led, cyl, None, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CknBudgets {
    pub eps_ckn: f64,
    pub c_ckn: f64,
    pub c1: f64,
}

impl Default for CknBudgets {
    fn default() -> Self {
        Self { eps_ckn: 0.05, c_ckn: 1.0, c1: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CknVerdict {
    pub flagged_regular: bool,
    pub c_plus_d: f64,
    pub eps_budget: f64,
    /// `sup |v|` over `Q_{r/2}` (nodes of the ball rule, snapshots in the window).
    pub sup_v_half: f64,
    pub sup_budget: f64,
    pub sup_within_budget: bool,
    /// `r · sup |v|`.
    pub measured_constant: f64,
}

/// Flag `C + D ≤ ε` and cross-check `sup_{Q_{r/2}} |v|` against `C_CKN / r`.
pub fn ckn_flag(led: &TrajectoryLedger, q: &CylinderQuantities, budgets: &CknBudgets, opts: &CylinderOptions) -> CknVerdict {
    let flagged = q.c + q.d <= budgets.eps_ckn;
    let r = q.cylinder.radius;
    let mut sup: f64 = 0.0;
    if flagged {
        let half = ParabolicCylinder { radius: 0.5 * r, ..q.cylinder };
        let mut rule = ball_rule(half.center_x, half.radius, &opts.quad);
        rule.nodes.push(half.center_x);
        let a = half.t_start();
        for s in led.snapshots.iter().filter(|s| s.time >= a - 1e-12 && s.time <= half.center_t + 1e-12) {
            let it = snapshot_interp(s, opts.interp_order);
            let mut out = [0.0; 4];
            for x in &rule.nodes {
                it.eval(*x, &mut out);
                sup = sup.max(norm3([out[0], out[1], out[2]]));
            }
        }
    }
    let sup_budget = budgets.c_ckn / r;
    CknVerdict {
        flagged_regular: flagged,
        c_plus_d: q.c + q.d,
        eps_budget: budgets.eps_ckn,
        sup_v_half: sup,
        sup_budget,
        sup_within_budget: sup <= sup_budget,
        measured_constant: r * sup,
    }
}

/// `T₁(M) = ε (1 + M)⁻⁶`.
pub fn t1_schedule(m: f64, eps: f64) -> Result<f64> {
    if !(m >= 0.0) || !(eps > 0.0) {
        return Err(LabError::InvalidArgument(format!("need M ≥ 0 and ε > 0, got ({m}, {eps})")));
    }
    Ok(eps / (1.0 + m).powi(6))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyEntry {
    pub x0: [f64; 3],
    pub t0: f64,
    pub r: f64,
    /// Clipped `C(r)`.
    pub c: f64,
    /// `r^{−2−3β} ∫ (|u|³ + |p − (p)_{B_r}(t)|^{3/2})` over the clipped cylinder.
    pub morrey: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyScan {
    pub slab: Slab,
    pub beta: f64,
    pub entries: Vec<MorreyEntry>,
    pub sup_c: f64,
    pub sup_morrey: f64,
    pub argmax: Option<([f64; 3], f64, f64)>,
    /// Mean least-squares slope of `log morrey` against `log r` over probes.
    pub morrey_exponent: Option<f64>,
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

/// `sup_{z₀, r} C(r; z₀)` over cylinders clipped to the slab, plus the
/// β-weighted Morrey quantity.
pub fn morrey_sup_scan(led: &TrajectoryLedger, probes: &[([f64; 3], f64)], ladder: &[f64], slab: &Slab, beta: f64, opts: &CylinderOptions) -> Result<MorreyScan> {
    let mut entries = Vec::new();
    let mut slopes = Vec::new();
    for (x0, t0) in probes {
        let mut lr = Vec::new();
        let mut lm = Vec::new();
        for r in ladder {
            let cyl = ParabolicCylinder::new(*x0, *t0, *r)?;
            let raw = integrate(led, &cyl, Some(slab), &opts.quad, opts)?;
            let r2 = r * r;
            let morrey = (raw.c + raw.d_osc) * r2 * r.powf(-2.0 - 3.0 * beta);
            if morrey > 0.0 {
                lr.push(r.ln());
                lm.push(morrey.ln());
            }
            entries.push(MorreyEntry { x0: *x0, t0: *t0, r: *r, c: raw.c, morrey });
        }
        if let Some(s) = slope(&lr, &lm) {
            slopes.push(s);
        }
    }
    let mut sup_c = 0.0;
    let mut sup_morrey: f64 = 0.0;
    let mut argmax = None;
    for e in &entries {
        if e.c > sup_c {
            sup_c = e.c;
            argmax = Some((e.x0, e.t0, e.r));
        }
        sup_morrey = sup_morrey.max(e.morrey);
    }
    let morrey_exponent = if slopes.is_empty() { None } else { Some(slopes.iter().sum::<f64>() / slopes.len() as f64) };
    Ok(MorreyScan { slab: *slab, beta, entries, sup_c, sup_morrey, argmax, morrey_exponent })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRung {
    pub k: usize,
    pub r: f64,
    pub phi: f64,
    pub b: f64,
    pub psi: f64,
    /// `Ψ(θr)/Ψ(r)` against the previous rung; `None` when `Ψ(r) = 0`.
    pub ratio: Option<f64>,
    pub satisfies: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayLedger {
    pub theta: f64,
    pub beta: f64,
    pub c3: f64,
    pub rungs: Vec<DecayRung>,
    pub terminated: Option<String>,
    /// Fraction of defined ratios with `Ψ(θr) ≤ θ^β Ψ(r)`.
    pub fraction_satisfied: Option<f64>,
    pub degenerate_zero: usize,
}

/// `φ`, `B`, `Ψ = φ + (2C₃)⁻¹ θ^{2/3+β} B` down the ladder `r = θᵏ r₀`.
pub fn decay_ledger(led: &TrajectoryLedger, x0: [f64; 3], t0: f64, theta: f64, beta: f64, r0: f64, max_rungs: usize, opts: &CylinderOptions) -> Result<DecayLedger> {
    if !(theta > 0.0 && theta < 1.0 / 3.0) {
        return Err(LabError::InvalidArgument(format!("θ = {theta} not in (0, 1/3)")));
    }
    let c3 = (4.0 * PI / 3.0_f64).powf(-1.0 / 3.0);
    let weight = theta.powf(2.0 / 3.0 + beta) / (2.0 * c3);
    let mut rungs: Vec<DecayRung> = Vec::new();
    let mut terminated = None;
    for k in 0..max_rungs {
        let r = r0 * theta.powi(k as i32);
        let cyl = ParabolicCylinder::new(x0, t0, r)?;
        let q = match cylinder_quantities(led, &cyl, opts) {
            Ok(q) => q,
            Err(e @ LabError::UnresolvedCylinder(_)) => {
                terminated = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let psi = q.phi + weight * q.b;
        let (ratio, satisfies) = match rungs.last() {
            Some(prev) if prev.psi > 0.0 => {
                let x = psi / prev.psi;
                (Some(x), Some(x <= theta.powf(beta)))
            }
            _ => (None, None),
        };
        rungs.push(DecayRung { k, r, phi: q.phi, b: q.b, psi, ratio, satisfies });
    }
    let defined: Vec<bool> = rungs.iter().filter_map(|r| r.satisfies).collect();
    let fraction_satisfied = if defined.is_empty() { None } else { Some(defined.iter().filter(|b| **b).count() as f64 / defined.len() as f64) };
    let degenerate_zero = rungs.iter().skip(1).filter(|r| r.ratio.is_none()).count();
    Ok(DecayLedger { theta, beta, c3, rungs, terminated, fraction_satisfied, degenerate_zero })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriEnergyReport {
    pub r: f64,
    pub n_r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `sup_x sup_{s ≤ t} (1/r)∫_{B_r(x)} |v(s)|²` at each time.
    pub energy_part: Vec<f64>,
    /// `sup_x (1/r)∫₀ᵗ∫_{B_r(x)} |∇v|²` at each time.
    pub dissipation_part: Vec<f64>,
    /// `A_r(t)`: sup over centres of the sum.
    pub a_r: Vec<f64>,
    pub a0: f64,
    pub passed: bool,
    /// `A_r(σr²)/N_r`.
    pub measured_constant: f64,
    /// `sup_x (1/r)∫_{B_r(x)} |v(t)|²` is non-increasing.
    pub local_energy_monotone: bool,
}

/// Check `A_r(t) ≤ 2A_r(0⁺)` on `(0, σr²]` with `σ = sigma_schedule(N_r, c₀)`.
pub fn apriori_energy_check(led: &TrajectoryLedger, r: f64, c0: f64) -> Result<AprioriEnergyReport> {
    let first = &led.snapshots[0];
    let g = led.grid;
    let n_r = data_quantity_nr_grid(&first.velocity, r)?.value;
    let sigma = sigma_schedule(n_r, c0);
    let horizon = sigma * r * r;
    let t0 = first.time;
    let end = led.t_end();
    if end - t0 < horizon * (1.0 - 1e-12) {
        return Err(LabError::CoverageGap { ledger_end: end, required: t0 + horizon });
    }
    let mut times = Vec::new();
    let mut energy_part = Vec::new();
    let mut dissipation_part = Vec::new();
    let mut a_r = Vec::new();
    let mut run_max: Vec<f64> = Vec::new();
    let mut run_int: Vec<f64> = Vec::new();
    let mut prev_d: Vec<f64> = Vec::new();
    let mut prev_t = t0;
    let mut monotone = true;
    let mut last_e = f64::INFINITY;
    for s in led.snapshots.iter().take_while(|s| s.time <= t0 + horizon * (1.0 + 1e-12) + 1e-14) {
        let v = &s.velocity;
        let (_, e, _) = ball_integrals_grid_comps(&g, &[&v.comps[0], &v.comps[1], &v.comps[2]], 2.0, r);
        let gc = v.gradient_coeffs();
        let refs: Vec<&[crate::grid::C64]> = gc.iter().flat_map(|row| row.iter().map(|c| c.as_slice())).collect();
        let (_, d, _) = ball_integrals_grid_comps(&g, &refs, 2.0, r);
        if run_max.is_empty() {
            run_max = e.iter().map(|x| x / r).collect();
            run_int = vec![0.0; e.len()];
        } else {
            let dt = s.time - prev_t;
            for i in 0..e.len() {
                run_max[i] = run_max[i].max(e[i] / r);
                run_int[i] += 0.5 * dt * (prev_d[i] + d[i]) / r;
            }
        }
        prev_d = d;
        prev_t = s.time;
        let e_now = e.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)) / r;
        if e_now > last_e * (1.0 + 1e-12) + 1e-300 {
            monotone = false;
        }
        last_e = e_now;
        times.push(s.time);
        energy_part.push(run_max.iter().fold(0.0_f64, |m, x| m.max(*x)));
        dissipation_part.push(run_int.iter().fold(0.0_f64, |m, x| m.max(*x)));
        a_r.push(run_max.iter().zip(&run_int).fold(0.0_f64, |m, (a, b)| m.max(a + b)));
    }
    let a0 = a_r[0];
    let passed = a_r.iter().all(|a| *a <= 2.0 * a0 * (1.0 + 1e-12) + 1e-300);
    let last = *a_r.last().unwrap();
    let measured_constant = if n_r > 0.0 { last / n_r } else { 0.0 };
    Ok(AprioriEnergyReport { r, n_r, sigma, horizon, times, energy_part, dissipation_part, a_r, a0, passed, measured_constant, local_energy_monotone: monotone })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    FlaggedRegular,
    Unresolved,
    /// Outside `0 < t < σ₂|x|²`.
    NotAdmitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaboloidEntry {
    pub x: [f64; 3],
    pub t: f64,
    pub admitted: bool,
    pub sqrt_t_v: Option<f64>,
    pub verdict: ProbeVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityMap {
    pub sigma2: f64,
    pub c1_budget: f64,
    pub origin: [f64; 3],
    pub entries: Vec<ParaboloidEntry>,
    pub max_sqrt_t_v: f64,
}

/// `0 < t < σ₂ |x|²`.
pub fn paraboloid_admits(sigma2: f64, x: [f64; 3], t: f64) -> bool {
    t > 0.0 && t < sigma2 * crate::geometry::dot3(x, x)
}

/// Records `√t |v(x, t)|` below the paraboloid and compares with `C₁`.
pub fn paraboloid_map(led: &TrajectoryLedger, sigma2: f64, probes: &[([f64; 3], f64)], c1_budget: f64, origin: [f64; 3], interp_order: usize) -> Result<RegularityMap> {
    let times = led.times();
    let mut cache: Vec<Option<LagrangeInterp>> = vec![None; times.len()];
    let mut entries = Vec::with_capacity(probes.len());
    let mut max_v: f64 = 0.0;
    for (x, t) in probes {
        let rel = led.grid.min_image(*x, origin);
        let admitted = paraboloid_admits(sigma2, rel, *t);
        if !admitted {
            entries.push(ParaboloidEntry { x: *x, t: *t, admitted, sqrt_t_v: None, verdict: ProbeVerdict::NotAdmitted });
            continue;
        }
        if *t < times[0] || *t > times[times.len() - 1] {
            return Err(LabError::CoverageGap { ledger_end: times[times.len() - 1], required: *t });
        }
        let i = times.partition_point(|s| *s <= *t).clamp(1, times.len() - 1) - 1;
        let h = times[i + 1] - times[i];
        let th = ((t - times[i]) / h).clamp(0.0, 1.0);
        let mut val = [0.0; 3];
        for (j, w) in [(i, 1.0 - th), (i + 1, th)] {
            if w == 0.0 {
                continue;
            }
            let it = cache[j].get_or_insert_with(|| snapshot_interp(&led.snapshots[j], interp_order));
            let mut out = [0.0; 4];
            it.eval(*x, &mut out);
            for c in 0..3 {
                val[c] += w * out[c];
            }
        }
        let m = t.sqrt() * norm3(val);
        max_v = max_v.max(m);
        let verdict = if m <= c1_budget { ProbeVerdict::FlaggedRegular } else { ProbeVerdict::Unresolved };
        entries.push(ParaboloidEntry { x: *x, t: *t, admitted, sqrt_t_v: Some(m), verdict });
    }
    Ok(RegularityMap { sigma2, c1_budget, origin, entries, max_sqrt_t_v: max_v })
}

/// `|Q_r| = (4π/3) r⁵`.
pub fn cylinder_volume(r: f64) -> f64 {
    ball_volume(r) * r * r
}
