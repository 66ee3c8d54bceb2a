//! Pressure: global Riesz composition, the near/far kernel split around a
//! ball, and the a priori pressure bound over short times.
use crate::error::{LabError, Result};
use crate::fields::presets::smooth_step;
use crate::geometry::{ball_rule, dot3, norm3, shell_rule, sub3, QuadratureSpec};
use crate::grid::{forward_real, forward_real_pair, inverse_real3, GridSpec, LagrangeInterp, ScalarField, SpectralField, C64};
use crate::norms::{data_quantity_nr_grid, sigma_schedule, uloc_norm_grid};
use crate::solver::{window_weights, TrajectoryLedger};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Index pairs of the six stress components.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn pair_weight(p: usize) -> f64 {
    let (i, j) = PAIRS[p];
    if i == j {
        1.0
    } else {
        2.0
    }
}

/// Physical samples of `v_i v_j` in `PAIRS` order.
pub fn stress_samples(v: &SpectralField) -> [Vec<f64>; 6] {
    let u = v.to_physical();
    std::array::from_fn(|p| {
        let (i, j) = PAIRS[p];
        u[i].iter().zip(&u[j]).map(|(a, b)| a * b).collect()
    })
}

/// Dealiased coefficients of a six-component stress given by samples.
pub fn stress_coeffs_from_samples(grid: &GridSpec, s: &[Vec<f64>; 6]) -> [Vec<C64>; 6] {
    let mask = grid.dealias_mask();
    let (a, b) = forward_real_pair(grid, &s[0], &s[1]);
    let (c, d) = forward_real_pair(grid, &s[2], &s[3]);
    let (e, f) = forward_real_pair(grid, &s[4], &s[5]);
    let mut out = [a, b, c, d, e, f];
    for o in out.iter_mut() {
        for (z, keep) in o.iter_mut().zip(&mask) {
            if !keep {
                *z = C64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// `−k_i k_j ŝ_ij / |k|²` (the composition `R_i R_j`), zero mean.
pub fn riesz_stress(grid: &GridSpec, s: &[Vec<C64>; 6]) -> Vec<C64> {
    (0..grid.len())
        .map(|idx| {
            let k = grid.kvec(idx);
            let k2 = dot3(k, k);
            if k2 == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let mut acc = C64::new(0.0, 0.0);
            for (p, &(i, j)) in PAIRS.iter().enumerate() {
                acc += s[p][idx] * (pair_weight(p) * k[i] * k[j]);
            }
            -acc / k2
        })
        .collect()
}

/// Mean-zero pressure with `−Δπ = ∂_i∂_j(v_i v_j)` (dealiased products).
pub fn global_pressure(v: &SpectralField) -> ScalarField {
    let s = stress_coeffs_from_samples(&v.grid, &stress_samples(v));
    let coeffs = riesz_stress(&v.grid, &s);
    ScalarField { grid: v.grid, coeffs, gauge: crate::grid::Gauge::MeanZero, time: v.time }
}

/// Relative spectral residual of `−Δπ − ∂_i∂_j(v_i v_j)` away from `k = 0`.
pub fn poisson_residual(v: &SpectralField, p: &ScalarField) -> f64 {
    let s = stress_coeffs_from_samples(&v.grid, &stress_samples(v));
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for idx in 1..v.grid.len() {
        let k = v.grid.kvec(idx);
        let k2 = dot3(k, k);
        let mut rhs = C64::new(0.0, 0.0);
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            rhs -= s[q][idx] * (pair_weight(q) * k[i] * k[j]);
        }
        num = num.max((p.coeffs[idx] * k2 - rhs).norm());
        den = den.max(rhs.norm());
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// `K_ij(x) = (3x_i x_j/|x|² − δ_ij)/(4π|x|³)`.
pub fn kernel_k(x: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let r2 = dot3(x, x);
    if r2 == 0.0 {
        return Err(LabError::SingularPoint);
    }
    Ok(kernel_unchecked(x, r2))
}

#[inline]
fn kernel_unchecked(x: [f64; 3], r2: f64) -> [[f64; 3]; 3] {
    let r = r2.sqrt();
    let c = 1.0 / (4.0 * PI * r2 * r);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d = if i == j { 1.0 } else { 0.0 };
            c * (3.0 * x[i] * x[j] / r2 - d)
        })
    })
}

/// `K(z):S` for a stress in `PAIRS` order.
#[inline]
fn kernel_contract(z: [f64; 3], s: &[f64; 6]) -> f64 {
    let r2 = dot3(z, z);
    let r = r2.sqrt();
    let c = 1.0 / (4.0 * PI * r2 * r);
    let tr = s[0] + s[3] + s[5];
    let q = z[0] * z[0] * s[0]
        + z[1] * z[1] * s[3]
        + z[2] * z[2] * s[5]
        + 2.0 * (z[0] * z[1] * s[1] + z[0] * z[2] * s[2] + z[1] * z[2] * s[4]);
    c * (3.0 * q / r2 - tr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Nodes in `B_r(x₀)` where the parts are evaluated.
    pub targets: QuadratureSpec,
    /// Rule for the near shell of the far integral.
    pub near: QuadratureSpec,
    /// Width of the cutoff transition outside `B_{2r}`; default `max(r, 8 dx)`.
    pub cutoff_width: Option<f64>,
    /// Interpolation order for the stress on the near shell.
    pub interp_order: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            targets: QuadratureSpec::new(3, 4, 6),
            near: QuadratureSpec::new(48, 24, 48),
            cutoff_width: None,
            interp_order: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureDecomposition {
    pub center: [f64; 3],
    pub radius: f64,
    pub time: f64,
    pub box_length: f64,
    /// Evaluation nodes in `B_r(x₀)` and their weights.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub p_global: Vec<f64>,
    pub p_loc: Vec<f64>,
    pub p_far: Vec<f64>,
    /// Mean-square optimal constant.
    pub gauge_c: f64,
    pub max_deviation: f64,
    pub rms_deviation: f64,
    /// `max |π|` on the nodes, for relative statements.
    pub pressure_scale: f64,
    /// Bound on the far field dropped outside the box.
    pub tail_estimate: f64,
    /// `∫ K` over the near shell relative to `∫ |K|`.
    pub kernel_mean_defect: f64,
    /// Cutoff `ψ`: 1 inside `cutoff_inner`, 0 outside `cutoff_outer`.
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
}

fn cutoff_psi(d: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smooth_step((d - inner) / (outer - inner))
}

/// Split of the pressure on `B_r(x₀)` into `π_loc + π_far + c`.
pub fn decompose_pressure(v: &SpectralField, x0: [f64; 3], r: f64, opts: &DecomposeOptions) -> Result<PressureDecomposition> {
    let grid = v.grid;
    if !(r > 0.0) {
        return Err(LabError::InvalidArgument(format!("radius {r} must be positive")));
    }
    let h = grid.dx();
    let w = opts.cutoff_width.unwrap_or(r.max(8.0 * h));
    let psi_in = 2.0 * r;
    let psi_out = psi_in + w;
    // near/far split of the far integrand
    let mid_in = psi_out;
    let mid_out = mid_in + (4.0 * h).max(2.0 * r);
    if 2.0 * psi_out.max(3.0 * r) > grid.box_length || 2.0 * mid_out > grid.box_length {
        return Err(LabError::BallTooLarge { radius: mid_out, box_length: grid.box_length });
    }
    let chi_mid = |d: f64| 1.0 - smooth_step((d - mid_in) / (mid_out - mid_in));

    let stress = stress_samples(v);
    let n = grid.n();
    let rel = |i: usize, j: usize, l: usize| grid.min_image(grid.coords(i, j, l), x0);

    // local part: Riesz(ψ vv); the −|v|²/3 terms cancel where ψ = 1
    let mut psi_s: [Vec<f64>; 6] = stress.clone();
    let psi_grid: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let (i, j, l) = grid.unravel(idx);
            cutoff_psi(norm3(rel(i, j, l)), psi_in, psi_out)
        })
        .collect();
    for comp in psi_s.iter_mut() {
        comp.iter_mut().zip(&psi_grid).for_each(|(s, p)| *s *= p);
    }
    let loc_hat = riesz_stress(&grid, &stress_coeffs_unmasked(&grid, &psi_s));
    let loc_ms = crate::grid::ModeSum::new(&grid, &[&loc_hat]);
    let glob = global_pressure(v);
    let glob_ms = glob.mode_sum();

    let trule = ball_rule(x0, r, &opts.targets);
    let points = trule.nodes.clone();

    // near shell: quadrature with interpolated stress
    let interp = LagrangeInterp::new(grid, opts.interp_order.min(n), stress.to_vec());
    let nrule = shell_rule(x0, psi_in, mid_out, &opts.near);
    let near_nodes: Vec<([f64; 3], [f64; 6])> = nrule
        .nodes
        .par_iter()
        .zip(&nrule.weights)
        .map(|(y, wt)| {
            let d = norm3(sub3(*y, x0));
            let f = wt * (1.0 - cutoff_psi(d, psi_in, psi_out)) * chi_mid(d);
            let mut s = [0.0; 6];
            interp.eval(grid.wrap(*y), &mut s);
            (*y, s.map(|c| c * f))
        })
        .filter(|(_, s)| s.iter().any(|c| *c != 0.0))
        .collect();
    // far cells
    let vol = h * h * h;
    let far_cells: Vec<([f64; 3], [f64; 6])> = (0..grid.len())
        .filter_map(|idx| {
            let (i, j, l) = grid.unravel(idx);
            let z = rel(i, j, l);
            let f = 1.0 - chi_mid(norm3(z));
            if f == 0.0 {
                return None;
            }
            let s: [f64; 6] = std::array::from_fn(|p| stress[p][idx] * f * vol);
            Some((crate::geometry::add3(x0, z), s))
        })
        .collect();
    let kernel_sum = |x: [f64; 3]| -> f64 {
        let a: f64 = near_nodes.iter().map(|(y, s)| kernel_contract(sub3(x, *y), s)).sum();
        let b: f64 = far_cells.iter().map(|(y, s)| kernel_contract(sub3(x, *y), s)).sum();
        a + b
    };
    let anchor = kernel_sum(x0);
    let vals: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|x| {
            let mut o = [0.0];
            glob_ms.eval(*x, &mut o);
            let pg = o[0];
            loc_ms.eval(*x, &mut o);
            (pg, o[0], kernel_sum(*x) - anchor)
        })
        .collect();
    let p_global: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let p_loc: Vec<f64> = vals.iter().map(|v| v.1).collect();
    let p_far: Vec<f64> = vals.iter().map(|v| v.2).collect();
    let wsum = trule.total_weight();
    let gauge_c = vals.iter().zip(&trule.weights).map(|(v, w)| w * (v.0 - v.1 - v.2)).sum::<f64>() / wsum;
    let dev: Vec<f64> = vals.iter().map(|v| v.0 - v.1 - v.2 - gauge_c).collect();
    let max_deviation = dev.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let rms_deviation = (dev.iter().zip(&trule.weights).map(|(d, w)| w * d * d).sum::<f64>() / wsum).sqrt();
    let pressure_scale = p_global.iter().fold(0.0_f64, |m, p| m.max(p.abs()));

    // p.v. self-consistency: K has zero mean on the near shell
    let mut km = [0.0; 6];
    let mut ka = 0.0;
    for (y, wt) in nrule.nodes.iter().zip(&nrule.weights) {
        let z = sub3(*y, x0);
        let k = kernel_unchecked(z, dot3(z, z));
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            km[p] += wt * k[i][j];
        }
        ka += wt * k[0][0].abs();
    }
    let kernel_mean_defect = km.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / ka;
    if kernel_mean_defect > 1e-8 {
        return Err(LabError::SingularQuadrature(format!("kernel shell mean {kernel_mean_defect:e}")));
    }

    let uloc = if v.max_coeff() == 0.0 || grid.box_length < 2.0 { 0.0 } else { uloc_norm_grid(v, 2.0, 1.0)?.value };
    let tail_estimate = 9.0 * r * uloc * uloc / (PI * 0.5 * grid.box_length);

    Ok(PressureDecomposition {
        center: x0,
        radius: r,
        time: v.time,
        box_length: grid.box_length,
        points,
        weights: trule.weights,
        p_global,
        p_loc,
        p_far,
        gauge_c,
        max_deviation,
        rms_deviation,
        pressure_scale,
        tail_estimate,
        kernel_mean_defect,
        cutoff_inner: psi_in,
        cutoff_outer: psi_out,
    })
}

/// Stress coefficients without the dealias mask (for non-band-limited
/// products such as `ψ v⊗v`).
fn stress_coeffs_unmasked(grid: &GridSpec, s: &[Vec<f64>; 6]) -> [Vec<C64>; 6] {
    let (a, b) = forward_real_pair(grid, &s[0], &s[1]);
    let (c, d) = forward_real_pair(grid, &s[2], &s[3]);
    let (e, f) = forward_real_pair(grid, &s[4], &s[5]);
    [a, b, c, d, e, f]
}

/// Physical samples of a scalar built from `v` (used by callers that need
/// `|v|²` consistent with the stress samples).
pub fn kinetic_density(v: &SpectralField) -> Vec<f64> {
    let u = inverse_real3(&v.grid, [&v.comps[0], &v.comps[1], &v.comps[2]]);
    (0..v.grid.len()).map(|i| u[0][i] * u[0][i] + u[1][i] * u[1][i] + u[2][i] * u[2][i]).collect()
}

/// Scalar field of `|v|²` (dealiased).
pub fn kinetic_field(v: &SpectralField) -> ScalarField {
    let mut c = forward_real(&v.grid, &kinetic_density(v));
    let mask = v.grid.dealias_mask();
    c.iter_mut().zip(&mask).for_each(|(z, k)| {
        if !k {
            *z = C64::new(0.0, 0.0)
        }
    });
    ScalarField { grid: v.grid, coeffs: c, gauge: crate::grid::Gauge::Absolute, time: v.time }
}

/// `2/s + 3/q = 3` with `q ∈ (1, 3]`.
pub fn check_pressure_exponents(s: f64, q: f64) -> Result<()> {
    if !(q > 1.0 && q <= 3.0) || !(s >= 1.0) || (2.0 / s + 3.0 / q - 3.0).abs() > 1e-12 {
        return Err(LabError::AdmissibilityViolation { s, q });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureAprioriReport {
    pub r: f64,
    pub s: f64,
    pub q: f64,
    pub n_r: f64,
    pub sigma: f64,
    pub horizon: f64,
    /// `sup_{x₀} (1/r)‖π − (π)_{B_r(x₀)}(t)‖_{L^s(0,σr²; L^q(B_r(x₀)))}`.
    pub lhs: f64,
    pub argmax_center: [f64; 3],
    pub centers: usize,
    /// `lhs / N_r` (0 when both vanish).
    pub measured_constant: f64,
    pub budget: Option<f64>,
    pub over_budget: Option<bool>,
}

/// Measured constant of the local pressure bound over a lattice of centres.
/// The gauge `c_{x₀,r}(t)` is the ball mean.
pub fn pressure_apriori_check(
    led: &TrajectoryLedger,
    r: f64,
    s: f64,
    q: f64,
    c0: f64,
    centers: &[[f64; 3]],
    quad: &QuadratureSpec,
    budget: Option<f64>,
) -> Result<PressureAprioriReport> {
    check_pressure_exponents(s, q)?;
    let g = led.grid;
    if 2.0 * r > g.box_length {
        return Err(LabError::BallTooLarge { radius: r, box_length: g.box_length });
    }
    let first = &led.snapshots[0];
    let n_r = data_quantity_nr_grid(&first.velocity, r)?.value;
    let sigma = sigma_schedule(n_r, c0);
    let horizon = sigma * r * r;
    let t0 = first.time;
    if led.t_end() - t0 < horizon * (1.0 - 1e-12) {
        return Err(LabError::CoverageGap { ledger_end: led.t_end(), required: t0 + horizon });
    }
    let tw = window_weights(&led.times(), t0, t0 + horizon);
    let interps: Vec<(f64, LagrangeInterp)> =
        tw.iter().map(|(n, w)| (*w, LagrangeInterp::new(g, 8, vec![led.snapshots[*n].pressure.to_physical()]))).collect();
    let per_center: Vec<f64> = centers
        .par_iter()
        .map(|x0| {
            let rule = ball_rule(*x0, r, quad);
            let vol = rule.total_weight();
            let mut acc = 0.0;
            let mut vals = vec![0.0; rule.len()];
            for (w, it) in &interps {
                let mut o = [0.0];
                for (v, x) in vals.iter_mut().zip(&rule.nodes) {
                    it.eval(*x, &mut o);
                    *v = o[0];
                }
                let mean = vals.iter().zip(&rule.weights).map(|(v, w)| v * w).sum::<f64>() / vol;
                let lq: f64 = vals.iter().zip(&rule.weights).map(|(v, w)| w * (v - mean).abs().powf(q)).sum();
                acc += w * lq.powf(s / q);
            }
            acc.powf(1.0 / s) / r
        })
        .collect();
    let mut best = 0;
    for (i, v) in per_center.iter().enumerate() {
        if *v > per_center[best] {
            best = i;
        }
    }
    let lhs = per_center.get(best).copied().unwrap_or(0.0);
    let measured_constant = if lhs == 0.0 { 0.0 } else { lhs / n_r };
    Ok(PressureAprioriReport {
        r,
        s,
        q,
        n_r,
        sigma,
        horizon,
        lhs,
        argmax_center: centers.get(best).copied().unwrap_or([0.0; 3]),
        centers: centers.len(),
        measured_constant,
        budget,
        over_budget: budget.map(|b| measured_constant > b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let k = kernel_k([1.0, 0.0, 0.0]).unwrap();
        assert!((k[0][0] - 2.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((k[1][1] + 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(k[0][1], 0.0);
        assert!(matches!(kernel_k([0.0; 3]), Err(LabError::SingularPoint)));
        let x = [0.3, -1.2, 0.7];
        let a = kernel_k(x).unwrap();
        let b = kernel_k(x.map(|c| 2.0 * c)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] / 8.0 - b[i][j]).abs() < 1e-15);
            }
        }
        assert!((a[0][0] + a[1][1] + a[2][2]).abs() < 1e-15);
    }

    #[test]
    fn single_mode_pressure() {
        let g = GridSpec::periodic_2pi(16);
        let v = SpectralField::from_fn(g, |x| [x[1].sin(), x[0].sin(), 0.0]);
        let p = global_pressure(&v);
        let want = ScalarField::from_fn(g, |x| x[0].cos() * x[1].cos());
        assert!(p.max_diff(&want) < 1e-14);
        assert!(poisson_residual(&v, &p) < 1e-12);
        let v = SpectralField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        assert!(global_pressure(&v).coeffs.iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn pressure_exponents() {
        assert!(check_pressure_exponents(2.0, 1.5).is_ok());
        assert!(check_pressure_exponents(1.0, 3.0).is_ok());
        assert_eq!(check_pressure_exponents(2.0, 2.0), Err(LabError::AdmissibilityViolation { s: 2.0, q: 2.0 }));
    }
}
