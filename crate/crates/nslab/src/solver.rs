//! Dealiased pseudo-spectral Navier–Stokes stepper (ν = 1), trajectory
//! ledger, and local energy inequality residuals.
use crate::error::{LabError, Result};
use crate::geometry::dot3;
use crate::grid::{inverse_real, inverse_real_pair, GridSpec, LagrangeInterp, ScalarField, SpectralField, C64};
use crate::pressure::global_pressure;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViscousTreatment {
    /// Crank–Nicolson diffusion, Heun nonlinearity.
    CrankNicolson,
    /// Exact viscous integrating factor, Heun nonlinearity.
    IntegratingFactor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot every `cadence` steps (plus the first and last).
    pub cadence: usize,
    pub scheme: ViscousTreatment,
    pub cfl_limit: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 0.25, cadence: 10, scheme: ViscousTreatment::CrankNicolson, cfl_limit: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub velocity: SpectralField,
    pub pressure: ScalarField,
}

#[derive(Clone, Debug)]
pub struct TrajectoryLedger {
    pub grid: GridSpec,
    pub dt: f64,
    pub scheme: ViscousTreatment,
    pub snapshots: Vec<Snapshot>,
    /// Per-step series.
    pub step_times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
}

impl TrajectoryLedger {
    /// Ledger made of given snapshots only (energy series at snapshot times).
    pub fn from_snapshots(grid: GridSpec, dt: f64, scheme: ViscousTreatment, snapshots: Vec<Snapshot>) -> Result<Self> {
        for w in snapshots.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(LabError::InvalidArgument("snapshot times must increase".into()));
            }
        }
        let step_times = snapshots.iter().map(|s| s.time).collect();
        let energy = snapshots.iter().map(|s| s.velocity.energy()).collect();
        let dissipation = snapshots.iter().map(|s| s.velocity.dissipation()).collect();
        let mean = snapshots.iter().map(|s| s.velocity.mean()).collect();
        Ok(Self { grid, dt, scheme, snapshots, step_times, energy, dissipation, mean })
    }

    /// Ledger sampled from closed-form velocity and pressure.
    pub fn from_analytic(
        grid: GridSpec,
        times: &[f64],
        velocity: impl Fn([f64; 3], f64) -> [f64; 3],
        pressure: impl Fn([f64; 3], f64) -> f64,
    ) -> Result<Self> {
        let snaps = times
            .iter()
            .map(|t| {
                let mut p = ScalarField::from_fn(grid, |x| pressure(x, *t));
                p.time = *t;
                Snapshot { time: *t, velocity: SpectralField::from_fn(grid, |x| velocity(x, *t)).with_time(*t), pressure: p }
            })
            .collect();
        Self::from_snapshots(grid, 0.0, ViscousTreatment::IntegratingFactor, snaps)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map(|s| s.time).unwrap_or(0.0)
    }

    /// `max_t |E(t) + ∫₀ᵗ‖∇v‖² − E(0)| / E(0)` with the dissipation
    /// integrated by the trapezoid rule over steps.
    pub fn energy_defect(&self) -> f64 {
        let e0 = self.energy[0];
        if e0 == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for n in 1..self.energy.len() {
            acc += 0.5 * (self.step_times[n] - self.step_times[n - 1]) * (self.dissipation[n] + self.dissipation[n - 1]);
            worst = worst.max((self.energy[n] + acc - e0).abs());
        }
        worst / e0
    }

    pub fn momentum_drift(&self) -> f64 {
        let m0 = self.mean[0];
        self.mean.iter().fold(0.0_f64, |m, x| m.max((0..3).fold(0.0_f64, |a, c| a.max((x[c] - m0[c]).abs()))))
    }

    pub fn max_divergence(&self) -> f64 {
        self.snapshots.iter().fold(0.0_f64, |m, s| m.max(s.velocity.divergence_residual()))
    }

    /// Snapshot-wise difference `self − other` (same times and grid).
    pub fn difference(&self, other: &TrajectoryLedger) -> Result<TrajectoryLedger> {
        if self.snapshots.len() != other.snapshots.len() || self.grid != other.grid {
            return Err(LabError::InvalidArgument("ledgers do not match".into()));
        }
        let mut snaps = Vec::with_capacity(self.snapshots.len());
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            if (a.time - b.time).abs() > 1e-12 * a.time.abs().max(1.0) {
                return Err(LabError::InvalidArgument("snapshot times differ".into()));
            }
            let mut p = a.pressure.clone();
            p.coeffs.iter_mut().zip(&b.pressure.coeffs).for_each(|(x, y)| *x -= y);
            snaps.push(Snapshot { time: a.time, velocity: a.velocity.sub(&b.velocity).with_time(a.time), pressure: p });
        }
        TrajectoryLedger::from_snapshots(self.grid, self.dt, self.scheme, snaps)
    }
}

/// `P(v × ω)`, dealiased, zero mean; also returns `max |v|` on the grid.
pub fn nonlinear(v: &SpectralField) -> (SpectralField, f64) {
    let g = v.grid;
    let w = v.curl();
    let (v0, v1) = inverse_real_pair(&g, &v.comps[0], &v.comps[1]);
    let (v2, w0) = inverse_real_pair(&g, &v.comps[2], &w.comps[0]);
    let (w1, w2) = inverse_real_pair(&g, &w.comps[1], &w.comps[2]);
    let n = g.len();
    let mut c0 = vec![0.0; n];
    let mut c1 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    let mut vmax: f64 = 0.0;
    for i in 0..n {
        c0[i] = v1[i] * w2[i] - v2[i] * w1[i];
        c1[i] = v2[i] * w0[i] - v0[i] * w2[i];
        c2[i] = v0[i] * w1[i] - v1[i] * w0[i];
        vmax = vmax.max((v0[i] * v0[i] + v1[i] * v1[i] + v2[i] * v2[i]).sqrt());
    }
    let mut out = SpectralField::from_physical(g, &[c0, c1, c2]);
    out.dealias();
    for c in 0..3 {
        out.comps[c][0] = C64::new(0.0, 0.0);
    }
    (out.leray_project(), vmax)
}

/// One step of the configured scheme (no pressure).
pub fn advance(v: &SpectralField, dt: f64, scheme: ViscousTreatment, cfl_limit: f64) -> Result<SpectralField> {
    let g = v.grid;
    let (n0, vmax) = nonlinear(v);
    let cfl = vmax * dt / g.dx();
    if cfl > cfl_limit {
        return Err(LabError::CflViolation { cfl, limit: cfl_limit });
    }
    let mut star = SpectralField::zeros(g);
    let len = g.len();
    let k2: Vec<f64> = (0..len).map(|i| {
        let k = g.kvec(i);
        dot3(k, k)
    }).collect();
    match scheme {
        ViscousTreatment::CrankNicolson => {
            for i in 0..len {
                let a = 1.0 - 0.5 * dt * k2[i];
                let b = 1.0 / (1.0 + 0.5 * dt * k2[i]);
                for c in 0..3 {
                    star.comps[c][i] = (v.comps[c][i] * a + n0.comps[c][i] * dt) * b;
                }
            }
            let (n1, _) = nonlinear(&star);
            let mut out = SpectralField::zeros(g);
            for i in 0..len {
                let a = 1.0 - 0.5 * dt * k2[i];
                let b = 1.0 / (1.0 + 0.5 * dt * k2[i]);
                for c in 0..3 {
                    out.comps[c][i] = (v.comps[c][i] * a + (n0.comps[c][i] + n1.comps[c][i]) * (0.5 * dt)) * b;
                }
            }
            out.time = v.time + dt;
            Ok(out)
        }
        ViscousTreatment::IntegratingFactor => {
            for i in 0..len {
                let e = (-dt * k2[i]).exp();
                for c in 0..3 {
                    star.comps[c][i] = (v.comps[c][i] + n0.comps[c][i] * dt) * e;
                }
            }
            let (n1, _) = nonlinear(&star);
            let mut out = SpectralField::zeros(g);
            for i in 0..len {
                let e = (-dt * k2[i]).exp();
                for c in 0..3 {
                    out.comps[c][i] = v.comps[c][i] * e + (n0.comps[c][i] * e + n1.comps[c][i]) * (0.5 * dt);
                }
            }
            out.time = v.time + dt;
            Ok(out)
        }
    }
}

/// One step plus the pressure of the new state.
pub fn step(v: &SpectralField, dt: f64, scheme: ViscousTreatment) -> Result<(SpectralField, ScalarField)> {
    let out = advance(v, dt, scheme, 0.5)?;
    let p = global_pressure(&out);
    Ok((out, p))
}

/// Integrate from `v0` to `t_end`, snapshotting every `cadence` steps.
pub fn evolve(v0: &SpectralField, opts: &SolverOptions) -> Result<TrajectoryLedger> {
    let div = v0.divergence_residual();
    if div > 1e-10 {
        return Err(LabError::InvalidArgument(format!("initial data not divergence-free ({div:e})")));
    }
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.cadence == 0 {
        return Err(LabError::InvalidArgument("need dt > 0, t_end ≥ 0, cadence ≥ 1".into()));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let g = v0.grid;
    let mut v = v0.clone();
    v.dealias();
    let t0 = v0.time;
    v.time = t0;
    let mut led = TrajectoryLedger {
        grid: g,
        dt: opts.dt,
        scheme: opts.scheme,
        snapshots: vec![Snapshot { time: t0, velocity: v.clone(), pressure: global_pressure(&v) }],
        step_times: vec![t0],
        energy: vec![v.energy()],
        dissipation: vec![v.dissipation()],
        mean: vec![v.mean()],
    };
    for n in 1..=steps {
        v = advance(&v, opts.dt, opts.scheme, opts.cfl_limit)?;
        let t = t0 + n as f64 * opts.dt;
        v.time = t;
        let e = v.energy();
        if !e.is_finite() {
            return Err(LabError::NanGuard(t));
        }
        led.step_times.push(t);
        led.energy.push(e);
        led.dissipation.push(v.dissipation());
        led.mean.push(v.mean());
        if n % opts.cadence == 0 || n == steps {
            led.snapshots.push(Snapshot { time: t, velocity: v.clone(), pressure: global_pressure(&v) });
        }
    }
    Ok(led)
}

/// Weights `(snapshot, w)` integrating the piecewise-linear interpolant of
/// snapshot values over `[a, b]`.
pub fn window_weights(times: &[f64], a: f64, b: f64) -> Vec<(usize, f64)> {
    let mut w = vec![0.0; times.len()];
    for i in 0..times.len().saturating_sub(1) {
        let (t0, t1) = (times[i], times[i + 1]);
        let c = a.max(t0);
        let d = b.min(t1);
        if d <= c {
            continue;
        }
        let h = t1 - t0;
        w[i] += ((t1 - c).powi(2) - (t1 - d).powi(2)) / (2.0 * h);
        w[i + 1] += ((d - t0).powi(2) - (c - t0).powi(2)) / (2.0 * h);
    }
    w.into_iter().enumerate().filter(|(_, x)| *x != 0.0).collect()
}

/// Lagrange interpolant of `(v₁, v₂, v₃, π)` for a snapshot.
pub fn snapshot_interp(snap: &Snapshot, order: usize) -> LagrangeInterp {
    let [a, b, c] = snap.velocity.to_physical();
    LagrangeInterp::new(snap.velocity.grid, order, vec![a, b, c, snap.pressure.to_physical()])
}

/// `b(u) = exp(−u/(1−u))` on `[0, 1)`, zero beyond; with `b'` and `b''`.
pub fn bump_profile(u: f64) -> (f64, f64, f64) {
    if u >= 1.0 || u < 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 - u;
    let b = (-u / s).exp();
    let s2 = s * s;
    let b1 = -b / s2;
    let b2 = b * (1.0 / (s2 * s2) - 2.0 / (s2 * s));
    (b, b1, b2)
}

/// Gaussian damped compact profile `g(s) = e^{−16s}·b(s)`; with `g'`, `g''`.
pub fn damped_profile(s: f64) -> (f64, f64, f64) {
    let (b, b1, b2) = bump_profile(s);
    let e = (-16.0 * s).exp();
    (e * b, e * (b1 - 16.0 * b), e * (b2 - 32.0 * b1 + 256.0 * b))
}

/// `φ(x,t) = g(|x−x₀|²/R²)·g((t−t₀)²/τ²)` with `g` from [`damped_profile`]:
/// a Gaussian of width `R/4` (resp. `τ/4`) cut off smoothly at `R` (resp. `τ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub center_x: [f64; 3],
    pub center_t: f64,
    pub radius: f64,
    pub half_width: f64,
}

impl TestFunctionSpec {
    pub fn new(center_x: [f64; 3], center_t: f64, radius: f64, half_width: f64) -> Result<Self> {
        if !(radius > 0.0) || !(half_width > 0.0) {
            return Err(LabError::InvalidArgument("test function scales must be positive".into()));
        }
        Ok(Self { center_x, center_t, radius, half_width })
    }

    /// Spatial factor: value, gradient, Laplacian at displacement `d`.
    pub fn spatial(&self, d: [f64; 3]) -> (f64, [f64; 3], f64) {
        let r2 = self.radius * self.radius;
        let (b, b1, b2) = damped_profile(dot3(d, d) / r2);
        let g = d.map(|c| 2.0 * c / r2);
        let lap = b2 * dot3(g, g) + b1 * 6.0 / r2;
        (b, g.map(|c| b1 * c), lap)
    }

    /// Temporal factor and its derivative.
    pub fn temporal(&self, t: f64) -> (f64, f64) {
        let s = t - self.center_t;
        let w2 = self.half_width * self.half_width;
        let (b, b1, _) = damped_profile(s * s / w2);
        (b, b1 * 2.0 * s / w2)
    }

    pub fn t_support(&self) -> (f64, f64) {
        (self.center_t - self.half_width, self.center_t + self.half_width)
    }
}

/// Grid samples of the spatial factor.
struct SpatialSamples {
    phi: Vec<f64>,
    grad: [Vec<f64>; 3],
    lap: Vec<f64>,
}

fn spatial_samples(grid: &GridSpec, spec: &TestFunctionSpec) -> SpatialSamples {
    let len = grid.len();
    let mut s = SpatialSamples { phi: vec![0.0; len], grad: std::array::from_fn(|_| vec![0.0; len]), lap: vec![0.0; len] };
    for idx in 0..len {
        let (i, j, l) = grid.unravel(idx);
        let d = grid.min_image(grid.coords(i, j, l), spec.center_x);
        let (p, g, lap) = spec.spatial(d);
        s.phi[idx] = p;
        for a in 0..3 {
            s.grad[a][idx] = g[a];
        }
        s.lap[idx] = lap;
    }
    s
}

fn check_support(led: &TrajectoryLedger, spec: &TestFunctionSpec) -> Result<()> {
    let (a, b) = spec.t_support();
    let times = led.times();
    if times.len() < 3 {
        return Err(LabError::SupportViolation("ledger needs at least three snapshots".into()));
    }
    if a <= times[0].max(0.0) || b > *times.last().unwrap() {
        return Err(LabError::SupportViolation(format!("time support [{a}, {b}] not inside ({}, {}]", times[0], times.last().unwrap())));
    }
    if 2.0 * spec.radius >= led.grid.box_length {
        return Err(LabError::SupportViolation(format!("radius {} does not fit the box", spec.radius)));
    }
    Ok(())
}

/// Physical samples of `v` and `∇v` (`grad[i][j] = ∂_j v_i`).
fn physical_with_gradient(v: &SpectralField) -> ([Vec<f64>; 3], [[Vec<f64>; 3]; 3]) {
    let g = v.grid;
    let u = v.to_physical();
    let gc = v.gradient_coeffs();
    let mut grad: [[Vec<f64>; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Vec::new()));
    let flat: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    for pair in flat.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = inverse_real_pair(&g, &gc[pair[0].0][pair[0].1], &gc[pair[1].0][pair[1].1]);
            grad[pair[0].0][pair[0].1] = a;
            grad[pair[1].0][pair[1].1] = b;
        } else {
            grad[pair[0].0][pair[0].1] = inverse_real(&g, &gc[pair[0].0][pair[0].1]);
        }
    }
    (u, grad)
}

/// Terms of a local energy balance, already time-integrated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LeiReport {
    /// `∫|v|²φ(t)` at the ledger end.
    pub final_mass: f64,
    /// `2∫∫|∇v|²φ`.
    pub dissipation: f64,
    /// `∫∫|v|²(φ_t + Δφ)`.
    pub heat_term: f64,
    /// `∫∫(|v|² + 2π)v·∇φ` (with the drift terms in the perturbed form).
    pub flux_term: f64,
    /// `2∫∫u_j a_i ∂_j(u_iφ)`; zero in the unperturbed form.
    pub cross_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub residual: f64,
    /// Sum of absolute term sizes.
    pub scale: f64,
    /// Reported tolerance `10·dt²·t·scale`.
    pub tol: f64,
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    let mut s = 0.0;
    for n in 1..times.len() {
        s += 0.5 * (times[n] - times[n - 1]) * (vals[n] + vals[n - 1]);
    }
    s
}

fn lei_core(u_led: &TrajectoryLedger, a_led: Option<&TrajectoryLedger>, spec: &TestFunctionSpec) -> Result<LeiReport> {
    check_support(u_led, spec)?;
    if let Some(a) = a_led {
        if a.snapshots.len() != u_led.snapshots.len() {
            return Err(LabError::InvalidArgument("a-trajectory does not match the ledger".into()));
        }
    }
    let g = u_led.grid;
    let sp = spatial_samples(&g, spec);
    let dv = g.volume() / g.len() as f64;
    let times = u_led.times();
    let m = times.len();
    let mut heat = vec![0.0; m];
    let mut flux = vec![0.0; m];
    let mut diss = vec![0.0; m];
    let mut cross = vec![0.0; m];
    let mut final_mass = 0.0;
    for (n, snap) in u_led.snapshots.iter().enumerate() {
        let (ft, ftt) = spec.temporal(snap.time);
        let last = n + 1 == m;
        if ft == 0.0 && ftt == 0.0 && !last {
            continue;
        }
        let (u, du) = physical_with_gradient(&snap.velocity);
        let p = snap.pressure.to_physical();
        let a_phys = a_led.map(|a| a.snapshots[n].velocity.to_physical());
        let (mut h, mut f, mut d, mut c, mut fm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for idx in 0..g.len() {
            let phi = sp.phi[idx];
            if phi == 0.0 {
                continue;
            }
            let uu = [u[0][idx], u[1][idx], u[2][idx]];
            let u2 = dot3(uu, uu);
            let gphi = [sp.grad[0][idx], sp.grad[1][idx], sp.grad[2][idx]];
            fm += u2 * phi;
            h += u2 * (phi * ftt + sp.lap[idx] * ft);
            let mut gn = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    gn += du[i][j][idx] * du[i][j][idx];
                }
            }
            d += gn * phi * ft;
            let drift = match &a_phys {
                Some(a) => [a[0][idx], a[1][idx], a[2][idx]],
                None => [0.0; 3],
            };
            // (|u|²(u + a) + 2p u)·∇φ
            let carrier = [uu[0] + drift[0], uu[1] + drift[1], uu[2] + drift[2]];
            f += (u2 * dot3(carrier, gphi) + 2.0 * p[idx] * dot3(uu, gphi)) * ft;
            if a_phys.is_some() {
                // u_j a_i ∂_j(u_i φ)
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += uu[j] * drift[i] * (du[i][j][idx] * phi + uu[i] * gphi[j]);
                    }
                }
                c += 2.0 * s * ft;
            }
        }
        heat[n] = h * dv;
        flux[n] = f * dv;
        diss[n] = 2.0 * d * dv;
        cross[n] = c * dv;
        if last {
            final_mass = fm * dv * ft;
        }
    }
    let heat_term = trapezoid(&times, &heat);
    let flux_term = trapezoid(&times, &flux);
    let dissipation = trapezoid(&times, &diss);
    let cross_term = trapezoid(&times, &cross);
    let lhs = final_mass + dissipation;
    let rhs = heat_term + flux_term + cross_term;
    let scale = final_mass.abs() + dissipation.abs() + heat_term.abs() + flux_term.abs() + cross_term.abs();
    let t = times[m - 1] - times[0];
    Ok(LeiReport {
        final_mass,
        dissipation,
        heat_term,
        flux_term,
        cross_term,
        lhs,
        rhs,
        residual: rhs - lhs,
        scale,
        tol: 10.0 * u_led.dt * u_led.dt * t * scale,
    })
}

/// `RHS − LHS` of the local energy inequality for a test function.
pub fn local_energy_residual(led: &TrajectoryLedger, spec: &TestFunctionSpec) -> Result<LeiReport> {
    lei_core(led, None, spec)
}

/// Perturbed form for `u` driven by the strong solution `a`.
pub fn perturbed_local_energy_residual(u_led: &TrajectoryLedger, a_led: &TrajectoryLedger, spec: &TestFunctionSpec) -> Result<LeiReport> {
    lei_core(u_led, Some(a_led), spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoRouteCheck {
    /// `R_pert(u) + R(a) − R(a + u)`.
    pub route_residuals: f64,
    /// Weak forms of the `a` and `u` equations tested with `2uφ` and `2aφ`.
    pub route_pairing: f64,
    pub defect: f64,
}

/// The perturbed and unperturbed balances differ by the weak forms of the
/// two equations; evaluate that difference both ways.
pub fn lei_two_route_check(u_led: &TrajectoryLedger, a_led: &TrajectoryLedger, v_led: &TrajectoryLedger, spec: &TestFunctionSpec) -> Result<TwoRouteCheck> {
    let r_u = perturbed_local_energy_residual(u_led, a_led, spec)?;
    let r_a = local_energy_residual(a_led, spec)?;
    let r_v = local_energy_residual(v_led, spec)?;
    let route_residuals = r_u.residual + r_a.residual - r_v.residual;

    let g = u_led.grid;
    let sp = spatial_samples(&g, spec);
    let dv = g.volume() / g.len() as f64;
    let times = u_led.times();
    let m = times.len();
    let mut vals = vec![0.0; m];
    let mut at_end = 0.0;
    for n in 0..m {
        let (ft, ftt) = spec.temporal(times[n]);
        let last = n + 1 == m;
        if ft == 0.0 && ftt == 0.0 && !last {
            continue;
        }
        let (u, du) = physical_with_gradient(&u_led.snapshots[n].velocity);
        let (a, da) = physical_with_gradient(&a_led.snapshots[n].velocity);
        let p = u_led.snapshots[n].pressure.to_physical();
        let pa = a_led.snapshots[n].pressure.to_physical();
        let mut s = 0.0;
        let mut e = 0.0;
        for idx in 0..g.len() {
            let phi = sp.phi[idx];
            if phi == 0.0 {
                continue;
            }
            let uu = [u[0][idx], u[1][idx], u[2][idx]];
            let aa = [a[0][idx], a[1][idx], a[2][idx]];
            let gphi = [sp.grad[0][idx], sp.grad[1][idx], sp.grad[2][idx]];
            let au = dot3(aa, uu);
            e += au * phi;
            // −2 a·u φ_t
            let mut q = -2.0 * au * phi * ftt;
            // 2[∇a:∇(uφ) + ∇u:∇(aφ)]
            let mut visc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    visc += da[i][j][idx] * (du[i][j][idx] * phi + uu[i] * gphi[j]);
                    visc += du[i][j][idx] * (da[i][j][idx] * phi + aa[i] * gphi[j]);
                }
            }
            let mut adv = 0.0;
            for i in 0..3 {
                let mut a_grad_a = 0.0;
                let mut u_eq = 0.0;
                for j in 0..3 {
                    a_grad_a += aa[j] * da[i][j][idx];
                    u_eq += (aa[j] + uu[j]) * du[i][j][idx] + uu[j] * da[i][j][idx];
                }
                adv += a_grad_a * uu[i] + u_eq * aa[i];
            }
            q += (2.0 * visc + 2.0 * adv * phi) * ft;
            q -= 2.0 * (pa[idx] * dot3(uu, gphi) + p[idx] * dot3(aa, gphi)) * ft;
            s += q;
        }
        vals[n] = s * dv;
        if last {
            at_end = 2.0 * e * dv * ft;
        }
    }
    let route_pairing = at_end + trapezoid(&times, &vals);
    Ok(TwoRouteCheck { route_residuals, route_pairing, defect: (route_residuals - route_pairing).abs() })
}
