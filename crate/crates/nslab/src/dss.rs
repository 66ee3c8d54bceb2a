//! Discretely self-similar data: extension from the fundamental annulus,
//! verification, the annulus-L³ / weak-L³ comparison and the μ-selection
//! iteration.
use crate::error::{LabError, Result};
use crate::fields::VectorFn;
use crate::geometry::{ball_rule, norm3, shell_rule, QuadratureSpec};
use crate::norms::{lp_from_samples, weak_lp_from_samples};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Field on the fundamental annulus `{1 ≤ |x| < λ}`.
#[derive(Clone)]
pub struct DssProfile {
    pub lambda: f64,
    pub annulus_field: Arc<dyn VectorFn>,
    pub smoothness: String,
    pub seam_tolerance: f64,
}

impl std::fmt::Debug for DssProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DssProfile")
            .field("lambda", &self.lambda)
            .field("smoothness", &self.smoothness)
            .field("seam_tolerance", &self.seam_tolerance)
            .finish()
    }
}

impl DssProfile {
    pub fn new(lambda: f64, annulus_field: Arc<dyn VectorFn>, smoothness: &str) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(LabError::InvalidArgument(format!("lambda = {lambda} must exceed 1")));
        }
        Ok(Self { lambda, annulus_field, smoothness: smoothness.to_string(), seam_tolerance: 1e-8 })
    }

    pub fn zero(lambda: f64) -> Result<Self> {
        Self::new(lambda, Arc::new(|_x: [f64; 3]| [0.0; 3]), "smooth")
    }

    /// `x/|x|²` on the annulus.
    pub fn inverse_radius(lambda: f64) -> Result<Self> {
        Self::new(lambda, Arc::new(crate::fields::presets::inverse_radius_field), "smooth")
    }

    /// Swirl `(−x₂, x₁, 0)/|x|²`: divergence-free and homogeneous of degree −1.
    pub fn swirl(lambda: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            lambda,
            Arc::new(move |x: [f64; 3]| {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                [-amplitude * x[1] / r2, amplitude * x[0] / r2, 0.0]
            }),
            "smooth",
        )
    }

    /// Largest seam mismatch `|f(λu) − λ⁻¹ f(u)|` over unit directions `u`,
    /// relative to the field scale on the seam.
    pub fn seam_defect(&self, n_dirs: usize) -> f64 {
        let dirs = crate::norms::sphere_directions(n_dirs);
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for u in dirs {
            let outer = self.annulus_field.eval(u.map(|c| c * self.lambda * (1.0 - 1e-14)));
            let inner = self.annulus_field.eval(u);
            for a in 0..3 {
                num = num.max((outer[a] - inner[a] / self.lambda).abs());
                den = den.max(inner[a].abs());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Fundamental-annulus index: `(m, λ^m x)` with `1 ≤ |λ^m x| < λ`.
pub fn annulus_index(lambda: f64, x: [f64; 3]) -> Option<(i32, [f64; 3])> {
    let r = norm3(x);
    if r == 0.0 || !r.is_finite() {
        return None;
    }
    let mut m = -(r.ln() / lambda.ln()).floor() as i32;
    let mut s = lambda.powi(m);
    for _ in 0..4 {
        let rr = r * s;
        if rr >= lambda {
            m -= 1;
        } else if rr < 1.0 {
            m += 1;
        } else {
            break;
        }
        s = lambda.powi(m);
    }
    Some((m, x.map(|c| c * s)))
}

/// DSS extension `v₀(x) = λ^m f(λ^m x)`.
#[derive(Clone, Debug)]
pub struct DssField {
    pub profile: DssProfile,
}

impl VectorFn for DssField {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        match annulus_index(self.profile.lambda, x) {
            None => [0.0; 3],
            Some((m, y)) => {
                let s = self.profile.lambda.powi(m);
                self.profile.annulus_field.eval(y).map(|c| c * s)
            }
        }
    }
}

pub fn extend_dss(profile: &DssProfile) -> Result<DssField> {
    let d = profile.seam_defect(64);
    if d > profile.seam_tolerance {
        return Err(LabError::SeamMismatch { defect: d, tol: profile.seam_tolerance });
    }
    Ok(DssField { profile: profile.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DssVerification {
    pub lambda: f64,
    pub samples: usize,
    pub max_defect: f64,
    pub worst_point: [f64; 3],
}

/// `max |v₀(x) − λv₀(λx)| / (max(|v₀(x)|, |λv₀(λx)|) + floor)` over random
/// points with `r_lo ≤ |x| ≤ r_hi / λ`.
pub fn verify_dss(
    v0: &dyn VectorFn,
    lambda: f64,
    sample_count: usize,
    r_lo: f64,
    r_hi: f64,
    seed: u64,
) -> Result<DssVerification> {
    if !(lambda > 1.0) || !(r_lo > 0.0) || r_hi / lambda <= r_lo {
        return Err(LabError::InvalidArgument("need lambda > 1 and 0 < r_lo < r_hi/lambda".into()));
    }
    if let Some(dr) = v0.domain_radius() {
        if r_hi > dr {
            return Err(LabError::DomainExceeded(format!("sample radius {r_hi} beyond represented {dr}")));
        }
    }
    let floor = 1e-300;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (0.0, [0.0; 3]);
    for _ in 0..sample_count {
        let x = random_point(&mut rng, r_lo, r_hi / lambda);
        let a = v0.eval(x);
        let b = v0.eval(x.map(|c| c * lambda)).map(|c| c * lambda);
        let num = norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
        let den = norm3(a).max(norm3(b)) + floor;
        let d = if num == 0.0 { 0.0 } else { num / den };
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(DssVerification { lambda, samples: sample_count, max_defect: best.0, worst_point: best.1 })
}

/// Log-uniform radius, uniform direction.
pub fn random_point(rng: &mut impl Rng, r_lo: f64, r_hi: f64) -> [f64; 3] {
    let r = (r_lo.ln() + rng.gen::<f64>() * (r_hi.ln() - r_lo.ln())).exp();
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    let s = (1.0 - z * z).sqrt();
    [r * s * phi.cos(), r * s * phi.sin(), r * z]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L3WeakCheck {
    pub annulus_l3: f64,
    pub global_weak_l3: f64,
    pub ratio: f64,
    /// Annuli `m ∈ [−periods, periods]` entering the weak norm.
    pub periods: i32,
}

/// `‖v₀‖_{L³(B_λ∖B₁)}` and the weak-L³ norm of the extension over
/// `λ^{−P} ≤ |x| < λ^{P+1}` (distribution function assembled from the
/// annulus samples by the DSS scaling).
pub fn l3_weak_equivalence_check(profile: &DssProfile, spec: &QuadratureSpec, periods: i32) -> Result<L3WeakCheck> {
    let rule = shell_rule([0.0; 3], 1.0, profile.lambda, spec);
    let vals: Vec<f64> = rule.nodes.iter().map(|x| norm3(profile.annulus_field.eval(*x))).collect();
    let annulus_l3 = lp_from_samples(&vals, &rule.weights, 3.0);
    let mut ev = Vec::with_capacity(vals.len() * (2 * periods as usize + 1));
    let mut ew = Vec::with_capacity(ev.capacity());
    for m in -periods..=periods {
        let s = profile.lambda.powi(m);
        let w = profile.lambda.powi(-3 * m);
        for (v, wt) in vals.iter().zip(&rule.weights) {
            ev.push(v * s);
            ew.push(wt * w);
        }
    }
    let global_weak_l3 = weak_lp_from_samples(&ev, &ew, 3.0);
    if !annulus_l3.is_finite() || !global_weak_l3.is_finite() {
        return Err(LabError::NonIntegrableProfile);
    }
    let ratio = if annulus_l3 == 0.0 { 0.0 } else { global_weak_l3 / annulus_l3 };
    Ok(L3WeakCheck { annulus_l3, global_weak_l3, ratio, periods })
}

/// Which breakpoints enter `μ = min(1/2, r_i/λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuIndexing {
    /// `i = 0..j`.
    IncludeR0,
    /// `i = 1..j`.
    FromR1,
}

/// How the recursion threshold ε relates to ε₀.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsilonMapping {
    /// ε = ε₀³.
    Cube,
    /// ε = ε₀.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuOptions {
    pub indexing: MuIndexing,
    pub epsilon_mapping: EpsilonMapping,
    pub mass_tol: f64,
    pub quad: QuadratureSpec,
}

impl Default for MuOptions {
    fn default() -> Self {
        Self {
            indexing: MuIndexing::IncludeR0,
            epsilon_mapping: EpsilonMapping::Cube,
            mass_tol: 1e-8,
            quad: QuadratureSpec::new(24, 16, 24),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSelection {
    pub epsilon0: f64,
    /// The threshold actually used in the recursion.
    pub epsilon: f64,
    pub breakpoints: Vec<f64>,
    /// Mass of `|v₀|³` on each `[r_i, r_{i+1}]`.
    pub increments: Vec<f64>,
    pub mu: f64,
    pub indexing: MuIndexing,
    pub epsilon_mapping: EpsilonMapping,
    /// True when the last step was capped because no mass remains.
    pub capped: bool,
}

impl MuSelection {
    pub fn steps(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

/// Radial `L³` mass of a DSS field between two radii.
pub struct RadialMass<'a> {
    field: &'a DssField,
    spec: QuadratureSpec,
}

impl<'a> RadialMass<'a> {
    pub fn new(field: &'a DssField, spec: QuadratureSpec) -> Self {
        Self { field, spec }
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let rule = shell_rule([0.0; 3], a, b, &self.spec);
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * norm3(self.field.eval(*x)).powi(3)).sum()
    }

    /// `∫_{a ≤ |x| ≤ b} |v₀|³`, split at the seams `λ^k`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let l = self.field.profile.lambda;
        let mut cuts = vec![a];
        let mut k = (a.ln() / l.ln()).floor() as i32 + 1;
        loop {
            let s = l.powi(k);
            if s >= b {
                break;
            }
            if s > a {
                cuts.push(s);
            }
            k += 1;
        }
        cuts.push(b);
        cuts.windows(2).map(|w| self.piece(w[0], w[1])).sum()
    }

    /// Mass of one period `1 ≤ |x| < λ`.
    pub fn period_mass(&self) -> f64 {
        self.piece(1.0, self.field.profile.lambda)
    }
}

/// Breakpoints `r_{i+1} = sup{r : ∫_{r_i ≤ |x| ≤ r}|v₀|³ ≤ ε/2}` from
/// `r_0 = 1/2` until `r_j ≥ 3λ/2`, and `μ = min(1/2, r_i/λ)`.
pub fn compute_mu(profile: &DssProfile, epsilon0: f64, opts: &MuOptions) -> Result<MuSelection> {
    if !(epsilon0 > 0.0) {
        return Err(LabError::InvalidArgument(format!("epsilon0 = {epsilon0} must be positive")));
    }
    let field = extend_dss(profile)?;
    let lambda = profile.lambda;
    let eps = match opts.epsilon_mapping {
        EpsilonMapping::Cube => epsilon0.powi(3),
        EpsilonMapping::Identity => epsilon0,
    };
    let half = 0.5 * eps;
    let rm = RadialMass::new(&field, opts.quad);
    let pm = rm.period_mass();
    let pm_fine = RadialMass::new(&field, opts.quad.finer()).period_mass();
    if !pm.is_finite() || !pm_fine.is_finite() || (pm_fine - pm).abs() > 0.1 * pm.max(pm_fine) {
        return Err(LabError::NonIntegrableProfile);
    }
    let target = 1.5 * lambda;
    let mut bps = vec![0.5];
    let mut incs = Vec::new();
    let mut capped = false;
    while *bps.last().unwrap() < target {
        let ri = *bps.last().unwrap();
        if pm == 0.0 {
            incs.push(rm.mass(ri, target));
            bps.push(target);
            capped = true;
            break;
        }
        // bracket the sup
        let mut lo = ri;
        let mut hi = ri * lambda;
        let mut guard = 0;
        while rm.mass(ri, hi) <= half {
            lo = hi;
            hi *= lambda;
            guard += 1;
            if guard > 200 {
                return Err(LabError::NonIntegrableProfile);
            }
        }
        // monotone bisection to the mass tolerance
        let mut mlo = rm.mass(ri, lo);
        let mut mhi = rm.mass(ri, hi);
        for _ in 0..200 {
            if mhi - mlo <= opts.mass_tol {
                break;
            }
            let mid = (lo * hi).sqrt();
            let mm = rm.mass(ri, mid);
            if mm <= half {
                lo = mid;
                mlo = mm;
            } else {
                hi = mid;
                mhi = mm;
            }
        }
        if lo <= ri {
            return Err(LabError::NonIntegrableProfile);
        }
        incs.push(mlo);
        bps.push(lo);
        if bps.len() > 10_000 {
            return Err(LabError::NonIntegrableProfile);
        }
    }
    let first = match opts.indexing {
        MuIndexing::IncludeR0 => 0,
        MuIndexing::FromR1 => 1,
    };
    let mu = bps[first..].iter().fold(0.5_f64, |m, r| m.min(r / lambda));
    Ok(MuSelection {
        epsilon0,
        epsilon: eps,
        breakpoints: bps,
        increments: incs,
        mu,
        indexing: opts.indexing,
        epsilon_mapping: opts.epsilon_mapping,
        capped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessCheck {
    pub samples: usize,
    pub threshold: f64,
    pub max_mass: f64,
    pub max_quadrature_error: f64,
    /// Largest mass relative to the threshold.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Check `∫_{B_{μ|x|}(x)} |v₀|³ ≤ ε₀³` at random `1 ≤ |x| ≤ λ`, allowing the
/// given relative quadrature slack.
pub fn mu_smallness_check(
    profile: &DssProfile,
    sel: &MuSelection,
    samples: usize,
    seed: u64,
    spec: &QuadratureSpec,
    slack: f64,
) -> Result<SmallnessCheck> {
    let field = extend_dss(profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 3]> = (0..samples).map(|_| random_point(&mut rng, 1.0, profile.lambda)).collect();
    let res: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|x| {
            let rad = sel.mu * norm3(*x);
            let f = |rule: &crate::geometry::PointRule| -> f64 {
                rule.nodes.iter().zip(&rule.weights).map(|(y, w)| w * norm3(field.eval(*y)).powi(3)).sum()
            };
            let a = f(&ball_rule(*x, rad, spec));
            let b = f(&ball_rule(*x, rad, &spec.coarser()));
            (a, (a - b).abs())
        })
        .collect();
    let max_mass = res.iter().fold(0.0_f64, |m, r| m.max(r.0));
    let max_err = res.iter().fold(0.0_f64, |m, r| m.max(r.1));
    let thr = sel.epsilon0.powi(3);
    Ok(SmallnessCheck {
        samples,
        threshold: thr,
        max_mass,
        max_quadrature_error: max_err,
        worst_ratio: if thr > 0.0 { max_mass / thr } else { 0.0 },
        holds: max_mass <= thr * (1.0 + slack),
    })
}
