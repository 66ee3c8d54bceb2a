//! The twelve acceptance criteria, each with its stated tolerance. One line
//! per criterion is printed (`--nocapture` to see them); the test fails if any
//! criterion fails.

use nslab::ckn::*;
use nslab::cli::cmd_pipeline;
use nslab::config::ExperimentConfig;
use nslab::dss::*;
use nslab::fields::{presets, Magnitude, ScaledVector, VectorFn};
use nslab::geometry::{AnnulusDecomposition, ParabolicCylinder, QuadratureSpec};
use nslab::grid::{GridSpec, ScalarField, SpectralField};
use nslab::localization::{bogovskii_correct, BogovskiiOptions, CutoffSpec};
use nslab::norms::{herz_norm, HerzFlavor, HerzParams, NormContext};
use nslab::pressure::{decompose_pressure, global_pressure, pressure_apriori_check, DecomposeOptions};
use nslab::semigroup::*;
use nslab::solver::*;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

struct Sheet {
    lines: Vec<(usize, bool, String)>,
}

impl Sheet {
    fn record(&mut self, id: usize, parts: Vec<(bool, String)>) {
        let ok = parts.iter().all(|p| p.0);
        let detail: Vec<String> = parts.iter().map(|(p, s)| if *p { s.clone() } else { format!("{s} [FAIL]") }).collect();
        let line = format!("criterion {id:>2}: {} | {}", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
        println!("{line}");
        self.lines.push((id, ok, line));
    }
}

fn le(label: &str, value: f64, budget: f64) -> (bool, String) {
    (value <= budget, format!("{label} = {value:.3e} (<= {budget:.0e})"))
}

fn within(label: &str, value: f64, target: f64, rel: f64) -> (bool, String) {
    let d = (value / target - 1.0).abs();
    (d <= rel, format!("{label} = {value:.6} (target {target:.6} within {:.0}%)", rel * 100.0))
}

fn tg3(g: GridSpec, a: f64) -> SpectralField {
    SpectralField::from_fn(g, |x| [a * x[0].sin() * x[1].cos() * x[2].cos(), -a * x[0].cos() * x[1].sin() * x[2].cos(), 0.0])
}

fn tg_velocity(x: [f64; 3], t: f64) -> [f64; 3] {
    let d = (-2.0 * t).exp();
    [d * x[0].sin() * x[1].cos(), -d * x[0].cos() * x[1].sin(), 0.0]
}

fn tg_pressure(x: [f64; 3], t: f64) -> f64 {
    0.25 * (-4.0 * t).exp() * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos())
}

fn times(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

fn c1_spectral(s: &mut Sheet) {
    let t0 = Instant::now();
    let g = GridSpec::periodic_2pi(32);
    let v = SpectralField::from_fn(g, |x| {
        [
            (x[1] + 2.0 * x[2]).sin() + 0.3 * x[0].cos(),
            (3.0 * x[0]).cos() * x[2].sin() + x[1].sin(),
            (x[0] - x[1]).sin() * (2.0 * x[2]).cos(),
        ]
    });
    let p = v.leray_project();
    let idem = p.leray_project().max_diff(&p) / p.max_coeff();
    let orth = p.inner(&v.sub(&p)).abs() / v.inner(&v);
    let mode = SpectralField::from_fn(g, |x| [0.0, 0.0, x[0].sin()]);
    let heat = heat_flow(&mode, 1.0).unwrap().max_diff(&mode.scaled((-1.0f64).exp()));
    let comp = heat_flow(&heat_flow(&p, 0.13).unwrap(), 0.29).unwrap().max_diff(&heat_flow(&p, 0.42).unwrap());
    let secs = t0.elapsed().as_secs_f64();
    s.record(
        1,
        vec![
            le("Leray idempotence", idem, 1e-12),
            le("orthogonality", orth, 1e-12),
            le("heat e^-1 factor", heat, 1e-10),
            le("composition", comp, 1e-13),
            le("seconds at N=32", secs, 1.0),
        ],
    );
}

fn c2_pressure(s: &mut Sheet) {
    let g = GridSpec::periodic_2pi(32);
    let v = SpectralField::from_fn(g, |x| [x[1].sin(), x[0].sin(), 0.0]);
    let oracle = global_pressure(&v).max_diff(&ScalarField::from_fn(g, |x| x[0].cos() * x[1].cos()));
    let mut rel = Vec::new();
    let mut secs = 0.0;
    for (l, n) in [(16.0, 64), (32.0, 128)] {
        let g = GridSpec::new(l * PI, n, 2.0 / 3.0).unwrap();
        let v = SpectralField::from_fn(g, |x| [x[1].sin(), x[0].sin(), 0.0]);
        let t0 = Instant::now();
        let d = decompose_pressure(&v, [0.0; 3], PI / 4.0, &DecomposeOptions::default()).unwrap();
        if n == 64 {
            secs = t0.elapsed().as_secs_f64();
        }
        rel.push(d.max_deviation / d.pressure_scale);
    }
    s.record(
        2,
        vec![
            le("global pressure vs cos x1 cos x2", oracle, 1e-10),
            le("decomposition at L=16pi", rel[0], 1e-2),
            (rel[1] < rel[0], format!("L=32pi gives {:.3e} (must improve)", rel[1])),
            le("seconds at N=64", secs, 30.0),
        ],
    );
}

fn c3_herz(s: &mut Sheet) {
    let ctx = NormContext::analytic(QuadratureSpec::default());
    let decomp = AnnulusDecomposition::new(-3, 3).unwrap();
    let inv = presets::inverse_radius_field;
    let rep = herz_norm(&Magnitude(&inv), &HerzParams::kp(3.0, HerzFlavor::ShellSup), &decomp, &ctx, None).unwrap();
    let worst = rep.breakdown.iter().fold(0.0_f64, |m, e| m.max((e.value - 2.0573).abs()));

    let f = |x: [f64; 3]| {
        let g = (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp();
        [g * (1.0 + x[0]), g * x[2], 0.5 * g]
    };
    let wide = AnnulusDecomposition::new(-10, 10).unwrap();
    let norm = |v: &dyn VectorFn, params: &HerzParams| herz_norm(&Magnitude(v), params, &wide, &ctx, None).unwrap().value;
    let kp = HerzParams::kp(4.0, HerzFlavor::ShellSup);
    let base = norm(&f, &kp);
    let inv_dev = [0.5, 2.0, 4.0]
        .iter()
        .map(|&l| (norm(&ScaledVector::new(&f, l).unwrap(), &kp) / base - 1.0).abs())
        .fold(0.0_f64, f64::max);

    let gen = HerzParams { s: 0.3, p: 2.5, flavor: HerzFlavor::ShellSup };
    let expo = (norm(&ScaledVector::new(&f, 2.0).unwrap(), &gen) / norm(&f, &gen)).log2();
    let want = 1.0 - 3.0 / gen.p - gen.s;
    s.record(
        3,
        vec![
            le("|x|^-1 shells vs 2.0573", worst, 1e-3),
            le("K_4 scaling defect over lambda in {1/2,2,4}", inv_dev, 1e-3),
            within("two-scale exponent (s=0.3, p=2.5)", expo, want, 0.01),
        ],
    );
}

fn c4_dss(s: &mut Sheet) {
    let mut defect: f64 = 0.0;
    for p in [DssProfile::inverse_radius(2.0).unwrap(), DssProfile::swirl(2.0, 1.0).unwrap(), DssProfile::inverse_radius(1.5).unwrap()] {
        let ext = extend_dss(&p).unwrap();
        let l = p.lambda;
        defect = defect.max(verify_dss(&ext, l, 1000, l.powi(-3), l.powi(4), 11).unwrap().max_defect);
    }
    let prof = DssProfile::inverse_radius(2.0).unwrap();
    let eps0 = (4.0 * PI * 2f64.ln()).cbrt();
    let sel = compute_mu(&prof, eps0, &MuOptions::default()).unwrap();
    let b = &sel.breakpoints;
    let mut bp_err = (b[0] - 0.5).abs().max((b[b.len() - 1] - 4.0).abs());
    for w in b.windows(2) {
        bp_err = bp_err.max((w[1] / w[0] - 2f64.sqrt()).abs());
    }
    let chk = mu_smallness_check(&prof, &sel, 50, 5, &QuadratureSpec::default(), 0.05).unwrap();
    s.record(
        4,
        vec![
            le("verify_dss defect", defect, 1e-12),
            le(&format!("breakpoints {b:.4?} vs sqrt2 ladder"), bp_err, 1e-6),
            (sel.mu == 0.25, format!("mu = {}", sel.mu)),
            (chk.holds, format!("smallness at 50 probes: worst mass/eps0^3 = {:.4} (<= 1.05)", chk.worst_ratio)),
        ],
    );
}

fn c5_solver(s: &mut Sheet, tg_led: &TrajectoryLedger) {
    let g = GridSpec::periodic_2pi(16);
    let v0 = SpectralField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
    let err = |dt: f64| {
        let led = evolve(&v0, &SolverOptions { dt, t_end: 1.0, cadence: 1000, ..Default::default() }).unwrap();
        led.snapshots.last().unwrap().velocity.max_diff(&v0.scaled((-1.0f64).exp()))
    };
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    let m0 = SpectralField::from_fn(g, |x| [0.3 + x[1].sin(), -0.2 + x[2].cos(), 0.1 + (x[0] + x[1]).sin()]);
    let led = evolve(&m0, &SolverOptions { dt: 0.01, t_end: 0.5, cadence: 10, ..Default::default() }).unwrap();
    let in_band = |o: f64| (1.8..=2.2).contains(&o);
    s.record(
        5,
        vec![
            (in_band(o1) && in_band(o2), format!("Stokes decay orders {o1:.3}, {o2:.3} in [1.8, 2.2]")),
            le(&format!("Taylor-Green energy defect (N={}, dt={})", tg_led.grid.n(), tg_led.dt), tg_led.energy_defect(), 1e-6),
            le("mean momentum drift", led.momentum_drift(), 1e-13),
        ],
    );
}

fn shear_ledger(like: &TrajectoryLedger, amp: f64) -> TrajectoryLedger {
    let g = like.grid;
    let snaps = like
        .snapshots
        .iter()
        .map(|s| {
            let d = amp * (-s.time).exp();
            Snapshot { time: s.time, velocity: SpectralField::from_fn(g, |x| [d * x[1].sin(), 0.0, 0.0]).with_time(s.time), pressure: ScalarField::zeros(g) }
        })
        .collect();
    TrajectoryLedger::from_snapshots(g, like.dt, like.scheme, snaps).unwrap()
}

fn c6_lei(s: &mut Sheet, lei_rel: f64) {
    let g = GridSpec::periodic_2pi(32);
    let v0 = SpectralField::from_fn(g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.0]);
    let phi = TestFunctionSpec::new([PI / 2.0, PI / 3.0, 1.0], 0.12, 2.5, 0.1).unwrap();
    let res = |dt: f64| {
        let led = evolve(&v0, &SolverOptions { dt, t_end: 0.24, cadence: (0.01 / dt).round() as usize, ..Default::default() }).unwrap();
        local_energy_residual(&led, &phi).unwrap().residual.abs()
    };
    let (r1, r4) = (res(2e-3), res(5e-4));

    let mut w0 = tg3(g, 0.5);
    w0.axpy(1.0, &SpectralField::from_fn(g, |x| [0.7 * x[1].sin(), 0.0, 0.0]));
    let v_led = evolve(&w0, &SolverOptions { dt: 2e-3, t_end: 0.2, cadence: 5, ..Default::default() }).unwrap();
    let a_led = shear_ledger(&v_led, 0.7);
    let u_led = v_led.difference(&a_led).unwrap();
    let spec = TestFunctionSpec::new([1.0, 2.0, 0.5], 0.1, 2.5, 0.09).unwrap();
    let two = lei_two_route_check(&u_led, &a_led, &v_led, &spec).unwrap();
    s.record(
        6,
        vec![
            le("LEI relative residual on the pipeline run", lei_rel, 1e-4),
            (r1 / r4 >= 3.5, format!("dt quartering shrinks the residual {:.2}x (>= 3.5x)", r1 / r4)),
            le("perturbed two-route defect", two.defect, 1e-6),
        ],
    );
}

fn c7_ckn(s: &mut Sheet) {
    let g = GridSpec::periodic_2pi(32);
    let t = times(17, 0.05);
    let opts = CylinderOptions::default();
    let cyl = ParabolicCylinder::new([0.5, 1.0, 2.0], 0.75, 0.8).unwrap();
    let led = TrajectoryLedger::from_analytic(g, &t, tg_velocity, tg_pressure).unwrap();
    let shift = [0.7, -0.2, 0.4];
    let led2 = TrajectoryLedger::from_analytic(
        g,
        &t,
        |x, s| {
            let v = tg_velocity(x, s);
            [v[0] + shift[0], v[1] + shift[1], v[2] + shift[2]]
        },
        |x, s| tg_pressure(x, s) + (5.0 * s).sin() + 2.0,
    )
    .unwrap();
    let a = cylinder_quantities(&led, &cyl, &opts).unwrap();
    let b = cylinder_quantities(&led2, &cyl, &opts).unwrap();
    let gauge = (a.phi - b.phi).abs() / a.phi;

    let lam: f64 = 2.0;
    let ts: Vec<f64> = t.iter().map(|s| s * lam * lam).collect();
    let big = GridSpec::new(2.0 * PI * lam, 64, 2.0 / 3.0).unwrap();
    let scaled = TrajectoryLedger::from_analytic(
        big,
        &ts,
        |x, s| tg_velocity(x.map(|c| c / lam), s / (lam * lam)).map(|c| c / lam),
        |x, s| tg_pressure(x.map(|c| c / lam), s / (lam * lam)) / (lam * lam),
    )
    .unwrap();
    let sc = cylinder_quantities(&scaled, &cyl.scaled(lam), &opts).unwrap();
    let scale_dev = [(a.c, sc.c), (a.d, sc.d), (a.phi, sc.phi), (a.b, sc.b)].iter().map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max);

    let c = [0.3, -0.4, 1.2];
    let cn: f64 = 1.3;
    let cled = TrajectoryLedger::from_analytic(g, &times(11, 0.1), |_, _| c, |_, _| 0.0).unwrap();
    let mut closed_ok = true;
    let mut closed_err: f64 = 0.0;
    for r in [0.8, 1.0] {
        let q = cylinder_quantities(&cled, &ParabolicCylinder::new([2.0; 3], 1.0, r).unwrap(), &opts).unwrap();
        let exact = 4.0 * PI / 3.0 * cn.powi(3) * r.powi(3);
        closed_ok &= (q.c - exact).abs() <= 1e-12 * exact + q.quad_error.c && (q.b - r * cn).abs() <= 1e-12;
        closed_err = closed_err.max((q.c - exact).abs() / exact).max((q.b - r * cn).abs());
    }
    let eps = 0.37;
    let sched = [(0.0, 1.0), (1.0, 64.0), (3.0, 4096.0)].iter().all(|&(m, d)| t1_schedule(m, eps).unwrap() == eps / d);
    s.record(
        7,
        vec![
            le("phi gauge defect", gauge, 1e-10),
            le("C, D, phi, B scaling defect", scale_dev, 1e-3),
            (closed_ok, format!("constant-field C, B closed forms (max rel {closed_err:.1e}, within quadrature error)")),
            (sched, "t1_schedule(M = 0, 1, 3) = eps, eps/64, eps/4096".into()),
        ],
    );
}

fn c8_picard(s: &mut Sheet) {
    let g = GridSpec::periodic_2pi(16);
    let opts = PicardOptions { steps: 64, ..Default::default() };
    let k1 = kato_picard(&tg3(g, 1e-3), 1.0, &opts).unwrap();
    let k2 = kato_picard(&tg3(g, 5e-4), 1.0, &opts).unwrap();
    let r2 = k1.state.rows.get(1).map(|r| r.ratio).unwrap_or(0.0);
    let halving = k1.sup_sqrt_t_linf / k2.sup_sqrt_t_linf;

    // rough data with modes around k ~ 1/sqrt(T), drift of size 1/2
    let w0 = SpectralField::from_fn(g, |x| [0.0, x[0].sin() + 0.5 * (3.0 * x[0]).sin() + 0.2 * (7.0 * x[0]).sin(), 0.0]);
    let a = |t: f64| tg3(g, 0.3 * (-t).exp());
    let inputs = PerturbedInputs { a: Some(&a), xi: [0.5, 0.0, 0.0], f0: None, big_f: None };
    let ratio_at = |t: f64| perturbed_stokes_picard(&w0, &inputs, t, &opts).unwrap().state.rows[1].ratio;
    let shrink = ratio_at(0.4) / ratio_at(0.1);
    s.record(
        8,
        vec![
            le("Kato ratio at iteration 2 (eps = 1e-3)", r2, 0.5),
            within("sup sqrt(t)|v|_inf ratio for eps vs eps/2", halving, 2.0, 0.1),
            within("perturbed ratio T=0.4 over T=0.1", shrink, 2.0, 0.3),
        ],
    );
}

fn c9_apriori(s: &mut Sheet, pipeline_ratio: f64) {
    let g = GridSpec::periodic_2pi(16);
    let decaying = TrajectoryLedger::from_analytic(g, &times(41, 0.01), |x, s| [(-s).exp() * x[1].sin(), 0.0, 0.0], |_, _| 0.0).unwrap();
    let run = evolve(&tg3(g, 0.1), &SolverOptions { dt: 5e-3, t_end: 0.2, cadence: 4, ..Default::default() }).unwrap();
    let mut worst = pipeline_ratio;
    for led in [&decaying, &run] {
        let rep = apriori_energy_check(led, 1.0, 0.1).unwrap();
        worst = worst.max(rep.a_r.iter().fold(0.0_f64, |m, x| m.max(*x)) / rep.a0);
    }

    let centers: Vec<[f64; 3]> = (0..3).flat_map(|i| (0..3).map(move |j| [0.4 + 2.0 * i as f64, 0.7 + 2.0 * j as f64, 1.0])).collect();
    let quad = QuadratureSpec::new(10, 8, 16);
    let consts: Vec<f64> = [16usize, 32]
        .iter()
        .map(|&n| {
            let g = GridSpec::periodic_2pi(n);
            let v0 = SpectralField::from_fn(g, |x| tg_velocity(x, 0.0));
            let run = evolve(&v0, &SolverOptions { dt: 5e-3, t_end: 0.1, cadence: 2, ..Default::default() }).unwrap();
            pressure_apriori_check(&run, 1.0, 2.0, 1.5, 0.1, &centers, &quad, None).unwrap().measured_constant
        })
        .collect();
    let finite = consts.iter().all(|c| c.is_finite() && *c > 0.0);
    s.record(
        9,
        vec![
            le("max A_r(t)/A_r(0+) over smooth runs", worst, 2.0),
            (finite, format!("pressure constant finite: {consts:.4?}")),
            le("pressure constant change N=16 -> 32", (consts[0] / consts[1] - 1.0).abs(), 0.2),
        ],
    );
}

fn c10_bogovskii(s: &mut Sheet) {
    let opts = |h: f64| BogovskiiOptions { h: Some(h), ..Default::default() };
    let c = CutoffSpec::new(0.5, 1.0).unwrap();
    let (mut core, mut leak, mut div): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let constant = |_: [f64; 3]| [1.0, -0.5, 0.25];
    let shear = |x: [f64; 3]| [x[1].sin(), 0.0, 0.0];
    for (v, x0) in [(&constant as &dyn VectorFn, [0.1, 0.2, 0.3]), (&shear, [0.3, 0.2, 0.1])] {
        let rep = bogovskii_correct(v, x0, &c, 2.0, &opts(1.0 / 32.0)).unwrap();
        core = core.max(rep.core_defect);
        leak = leak.max(rep.support_leak);
        div = div.max(rep.div_residual);
    }
    let v = |x: [f64; 3]| [x[1].sin(), x[2].cos(), 0.3];
    let small = bogovskii_correct(&v, [0.0; 3], &c, 2.0, &opts(1.0 / 32.0)).unwrap();
    let vs = |x: [f64; 3]| v(x.map(|c| c / 2.0));
    let big = bogovskii_correct(&vs, [0.0; 3], &CutoffSpec::new(1.0, 2.0).unwrap(), 2.0, &opts(1.0 / 16.0)).unwrap();
    s.record(
        10,
        vec![
            le("core defect", core, 1e-10),
            le("support leak", leak, 1e-10),
            le("divergence residual", div, 1e-8),
            le("constant change (r, R) -> (2r, 2R)", (small.ratio / big.ratio - 1.0).abs(), 0.05),
        ],
    );
}

fn c11_oseen(s: &mut Sheet) {
    // both ladders head for the regime |x| >> sqrt(t) where the product has a limit
    let xs = [1.0, 4.0, 16.0, 64.0, 128.0, 256.0, 512.0];
    let ts = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let p = oseen_gradient_probe([1.0, 0.4, -0.3], &xs, 1.0, [0.6, -0.5, 0.2], &ts).unwrap();
    s.record(
        11,
        vec![
            le("x-ladder tail growth", p.x_tail_growth, 0.1),
            le("t-ladder tail growth", p.t_tail_growth, 0.1),
            le("lambda^-4 homogeneity at lambda = 2", p.homogeneity_defect, 1e-6),
        ],
    );
}

fn files_equal(a: &Path, b: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap()).filter(|e| e.path().is_file()).map(|e| e.file_name()).collect();
    names.sort();
    for n in names {
        if std::fs::read(a.join(&n)).ok() != std::fs::read(b.join(&n)).ok() {
            bad.push(n.to_string_lossy().into_owned());
        }
    }
    bad
}

#[test]
fn acceptance_criteria() {
    let mut s = Sheet { lines: Vec::new() };

    // the default pipeline (Taylor-Green, N = 64, dt = 1e-3) feeds 5, 6, 9 and 12
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let t0 = Instant::now();
    let rep = cmd_pipeline(&cfg, &a).unwrap();
    let first = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    cmd_pipeline(&cfg, &b).unwrap();
    let second = t1.elapsed().as_secs_f64();
    let led = nslab::io::read_ledger(&a.join("ledger")).unwrap();
    let verdict = |n: &str| rep.verdicts.iter().find(|v| v.name == n).unwrap().value;

    c1_spectral(&mut s);
    c2_pressure(&mut s);
    c3_herz(&mut s);
    c4_dss(&mut s);
    c5_solver(&mut s, &led);
    c6_lei(&mut s, verdict("lei_residual_relative"));
    c7_ckn(&mut s);
    c8_picard(&mut s);
    c9_apriori(&mut s, verdict("apriori_energy_ratio"));
    c10_bogovskii(&mut s);
    c11_oseen(&mut s);

    let mut diff = files_equal(&a, &b);
    diff.extend(files_equal(&a.join("ledger"), &b.join("ledger")).into_iter().map(|f| format!("ledger/{f}")));
    s.record(
        12,
        vec![
            (diff.is_empty(), format!("repeated pipeline output byte-identical (differing: {diff:?})")),
            le("pipeline seconds (run 1)", first, 600.0),
            le("pipeline seconds (run 2)", second, 600.0),
        ],
    );

    let failed: Vec<&String> = s.lines.iter().filter(|l| !l.1).map(|l| &l.2).collect();
    assert_eq!(s.lines.len(), 12);
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("\n"));
}
