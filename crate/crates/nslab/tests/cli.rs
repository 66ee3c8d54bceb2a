use nslab::cli::*;
use nslab::config::*;
use nslab::dss::DssProfile;
use nslab::io::{dss_profile_file, read_manifest, FieldFile};
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

/// Small box where a resolved cylinder fits in a short run.
fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid = GridConfig { box_length: PI, resolution: 32, dealias_fraction: 2.0 / 3.0 };
    c.solver = SolverConfig { t_end: 0.2, dt: 2e-3, cadence: 5, ..Default::default() };
    c.diagnostics.apriori_radius = 0.5;
    c
}

fn zero(mut c: ExperimentConfig) -> ExperimentConfig {
    c.data.preset = Some(Preset::Zero);
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nslab"))
}

fn write_cfg(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn empty_norm_menu_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    assert!(cmd_norm(&small(), &out).unwrap().is_empty());
    assert!(!out.exists());
}

#[test]
fn inverse_radius_k3_report() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small();
    c.data.preset = Some(Preset::InverseRadius);
    c.diagnostics.norms = vec!["K3".into(), "L3-annulus".into(), "weak-L3".into()];
    let files = cmd_norm(&c, d.path()).unwrap();
    assert_eq!(files.len(), 3);
    let k3: toml::Value = toml::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    let v = k3["value"].as_float().unwrap();
    let exact = (4.0 * PI * 2f64.ln()).cbrt();
    assert!((v - exact).abs() < 1e-3, "{v}");
    let w: toml::Value = toml::from_str(&std::fs::read_to_string(&files[2]).unwrap()).unwrap();
    let weak = w["value"].as_float().unwrap();
    assert!((weak - (4.0 * PI / 3.0).cbrt()).abs() < 1e-2, "{weak}");
}

#[test]
fn malformed_config_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let p = write_cfg(d.path(), "schema_version = 1\n[solver]\nt_end = 0.1\ndt = 0.01\ncadence = 1\ncadense = 2\n");
    let o = bin().args(["simulate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cadense") && err.contains("line 6"), "{err}");
    let o = bin().args(["pipeline", "--budget", "eps_ckn=-1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_data_simulates_to_zero_ledger() {
    let d = tempfile::tempdir().unwrap();
    let led = cmd_simulate(&zero(small()), d.path()).unwrap();
    assert!(led.energy.iter().all(|e| *e == 0.0));
    let m = read_manifest(&d.path().join("ledger")).unwrap();
    assert_eq!(m.times.len(), led.snapshots.len());
    let back = nslab::io::read_ledger(&d.path().join("ledger")).unwrap();
    assert!(back.snapshots.iter().all(|s| s.velocity.max_coeff() == 0.0));
}

#[test]
fn cfl_violation_names_the_gate() {
    let d = tempfile::tempdir().unwrap();
    let text = format!(
        "schema_version = 1\n[grid]\nbox_length = {PI}\nresolution = 16\ndealias_fraction = 0.6666666666666666\n\
         [data]\nsource = \"preset\"\npreset = \"taylor-green\"\namplitude = 50.0\n\
         [solver]\nt_end = 0.1\ndt = 0.01\ncadence = 1\n"
    );
    let p = write_cfg(d.path(), &text);
    let o = bin().args(["simulate", "--config"]).arg(&p).arg("--out").arg(d.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
}

#[test]
fn diagnose_zero_ledger_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let c = zero(small());
    cmd_simulate(&c, d.path()).unwrap();
    let led = d.path().join("ledger");
    let r1 = cmd_diagnose(&c, &led, &d.path().join("a")).unwrap();
    assert!(r1.all_passed(), "{}", r1.summary_text());
    assert!(r1.verdicts.iter().all(|v| v.value == 0.0));
    cmd_diagnose(&c, &led, &d.path().join("b")).unwrap();
    for f in ["report.toml", "report_verdicts.csv", "energy.csv", "paraboloid.csv", "cylinders.csv"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn taylor_green_diagnose_meets_oracles() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small();
    // k0 = 2 here, so this matches dt = 1e-3 on the 2π box
    c.solver.dt = 2.5e-4;
    c.solver.cadence = 40;
    cmd_simulate(&c, d.path()).unwrap();
    let r = cmd_diagnose(&c, &d.path().join("ledger"), d.path()).unwrap();
    let get = |n: &str| r.verdicts.iter().find(|v| v.name == n).unwrap().clone();
    assert!(get("energy_equality_defect").value <= 1e-6, "{:?}", get("energy_equality_defect"));
    assert!(get("lei_residual_relative").value <= 1e-4);
    // the analytic solution decays like e^{-4 k0² t} in energy (k0 = 2 here)
    let led = nslab::io::read_ledger(&d.path().join("ledger")).unwrap();
    let e0 = led.energy[0];
    for (t, e) in led.step_times.iter().zip(&led.energy) {
        assert!((e / e0 - (-16.0 * t).exp()).abs() < 1e-4, "{t} {e}");
    }
}

#[test]
fn zero_pipeline_and_missing_profile() {
    let d = tempfile::tempdir().unwrap();
    let r = cmd_pipeline(&zero(small()), d.path()).unwrap();
    assert!(r.all_passed());
    assert!(r.quantities.iter().filter(|(k, _)| !["t_end", "snapshots", "ckn_radius", "apriori_horizon", "paraboloid_admitted"].contains(&k.as_str())).all(|(_, v)| *v == 0.0), "{:?}", r.quantities);
    let mut c = small();
    c.data = DataConfig { source: DataSource::DssProfile, path: Some(d.path().join("nope.field")), ..Default::default() };
    let e = cmd_pipeline(&c, &d.path().join("x")).unwrap_err();
    assert_eq!(e.stage, Stage::Data);
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn snapshot_and_profile_sources() {
    let d = tempfile::tempdir().unwrap();
    // snapshot source: the file's samples are the data
    let c = small();
    let data = prepare_data(&c).unwrap();
    let v = data.grid_field.unwrap();
    let snap = d.path().join("v.field");
    FieldFile::from_velocity(&v).write(&snap).unwrap();
    let mut cs = small();
    cs.data = DataConfig { source: DataSource::Snapshot, path: Some(snap), ..Default::default() };
    let w = prepare_data(&cs).unwrap().grid_field.unwrap();
    assert!(w.max_diff(&v) < 1e-15);

    // sampled DSS profile: λ and tolerance survive, the field is interpolated
    let mut p = DssProfile::swirl(2.0, 1.0).unwrap();
    p.seam_tolerance = 1e-2;
    let prof = d.path().join("swirl.field");
    dss_profile_file(&p, 48).unwrap().write(&prof).unwrap();
    let mut cp = small();
    cp.data = DataConfig { source: DataSource::DssProfile, path: Some(prof), ..Default::default() };
    cp.diagnostics.norms = vec!["L3-annulus".into()];
    let files = cmd_norm(&cp, &d.path().join("n")).unwrap();
    let r: toml::Value = toml::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    // ∫ sin³θ dΩ = 3π²/4
    let exact = (0.75 * PI * PI * 2f64.ln()).cbrt();
    let got = r["value"].as_float().unwrap();
    assert!((got - exact).abs() < 1e-2 * exact, "{got} vs {exact}");
    let rep = cmd_verify_dss(&cp, &d.path().join("v")).unwrap();
    assert!(rep.all_passed());
}

#[test]
fn mu_and_picard_commands() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small();
    c.data = DataConfig { source: DataSource::Preset, preset: Some(Preset::InverseRadius), ..Default::default() };
    c.budgets.eps0 = (4.0 * PI * 2f64.ln()).cbrt();
    let r = cmd_compute_mu(&c, d.path()).unwrap();
    assert_eq!(r.quantities["mu"], 0.25);
    let csv = std::fs::read_to_string(d.path().join("mu_breakpoints.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);

    let mut k = small();
    k.data = DataConfig { source: DataSource::Preset, preset: Some(Preset::Swirl), amplitude: 0.02, ..Default::default() };
    let r = cmd_picard(&k, &d.path().join("k")).unwrap();
    assert!(r.all_passed(), "{}", r.summary_text());
    let t = std::fs::read_to_string(d.path().join("k").join("picard.csv")).unwrap();
    assert!(t.starts_with("k,diff_norm,ratio,wall_time"));
}

#[test]
fn bogovskii_command_on_taylor_green() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small();
    c.localization = LocalizationConfig { r: 0.25, big_r: 0.5, p: 2.0, h: Some(0.5 / 16.0) };
    let r = cmd_bogovskii(&c, d.path()).unwrap();
    assert!(r.all_passed(), "{}", r.summary_text());
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tg = ExperimentConfig::load(&dir.join("taylor_green.toml")).unwrap();
    assert_eq!(tg.grid_spec().unwrap(), ExperimentConfig::default().grid_spec().unwrap());
    assert_eq!(tg.solver, ExperimentConfig::default().solver);
    let sw = ExperimentConfig::load(&dir.join("dss_swirl.toml")).unwrap();
    assert_eq!(sw.data.preset, Some(Preset::Swirl));
    assert_eq!(sw.budgets.energy_tol, 1e-5);
}
