//! Experiment configuration (TOML, versioned schema, unknown keys rejected).
use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::solver::{SolverOptions, ViscousTreatment};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub localization: LocalizationConfig,
}

fn default_seed() -> u64 {
    7
}

fn default_out() -> PathBuf {
    PathBuf::from("nslab-out")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub box_length: f64,
    pub resolution: usize,
    pub dealias_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { box_length: 2.0 * PI, resolution: 64, dealias_fraction: 2.0 / 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Preset,
    DssProfile,
    Snapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    /// `(sin x₁ cos x₂, −cos x₁ sin x₂, 0)`, an exact decaying solution.
    TaylorGreen,
    /// `(sin x₁ cos x₂ cos x₃, −cos x₁ sin x₂ cos x₃, 0)`.
    TaylorGreen3d,
    /// Stokes eigenmode `(0, 0, sin x₁)`.
    StokesMode,
    /// `x/|x|²` (analytic only; not divergence-free).
    InverseRadius,
    /// Swirl `(−x₂, x₁, 0)/|x|²`, self-similar.
    Swirl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// DSS factor for the self-similar presets.
    #[serde(default = "two")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { source: DataSource::Preset, preset: Some(Preset::TaylorGreen), path: None, amplitude: 1.0, lambda: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub t_end: f64,
    pub dt: f64,
    pub cadence: usize,
    #[serde(default = "default_scheme")]
    pub scheme: ViscousTreatment,
    #[serde(default = "half")]
    pub cfl_limit: f64,
}

fn default_scheme() -> ViscousTreatment {
    ViscousTreatment::CrankNicolson
}

fn half() -> f64 {
    0.5
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { t_end: 0.24, dt: 1e-3, cadence: 10, scheme: ViscousTreatment::CrankNicolson, cfl_limit: 0.5 }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { dt: self.dt, t_end: self.t_end, cadence: self.cadence, scheme: self.scheme, cfl_limit: self.cfl_limit }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Norms for `norm`: any of `K3`, `L3-annulus`, `weak-L3`, `uloc3`, `N_r`.
    pub norms: Vec<String>,
    pub energy: bool,
    pub lei: bool,
    pub ckn: bool,
    pub apriori: bool,
    pub pressure_apriori: bool,
    pub paraboloid: bool,
    pub kato: bool,
    pub morrey: bool,
    pub decay: bool,
    pub dss: bool,
    /// Randomly placed probes (paraboloid map, pressure centres).
    pub probes: usize,
    /// Defaults derived from the box and the ledger when absent.
    pub lei_radius: Option<f64>,
    pub lei_half_width: Option<f64>,
    pub cylinder_radius: Option<f64>,
    pub apriori_radius: f64,
    pub ladder: Vec<f64>,
    pub theta: f64,
    pub beta: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            norms: Vec::new(),
            energy: true,
            lei: true,
            ckn: true,
            apriori: true,
            pressure_apriori: true,
            paraboloid: true,
            kato: false,
            morrey: false,
            decay: false,
            dss: false,
            probes: 8,
            lei_radius: None,
            lei_half_width: None,
            cylinder_radius: None,
            apriori_radius: 1.0,
            ladder: vec![0.4, 0.3],
            theta: 0.25,
            beta: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub eps_ckn: f64,
    pub c_ckn: f64,
    pub c1: f64,
    pub eps0: f64,
    pub c0: f64,
    pub sigma2: f64,
    pub kato_gate: f64,
    pub energy_tol: f64,
    pub lei_tol: f64,
    pub pressure_budget: f64,
    pub apriori_factor: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            eps_ckn: 0.05,
            c_ckn: 1.0,
            c1: 1.0,
            eps0: 0.5,
            c0: 0.1,
            sigma2: 1.0,
            kato_gate: 0.5,
            energy_tol: 1e-6,
            lei_tol: 1e-4,
            pressure_budget: 100.0,
            apriori_factor: 2.0,
        }
    }
}

impl Budgets {
    pub const KEYS: [&'static str; 11] = [
        "eps_ckn",
        "c_ckn",
        "c1",
        "eps0",
        "c0",
        "sigma2",
        "kato_gate",
        "energy_tol",
        "lei_tol",
        "pressure_budget",
        "apriori_factor",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "eps_ckn" => &mut self.eps_ckn,
            "c_ckn" => &mut self.c_ckn,
            "c1" => &mut self.c1,
            "eps0" => &mut self.eps0,
            "c0" => &mut self.c0,
            "sigma2" => &mut self.sigma2,
            "kato_gate" => &mut self.kato_gate,
            "energy_tol" => &mut self.energy_tol,
            "lei_tol" => &mut self.lei_tol,
            "pressure_budget" => &mut self.pressure_budget,
            "apriori_factor" => &mut self.apriori_factor,
            _ => return None,
        })
    }

    /// Apply a `KEY=VALUE` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("budget override {assignment:?} is not KEY=VALUE")))?;
        let val: f64 = v.trim().parse().map_err(|_| LabError::Config(format!("budget {k}: {v:?} is not a number")))?;
        let slot = self.slot(k.trim()).ok_or_else(|| LabError::Config(format!("unknown budget key {k:?}")))?;
        *slot = val;
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut b = *self;
        Self::KEYS.iter().map(|k| (*k, *b.slot(k).unwrap())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub r: f64,
    pub big_r: f64,
    pub p: f64,
    /// Cell size of the Bogovskii grid; `R/32` when absent.
    pub h: Option<f64>,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self { r: 0.5, big_r: 1.0, p: 2.0, h: None }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA,
            seed: default_seed(),
            output_dir: default_out(),
            grid: GridConfig::default(),
            data: DataConfig::default(),
            solver: SolverConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            budgets: Budgets::default(),
            localization: LocalizationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate_values()?;
        Ok(cfg)
    }

    /// Parse and resolve relative data paths against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.data.path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.box_length, self.grid.resolution, self.grid.dealias_fraction)
            .map_err(|e| LabError::Config(e.to_string()))
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate_values(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA {
            return Err(LabError::Config(format!(
                "schema_version {} not supported (expected {CONFIG_SCHEMA})",
                self.schema_version
            )));
        }
        self.grid_spec()?;
        for (k, v) in self.budgets.entries() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::Config(format!("budget {k} = {v} must be positive")));
            }
        }
        let s = &self.solver;
        if !(s.dt > 0.0) || !(s.t_end >= 0.0) || s.cadence == 0 || !(s.cfl_limit > 0.0) {
            return Err(LabError::Config("solver needs dt > 0, t_end ≥ 0, cadence ≥ 1, cfl_limit > 0".into()));
        }
        match self.data.source {
            DataSource::Preset if self.data.preset.is_none() => {
                return Err(LabError::Config("data.source = \"preset\" needs data.preset".into()))
            }
            DataSource::DssProfile | DataSource::Snapshot if self.data.path.is_none() => {
                return Err(LabError::Config("file data sources need data.path".into()))
            }
            _ => {}
        }
        if !(self.data.lambda > 1.0) {
            return Err(LabError::Config(format!("data.lambda = {} must exceed 1", self.data.lambda)));
        }
        let d = &self.diagnostics;
        if !(d.theta > 0.0 && d.theta < 1.0 / 3.0) {
            return Err(LabError::Config(format!("diagnostics.theta = {} not in (0, 1/3)", d.theta)));
        }
        for n in &d.norms {
            if !["K3", "L3-annulus", "weak-L3", "uloc3", "N_r"].contains(&n.as_str()) {
                return Err(LabError::Config(format!("unknown norm {n:?}")));
            }
        }
        let l = &self.localization;
        if !(l.r > 0.0 && l.r < l.big_r) || !(l.p >= 1.0) {
            return Err(LabError::Config("localization needs 0 < r < big_r and p ≥ 1".into()));
        }
        Ok(())
    }

    /// Referenced files must exist.
    pub fn validate_files(&self) -> Result<()> {
        if let Some(p) = &self.data.path {
            if !p.exists() {
                return Err(LabError::Io(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_the_line() {
        let text = "schema_version = 1\n[solver]\nt_end = 0.1\ndt = 0.01\ncadence = 1\nstepsize = 3\n";
        let e = ExperimentConfig::from_toml(text).unwrap_err().to_string();
        assert!(e.contains("stepsize") && e.contains("line 6"), "{e}");
    }

    #[test]
    fn budget_overrides() {
        let mut b = Budgets::default();
        b.set("eps_ckn=0.2").unwrap();
        assert_eq!(b.eps_ckn, 0.2);
        assert!(b.set("nope=1").is_err());
        assert!(b.set("c1").is_err());
    }
}
