//! On-disk formats: field snapshots, DSS profiles and ledger directories.
//!
//! A snapshot file is a structured-text header, a line `DATA`, then the
//! physical samples as little-endian `f64` in `(x, y, z, component)` order
//! (component fastest).
use crate::dss::DssProfile;
use crate::error::{LabError, Result};
use crate::fields::VectorFn;
use crate::grid::{Gauge, GridSpec, ScalarField, SpectralField};
use crate::solver::{Snapshot, TrajectoryLedger, ViscousTreatment};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const FIELD_MAGIC: &str = "NSLAB-FIELD";
pub const SCHEMA_VERSION: u32 = 1;
const DATA_MARK: &[u8] = b"\nDATA\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub time: f64,
    pub components: usize,
    pub endianness: String,
    pub order: String,
    /// Component names, e.g. `["v1", "v2", "v3", "pressure"]`.
    pub labels: Vec<String>,
    /// Pressure gauge tag when a pressure component is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<Gauge>,
    /// Extra structured metadata (DSS profile header lives here).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dss: Option<DssHeader>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DssHeader {
    pub lambda: f64,
    pub seam_tolerance: f64,
    /// Half side of the sampled cube `[−a, a]³` (cell-centred samples).
    pub half_side: f64,
}

/// Physical samples with their header.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    /// `samples[idx * components + c]`.
    pub samples: Vec<f64>,
}

impl FieldFile {
    fn check(&self) -> Result<()> {
        let h = &self.header;
        if h.schema_version != SCHEMA_VERSION {
            return Err(LabError::Format(format!("schema version {} not supported", h.schema_version)));
        }
        if h.endianness != "little" || h.order != "x,y,z,component" {
            return Err(LabError::Format(format!("unsupported layout {} / {}", h.endianness, h.order)));
        }
        if h.labels.len() != h.components {
            return Err(LabError::Format("label count differs from component count".into()));
        }
        let n = h.grid.resolution;
        if self.samples.len() != n * n * n * h.components {
            return Err(LabError::Format(format!(
                "expected {} samples, found {}",
                n * n * n * h.components,
                self.samples.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let head = toml::to_string(&self.header).map_err(|e| LabError::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(head.len() + 32 + 8 * self.samples.len());
        out.extend_from_slice(format!("{FIELD_MAGIC} {SCHEMA_VERSION}\n").as_bytes());
        out.extend_from_slice(head.trim_end().as_bytes());
        out.extend_from_slice(DATA_MARK);
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let pos = bytes
            .windows(DATA_MARK.len())
            .position(|w| w == DATA_MARK)
            .ok_or_else(|| LabError::Format("missing DATA marker".into()))?;
        let text = std::str::from_utf8(&bytes[..pos]).map_err(|e| LabError::Format(e.to_string()))?;
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim() != format!("{FIELD_MAGIC} {SCHEMA_VERSION}") {
            return Err(LabError::Format(format!("bad magic line {first:?}")));
        }
        let header: FieldHeader = toml::from_str(rest).map_err(|e| LabError::Format(e.to_string()))?;
        let data = &bytes[pos + DATA_MARK.len()..];
        if data.len() % 8 != 0 {
            return Err(LabError::Format("payload length not a multiple of 8".into()));
        }
        let samples = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let f = Self { header, samples };
        f.check()?;
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        let m = self.header.components;
        self.samples.iter().skip(c).step_by(m).copied().collect()
    }

    fn interleave(grid: GridSpec, time: f64, labels: &[&str], comps: &[&[f64]]) -> Self {
        let m = comps.len();
        let mut samples = vec![0.0; grid.len() * m];
        for (c, comp) in comps.iter().enumerate() {
            for (i, v) in comp.iter().enumerate() {
                samples[i * m + c] = *v;
            }
        }
        Self {
            header: FieldHeader {
                schema_version: SCHEMA_VERSION,
                grid,
                time,
                components: m,
                endianness: "little".into(),
                order: "x,y,z,component".into(),
                labels: labels.iter().map(|s| s.to_string()).collect(),
                gauge: None,
                dss: None,
            },
            samples,
        }
    }

    pub fn from_velocity(v: &SpectralField) -> Self {
        let p = v.to_physical();
        Self::interleave(v.grid, v.time, &["v1", "v2", "v3"], &[&p[0], &p[1], &p[2]])
    }

    pub fn from_snapshot(s: &Snapshot) -> Self {
        let p = s.velocity.to_physical();
        let q = s.pressure.to_physical();
        let mut f = Self::interleave(s.velocity.grid, s.time, &["v1", "v2", "v3", "pressure"], &[&p[0], &p[1], &p[2], &q]);
        f.header.gauge = Some(s.pressure.gauge);
        f
    }

    pub fn velocity(&self) -> Result<SpectralField> {
        if self.header.components < 3 {
            return Err(LabError::Format("fewer than three components".into()));
        }
        let g = self.header.grid;
        let v = [self.component(0), self.component(1), self.component(2)];
        Ok(SpectralField::from_physical(g, &v).with_time(self.header.time))
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let velocity = self.velocity()?;
        if self.header.components != 4 {
            return Err(LabError::Format("snapshot needs four components".into()));
        }
        let mut pressure = ScalarField::from_physical(self.header.grid, &self.component(3));
        pressure.gauge = self.header.gauge.unwrap_or(Gauge::MeanZero);
        pressure.time = self.header.time;
        Ok(Snapshot { time: self.header.time, velocity, pressure })
    }
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or("tmp")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- DSS files

/// Sampled DSS profile: cell-centred cube samples, read back through local
/// tricubic interpolation.
#[derive(Clone, Debug)]
pub struct SampledProfile {
    pub n: usize,
    pub half_side: f64,
    pub values: Vec<[f64; 3]>,
}

impl SampledProfile {
    fn h(&self) -> f64 {
        2.0 * self.half_side / self.n as f64
    }
}

impl VectorFn for SampledProfile {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let h = self.h();
        let n = self.n as i64;
        let mut base = [0i64; 3];
        let mut w = [[0.0; 4]; 3];
        for a in 0..3 {
            // cell centre j sits at −a + (j + 1/2) h
            let s = (x[a] + self.half_side) / h - 0.5;
            let b = (s.floor() as i64 - 1).clamp(0, n - 4);
            base[a] = b;
            let u = s - b as f64;
            let nodes = [0.0, 1.0, 2.0, 3.0];
            for i in 0..4 {
                let mut l = 1.0;
                for j in 0..4 {
                    if i != j {
                        l *= (u - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                w[a][i] = l;
            }
        }
        let mut out = [0.0; 3];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let wt = w[0][i] * w[1][j] * w[2][k];
                    let idx = (((base[0] + i as i64) * n + base[1] + j as i64) * n + base[2] + k as i64) as usize;
                    for c in 0..3 {
                        out[c] += wt * self.values[idx][c];
                    }
                }
            }
        }
        out
    }
}

/// Sample a profile on the cube `[−λ, λ]³` at `n` points per axis. Values
/// outside the fundamental annulus are the DSS extension, so that the
/// interpolation stencil sees a continuous field across the seams.
pub fn dss_profile_file(profile: &DssProfile, n: usize) -> Result<FieldFile> {
    let ext = crate::dss::extend_dss(profile)?;
    let a = profile.lambda;
    let h = 2.0 * a / n as f64;
    let mut comps = [vec![0.0; n * n * n], vec![0.0; n * n * n], vec![0.0; n * n * n]];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = [-a + (i as f64 + 0.5) * h, -a + (j as f64 + 0.5) * h, -a + (k as f64 + 0.5) * h];
                let v = ext.eval(x);
                let idx = (i * n + j) * n + k;
                for c in 0..3 {
                    comps[c][idx] = v[c];
                }
            }
        }
    }
    // the header grid records the cube side and sample count
    let grid = GridSpec { box_length: 2.0 * a, resolution: n, dealias_fraction: 1.0 };
    let mut f = FieldFile::interleave(grid, 0.0, &["v1", "v2", "v3"], &[&comps[0], &comps[1], &comps[2]]);
    f.header.dss = Some(DssHeader { lambda: profile.lambda, seam_tolerance: profile.seam_tolerance, half_side: a });
    Ok(f)
}

pub fn read_dss_profile(path: &Path) -> Result<DssProfile> {
    let f = FieldFile::read(path)?;
    let d = f.header.dss.ok_or_else(|| LabError::Format(format!("{} is not a DSS profile file", path.display())))?;
    let n = f.header.grid.resolution;
    if n < 4 {
        return Err(LabError::Format("profile needs at least 4 samples per axis".into()));
    }
    let values = (0..n * n * n).map(|i| [f.samples[3 * i], f.samples[3 * i + 1], f.samples[3 * i + 2]]).collect();
    let sp = SampledProfile { n, half_side: d.half_side, values };
    let mut p = DssProfile::new(d.lambda, Arc::new(sp), "sampled")?;
    p.seam_tolerance = d.seam_tolerance;
    Ok(p)
}

// ---------------------------------------------------------- ledger directory

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub scheme: ViscousTreatment,
    pub dt: f64,
    /// Snapshot times and their files (relative to the directory).
    pub times: Vec<f64>,
    pub files: Vec<String>,
    /// Per-step series.
    pub step_times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
}

pub const MANIFEST: &str = "manifest.toml";

/// Snapshot files first, manifest last.
pub fn write_ledger(led: &TrajectoryLedger, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mpath = dir.join(MANIFEST);
    if mpath.exists() {
        fs::remove_file(&mpath)?;
    }
    let mut files = Vec::new();
    for (i, s) in led.snapshots.iter().enumerate() {
        let name = format!("snap_{i:05}.field");
        FieldFile::from_snapshot(s).write(&dir.join(&name))?;
        files.push(name);
    }
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        grid: led.grid,
        scheme: led.scheme,
        dt: led.dt,
        times: led.times(),
        files,
        step_times: led.step_times.clone(),
        energy: led.energy.clone(),
        dissipation: led.dissipation.clone(),
        mean: led.mean.clone(),
    };
    let text = toml::to_string(&m).map_err(|e| LabError::Format(e.to_string()))?;
    write_atomic(&mpath, text.as_bytes())?;
    Ok(mpath)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath)
        .map_err(|e| LabError::Format(format!("no valid manifest at {}: {e}", mpath.display())))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", mpath.display())))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(LabError::Format(format!("manifest schema {} not supported", m.schema_version)));
    }
    if m.times.len() != m.files.len() || m.times.is_empty() {
        return Err(LabError::Format("manifest times/files mismatch".into()));
    }
    let n = m.step_times.len();
    if m.energy.len() != n || m.dissipation.len() != n || m.mean.len() != n {
        return Err(LabError::Format("manifest series lengths differ".into()));
    }
    Ok(m)
}

pub fn read_ledger(dir: &Path) -> Result<TrajectoryLedger> {
    let m = read_manifest(dir)?;
    let mut snaps = Vec::with_capacity(m.files.len());
    for (t, f) in m.times.iter().zip(&m.files) {
        let ff = FieldFile::read(&dir.join(f))?;
        if ff.header.grid != m.grid || ff.header.time.to_bits() != t.to_bits() {
            return Err(LabError::Format(format!("{f} disagrees with the manifest")));
        }
        snaps.push(ff.snapshot()?);
    }
    let mut led = TrajectoryLedger::from_snapshots(m.grid, m.dt, m.scheme, snaps)?;
    led.step_times = m.step_times;
    led.energy = m.energy;
    led.dissipation = m.dissipation;
    led.mean = m.mean;
    Ok(led)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let g = GridSpec::periodic_2pi(8);
        let v = SpectralField::from_fn(g, |x| [x[1].sin(), x[0].cos(), 0.25]).with_time(0.125);
        let f = FieldFile::from_velocity(&v);
        let b = f.to_bytes().unwrap();
        let back = FieldFile::from_bytes(&b).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_bytes().unwrap(), b);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = GridSpec::periodic_2pi(8);
        let f = FieldFile::from_velocity(&SpectralField::zeros(g));
        let b = f.to_bytes().unwrap();
        assert!(FieldFile::from_bytes(&b[..b.len() - 8]).is_err());
    }
}
