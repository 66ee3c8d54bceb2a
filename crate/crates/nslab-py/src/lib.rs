//! Python bindings for `nslab`. Fields cross the boundary as flat lists in
//! storage order `(ix·N + iy)·N + iz`.

use nslab::cli::{cmd_pipeline, Report};
use nslab::config::ExperimentConfig;
use nslab::dss::{compute_mu, extend_dss, verify_dss, MuOptions};
use nslab::fields::{presets, Magnitude};
use nslab::geometry::{AnnulusDecomposition, QuadratureSpec};
use nslab::grid::{GridSpec, ScalarField, SpectralField};
use nslab::norms::{herz_norm, uloc_norm_grid, HerzFlavor, HerzParams, NormContext};
use nslab::pressure::global_pressure;
use nslab::semigroup::heat_flow;
use nslab::solver::{evolve, SolverOptions, TrajectoryLedger, ViscousTreatment};
use nslab::LabError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Config(_) | LabError::InvalidGrid(_) | LabError::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (box_length, resolution, dealias_fraction = 2.0 / 3.0))]
    fn new(box_length: f64, resolution: usize, dealias_fraction: f64) -> PyResult<Self> {
        Ok(Self { inner: GridSpec::new(box_length, resolution, dealias_fraction).map_err(err)? })
    }

    #[getter]
    fn box_length(&self) -> f64 {
        self.inner.box_length
    }

    #[getter]
    fn resolution(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    /// Coordinates of every grid point, in storage order.
    fn points(&self) -> Vec<[f64; 3]> {
        (0..self.inner.len())
            .map(|idx| {
                let (i, j, l) = self.inner.unravel(idx);
                self.inner.coords(i, j, l)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(box_length={}, resolution={})", self.inner.box_length, self.inner.n())
    }
}

#[pyclass(name = "Field", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: SpectralField,
}

#[pymethods]
impl PyField {
    /// From three lists of grid samples.
    #[staticmethod]
    fn from_samples(grid: &PyGrid, components: [Vec<f64>; 3]) -> PyResult<Self> {
        let n = grid.inner.len();
        if components.iter().any(|c| c.len() != n) {
            return Err(PyValueError::new_err(format!("each component needs {n} samples")));
        }
        Ok(Self { inner: SpectralField::from_physical(grid.inner, &components) })
    }

    #[staticmethod]
    #[pyo3(signature = (grid, amplitude = 1.0))]
    fn taylor_green(grid: &PyGrid, amplitude: f64) -> Self {
        let k = grid.inner.k0();
        let f = presets::taylor_green(amplitude);
        Self { inner: SpectralField::from_fn(grid.inner, |x| f(x.map(|c| k * c), 0.0)) }
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid }
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    fn samples(&self) -> [Vec<f64>; 3] {
        self.inner.to_physical()
    }

    fn leray_project(&self) -> Self {
        Self { inner: self.inner.leray_project() }
    }

    fn heat_flow(&self, t: f64) -> PyResult<Self> {
        Ok(Self { inner: heat_flow(&self.inner, t).map_err(err)? })
    }

    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    fn dissipation(&self) -> f64 {
        self.inner.dissipation()
    }

    fn divergence_residual(&self) -> f64 {
        self.inner.divergence_residual()
    }

    fn mean(&self) -> [f64; 3] {
        self.inner.mean()
    }

    fn max_diff(&self, other: &PyField) -> f64 {
        self.inner.max_diff(&other.inner)
    }

    /// Mean-zero pressure samples.
    fn pressure(&self) -> Vec<f64> {
        global_pressure(&self.inner).to_physical()
    }

    /// `sup_x ‖v‖_{L^q(B_ρ(x))}` over the grid.
    fn uloc_norm(&self, q: f64, rho: f64) -> PyResult<f64> {
        Ok(uloc_norm_grid(&self.inner, q, rho).map_err(err)?.value)
    }
}

#[pyclass(name = "Ledger")]
struct PyLedger {
    inner: TrajectoryLedger,
}

#[pymethods]
impl PyLedger {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn step_times(&self) -> Vec<f64> {
        self.inner.step_times.clone()
    }

    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.inner.energy.clone()
    }

    #[getter]
    fn dissipation(&self) -> Vec<f64> {
        self.inner.dissipation.clone()
    }

    fn energy_defect(&self) -> f64 {
        self.inner.energy_defect()
    }

    fn momentum_drift(&self) -> f64 {
        self.inner.momentum_drift()
    }

    fn snapshot(&self, i: usize) -> PyResult<PyField> {
        let s = self.inner.snapshots.get(i).ok_or_else(|| PyValueError::new_err(format!("no snapshot {i}")))?;
        Ok(PyField { inner: s.velocity.clone() })
    }

    fn __len__(&self) -> usize {
        self.inner.snapshots.len()
    }
}

/// Integrate from `v0` with the Crank–Nicolson (`"cn"`) or integrating
/// factor (`"if"`) scheme.
#[pyfunction]
#[pyo3(signature = (v0, t_end, dt, cadence = 10, scheme = "cn"))]
fn simulate(py: Python<'_>, v0: &PyField, t_end: f64, dt: f64, cadence: usize, scheme: &str) -> PyResult<PyLedger> {
    let scheme = match scheme {
        "cn" => ViscousTreatment::CrankNicolson,
        "if" => ViscousTreatment::IntegratingFactor,
        s => return Err(PyValueError::new_err(format!("unknown scheme {s:?}"))),
    };
    let opts = SolverOptions { dt, t_end, cadence, scheme, ..Default::default() };
    let v = v0.inner.clone();
    let led = py.detach(move || evolve(&v, &opts)).map_err(err)?;
    Ok(PyLedger { inner: led })
}

/// Shell-sup `K_p` norm of `|x|⁻¹` (the `x/|x|²` preset) over shells `k_min..=k_max`.
#[pyfunction]
#[pyo3(signature = (p = 3.0, k_min = -3, k_max = 3))]
fn inverse_radius_kp(p: f64, k_min: i32, k_max: i32) -> PyResult<(f64, Vec<f64>)> {
    let decomp = AnnulusDecomposition::new(k_min, k_max).map_err(err)?;
    let f = presets::inverse_radius_field;
    let rep = herz_norm(&Magnitude(&f), &HerzParams::kp(p, HerzFlavor::ShellSup), &decomp, &NormContext::analytic(QuadratureSpec::default()), None)
        .map_err(err)?;
    Ok((rep.value, rep.breakdown.iter().map(|e| e.value).collect()))
}

/// `μ` and the breakpoints for the `x/|x|²` profile with factor `lambda`.
#[pyfunction]
fn inverse_radius_mu(lambda: f64, epsilon0: f64) -> PyResult<(f64, Vec<f64>)> {
    let p = nslab::dss::DssProfile::inverse_radius(lambda).map_err(err)?;
    let sel = compute_mu(&p, epsilon0, &MuOptions::default()).map_err(err)?;
    Ok((sel.mu, sel.breakpoints))
}

/// Largest relative DSS defect of the swirl profile's extension at random points.
#[pyfunction]
#[pyo3(signature = (lambda, samples = 200, seed = 7))]
fn swirl_dss_defect(lambda: f64, samples: usize, seed: u64) -> PyResult<f64> {
    let p = nslab::dss::DssProfile::swirl(lambda, 1.0).map_err(err)?;
    let ext = extend_dss(&p).map_err(err)?;
    Ok(verify_dss(&ext, lambda, samples, lambda.powi(-3), lambda.powi(4), seed).map_err(err)?.max_defect)
}

/// Run the full pipeline for a TOML config (file path or `None` for the
/// defaults) into `out`. Returns `(all_passed, summary_text, quantities)`.
#[pyfunction]
#[pyo3(signature = (out, config = None))]
fn pipeline(py: Python<'_>, out: PathBuf, config: Option<PathBuf>) -> PyResult<(bool, String, Vec<(String, f64)>)> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(&p).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    let rep: Report = py.detach(move || cmd_pipeline(&cfg, &out)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((rep.all_passed(), rep.summary_text(), rep.quantities.into_iter().collect()))
}

/// Zero-mean scalar samples to the pressure's spectral gauge and back.
#[pyfunction]
fn pressure_round_trip(grid: &PyGrid, samples: Vec<f64>) -> PyResult<Vec<f64>> {
    if samples.len() != grid.inner.len() {
        return Err(PyValueError::new_err("sample count does not match the grid"));
    }
    Ok(ScalarField::from_physical(grid.inner, &samples).to_physical())
}

#[pymodule]
fn nslab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyLedger>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_radius_kp, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_radius_mu, m)?)?;
    m.add_function(wrap_pyfunction!(swirl_dss_defect, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(pressure_round_trip, m)?)?;
    Ok(())
}
