//! Python bindings: grids, vorticity fields, the time stepper, ensembles and
//! the statistics that operate on them. Grid data cross the boundary as flat
//! row-major lists (x2 slow).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use euler_mvs::ensemble::{run_ensemble, EnsembleOutput};
use euler_mvs::initial::{realize, DatumKind, InitialDataSpec, PerturbationKind};
use euler_mvs::io::{parse_config, FieldFile, FieldKind};
use euler_mvs::solver::{advance, FlowState, StepControl};
use euler_mvs::spectral::{inverse_transform, kinetic_energy, GridSpec, SpectralField, ViscositySpec};
use euler_mvs::statistics;
use euler_mvs::Error;

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn datum_kind(name: &str) -> PyResult<DatumKind> {
    match name {
        "vortex_patch" => Ok(DatumKind::VortexPatch),
        "flat_sheet" => Ok(DatumKind::FlatSheet),
        "taylor_green" => Ok(DatumKind::TaylorGreen),
        _ => Err(PyValueError::new_err(format!("unknown datum kind {name:?}"))),
    }
}

fn perturbation_kind(name: &str) -> PyResult<PerturbationKind> {
    match name {
        "sinusoidal" => Ok(PerturbationKind::Sinusoidal),
        "uncorrelated" => Ok(PerturbationKind::Uncorrelated),
        "uniform_localized" => Ok(PerturbationKind::UniformLocalized),
        "gaussian_localized" => Ok(PerturbationKind::GaussianLocalized),
        _ => Err(PyValueError::new_err(format!("unknown perturbation {name:?}"))),
    }
}

#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (cutoff, phys_n=None))]
    fn new(cutoff: usize, phys_n: Option<usize>) -> PyResult<Self> {
        let grid = match phys_n {
            Some(p) => GridSpec::new(cutoff, p),
            None => GridSpec::with_cutoff(cutoff),
        };
        grid.map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn cutoff(&self) -> usize {
        self.0.cutoff()
    }

    #[getter]
    fn phys_n(&self) -> usize {
        self.0.phys_n()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __repr__(&self) -> String {
        format!("Grid(cutoff={}, phys_n={})", self.0.cutoff(), self.0.phys_n())
    }
}

/// Band-limited vorticity at one time.
#[pyclass(name = "Vorticity", frozen)]
struct PyVorticity {
    eta: SpectralField,
    time: f64,
}

#[pymethods]
impl PyVorticity {
    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.eta.grid())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.time
    }

    /// Fourier coefficient of mode `(k1, k2)`; zero outside the band.
    fn coefficient(&self, k1: i64, k2: i64) -> (f64, f64) {
        let c = self.eta.get(k1, k2);
        (c.re, c.im)
    }

    fn values(&self) -> PyResult<Vec<f64>> {
        inverse_transform(&self.eta).map_err(py_err)
    }

    fn velocity(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        euler_mvs::spectral::velocity_to_grid(&self.eta).map_err(py_err)
    }

    fn energy(&self) -> f64 {
        kinetic_energy(&euler_mvs::spectral::biot_savart(&self.eta))
    }

    /// Squared L2 distance between the velocities of two fields.
    fn distance_sq(&self, other: &PyVorticity) -> f64 {
        use euler_mvs::spectral::biot_savart;
        statistics::cauchy_rate(&biot_savart(&self.eta), &biot_savart(&other.eta))
    }
}

/// Sample `sample` of a random initial datum, as vorticity.
#[pyfunction]
#[pyo3(signature = (kind, grid, delta=0.0, rho=0.05, seed=0, sample=0, modes=None, perturbation="sinusoidal"))]
#[allow(clippy::too_many_arguments)]
fn initial_vorticity(
    kind: &str,
    grid: &PyGrid,
    delta: f64,
    rho: f64,
    seed: u64,
    sample: u64,
    modes: Option<usize>,
    perturbation: &str,
) -> PyResult<PyVorticity> {
    let mut spec = InitialDataSpec::new(datum_kind(kind)?, delta, rho, seed);
    if let Some(k) = modes {
        spec.modes = k;
    }
    spec.perturbation = perturbation_kind(perturbation)?;
    let init = realize(&spec, &grid.0, sample).map_err(py_err)?;
    Ok(PyVorticity {
        eta: init.eta,
        time: 0.0,
    })
}

/// Evolves `eta` and returns one field per requested time.
#[pyfunction]
#[pyo3(signature = (eta, times, epsilon=1e-5, m=0, cfl=0.5))]
fn evolve(py: Python<'_>, eta: &PyVorticity, times: Vec<f64>, epsilon: f64, m: usize, cfl: f64) -> PyResult<Vec<PyVorticity>> {
    let grid = *eta.eta.grid();
    let visc = ViscositySpec::new(epsilon, m, &grid).map_err(py_err)?;
    let state = FlowState::new(eta.eta.clone(), eta.time, visc);
    let ctl = StepControl {
        cfl,
        ..StepControl::default()
    };
    let traj = py.detach(|| advance(&state, &times, &ctl, None)).map_err(py_err)?;
    Ok(traj
        .snapshots
        .into_iter()
        .map(|s| PyVorticity {
            eta: s.eta,
            time: s.time,
        })
        .collect())
}

/// Moment sums of a finished ensemble.
#[pyclass(name = "Ensemble", frozen)]
struct PyEnsemble(EnsembleOutput);

#[pymethods]
impl PyEnsemble {
    #[getter]
    fn count(&self) -> usize {
        self.0.accumulator.count
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.accumulator.times()
    }

    #[getter]
    fn phys_n(&self) -> usize {
        self.0.accumulator.grid.phys_n()
    }

    #[getter]
    fn failed(&self) -> Vec<u64> {
        self.0.failed.iter().map(|f| f.index).collect()
    }

    /// `(mean_x, mean_y, variance)` at snapshot `index`.
    fn moments(&self, index: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if index >= self.0.accumulator.snapshots.len() {
            return Err(PyValueError::new_err(format!("snapshot index {index} out of range")));
        }
        let m = statistics::moments(&self.0.accumulator, index).map_err(py_err)?;
        let [mx, my] = m.mean;
        Ok((mx, my, m.variance))
    }

    /// `∫ Var dx` at every snapshot.
    fn integrated_variance(&self) -> PyResult<Vec<f64>> {
        let all = statistics::all_moments(&self.0.accumulator).map_err(py_err)?;
        Ok(all.iter().map(statistics::integrated_variance).collect())
    }

    /// Per-sample `[v1, v2]` at probe `probe`, snapshot `time_index`.
    fn probe_values(&self, probe: usize, time_index: usize) -> PyResult<Vec<[f64; 2]>> {
        let rec = self
            .0
            .probes
            .get(probe)
            .ok_or_else(|| PyValueError::new_err(format!("probe {probe} out of range")))?;
        rec.values
            .iter()
            .map(|row| {
                row.get(time_index)
                    .copied()
                    .ok_or_else(|| PyValueError::new_err(format!("time index {time_index} out of range")))
            })
            .collect()
    }
}

/// Runs the ensemble described by a JSON config document.
#[pyfunction]
#[pyo3(signature = (config_json, workers=1))]
fn ensemble(py: Python<'_>, config_json: &str, workers: usize) -> PyResult<PyEnsemble> {
    let cfg = parse_config(config_json).map_err(py_err)?;
    let out = py.detach(|| run_ensemble(&cfg, workers)).map_err(py_err)?;
    Ok(PyEnsemble(out))
}

#[pyfunction]
fn wasserstein1(a: Vec<[f64; 2]>, b: Vec<[f64; 2]>) -> PyResult<f64> {
    statistics::wasserstein1(&a, &b).map_err(py_err)
}

#[pyfunction]
fn sign_separation(eta: Vec<f64>, phys_n: usize, threshold: f64) -> PyResult<f64> {
    statistics::sign_separation(&eta, phys_n, threshold).map_err(py_err)
}

/// Bytes of a square field file.
#[pyfunction]
fn encode_field<'py>(py: Python<'py>, kind: &str, n: usize, time: f64, data: Vec<f64>) -> PyResult<Bound<'py, PyBytes>> {
    let kind: FieldKind = kind.parse().map_err(py_err)?;
    let file = FieldFile::square(kind, n, time, data).map_err(py_err)?;
    Ok(PyBytes::new(py, &file.encode()))
}

/// `(kind, n1, n2, time, data)` from field-file bytes.
#[pyfunction]
fn decode_field(bytes: &[u8]) -> PyResult<(String, usize, usize, f64, Vec<f64>)> {
    let f = FieldFile::decode(bytes).map_err(py_err)?;
    Ok((f.kind.as_str().to_string(), f.n1, f.n2, f.time, f.data))
}

#[pymodule]
#[pyo3(name = "euler_mvs")]
fn euler_mvs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyVorticity>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(initial_vorticity, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(sign_separation, m)?)?;
    m.add_function(wrap_pyfunction!(encode_field, m)?)?;
    m.add_function(wrap_pyfunction!(decode_field, m)?)?;
    Ok(())
}
