//! Python bindings. Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use pairseek::discovery::{self, ablation_scan, alias_report};
use pairseek::geometry::BaselineGeometry;
use pairseek::phasecal;
use pairseek::pipeline::{self, RunOutput};
use pairseek::{Error, RunConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(pairseek_py, PairseekError, PyException, "Pipeline error; the message starts with its class.");

fn err(e: Error) -> PyErr {
    PairseekError::new_err(format!("{}: {e}", e.class()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Geometry", module = "pairseek_py")]
#[derive(Clone)]
struct PyGeometry {
    inner: BaselineGeometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (baseline_wavelengths=33.0, reference_frequency_hz=1425e6, declination_deg=-4.3, tau_int_s=-82e-9, fringe_period_override_hours=None))]
    fn new(
        baseline_wavelengths: f64,
        reference_frequency_hz: f64,
        declination_deg: f64,
        tau_int_s: f64,
        fringe_period_override_hours: Option<f64>,
    ) -> PyResult<Self> {
        let mut inner = BaselineGeometry::new(baseline_wavelengths, reference_frequency_hz, declination_deg, tau_int_s)
            .map_err(err)?;
        inner.fringe_period_override_hours = fringe_period_override_hours;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn declination_deg(&self) -> f64 {
        self.inner.declination_deg
    }

    #[getter]
    fn tau_int_s(&self) -> f64 {
        self.inner.tau_int_s
    }

    fn geometric_delay(&self, hour_angle: f64) -> f64 {
        self.inner.geometric_delay(hour_angle)
    }

    fn expected_ew_phase(&self, rf_frequency_hz: f64, hour_angle: f64) -> f64 {
        self.inner.expected_ew_phase(rf_frequency_hz, hour_angle)
    }

    fn fringe_period_ra_hours(&self) -> PyResult<f64> {
        self.inner.fringe_period_ra_hours().map_err(err)
    }

    /// `(bins_per_period, [negative offset, positive offset])`.
    #[pyo3(signature = (ra_bin_width_hours=0.0075))]
    fn alias_bin_offsets(&self, ra_bin_width_hours: f64) -> PyResult<(f64, Vec<i64>)> {
        let w = self.inner.alias_bin_offsets(ra_bin_width_hours).map_err(err)?;
        Ok((w.bins_per_period, w.offsets.to_vec()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Geometry(baseline_wavelengths={}, declination_deg={}, tau_int_s={:e})",
            self.inner.baseline_wavelengths, self.inner.declination_deg, self.inner.tau_int_s
        )
    }
}

/// A run configuration: scenario, filters and discovery settings.
#[pyclass(name = "Config", module = "pairseek_py")]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (json="{}"))]
    fn new(json: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::from_json(json).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_path(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::from_path(&path).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| err(e.into()))
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.scenario.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.scenario.seed = seed;
    }

    #[getter]
    fn geometry(&self) -> PyGeometry {
        PyGeometry {
            inner: self.inner.scenario.geometry,
        }
    }

    fn scenario_hash(&self) -> PyResult<String> {
        self.inner.scenario_hash().map_err(err)
    }
}

/// Result of an in-memory run.
#[pyclass(name = "Run", module = "pairseek_py")]
struct PyRun {
    cfg: RunConfig,
    out: RunOutput,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn counts(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.out.counts)
    }

    #[getter]
    fn kept_pairs(&self) -> usize {
        self.out.kept.len()
    }

    #[getter]
    fn kept_injected(&self) -> usize {
        self.out.kept_injected()
    }

    #[getter]
    fn injected_corrected_phases(&self) -> Vec<f64> {
        self.out.injected_corrected_phases.clone()
    }

    fn max_final_d(&self) -> Option<(usize, f64)> {
        self.out.scan.max_final_d().map(|l| (l.bin_index, l.cohen_d_final))
    }

    /// Ledger for one RA bin, without the per-event list.
    fn ledger(&self, py: Python<'_>, bin: usize) -> PyResult<Option<PyObject>> {
        self.out
            .scan
            .ledger(bin)
            .map(|l| {
                let mut l = l.clone();
                l.per_event_d.clear();
                to_py(py, &l)
            })
            .transpose()
    }

    fn bin_of_ra(&self, ra_hours: f64) -> PyResult<usize> {
        Ok(self.cfg.binning().map_err(err)?.bin_of_ra(ra_hours))
    }

    fn flagged(&self, py: Python<'_>) -> PyResult<PyObject> {
        let f = alias_report(
            &self.out.scan,
            &self.cfg.scenario.geometry,
            &self.cfg.binning().map_err(err)?,
            self.cfg.discovery.report_threshold_d,
        )
        .map_err(err)?;
        to_py(py, &f)
    }

    /// `(bin, d)` of every bin after redoing the pair phases with `tau_int_s`.
    fn ablate(&self, tau_int_s: f64) -> PyResult<Vec<(usize, f64)>> {
        let scan = ablation_scan(&self.out.candidates, &self.out.p_event, tau_int_s, &self.cfg.filters).map_err(err)?;
        Ok(scan.ledgers.iter().map(|l| (l.bin_index, l.cohen_d_final)).collect())
    }

    fn report_json(&self) -> PyResult<String> {
        let r = pipeline::report_for(
            &self.cfg,
            &self.out.coverage.per_bin(),
            self.cfg.scenario.geometry.tau_int_s,
            &self.out.kept,
            &self.out.scan,
        )
        .map_err(err)?;
        pairseek::io::report_to_json(&r).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (config, threads=1))]
fn run(py: Python<'_>, config: &PyConfig, threads: usize) -> PyResult<PyRun> {
    let cfg = config.inner.clone();
    let out = py
        .allow_threads(|| pipeline::run_with_threads(&cfg, threads))
        .map_err(err)?;
    Ok(PyRun { cfg, out })
}

#[pyfunction]
#[pyo3(signature = (config, out, threads=1))]
fn synth_stage(py: Python<'_>, config: &PyConfig, out: PathBuf, threads: usize) -> PyResult<PyObject> {
    let s = py
        .allow_threads(|| pipeline::synth_stage_with_threads(&config.inner, &out, threads))
        .map_err(err)?;
    to_py(
        py,
        &serde_json::json!({
            "frames_observed": s.frames_observed,
            "events_seen": s.events_seen,
            "persisted": s.persisted,
            "dropped_below_floor": s.dropped_below_floor,
            "files_written": s.files_written,
        }),
    )
}

#[pyfunction]
fn pair_stage(py: Python<'_>, config: &PyConfig, input: PathBuf, out: PathBuf) -> PyResult<PyObject> {
    let s = py
        .allow_threads(|| pipeline::pair_stage(&config.inner, &input, &out))
        .map_err(err)?;
    to_py(py, &s)
}

/// Writes the report and plot tables; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (config, input, out, tau_int_s=None))]
fn discover_stage(
    py: Python<'_>,
    config: &PyConfig,
    input: PathBuf,
    out: PathBuf,
    tau_int_s: Option<f64>,
) -> PyResult<PyObject> {
    let (report, _) = py
        .allow_threads(|| pipeline::discover_stage(&config.inner, &input, &out, tau_int_s))
        .map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn wrap_phase(phi: f64) -> PyResult<f64> {
    phasecal::wrap_phase(phi).map_err(err)
}

#[pyfunction]
fn correct_pair_phase(measured: f64, delta_f_hz: f64, tau_int_s: f64) -> f64 {
    phasecal::correct_pair_phase(measured, delta_f_hz, tau_int_s)
}

#[pyfunction]
#[pyo3(signature = (rf_frequency_hz, tau_s, phase_at_reference=0.0, reference_frequency_hz=1425e6))]
fn sawtooth_ew_phase(rf_frequency_hz: f64, tau_s: f64, phase_at_reference: f64, reference_frequency_hz: f64) -> f64 {
    phasecal::sawtooth_ew_phase(rf_frequency_hz, tau_s, phase_at_reference, reference_frequency_hz)
}

#[pyfunction]
#[pyo3(signature = (bins_per_alias_period, snr_linear, delta_f_hz, tau_uncertainty_s, tau_residual_cap=phasecal::DEFAULT_TAU_RESIDUAL_CAP))]
fn phase_noise_budget(
    py: Python<'_>,
    bins_per_alias_period: f64,
    snr_linear: f64,
    delta_f_hz: f64,
    tau_uncertainty_s: f64,
    tau_residual_cap: f64,
) -> PyResult<PyObject> {
    let b = phasecal::phase_noise_budget(bins_per_alias_period, snr_linear, delta_f_hz, tau_uncertainty_s, tau_residual_cap)
        .map_err(err)?;
    to_py(py, &b)
}

#[pyfunction]
fn binomial_d(count: u64, n: u64, p: f64) -> f64 {
    discovery::binomial_d(count, n, p)
}

#[pyfunction]
fn event_probability(coverage_per_bin: Vec<u64>) -> PyResult<Vec<f64>> {
    discovery::event_probability(&coverage_per_bin).map_err(err)
}

#[pyfunction]
fn adjacency_likelihood(n_candidate_bins: f64, window_bins: f64, range_bins: f64) -> PyResult<f64> {
    discovery::adjacency_likelihood(n_candidate_bins, window_bins, range_bins).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (seed=0, frames=100_000))]
fn selftest(py: Python<'_>, seed: u64, frames: u64) -> PyResult<PyObject> {
    let r = py
        .allow_threads(|| pairseek::selftest::run_selftest(seed, frames))
        .map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn pairseek_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PairseekError", m.py().get_type::<PairseekError>())?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(synth_stage, m)?)?;
    m.add_function(wrap_pyfunction!(pair_stage, m)?)?;
    m.add_function(wrap_pyfunction!(discover_stage, m)?)?;
    m.add_function(wrap_pyfunction!(wrap_phase, m)?)?;
    m.add_function(wrap_pyfunction!(correct_pair_phase, m)?)?;
    m.add_function(wrap_pyfunction!(sawtooth_ew_phase, m)?)?;
    m.add_function(wrap_pyfunction!(phase_noise_budget, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_d, m)?)?;
    m.add_function(wrap_pyfunction!(event_probability, m)?)?;
    m.add_function(wrap_pyfunction!(adjacency_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
