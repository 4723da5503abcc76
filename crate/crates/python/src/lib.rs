//! Python bindings for `tvcov`.
//!
//! Keyword options use the same keys as the command-line configuration
//! (underscores may replace hyphens), so `estimate(y, alpha=0.1, lags=[0, 1])`
//! behaves like `tvcov estimate --alpha 0.1 --lags 0,1`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};

use tvcov::cli::{Command, RunConfig};
use tvcov::error::ErrorCategory;
use tvcov::pipeline::{self, Estimation};
use tvcov::procgen::{self, Preset, TimeSeries};
use tvcov::study::{self, MeanKind};
use tvcov::{diffseries, tuning};

fn to_py(err: tvcov::Error) -> PyErr {
    let msg = format!("[{}] {err}", err.category().name());
    match err.category() {
        ErrorCategory::Config | ErrorCategory::Parse => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn option_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if value.is_instance_of::<PyBool>() {
        return Ok(value.extract::<bool>()?.to_string());
    }
    if value.is_instance_of::<PyList>() || value.is_instance_of::<PyTuple>() {
        let parts: PyResult<Vec<String>> = value.try_iter()?.map(|v| option_text(&v?)).collect();
        return Ok(parts?.join(","));
    }
    Ok(value.str()?.to_string())
}

fn config(command: Command, options: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::new(command);
    if let Some(options) = options {
        for (key, value) in options.iter() {
            let key = key.extract::<String>()?.replace('_', "-");
            cfg.set(&key, &option_text(&value)?).map_err(to_py)?;
        }
    }
    Ok(cfg)
}

fn series(y: Vec<f64>) -> PyResult<TimeSeries> {
    TimeSeries::new(y).map_err(to_py)
}

fn preset(name: &str) -> PyResult<Preset> {
    name.parse().map_err(to_py)
}

/// A simultaneous confidence band for one autocovariance curve.
#[pyclass(frozen, get_all, module = "tvcov_py")]
struct Band {
    lag: usize,
    t: Vec<f64>,
    center: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    sigma: Vec<f64>,
    critical: f64,
    alpha: f64,
    bandwidth: f64,
    difference_lag: usize,
    m: usize,
    tau: f64,
}

#[pymethods]
impl Band {
    /// Whether `truth`, given on the band's grid, lies inside the band everywhere.
    fn covers(&self, truth: Vec<f64>) -> PyResult<bool> {
        if truth.len() != self.t.len() {
            return Err(PyValueError::new_err(format!(
                "truth has {} values, band has {}",
                truth.len(),
                self.t.len()
            )));
        }
        Ok(truth
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo <= v && v <= hi))
    }

    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Band(lag={}, points={}, alpha={}, bandwidth={}, critical={})",
            self.lag,
            self.t.len(),
            self.alpha,
            self.bandwidth,
            self.critical
        )
    }
}

fn bands(est: Estimation) -> Vec<Band> {
    let h = est.resolved.h.unwrap_or(0);
    est.lags
        .into_iter()
        .map(|out| Band {
            lag: out.band.lag,
            t: out.band.center.grid,
            center: out.band.center.values,
            lower: out.band.lower,
            upper: out.band.upper,
            sigma: out.band.sigma,
            critical: out.band.critical,
            alpha: out.band.alpha,
            bandwidth: out.band.bandwidth,
            difference_lag: h,
            m: out.tuning.m,
            tau: out.tuning.tau,
        })
        .collect()
}

/// Simulate a preset model (`model1`, `model2`, `model3`).
#[pyfunction]
#[pyo3(signature = (model, n, seed=0, mean="preset"))]
fn generate(model: &str, n: usize, seed: u64, mean: &str) -> PyResult<Vec<f64>> {
    let kind = MeanKind::from_name(mean)
        .ok_or_else(|| PyValueError::new_err(format!("unknown mean kind {mean:?}")))?;
    let (mean, err) = study::models_for(preset(model)?, kind);
    Ok(procgen::generate(&mean, &err, n, seed)
        .map_err(to_py)?
        .values()
        .to_vec())
}

/// True lag-`k` autocovariance of a preset model's errors at each `t`.
#[pyfunction]
fn true_gamma(model: &str, k: usize, t: Vec<f64>) -> PyResult<Vec<f64>> {
    let (_, err) = procgen::model_presets(preset(model)?);
    Ok(t.iter().map(|&t| procgen::true_gamma(&err, k, t)).collect())
}

/// Difference-based autocovariance estimates with simultaneous bands.
#[pyfunction]
#[pyo3(signature = (y, **options))]
fn estimate(
    py: Python<'_>,
    y: Vec<f64>,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<Band>> {
    let opts = config(Command::Estimate, options)?.estimate_options();
    let y = series(y)?;
    let est = py.detach(|| pipeline::estimate(&y, &opts)).map_err(to_py)?;
    Ok(bands(est))
}

/// Detrend-then-smooth comparator with the same band construction.
#[pyfunction]
#[pyo3(signature = (y, **options))]
fn naive_estimate(
    py: Python<'_>,
    y: Vec<f64>,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<Band>> {
    let opts = config(Command::Estimate, options)?.estimate_options();
    let y = series(y)?;
    let est = py
        .detach(|| pipeline::estimate_naive(&y, &opts))
        .map_err(to_py)?;
    Ok(bands(est))
}

/// Difference lag chosen by the stabilization scan.
#[pyfunction]
#[pyo3(signature = (y, **options))]
fn select_lag(y: Vec<f64>, options: Option<&Bound<'_, PyDict>>) -> PyResult<usize> {
    let cfg = config(Command::LagSelect, options)?;
    let y = series(y)?;
    let h0 = cfg
        .h0
        .unwrap_or_else(|| diffseries::default_max_lag(y.len()));
    let rule = tuning::BandwidthRule::Gcv(cfg.bandwidth_grid.clone());
    let sel =
        diffseries::select_lag(&y, h0, &rule, cfg.kernel, cfg.lag_threshold).map_err(to_py)?;
    Ok(sel.h)
}

/// Monte-Carlo coverage study; returns `(lag, coverage)` pairs.
#[pyfunction]
#[pyo3(signature = (naive=false, **options))]
fn coverage_study(
    py: Python<'_>,
    naive: bool,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<(usize, f64)>> {
    let command = if naive {
        Command::NaiveStudy
    } else {
        Command::Study
    };
    let cfg = config(command, options)?;
    cfg.validate().map_err(to_py)?;
    let study_cfg = cfg.study_config();
    let report = py
        .detach(|| {
            if naive {
                study::run_naive_study(&study_cfg)
            } else {
                study::run_study(&study_cfg)
            }
        })
        .map_err(to_py)?;
    Ok(report.targets.iter().map(|t| (t.lag, t.coverage)).collect())
}

#[pymodule]
fn tvcov_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Band>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(true_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(naive_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(select_lag, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_study, m)?)?;
    Ok(())
}
