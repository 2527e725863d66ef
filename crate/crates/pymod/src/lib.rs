//! Python bindings. The interface is deliberately thin: scenario configs,
//! experiment specs, and results cross the boundary as JSON strings, so the
//! Python side needs nothing beyond the standard library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use daamimo::config::NetworkConfig;
use daamimo::covariance::build_covariance_set;
use daamimo::error::Error;
use daamimo::estimation::{estimator_stats, pilot_gram, EstimatorStats};
use daamimo::geometry::build_layout;
use daamimo::harness::{run_experiment, summarize, summary_csv, ExperimentSpec};
use daamimo::oracle::mc_sinr;
use daamimo::power_control::{equal_nu, maxmin};
use daamimo::sinr::evaluate_sinr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn runtime_err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_config(config_json: &str) -> PyResult<NetworkConfig> {
    let config: NetworkConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("bad config JSON: {e}")))?;
    config.validate().map_err(runtime_err)?;
    Ok(config)
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Builds layout, covariances, and estimator statistics for one drop of the
/// scenario, deterministically from its seed.
fn drop_stats(config: &NetworkConfig) -> PyResult<EstimatorStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = build_layout(config, &mut rng).map_err(runtime_err)?;
    let cov = build_covariance_set(config, &layout, &mut rng).map_err(runtime_err)?;
    estimator_stats(&cov, &pilot_gram(config), config).map_err(runtime_err)
}

/// The default scenario config as JSON. Tweak fields and feed the result
/// back into the other functions.
#[pyfunction]
fn default_config() -> PyResult<String> {
    to_json(&NetworkConfig::default())
}

/// Validates a scenario config; raises ValueError when it is rejected.
#[pyfunction]
fn validate_config(config_json: &str) -> PyResult<()> {
    parse_config(config_json).map(|_| ())
}

/// One drop's network layout as JSON (cell centers, sub-array and user
/// positions).
#[pyfunction]
fn layout(config_json: &str) -> PyResult<String> {
    let config = parse_config(config_json)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = build_layout(&config, &mut rng).map_err(runtime_err)?;
    to_json(&layout)
}

/// Max-min power control on one drop. Returns the full allocator result as
/// JSON: optimal coefficients, achieved target, iteration count, margin,
/// and the bisection trace.
#[pyfunction]
fn run_maxmin(config_json: &str) -> PyResult<String> {
    let config = parse_config(config_json)?;
    let stats = drop_stats(&config)?;
    let result = maxmin(
        &stats,
        config.noise_power,
        config.bisection_tolerance,
        None,
    )
    .map_err(runtime_err)?;
    to_json(&result)
}

/// Equal-nu baseline on one drop: JSON with the coefficient value and the
/// closed-form SINR report.
#[pyfunction]
fn run_equal_nu(config_json: &str) -> PyResult<String> {
    let config = parse_config(config_json)?;
    let stats = drop_stats(&config)?;
    let nu = equal_nu(&stats).map_err(runtime_err)?;
    let report = evaluate_sinr(&stats, &nu, config.noise_power).map_err(runtime_err)?;
    to_json(&serde_json::json!({ "nu": nu, "report": report }))
}

/// Largest relative gap between the closed-form SINR and a Monte Carlo
/// estimate with `samples` channel realizations, at the equal-nu
/// allocation.
#[pyfunction]
fn mc_gap(config_json: &str, samples: usize) -> PyResult<f64> {
    let config = parse_config(config_json)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = build_layout(&config, &mut rng).map_err(runtime_err)?;
    let cov = build_covariance_set(&config, &layout, &mut rng).map_err(runtime_err)?;
    let gram = pilot_gram(&config);
    let stats = estimator_stats(&cov, &gram, &config).map_err(runtime_err)?;
    let nu = equal_nu(&stats).map_err(runtime_err)?;
    let report = evaluate_sinr(&stats, &nu, config.noise_power).map_err(runtime_err)?;
    let mc = mc_sinr(&cov, &gram, &config, &nu, samples, &mut rng).map_err(runtime_err)?;
    let gap = report
        .sinr
        .iter()
        .zip(&mc)
        .map(|(cf, mc)| (cf - mc).abs() / cf.abs().max(f64::MIN_POSITIVE))
        .fold(0.0f64, f64::max);
    Ok(gap)
}

/// Runs a full multi-drop experiment from an experiment spec (JSON with
/// `base`, `splits`, `drops`, `allocators`) and returns the results JSON.
#[pyfunction]
fn run_experiment_json(spec_json: &str) -> PyResult<String> {
    let spec: ExperimentSpec = serde_json::from_str(spec_json)
        .map_err(|e| PyValueError::new_err(format!("bad experiment spec: {e}")))?;
    let results = run_experiment(&spec).map_err(runtime_err)?;
    to_json(&results)
}

/// Reduces experiment results (JSON) to summary statistics, as JSON or CSV.
#[pyfunction]
#[pyo3(signature = (results_json, csv=false))]
fn summarize_results(results_json: &str, csv: bool) -> PyResult<String> {
    let results = serde_json::from_str(results_json)
        .map_err(|e| PyValueError::new_err(format!("bad results JSON: {e}")))?;
    let summary = summarize(&results).map_err(runtime_err)?;
    if csv {
        Ok(summary_csv(&summary))
    } else {
        to_json(&summary)
    }
}

#[pymodule]
fn daamimo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(layout, m)?)?;
    m.add_function(wrap_pyfunction!(run_maxmin, m)?)?;
    m.add_function(wrap_pyfunction!(run_equal_nu, m)?)?;
    m.add_function(wrap_pyfunction!(mc_gap, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_json, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_results, m)?)?;
    Ok(())
}
