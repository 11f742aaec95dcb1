//! Python bindings exposing the main eitcorr types and operations.
//!
//! Configuration crosses the boundary as TOML text in the same schema the
//! CLI reads, so Python scripts and command-line runs share one config
//! format. Results come back as plain dicts/lists of floats.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eitcorr::cli::{emit_config, parse_config, FileConfig};
use eitcorr::lambda_medium::{self, DriveFields, LambdaAtomParams};
use eitcorr::laser_noise::{self, NoiseKind, NoiseModel};
use eitcorr::phase_lock as pl;
use eitcorr::phase_lock::LockParams;
use eitcorr::scenarios;
use eitcorr::signal_analysis::{self, IntensitySeries};

fn err(e: eitcorr::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn resolve(config_toml: &str) -> PyResult<scenarios::ExperimentConfig> {
    Ok(parse_config(config_toml)
        .and_then(|c| c.resolve())
        .map_err(err)?
        .experiment)
}

/// Steady-state coherences (rho_cb, rho_ab, rho_ca) of the Lambda system.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (gamma_ab, gamma_ca, gamma_cb, omega_ab, omega_ac, omega_cb,
                    n_a, n_b, n_c, omega1, omega2, nu, conjugate_omega2 = false))]
fn steady_state(
    gamma_ab: f64,
    gamma_ca: f64,
    gamma_cb: f64,
    omega_ab: f64,
    omega_ac: f64,
    omega_cb: f64,
    n_a: f64,
    n_b: f64,
    n_c: f64,
    omega1: Complex64,
    omega2: Complex64,
    nu: f64,
    conjugate_omega2: bool,
) -> PyResult<(Complex64, Complex64, Complex64)> {
    let params = LambdaAtomParams {
        gamma_ab,
        gamma_ca,
        gamma_cb,
        omega_ab,
        omega_ac,
        omega_cb,
        n_a,
        n_b,
        n_c,
    };
    let drive = DriveFields { omega1, omega2, nu };
    let c = lambda_medium::steady_state_with(&params, &drive, conjugate_omega2).map_err(err)?;
    Ok((c.rho_cb, c.rho_ab, c.rho_ca))
}

/// omega_cb shift (rad/s) for a field of b Gauss at the given MHz/Gauss rate.
#[pyfunction]
#[pyo3(signature = (b, zeeman_rate = 0.7))]
fn zeeman_detuning(b: f64, zeeman_rate: f64) -> f64 {
    scenarios::zeeman_detuning(b, zeeman_rate)
}

/// The full default configuration as TOML text (the CLI schema).
#[pyfunction]
fn default_config_toml() -> String {
    emit_config(&FileConfig::default())
}

/// Noiseless EIT transmission sweep.
#[pyfunction]
fn eit_sweep<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = resolve(config_toml)?;
    let r = scenarios::eit_sweep(&cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("b_gauss", r.b_values)?;
    d.set_item("transmission1", r.transmission1)?;
    d.set_item("transmission2", r.transmission2)?;
    d.set_item("eit_fwhm_gauss", r.widths.eit_fwhm)?;
    Ok(d)
}

/// G2(0) versus magnetic field with width extraction.
#[pyfunction]
fn correlate_sweep<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = resolve(config_toml)?;
    let r = scenarios::correlation_vs_field(&cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("b_gauss", r.b_values)?;
    d.set_item("g2_zero", r.g2_zero)?;
    d.set_item("eit_fwhm_gauss", r.widths.eit_fwhm)?;
    d.set_item("corr_fwhm_gauss", r.widths.corr_fwhm)?;
    d.set_item("eit_to_corr_ratio", r.widths.eit_to_corr_ratio)?;
    Ok(d)
}

/// Exit-intensity fluctuation records at one field value:
/// (dt_s, mean1, mean2, dI1, dI2).
#[pyfunction]
fn synthesize_waveforms(
    config_toml: &str,
    b: f64,
) -> PyResult<(f64, f64, f64, Vec<f64>, Vec<f64>)> {
    let cfg = resolve(config_toml)?;
    let (s1, s2) = scenarios::synthesize_waveforms(&cfg, b).map_err(err)?;
    Ok((s1.dt, s1.mean, s2.mean, s1.fluctuations, s2.fluctuations))
}

/// Normalized cross-correlation of two raw sample records: (lags_s, g2).
#[pyfunction]
fn cross_correlation(
    dt: f64,
    samples1: Vec<f64>,
    samples2: Vec<f64>,
    max_lag: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s1 = IntensitySeries::from_samples(dt, &samples1).map_err(err)?;
    let s2 = IntensitySeries::from_samples(dt, &samples2).map_err(err)?;
    let curve = signal_analysis::cross_correlation(&s1, &s2, max_lag).map_err(err)?;
    Ok((curve.lags, curve.values))
}

/// Stochastic carrier-frequency deviations (rad/s).
#[pyfunction]
#[pyo3(signature = (n, dt, linewidth_hz, seed, kind = "ou_frequency", correlation_time = 1e-6))]
fn generate_noise(
    n: usize,
    dt: f64,
    linewidth_hz: f64,
    seed: u64,
    kind: &str,
    correlation_time: f64,
) -> PyResult<Vec<f64>> {
    let kind = match kind {
        "ou_frequency" => NoiseKind::OuFrequency,
        "white_phase_diffusion" => NoiseKind::WhitePhaseDiffusion,
        other => return Err(PyValueError::new_err(format!("unknown noise kind {other}"))),
    };
    let model = NoiseModel {
        kind,
        linewidth: linewidth_hz,
        correlation_time,
        seed,
        dt,
    };
    Ok(laser_noise::generate(&model, n).map_err(err)?.values)
}

/// Adler phase trajectory plus lock diagnostics:
/// dict(theta=..., locked=..., mean_drift_rate=..., circular_spread=...).
#[pyfunction]
#[pyo3(signature = (a, b, diffusion, dt, n_steps, seed = 0, theta0 = 0.0))]
#[allow(clippy::too_many_arguments)]
fn phase_lock<'py>(
    py: Python<'py>,
    a: f64,
    b: f64,
    diffusion: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    theta0: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = LockParams {
        a,
        b,
        diffusion,
        theta0,
        dt,
        n_steps,
        seed,
    };
    let traj = pl::integrate_theta(&p).map_err(err)?;
    let diag = pl::lock_diagnostics(&traj, &p).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("dt", traj.dt)?;
    d.set_item("theta", traj.theta)?;
    d.set_item("locked", diag.locked)?;
    d.set_item("mean_drift_rate", diag.mean_drift_rate)?;
    d.set_item("circular_spread", diag.circular_spread)?;
    Ok(d)
}

#[pymodule]
fn eitcorr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(zeeman_detuning, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(eit_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(correlate_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_waveforms, m)?)?;
    m.add_function(wrap_pyfunction!(cross_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(generate_noise, m)?)?;
    m.add_function(wrap_pyfunction!(phase_lock, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
