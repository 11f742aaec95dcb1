//! Command-line front end: config ingestion, experiment dispatch,
//! deterministic seeding, and CSV/JSON emission.
//!
//! Unit policy: the config file speaks MHz, kHz, Gauss, cm and microseconds;
//! everything internal is rad/s, s and m. The conversion happens here and
//! only here. File schemas are documented in docs/formats.md.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::lambda_medium::LambdaAtomParams;
use crate::laser_noise::{NoiseKind, NoiseModel};
use crate::phase_lock::{integrate_theta, lock_diagnostics, LockParams};
use crate::propagation::{MediumConfig, PropagationOptions};
use crate::scenarios::{
    correlation_vs_field, default_b_grid, eit_sweep, synthesize_waveforms, ExperimentConfig,
    ResponseLowpass,
};
use crate::signal_analysis::{
    cross_correlation, detector_filter, peak_stats, IntensitySeries, PeakStats,
};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Stochastic EIT intensity-correlation simulator.
#[derive(Debug, Parser)]
#[command(name = "eitcorr", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config file; omitted = documented defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's noise and phase-lock seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps; default = all cores. Results are
    /// identical for any thread count.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Timestamp string recorded in the run manifest; pass a fixed value to
    /// make reruns bit-identical. Default: current unix time.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noiseless EIT transmission versus magnetic field.
    EitSweep(CommonArgs),
    /// Exit-intensity fluctuation records at one field value.
    Waveforms(CommonArgs),
    /// G2(0) versus magnetic field (the correlation resonance).
    CorrelateSweep(CommonArgs),
    /// Cross-correlate an externally recorded two-channel waveform CSV.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Input CSV with columns t_s, dI1, dI2 ('#' comments ignored).
        #[arg(long)]
        input: PathBuf,
    },
    /// Integrate the Adler phase equation and report lock diagnostics.
    PhaseLock(CommonArgs),
}

/// Boundary-unit view of the configuration file. Every key is optional;
/// an empty file yields the full default configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub gamma_ab_mhz: f64,
    pub gamma_ca_mhz: f64,
    pub gamma_cb_mhz: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
    /// Nominal carrier frequency (THz).
    pub carrier_thz: f64,
    pub rabi_input_mhz: f64,
    pub cell_length_cm: f64,
    pub n_slabs: usize,
    pub density_per_cm3: f64,
    /// Transition dipole moments (C*m); used only when eta_b/eta_c absent.
    pub dipole_b: f64,
    pub dipole_c: f64,
    /// Direct coupling constants (rad/(s*m)); set to bypass the dipole
    /// formula. The defaults are calibrated to single-beam optical depth 5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_c: Option<f64>,
    pub conjugate_omega2: bool,
    pub literal_rho_ca: bool,
    pub noise_kind: NoiseKind,
    pub linewidth_mhz: f64,
    pub correlation_time_us: f64,
    pub seed: u64,
    pub record_length_us: f64,
    pub sample_dt_ns: f64,
    pub zeeman_rate_mhz_per_gauss: f64,
    /// Sweep grid (Gauss); omitted = the documented default 41-point grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_grid_gauss: Option<Vec<f64>>,
    /// "auto" or "off"; overridden by response_lowpass_rate_khz when set.
    pub response_lowpass: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_lowpass_rate_khz: Option<f64>,
    /// Field value used by the waveforms subcommand (Gauss).
    pub waveform_b_gauss: f64,
    /// Correlation lag range for waveforms/analyze (us).
    pub max_lag_us: f64,
    /// Optional detector band model, off when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_highpass_khz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_lowpass_mhz: Option<f64>,
    /// Free-text label for the optical power this config represents (mW);
    /// recorded in the manifest, never used numerically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_label_mw: Option<f64>,
    pub phase_lock: PhaseLockConfig,
}

/// Adler-equation parameters; a, b and D are free model inputs in rad/s and
/// rad^2/s, not boundary units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseLockConfig {
    pub a: f64,
    pub b: f64,
    pub diffusion: f64,
    pub theta0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for PhaseLockConfig {
    fn default() -> Self {
        PhaseLockConfig {
            a: 0.5,
            b: 1.0,
            diffusion: 0.0,
            theta0: 0.0,
            dt: 0.01,
            n_steps: 100_000,
            seed: 0,
        }
    }
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            gamma_ab_mhz: 3.0,
            gamma_ca_mhz: 3.0,
            gamma_cb_mhz: 0.02,
            n_a: 0.0,
            n_b: 0.5,
            n_c: 0.5,
            carrier_thz: 377.107,
            rabi_input_mhz: 0.56,
            cell_length_cm: 7.5,
            n_slabs: 400,
            density_per_cm3: 1e12,
            dipole_b: 2.5e-29,
            dipole_c: 2.5e-29,
            eta_b: Some(1.2566370614359172e9),
            eta_c: Some(1.2566370614359172e9),
            conjugate_omega2: true,
            literal_rho_ca: false,
            noise_kind: NoiseKind::OuFrequency,
            linewidth_mhz: 0.3,
            correlation_time_us: 0.1,
            seed: 0,
            record_length_us: 10.0,
            sample_dt_ns: 0.1,
            zeeman_rate_mhz_per_gauss: 0.7,
            b_grid_gauss: None,
            response_lowpass: "auto".into(),
            response_lowpass_rate_khz: None,
            waveform_b_gauss: 0.0,
            max_lag_us: 0.5,
            detector_highpass_khz: None,
            detector_lowpass_mhz: None,
            power_label_mw: None,
            phase_lock: PhaseLockConfig::default(),
        }
    }
}

/// Fully converted configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub experiment: ExperimentConfig,
    pub lock: LockParams,
    pub waveform_b: f64,
    pub max_lag: f64,
    pub detector_highpass: Option<f64>,
    pub detector_lowpass: Option<f64>,
    pub power_label_mw: Option<f64>,
}

/// Parses the boundary-unit TOML. Unknown keys and type errors are reported
/// by key path; invariant violations are collected by resolve().
pub fn parse_config(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))
}

/// Serializes a FileConfig back to TOML; parse_config(emit_config(c)) == c.
pub fn emit_config(cfg: &FileConfig) -> String {
    toml::to_string_pretty(cfg).expect("FileConfig always serializes")
}

impl FileConfig {
    /// Converts to internal units, collecting every invariant violation.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut violations = Vec::new();
        let carrier = TAU * self.carrier_thz * 1e12;
        let atom = LambdaAtomParams {
            gamma_ab: TAU * self.gamma_ab_mhz * 1e6,
            gamma_ca: TAU * self.gamma_ca_mhz * 1e6,
            gamma_cb: TAU * self.gamma_cb_mhz * 1e6,
            omega_ab: carrier,
            omega_ac: carrier,
            omega_cb: 0.0,
            n_a: self.n_a,
            n_b: self.n_b,
            n_c: self.n_c,
        };
        let eta_override = match (self.eta_b, self.eta_c) {
            (Some(b), Some(c)) => Some((b, c)),
            (None, None) => None,
            _ => {
                violations.push("eta_b and eta_c must be set together or not at all".into());
                None
            }
        };
        let medium = MediumConfig {
            length: self.cell_length_cm * 1e-2,
            n_slabs: self.n_slabs,
            density: self.density_per_cm3 * 1e6,
            dipole_b: self.dipole_b,
            dipole_c: self.dipole_c,
            eta_override,
            ..MediumConfig::default()
        };
        let sample_dt = self.sample_dt_ns * 1e-9;
        let noise = NoiseModel {
            kind: self.noise_kind,
            linewidth: self.linewidth_mhz * 1e6,
            correlation_time: self.correlation_time_us * 1e-6,
            seed: self.seed,
            dt: sample_dt,
        };
        let response_lowpass = if let Some(khz) = self.response_lowpass_rate_khz {
            ResponseLowpass::Rate(TAU * khz * 1e3)
        } else {
            match self.response_lowpass.as_str() {
                "auto" => ResponseLowpass::Auto,
                "off" => ResponseLowpass::Off,
                other => {
                    violations.push(format!(
                        "response_lowpass must be \"auto\" or \"off\", got \"{other}\""
                    ));
                    ResponseLowpass::Auto
                }
            }
        };
        let experiment = ExperimentConfig {
            atom,
            medium,
            noise,
            rabi_input: TAU * self.rabi_input_mhz * 1e6,
            b_grid: self.b_grid_gauss.clone().unwrap_or_else(default_b_grid),
            record_length: self.record_length_us * 1e-6,
            sample_dt,
            zeeman_rate: self.zeeman_rate_mhz_per_gauss,
            carrier,
            response_lowpass,
            propagation: PropagationOptions {
                conjugate_omega2: self.conjugate_omega2,
                literal_rho_ca: self.literal_rho_ca,
            },
        };
        violations.extend(experiment.violations());
        let lock = LockParams {
            a: self.phase_lock.a,
            b: self.phase_lock.b,
            diffusion: self.phase_lock.diffusion,
            theta0: self.phase_lock.theta0,
            dt: self.phase_lock.dt,
            n_steps: self.phase_lock.n_steps,
            seed: self.phase_lock.seed,
        };
        violations.extend(lock.violations());
        let max_lag = self.max_lag_us * 1e-6;
        if !(max_lag >= 0.0) || !max_lag.is_finite() {
            violations.push(format!("max_lag_us must be non-negative, got {}", self.max_lag_us));
        }
        if !self.waveform_b_gauss.is_finite() {
            violations.push("waveform_b_gauss must be finite".into());
        }
        for (name, v) in [
            ("detector_highpass_khz", self.detector_highpass_khz),
            ("detector_lowpass_mhz", self.detector_lowpass_mhz),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    violations.push(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations.join("; ")));
        }
        Ok(ResolvedConfig {
            experiment,
            lock,
            waveform_b: self.waveform_b_gauss,
            max_lag,
            detector_highpass: self.detector_highpass_khz.map(|k| k * 1e3),
            detector_lowpass: self.detector_lowpass_mhz.map(|m| m * 1e6),
            power_label_mw: self.power_label_mw,
        })
    }
}

/// Provenance block written into every summary.json and CSV header.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    pub subcommand: String,
    pub seed: u64,
    pub output_dir: String,
    pub tool_version: String,
    pub timestamp: String,
}

fn fmt_num(x: f64) -> String {
    // 17 significant digits: every f64 round-trips exactly.
    format!("{x:.16e}")
}

/// Buffered output set: nothing touches the output directory until the whole
/// run has succeeded, then each file is written to a temp path and renamed
/// into place.
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new() }
    }

    fn csv(&mut self, name: &str, manifest: &RunManifest, header: &str, rows: Vec<String>) {
        let mut s = String::new();
        let _ = writeln!(s, "# eitcorr {} {}", manifest.tool_version, manifest.subcommand);
        let _ = writeln!(s, "# config: {}", manifest.config_path);
        let _ = writeln!(s, "# seed: {}", manifest.seed);
        let _ = writeln!(s, "# timestamp: {}", manifest.timestamp);
        let _ = writeln!(s, "{header}");
        for row in rows {
            let _ = writeln!(s, "{row}");
        }
        self.files.push((name.to_string(), s));
    }

    fn json(&mut self, name: &str, value: serde_json::Value) {
        let mut s = serde_json::to_string_pretty(&value).expect("json");
        s.push('\n');
        self.files.push((name.to_string(), s));
    }

    fn commit(self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            let final_path = dir.join(&name);
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, &final_path)?;
        }
        Ok(())
    }
}

fn peak_json(p: &PeakStats) -> serde_json::Value {
    serde_json::json!({
        "peak_value": p.peak_value,
        "peak_lag_s": p.peak_lag,
        "fwhm_s": p.fwhm,
        "background": p.background,
    })
}

fn load_config(path: Option<&Path>) -> Result<(FileConfig, String)> {
    match path {
        None => Ok((FileConfig::default(), "(defaults)".into())),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidParams(format!("cannot read {}: {e}", p.display())))?;
            Ok((parse_config(&text)?, p.display().to_string()))
        }
    }
}

/// Reads a waveforms CSV (t_s, dI1, dI2; '#' comments and a header line).
fn read_waveforms_csv(path: &Path) -> Result<(IntensitySeries, IntensitySeries)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParams(format!("cannot read {}: {e}", path.display())))?;
    let mut ts = Vec::new();
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t_s") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::InvalidParams(format!(
                "{}:{}: expected 3 columns, got {}",
                path.display(),
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::InvalidParams(format!("{}:{}: {e}", path.display(), lineno + 1)))
        };
        ts.push(parse(cols[0])?);
        d1.push(parse(cols[1])?);
        d2.push(parse(cols[2])?);
    }
    if ts.len() < 2 {
        return Err(Error::RecordTooShort(format!(
            "{} holds fewer than 2 samples",
            path.display()
        )));
    }
    let dt = ts[1] - ts[0];
    Ok((
        IntensitySeries::from_fluctuations(dt, 0.0, &d1)?,
        IntensitySeries::from_fluctuations(dt, 0.0, &d2)?,
    ))
}

fn apply_detector(
    r: &ResolvedConfig,
    s: IntensitySeries,
) -> Result<IntensitySeries> {
    if r.detector_highpass.is_none() && r.detector_lowpass.is_none() {
        Ok(s)
    } else {
        detector_filter(&s, r.detector_highpass, r.detector_lowpass)
    }
}

fn g2_curve_rows(curve: &crate::signal_analysis::CorrelationCurve) -> Vec<String> {
    curve
        .lags
        .iter()
        .zip(&curve.values)
        .map(|(l, v)| format!("{},{}", fmt_num(*l), fmt_num(*v)))
        .collect()
}

fn run_subcommand(
    name: &str,
    common: &CommonArgs,
    input: Option<&Path>,
) -> Result<()> {
    let (mut file_cfg, config_path) = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        file_cfg.seed = seed;
        file_cfg.phase_lock.seed = seed;
    }
    let resolved = file_cfg.resolve()?;
    let manifest = RunManifest {
        config_path,
        subcommand: name.to_string(),
        seed: file_cfg.seed,
        output_dir: common.out.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: common.timestamp.clone().unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs().to_string())
                .unwrap_or_else(|_| "0".into())
        }),
    };
    let mut out = Outputs::new();
    let mut summary = serde_json::json!({
        "manifest": serde_json::to_value(&manifest).expect("manifest"),
    });
    let cfg = &resolved.experiment;
    match name {
        "eit-sweep" => {
            let sweep = eit_sweep(cfg)?;
            let rows = (0..sweep.b_values.len())
                .map(|i| {
                    format!(
                        "{},{},{}",
                        fmt_num(sweep.b_values[i]),
                        fmt_num(sweep.transmission1[i]),
                        fmt_num(sweep.transmission2[i])
                    )
                })
                .collect();
            out.csv(
                "eit_sweep.csv",
                &manifest,
                "b_gauss,transmission1,transmission2",
                rows,
            );
            let i_peak = (0..sweep.transmission1.len())
                .max_by(|&a, &b| sweep.transmission1[a].partial_cmp(&sweep.transmission1[b]).unwrap())
                .unwrap();
            summary["eit_fwhm_gauss"] = serde_json::json!(sweep.widths.eit_fwhm);
            summary["peak_transmission1"] = serde_json::json!(sweep.transmission1[i_peak]);
            summary["peak_transmission2"] = serde_json::json!(sweep.transmission2[i_peak]);
            summary["b_at_peak_gauss"] = serde_json::json!(sweep.b_values[i_peak]);
        }
        "waveforms" | "analyze" => {
            let (s1, s2) = if let Some(input) = input {
                read_waveforms_csv(input)?
            } else {
                let (raw1, raw2) = synthesize_waveforms(cfg, resolved.waveform_b)?;
                (apply_detector(&resolved, raw1)?, apply_detector(&resolved, raw2)?)
            };
            if input.is_none() {
                let rows = (0..s1.len())
                    .map(|i| {
                        format!(
                            "{},{},{}",
                            fmt_num(i as f64 * s1.dt),
                            fmt_num(s1.fluctuations[i]),
                            fmt_num(s2.fluctuations[i])
                        )
                    })
                    .collect();
                out.csv("waveforms.csv", &manifest, "t_s,dI1,dI2", rows);
                summary["b_gauss"] = serde_json::json!(resolved.waveform_b);
            }
            let max_lag = resolved.max_lag.min(0.2 * s1.duration());
            let curve = cross_correlation(&s1, &s2, max_lag)?;
            out.csv("g2_curve.csv", &manifest, "tau_s,g2", g2_curve_rows(&curve));
            summary["g2_zero"] = serde_json::json!(curve.at_zero());
            summary["peak"] = peak_json(&peak_stats(&curve)?);
            summary["variance1"] = serde_json::json!(s1.variance());
            summary["variance2"] = serde_json::json!(s2.variance());
        }
        "correlate-sweep" => {
            let sweep = correlation_vs_field(cfg)?;
            let rows = (0..sweep.b_values.len())
                .map(|i| format!("{},{}", fmt_num(sweep.b_values[i]), fmt_num(sweep.g2_zero[i])))
                .collect();
            out.csv("corr_sweep.csv", &manifest, "b_gauss,g2_zero", rows);
            let eit_rows = (0..sweep.b_values.len())
                .map(|i| {
                    format!(
                        "{},{},{}",
                        fmt_num(sweep.b_values[i]),
                        fmt_num(sweep.transmission1[i]),
                        fmt_num(sweep.transmission2[i])
                    )
                })
                .collect();
            out.csv(
                "eit_sweep.csv",
                &manifest,
                "b_gauss,transmission1,transmission2",
                eit_rows,
            );
            let i_min = (0..sweep.g2_zero.len())
                .min_by(|&a, &b| sweep.g2_zero[a].partial_cmp(&sweep.g2_zero[b]).unwrap())
                .unwrap();
            let i0 = nearest_index(&sweep.b_values, 0.0);
            let left_flip = sweep.g2_zero[..i0].iter().any(|&g| g < 0.0);
            let right_flip = sweep.g2_zero[i0 + 1..].iter().any(|&g| g < 0.0);
            summary["eit_fwhm_gauss"] = serde_json::json!(sweep.widths.eit_fwhm);
            summary["corr_fwhm_gauss"] = serde_json::json!(sweep.widths.corr_fwhm);
            summary["eit_to_corr_ratio"] = serde_json::json!(sweep.widths.eit_to_corr_ratio);
            summary["g2_at_zero_field"] = serde_json::json!(sweep.g2_zero[i0]);
            summary["min_g2"] = serde_json::json!(sweep.g2_zero[i_min]);
            summary["b_at_min_g2_gauss"] = serde_json::json!(sweep.b_values[i_min]);
            summary["sign_change_left"] = serde_json::json!(left_flip);
            summary["sign_change_right"] = serde_json::json!(right_flip);
        }
        "phase-lock" => {
            let traj = integrate_theta(&resolved.lock)?;
            let diag = lock_diagnostics(&traj, &resolved.lock)?;
            let rows = traj
                .theta
                .iter()
                .enumerate()
                .map(|(i, th)| format!("{},{}", fmt_num(i as f64 * traj.dt), fmt_num(*th)))
                .collect();
            out.csv("theta.csv", &manifest, "t_s,theta_rad", rows);
            summary["locked"] = serde_json::json!(diag.locked);
            summary["mean_drift_rate_rad_per_s"] = serde_json::json!(diag.mean_drift_rate);
            summary["circular_spread_rad"] = serde_json::json!(diag.circular_spread);
        }
        other => return Err(Error::InvalidParams(format!("unknown subcommand {other}"))),
    }
    if let Some(mw) = resolved.power_label_mw {
        summary["power_label_mw"] = serde_json::json!(mw);
    }
    out.json("summary.json", summary);
    out.commit(&common.out)
        .map_err(|e| Error::InvalidParams(format!("cannot write outputs: {e}")))
}

fn nearest_index(xs: &[f64], target: f64) -> usize {
    (0..xs.len())
        .min_by(|&a, &b| {
            (xs[a] - target)
                .abs()
                .partial_cmp(&(xs[b] - target).abs())
                .unwrap()
        })
        .unwrap()
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::InvalidParams(_) => 1,
        _ => 2,
    }
}

/// Dispatches a parsed command line; returns the process exit code
/// (0 success, 1 config error, 2 runtime numerical failure).
pub fn run(cli: Cli) -> i32 {
    let (name, common, input) = match &cli.command {
        Command::EitSweep(c) => ("eit-sweep", c, None),
        Command::Waveforms(c) => ("waveforms", c, None),
        Command::CorrelateSweep(c) => ("correlate-sweep", c, None),
        Command::Analyze { common, input } => ("analyze", common, Some(input.as_path())),
        Command::PhaseLock(c) => ("phase-lock", c, None),
    };
    let body = || match run_subcommand(name, common, input) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    };
    match common.threads {
        None => body(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                2
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, FileConfig::default());
        let r = cfg.resolve().unwrap();
        assert_relative_eq!(r.experiment.rabi_input, TAU * 0.56e6, max_relative = 1e-15);
        assert_eq!(r.experiment.b_grid.len(), 41);
        assert_eq!(r.experiment.medium.n_slabs, 400);
    }

    #[test]
    fn zeeman_rate_converts_at_boundary() {
        let cfg = parse_config("zeeman_rate_mhz_per_gauss = 0.7").unwrap();
        let r = cfg.resolve().unwrap();
        assert_relative_eq!(
            crate::scenarios::zeeman_detuning(1.0, r.experiment.zeeman_rate),
            TAU * 0.7e6,
            max_relative = 1e-15
        );
    }

    #[test]
    fn negative_gamma_cb_names_the_violation() {
        let cfg = parse_config("gamma_cb_mhz = -1").unwrap();
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("gamma_cb"), "{err}");
        assert!(err.contains("positive"), "{err}");
    }

    #[test]
    fn all_violations_reported_together() {
        let cfg = parse_config(
            "gamma_cb_mhz = -1\nrabi_input_mhz = -2\nresponse_lowpass = \"sometimes\"",
        )
        .unwrap();
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("gamma_cb"), "{err}");
        assert!(err.contains("rabi_input"), "{err}");
        assert!(err.contains("response_lowpass"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("zeeman_rate_gauss = 0.7").unwrap_err().to_string();
        assert!(err.contains("zeeman_rate_gauss"), "{err}");
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = FileConfig::default();
        cfg.rabi_input_mhz = 0.396;
        cfg.b_grid_gauss = Some(vec![-0.3, 0.0, 0.3]);
        cfg.response_lowpass_rate_khz = Some(229.3);
        cfg.detector_highpass_khz = Some(75.0);
        cfg.power_label_mw = Some(0.25);
        cfg.phase_lock.n_steps = 12345;
        let text = emit_config(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        // Defaults round-trip too.
        let d = FileConfig::default();
        assert_eq!(parse_config(&emit_config(&d)).unwrap(), d);
    }

    #[test]
    fn eta_must_come_in_pairs() {
        let mut cfg = FileConfig::default();
        cfg.eta_c = None;
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("eta_b and eta_c"), "{err}");
    }

    #[test]
    fn lowpass_rate_key_overrides_mode() {
        let cfg = parse_config("response_lowpass = \"off\"\nresponse_lowpass_rate_khz = 100.0")
            .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(
            r.experiment.response_lowpass,
            ResponseLowpass::Rate(TAU * 100.0 * 1e3)
        );
    }

    #[test]
    fn csv_numbers_round_trip_exactly() {
        for &x in &[0.1, -3.25e-19, std::f64::consts::PI, 1e300, -0.0] {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn waveform_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let d1 = [0.5, -0.25, 0.125, -0.375];
        let d2 = [-0.5, 0.25, -0.125, 0.375];
        let mut text = String::from("# comment\nt_s,dI1,dI2\n");
        for i in 0..4 {
            text.push_str(&format!(
                "{},{},{}\n",
                fmt_num(i as f64 * 1e-9),
                fmt_num(d1[i]),
                fmt_num(d2[i])
            ));
        }
        std::fs::write(&path, text).unwrap();
        let (s1, s2) = read_waveforms_csv(&path).unwrap();
        assert_eq!(s1.dt, 1e-9);
        assert_eq!(s1.len(), 4);
        // Mean removal leaves the centered samples.
        assert_relative_eq!(s1.fluctuations[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(s2.fluctuations[3], 0.375, max_relative = 1e-12);
    }
}
