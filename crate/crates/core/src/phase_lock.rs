//! Adler-type relative-phase dynamics, theta' = a - b sin(theta) + F(t):
//! locked (fixed-point) solutions for |a| < b, running solutions otherwise.
//!
//! The forcing term F(theta) is conventionally built from two Langevin
//! forces F+- with unspecified statistics; the theta-dependent combination of two independent
//! white forces of equal strength has theta-independent intensity, so F is
//! modeled as a single Gaussian white force of intensity 2D with D a free
//! input. The (a, b) coefficients are free parameters here; any mapping onto
//! Lambda-system quantities lives in documentation only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockParams {
    /// Detuning-like drift (rad/s).
    pub a: f64,
    /// Locking strength (rad/s).
    pub b: f64,
    /// Langevin noise strength D (rad^2/s).
    pub diffusion: f64,
    /// Initial phase (rad).
    pub theta0: f64,
    /// Time step (s).
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for LockParams {
    fn default() -> Self {
        LockParams {
            a: 0.5,
            b: 1.0,
            diffusion: 0.0,
            theta0: 0.0,
            dt: 0.01,
            n_steps: 10_000,
            seed: 0,
        }
    }
}

impl LockParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.b >= 0.0) || !self.b.is_finite() {
            v.push(format!("b must be non-negative, got {}", self.b));
        }
        if !(self.diffusion >= 0.0) || !self.diffusion.is_finite() {
            v.push(format!("diffusion must be non-negative, got {}", self.diffusion));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            v.push(format!("dt must be positive, got {}", self.dt));
        }
        if !self.a.is_finite() || !self.theta0.is_finite() {
            v.push("a and theta0 must be finite".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }
}

/// Unwrapped phase samples; theta[0] = theta0, length n_steps + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub dt: f64,
    pub theta: Vec<f64>,
}

/// Lock verdict and the statistics behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockDiagnostics {
    pub locked: bool,
    /// Least-squares slope of the unwrapped phase (rad/s).
    pub mean_drift_rate: f64,
    /// Circular standard deviation of theta mod 2*pi over the second half
    /// of the record (rad).
    pub circular_spread: f64,
}

/// Euler-Maruyama integration; Gaussian increments of variance 2*D*dt.
/// Deterministic given the seed; D = 0 reduces to plain Euler.
pub fn integrate_theta(p: &LockParams) -> Result<PhaseTrajectory> {
    p.validate()?;
    let bound = p.dt * (p.a.abs() + p.b);
    if bound >= 0.1 {
        return Err(Error::UnstableStep(bound));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise_amp = (2.0 * p.diffusion * p.dt).sqrt();
    let mut theta = Vec::with_capacity(p.n_steps + 1);
    let mut th = p.theta0;
    theta.push(th);
    for _ in 0..p.n_steps {
        th += p.dt * (p.a - p.b * th.sin());
        if noise_amp > 0.0 {
            th += noise_amp * rng.sample::<f64, _>(StandardNormal);
        }
        theta.push(th);
    }
    Ok(PhaseTrajectory { dt: p.dt, theta })
}

/// Locked iff the drift rate is below 1% of max(b, |a|) and the circular
/// spread stays under pi/2.
pub fn lock_diagnostics(traj: &PhaseTrajectory, p: &LockParams) -> Result<LockDiagnostics> {
    let n = traj.theta.len();
    if n < 100 {
        return Err(Error::RecordTooShort(format!(
            "lock_diagnostics needs at least 100 samples, got {n}"
        )));
    }
    // Least-squares slope of theta against time.
    let nf = n as f64;
    let t_mean = 0.5 * (n - 1) as f64 * traj.dt;
    let th_mean = traj.theta.iter().sum::<f64>() / nf;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &th) in traj.theta.iter().enumerate() {
        let t = i as f64 * traj.dt - t_mean;
        num += t * (th - th_mean);
        den += t * t;
    }
    let mean_drift_rate = num / den;
    // Circular spread over the second half.
    let half = &traj.theta[n / 2..];
    let (mut c, mut s) = (0.0, 0.0);
    for &th in half {
        c += th.cos();
        s += th.sin();
    }
    let r = ((c * c + s * s).sqrt() / half.len() as f64).min(1.0);
    let circular_spread = if r > 0.0 { (-2.0 * r.ln()).sqrt() } else { f64::INFINITY };
    let scale = p.b.max(p.a.abs());
    let locked = mean_drift_rate.abs() < 0.01 * scale && circular_spread < std::f64::consts::FRAC_PI_2;
    Ok(LockDiagnostics {
        locked,
        mean_drift_rate,
        circular_spread,
    })
}
