//! Steady-state density-matrix response of the three-level Lambda system.
//!
//! Level `a` is the shared excited state, `b` and `c` are the two ground
//! states. Beam 1 (Rabi frequency `omega1`) drives a-b, beam 2 (`omega2`)
//! drives a-c, and both beams carry the same instantaneous frequency `nu`.
//! All rates and frequencies are angular (rad/s).

use num_complex::Complex64;

use crate::{Error, Result};

/// Decay rates, transition frequencies and populations of the Lambda system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaAtomParams {
    /// Optical coherence decay rate a-b (rad/s).
    pub gamma_ab: f64,
    /// Optical coherence decay rate c-a (rad/s).
    pub gamma_ca: f64,
    /// Ground-state coherence decay rate (rad/s).
    pub gamma_cb: f64,
    /// Transition angular frequency a-b (rad/s).
    pub omega_ab: f64,
    /// Transition angular frequency a-c (rad/s).
    pub omega_ac: f64,
    /// Ground-state splitting (rad/s, signed; set by the Zeeman shift).
    pub omega_cb: f64,
    /// Excited-state population.
    pub n_a: f64,
    /// Ground-state population of level b.
    pub n_b: f64,
    /// Ground-state population of level c.
    pub n_c: f64,
}

impl LambdaAtomParams {
    /// Population difference n_b - n_a.
    pub fn n_ba(&self) -> f64 {
        self.n_b - self.n_a
    }

    /// Population difference n_c - n_a.
    pub fn n_ca(&self) -> f64 {
        self.n_c - self.n_a
    }

    /// Collects every invariant violation (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("gamma_ab", self.gamma_ab),
            ("gamma_ca", self.gamma_ca),
            ("gamma_cb", self.gamma_cb),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                v.push(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.gamma_cb >= self.gamma_ab || self.gamma_cb >= self.gamma_ca {
            v.push(format!(
                "gamma_cb ({}) must be smaller than gamma_ab ({}) and gamma_ca ({})",
                self.gamma_cb, self.gamma_ab, self.gamma_ca
            ));
        }
        for (name, value) in [("n_a", self.n_a), ("n_b", self.n_b), ("n_c", self.n_c)] {
            if !(0.0..=1.0).contains(&value) {
                v.push(format!("population {name} must lie in [0, 1], got {value}"));
            }
        }
        let total = self.n_a + self.n_b + self.n_c;
        if (total - 1.0).abs() > 1e-9 {
            v.push(format!("populations must sum to 1, got {total}"));
        }
        for (name, value) in [
            ("omega_ab", self.omega_ab),
            ("omega_ac", self.omega_ac),
            ("omega_cb", self.omega_cb),
        ] {
            if !value.is_finite() {
                v.push(format!("{name} must be finite, got {value}"));
            }
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

/// The two drive fields. A single carrier `nu` drives both beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveFields {
    /// Complex Rabi frequency of beam 1 (rad/s).
    pub omega1: Complex64,
    /// Complex Rabi frequency of beam 2 (rad/s).
    pub omega2: Complex64,
    /// Shared instantaneous carrier angular frequency (rad/s).
    pub nu: f64,
}

impl DriveFields {
    pub fn is_finite(&self) -> bool {
        self.omega1.re.is_finite()
            && self.omega1.im.is_finite()
            && self.omega2.re.is_finite()
            && self.omega2.im.is_finite()
            && self.nu.is_finite()
    }

    /// Total power carried by both beams, |Omega1|^2 + |Omega2|^2.
    pub fn total_power(&self) -> f64 {
        self.omega1.norm_sqr() + self.omega2.norm_sqr()
    }
}

/// Complex linewidths Gamma_ab, Gamma_ca, Gamma_cb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexLinewidths {
    pub big_gamma_ab: Complex64,
    pub big_gamma_ca: Complex64,
    pub big_gamma_cb: Complex64,
}

/// Steady-state density-matrix elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherences {
    pub rho_cb: Complex64,
    pub rho_ab: Complex64,
    pub rho_ca: Complex64,
}

impl Coherences {
    /// All magnitudes at most 1 (up to `tol` slack). Checked, not assumed:
    /// the steady-state formulas can exceed unity for unphysical drive.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.rho_cb.norm() <= 1.0 + tol
            && self.rho_ab.norm() <= 1.0 + tol
            && self.rho_ca.norm() <= 1.0 + tol
    }
}

/// Gamma_ab = gamma_ab + i(omega_ab - nu),
/// Gamma_ca = gamma_ca - i(omega_ac - nu),
/// Gamma_cb = gamma_cb + i(omega_cb - nu1 + nu2), with nu1 = nu2 = nu.
pub fn complex_linewidths(params: &LambdaAtomParams, drive: &DriveFields) -> ComplexLinewidths {
    ComplexLinewidths {
        big_gamma_ab: Complex64::new(params.gamma_ab, params.omega_ab - drive.nu),
        big_gamma_ca: Complex64::new(params.gamma_ca, -(params.omega_ac - drive.nu)),
        // nu1 - nu2 cancels for a shared carrier; only omega_cb survives.
        big_gamma_cb: Complex64::new(params.gamma_cb, params.omega_cb),
    }
}

/// Steady-state coherences with the ground-coherence numerator written
/// literally as Omega1*Omega2:
///
///   rho_cb = -[(G_ca + G_ab)/(2 G_ca G_ab)] * O1 O2
///            / (G_cb + |O2|^2/G_ab + |O1|^2/G_ca)
///   rho_ab = -i (n_ba O1 + rho_cb O2) / G_ab
///   rho_ca = +i (n_ca O2 + rho_cb O1) / G_ca
pub fn steady_state(params: &LambdaAtomParams, drive: &DriveFields) -> Result<Coherences> {
    steady_state_with(params, drive, false)
}

/// Same as [`steady_state`] but with `conjugate_omega2` replacing Omega2 by
/// its conjugate in the rho_cb numerator. For real fields both conventions
/// coincide; for complex fields only the conjugated form is invariant under
/// a common phase rotation of the two beams.
pub fn steady_state_with(
    params: &LambdaAtomParams,
    drive: &DriveFields,
    conjugate_omega2: bool,
) -> Result<Coherences> {
    if !drive.is_finite() {
        return Err(Error::NonFinite("drive fields"));
    }
    params.validate()?;
    let lw = complex_linewidths(params, drive);
    Ok(steady_state_unchecked(params, drive, &lw, conjugate_omega2))
}

/// Hot-path variant: no validation, precomputed linewidths.
pub(crate) fn steady_state_unchecked(
    params: &LambdaAtomParams,
    drive: &DriveFields,
    lw: &ComplexLinewidths,
    conjugate_omega2: bool,
) -> Coherences {
    let g_ab = lw.big_gamma_ab;
    let g_ca = lw.big_gamma_ca;
    let o1 = drive.omega1;
    let o2 = drive.omega2;
    let o2_num = if conjugate_omega2 { o2.conj() } else { o2 };
    let prefactor = (g_ca + g_ab) / (2.0 * g_ca * g_ab);
    let denom = lw.big_gamma_cb + o2.norm_sqr() / g_ab + o1.norm_sqr() / g_ca;
    let rho_cb = -prefactor * o1 * o2_num / denom;
    let i = Complex64::I;
    let rho_ab = -i * (params.n_ba() * o1 + rho_cb * o2) / g_ab;
    let rho_ca = i * (params.n_ca() * o2 + rho_cb * o1) / g_ca;
    Coherences {
        rho_cb,
        rho_ab,
        rho_ca,
    }
}
