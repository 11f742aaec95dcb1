//! Slab-by-slab integration of the two coupled field amplitudes through the
//! optically thick cell:
//!
//!   dOmega1/dz = -i eta_b rho_ab
//!   dOmega2/dz = -i eta_c rho_ac
//!
//! The steady state defines rho_ca while the second propagation equation
//! is written with rho_ac. We take rho_ac to be the conjugate partner of rho_ca,
//! applied structurally: the populations and rho_cb enter through their
//! conjugates while the field amplitudes stay unconjugated,
//!
//!   rho_ac = -i (n_ca Omega2 + conj(rho_cb) Omega1) / conj(Gamma_ca).
//!
//! For real fields this equals conj(rho_ca); unlike a wholesale conjugation
//! of rho_ca it keeps the coupling analytic in the fields, so both beams
//! attenuate at resonance (passivity) and the equations stay covariant under
//! a common phase rotation. The literal rho_ca alternative is available
//! behind the `literal_rho_ca` debug flag.

use num_complex::Complex64;

use crate::lambda_medium::{complex_linewidths, DriveFields, LambdaAtomParams};
use crate::{Error, Result};

/// Alias used throughout the propagation code: the field state that marches
/// along z is exactly the pair of drive amplitudes plus the shared carrier.
pub type FieldState = DriveFields;

/// Cell geometry, atomic density and coupling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumConfig {
    /// Cell length (m).
    pub length: f64,
    /// Slab count for the fixed-step z integration.
    pub n_slabs: usize,
    /// Atomic number density (1/m^3).
    pub density: f64,
    /// Transition dipole moment on a-b (C*m).
    pub dipole_b: f64,
    /// Transition dipole moment on a-c (C*m).
    pub dipole_c: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon0: f64,
    /// Speed of light (m/s).
    pub c_light: f64,
    /// Direct coupling constants (eta_b, eta_c) in rad/(s*m), bypassing the
    /// dipole formula when present.
    pub eta_override: Option<(f64, f64)>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            length: 0.075,
            n_slabs: 400,
            density: 1e18,
            dipole_b: 2.5e-29,
            dipole_c: 2.5e-29,
            epsilon0: 8.8541878128e-12,
            c_light: 2.99792458e8,
            // Calibrated to optical depth 5 for a single weak beam over
            // 7.5 cm with n_ba = 1/2: eta = OD * gamma_ab / (2 n_ba l).
            eta_override: Some((1.2566370614359172e9, 1.2566370614359172e9)),
        }
    }
}

impl MediumConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.length > 0.0) || !self.length.is_finite() {
            v.push(format!("length must be positive, got {}", self.length));
        }
        if self.n_slabs < 1 {
            v.push("n_slabs must be at least 1".into());
        }
        if !(self.density >= 0.0) || !self.density.is_finite() {
            v.push(format!("density must be non-negative, got {}", self.density));
        }
        if self.eta_override.is_none() {
            for (name, value) in [
                ("dipole_b", self.dipole_b),
                ("dipole_c", self.dipole_c),
                ("epsilon0", self.epsilon0),
                ("c_light", self.c_light),
            ] {
                if !(value > 0.0) || !value.is_finite() {
                    v.push(format!("{name} must be positive, got {value}"));
                }
            }
        }
        if let Some((eb, ec)) = self.eta_override {
            if !eb.is_finite() || !ec.is_finite() {
                v.push(format!("eta_override must be finite, got ({eb}, {ec})"));
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

/// How the steady-state response feeds the propagation equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Use Omega1 * conj(Omega2) in the rho_cb numerator. On by default:
    /// it is the only choice invariant under a common phase of both beams,
    /// which the stochastic carrier makes mandatory.
    pub conjugate_omega2: bool,
    /// Debug flag: feed the literal rho_ca into the second propagation
    /// equation instead of the structural conjugate (see module docs).
    pub literal_rho_ca: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            conjugate_omega2: true,
            literal_rho_ca: false,
        }
    }
}

/// Diagnostic record of the z-integration.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationProfile {
    /// Slab boundary positions from 0 to length (m).
    pub z_grid: Vec<f64>,
    pub omega1_of_z: Vec<Complex64>,
    pub omega2_of_z: Vec<Complex64>,
}

/// eta_b = nu N p_b / (2 eps0 c), eta_c likewise; the override wins when set.
pub fn coupling_constants(medium: &MediumConfig, nu: f64) -> Result<(f64, f64)> {
    if !nu.is_finite() {
        return Err(Error::NonFinite("carrier frequency"));
    }
    medium.validate()?;
    if let Some(pair) = medium.eta_override {
        return Ok(pair);
    }
    let scale = nu * medium.density / (2.0 * medium.epsilon0 * medium.c_light);
    Ok((scale * medium.dipole_b, scale * medium.dipole_c))
}

/// Everything about the steady-state response that is constant along z for a
/// fixed (params, nu): the complex linewidths and their reciprocals. Computed
/// once per time sample; the z loop then runs division-light.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SteadyCtx {
    inv_g_ab: Complex64,
    inv_g_ca: Complex64,
    inv_g_ca_conj: Complex64,
    g_cb: Complex64,
    prefactor: Complex64,
    n_ba: f64,
    n_ca: f64,
}

impl SteadyCtx {
    pub(crate) fn new(params: &LambdaAtomParams, nu: f64) -> Self {
        let lw = complex_linewidths(
            params,
            &DriveFields {
                omega1: Complex64::ZERO,
                omega2: Complex64::ZERO,
                nu,
            },
        );
        let inv_g_ab = lw.big_gamma_ab.inv();
        let inv_g_ca = lw.big_gamma_ca.inv();
        SteadyCtx {
            inv_g_ab,
            inv_g_ca,
            inv_g_ca_conj: inv_g_ca.conj(),
            g_cb: lw.big_gamma_cb,
            prefactor: 0.5 * (inv_g_ab + inv_g_ca),
            n_ba: params.n_ba(),
            n_ca: params.n_ca(),
        }
    }

    /// Ground-state coherence for the instantaneous fields.
    #[inline]
    pub(crate) fn rho_cb(
        &self,
        omega1: Complex64,
        omega2: Complex64,
        conjugate_omega2: bool,
    ) -> Complex64 {
        let o2_num = if conjugate_omega2 { omega2.conj() } else { omega2 };
        let denom =
            self.g_cb + omega2.norm_sqr() * self.inv_g_ab + omega1.norm_sqr() * self.inv_g_ca;
        -self.prefactor * omega1 * o2_num / denom
    }

    /// z-derivatives of both amplitudes for a given (possibly filtered or
    /// frozen) rho_cb.
    #[inline]
    pub(crate) fn derivs(
        &self,
        omega1: Complex64,
        omega2: Complex64,
        rho_cb: Complex64,
        eta_b: f64,
        eta_c: f64,
        literal_rho_ca: bool,
    ) -> (Complex64, Complex64) {
        let i = Complex64::I;
        let rho_ab = -i * (self.n_ba * omega1 + rho_cb * omega2) * self.inv_g_ab;
        let d1 = -i * eta_b * rho_ab;
        let d2 = if literal_rho_ca {
            let rho_ca = i * (self.n_ca * omega2 + rho_cb * omega1) * self.inv_g_ca;
            -i * eta_c * rho_ca
        } else {
            let rho_ac =
                -i * (self.n_ca * omega2 + rho_cb.conj() * omega1) * self.inv_g_ca_conj;
            -i * eta_c * rho_ac
        };
        (d1, d2)
    }

    /// Full RHS with rho_cb re-evaluated from the instantaneous fields.
    #[inline]
    pub(crate) fn rhs(
        &self,
        omega1: Complex64,
        omega2: Complex64,
        eta_b: f64,
        eta_c: f64,
        opts: &PropagationOptions,
    ) -> (Complex64, Complex64) {
        let cb = self.rho_cb(omega1, omega2, opts.conjugate_omega2);
        self.derivs(omega1, omega2, cb, eta_b, eta_c, opts.literal_rho_ca)
    }
}

/// One classical 4th-order slab step; the steady state is re-evaluated at
/// every stage.
pub fn step(
    fields: &FieldState,
    params: &LambdaAtomParams,
    eta: (f64, f64),
    dz: f64,
    opts: &PropagationOptions,
) -> Result<FieldState> {
    if !(dz > 0.0) || !dz.is_finite() {
        return Err(Error::InvalidParams(format!("dz must be positive, got {dz}")));
    }
    if !fields.is_finite() {
        return Err(Error::NonFinite("input fields"));
    }
    let ctx = SteadyCtx::new(params, fields.nu);
    let out = rk4_step(fields, &ctx, eta, dz, opts);
    if !out.is_finite() || out.total_power() > 1e6 * fields.total_power().max(f64::MIN_POSITIVE) {
        return Err(Error::FieldDiverged(format!(
            "|Omega1| = {:e}, |Omega2| = {:e} after one step (eta*dz too large?)",
            out.omega1.norm(),
            out.omega2.norm()
        )));
    }
    Ok(out)
}

#[inline]
pub(crate) fn rk4_step(
    fields: &FieldState,
    ctx: &SteadyCtx,
    (eta_b, eta_c): (f64, f64),
    dz: f64,
    opts: &PropagationOptions,
) -> FieldState {
    let (o1, o2) = (fields.omega1, fields.omega2);
    let (k1a, k1b) = ctx.rhs(o1, o2, eta_b, eta_c, opts);
    let h = 0.5 * dz;
    let (k2a, k2b) = ctx.rhs(o1 + h * k1a, o2 + h * k1b, eta_b, eta_c, opts);
    let (k3a, k3b) = ctx.rhs(o1 + h * k2a, o2 + h * k2b, eta_b, eta_c, opts);
    let (k4a, k4b) = ctx.rhs(o1 + dz * k3a, o2 + dz * k3b, eta_b, eta_c, opts);
    let sixth = dz / 6.0;
    FieldState {
        omega1: o1 + sixth * (k1a + 2.0 * (k2a + k3a) + k4a),
        omega2: o2 + sixth * (k1b + 2.0 * (k2b + k3b) + k4b),
        nu: fields.nu,
    }
}

/// Integrates the fields over the full cell, recording the z-profile.
pub fn propagate(
    fields_in: &FieldState,
    params: &LambdaAtomParams,
    medium: &MediumConfig,
) -> Result<(FieldState, PropagationProfile)> {
    propagate_with(fields_in, params, medium, &PropagationOptions::default())
}

pub fn propagate_with(
    fields_in: &FieldState,
    params: &LambdaAtomParams,
    medium: &MediumConfig,
    opts: &PropagationOptions,
) -> Result<(FieldState, PropagationProfile)> {
    params.validate()?;
    if !fields_in.is_finite() {
        return Err(Error::NonFinite("input fields"));
    }
    let eta = coupling_constants(medium, fields_in.nu)?;
    let n = medium.n_slabs;
    let dz = medium.length / n as f64;
    let ctx = SteadyCtx::new(params, fields_in.nu);
    let mut z_grid = Vec::with_capacity(n + 1);
    let mut omega1_of_z = Vec::with_capacity(n + 1);
    let mut omega2_of_z = Vec::with_capacity(n + 1);
    let mut state = *fields_in;
    z_grid.push(0.0);
    omega1_of_z.push(state.omega1);
    omega2_of_z.push(state.omega2);
    let power_in = fields_in.total_power().max(f64::MIN_POSITIVE);
    for k in 0..n {
        if eta != (0.0, 0.0) {
            state = rk4_step(&state, &ctx, eta, dz, opts);
        }
        if !state.is_finite() || state.total_power() > 1e6 * power_in {
            return Err(Error::FieldDiverged(format!(
                "at z = {:e} m (slab {}/{})",
                (k + 1) as f64 * dz,
                k + 1,
                n
            )));
        }
        z_grid.push((k + 1) as f64 * dz);
        omega1_of_z.push(state.omega1);
        omega2_of_z.push(state.omega2);
    }
    // Land the last grid point exactly on the cell length.
    *z_grid.last_mut().unwrap() = medium.length;
    Ok((
        state,
        PropagationProfile {
            z_grid,
            omega1_of_z,
            omega2_of_z,
        },
    ))
}

/// Exit fields only; the hot path used by sweeps.
pub(crate) fn propagate_exit(
    fields_in: &FieldState,
    ctx: &SteadyCtx,
    eta: (f64, f64),
    length: f64,
    n_slabs: usize,
    opts: &PropagationOptions,
) -> Result<FieldState> {
    let dz = length / n_slabs as f64;
    let mut state = *fields_in;
    let power_in = fields_in.total_power().max(f64::MIN_POSITIVE);
    for _ in 0..n_slabs {
        state = rk4_step(&state, ctx, eta, dz, opts);
    }
    if !state.is_finite() || state.total_power() > 1e6 * power_in {
        return Err(Error::FieldDiverged("exit fields non-finite".into()));
    }
    Ok(state)
}

/// Intensity transmissions t_k = |Omega_k(out)|^2 / |Omega_k(in)|^2.
pub fn transmission(fields_in: &FieldState, fields_out: &FieldState) -> Result<(f64, f64)> {
    let i1 = fields_in.omega1.norm_sqr();
    let i2 = fields_in.omega2.norm_sqr();
    if i1 == 0.0 {
        return Err(Error::ZeroInputIntensity(1));
    }
    if i2 == 0.0 {
        return Err(Error::ZeroInputIntensity(2));
    }
    Ok((
        fields_out.omega1.norm_sqr() / i1,
        fields_out.omega2.norm_sqr() / i2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_params() -> LambdaAtomParams {
        LambdaAtomParams {
            gamma_ab: 1.0,
            gamma_ca: 1.0,
            gamma_cb: 0.01,
            omega_ab: 0.0,
            omega_ac: 0.0,
            omega_cb: 0.0,
            n_a: 0.0,
            n_b: 0.5,
            n_c: 0.5,
        }
    }

    fn fields(o1: f64, o2: f64) -> FieldState {
        FieldState {
            omega1: Complex64::new(o1, 0.0),
            omega2: Complex64::new(o2, 0.0),
            nu: 0.0,
        }
    }

    fn unit_medium(eta: f64, n_slabs: usize) -> MediumConfig {
        MediumConfig {
            length: 1.0,
            n_slabs,
            eta_override: Some((eta, eta)),
            ..MediumConfig::default()
        }
    }

    #[test]
    fn coupling_constants_vacuum_cell() {
        let medium = MediumConfig {
            density: 0.0,
            eta_override: None,
            ..MediumConfig::default()
        };
        assert_eq!(coupling_constants(&medium, 1e15).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn coupling_constants_override_passthrough() {
        let medium = MediumConfig {
            eta_override: Some((5.0, 5.0)),
            dipole_b: f64::NAN, // ignored when overridden
            ..MediumConfig::default()
        };
        assert_eq!(coupling_constants(&medium, 1e15).unwrap(), (5.0, 5.0));
    }

    #[test]
    fn coupling_constants_formula() {
        // Hand evaluation: nu*N*p/(2 eps0 c) with N = 1e18 m^-3,
        // p = 2.5e-29 C m, nu = 2.369e15 rad/s, eps0 = 8.8541878128e-12,
        // c = 2.99792458e8 gives 1.11559e7 rad/(s m).
        let medium = MediumConfig {
            eta_override: None,
            ..MediumConfig::default()
        };
        let nu = 2.369e15;
        let expect = nu * 1e18 * 2.5e-29 / (2.0 * 8.8541878128e-12 * 2.99792458e8);
        let (eb, ec) = coupling_constants(&medium, nu).unwrap();
        assert_relative_eq!(eb, expect, max_relative = 1e-14);
        assert_relative_eq!(eb, 1.115_59e7, max_relative = 1e-5);
        assert_eq!(eb, ec);
    }

    #[test]
    fn coupling_constants_rejects_non_finite_nu() {
        assert!(coupling_constants(&MediumConfig::default(), f64::INFINITY).is_err());
    }

    #[test]
    fn step_transparent_medium_is_identity() {
        let f = fields(0.1, 0.1);
        let out = step(&f, &unit_params(), (0.0, 0.0), 0.1, &PropagationOptions::default())
            .unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn step_matches_euler_reference_at_small_dz() {
        // Forward-Euler reference: eta_b = 1, dz = 0.1, rho_ab = -0.016667i
        // moves Omega1 from 0.1 to 0.098333 (pure real decay). RK4 over the
        // same interval agrees to O(dz^2) of the decay.
        let f = fields(0.1, 0.1);
        let p = unit_params();
        let euler = 0.1 - 0.1 * (0.1 / 6.0); // 0.098333...
        let out = step(&f, &p, (1.0, 1.0), 0.1, &PropagationOptions::default()).unwrap();
        assert_relative_eq!(out.omega1.re, euler, max_relative = 2e-3);
        assert!(out.omega1.im.abs() < 1e-12);
        // Refining dz and chaining Euler converges to the RK4 answer.
        let mut o1 = Complex64::new(0.1, 0.0);
        let mut o2 = Complex64::new(0.1, 0.0);
        let n = 100_000;
        let dz = 0.1 / n as f64;
        let ctx = SteadyCtx::new(&p, 0.0);
        for _ in 0..n {
            let (d1, d2) = ctx.rhs(o1, o2, 1.0, 1.0, &PropagationOptions::default());
            o1 += dz * d1;
            o2 += dz * d2;
        }
        assert_relative_eq!(out.omega1.re, o1.re, max_relative = 1e-8);
    }

    #[test]
    fn single_beam_obeys_beers_law() {
        // Omega2 = 0 at one-photon resonance: amplitude decay rate
        // eta_b * n_ba / gamma_ab per unit length.
        let p = unit_params();
        let eta = 0.8;
        let medium = unit_medium(eta, 2000);
        let f_in = FieldState {
            omega1: Complex64::new(1e-3, 0.0),
            omega2: Complex64::ZERO,
            nu: 0.0,
        };
        let (out, profile) = propagate(&f_in, &p, &medium).unwrap();
        let rate = eta * p.n_ba() / p.gamma_ab;
        assert_relative_eq!(out.omega1.norm(), 1e-3 * (-rate).exp(), max_relative = 1e-9);
        // Half-length check against the closed form.
        let mid = profile.omega1_of_z[1000].norm();
        assert_relative_eq!(mid, 1e-3 * (-rate * 0.5).exp(), max_relative = 1e-9);
    }

    #[test]
    fn propagate_density_zero_is_identity() {
        let medium = MediumConfig {
            density: 0.0,
            eta_override: None,
            ..MediumConfig::default()
        };
        let f = fields(0.3, 0.2);
        let (out, profile) = propagate(&f, &unit_params(), &medium).unwrap();
        assert_eq!(out, f);
        assert!(profile.omega1_of_z.iter().all(|&o| o == f.omega1));
        assert_eq!(profile.z_grid.len(), medium.n_slabs + 1);
        assert_eq!(profile.z_grid[0], 0.0);
        assert_eq!(*profile.z_grid.last().unwrap(), medium.length);
    }

    #[test]
    fn grid_convergence() {
        let p = unit_params();
        let f = fields(0.1, 0.1);
        let coarse = propagate(&f, &p, &unit_medium(2.0, 400)).unwrap().0;
        let fine = propagate(&f, &p, &unit_medium(2.0, 800)).unwrap().0;
        let (t1c, t2c) = transmission(&f, &coarse).unwrap();
        let (t1f, t2f) = transmission(&f, &fine).unwrap();
        assert!((t1c - t1f).abs() / t1f < 1e-6);
        assert!((t2c - t2f).abs() / t2f < 1e-6);
    }

    #[test]
    fn eit_peak_at_two_photon_resonance() {
        let f = fields(0.1, 0.1);
        let medium = unit_medium(3.0, 400);
        let mut p = unit_params();
        let (out0, _) = propagate(&f, &p, &medium).unwrap();
        let t0 = transmission(&f, &out0).unwrap().0;
        for dcb in [-0.5, -0.05, 0.05, 0.5] {
            p.omega_cb = dcb;
            let (out, _) = propagate(&f, &p, &medium).unwrap();
            let t = transmission(&f, &out).unwrap().0;
            assert!(t <= t0 + 1e-12, "detuned transmission {t} above peak {t0}");
        }
    }

    #[test]
    fn transmission_trivial_cases() {
        let f = fields(0.2, 0.4);
        assert_eq!(transmission(&f, &f).unwrap(), (1.0, 1.0));
        let halved = fields(0.1, 0.2);
        let (t1, t2) = transmission(&f, &halved).unwrap();
        assert_relative_eq!(t1, 0.25);
        assert_relative_eq!(t2, 0.25);
        assert!(transmission(&fields(0.0, 1.0), &f).is_err());
    }

    #[test]
    fn transmission_from_euler_example() {
        let t1 = (0.098333f64 / 0.1).powi(2);
        assert_relative_eq!(t1, 0.96694, max_relative = 1e-4);
    }

    #[test]
    fn literal_rho_ca_flag_changes_second_beam_only_when_fields_complex() {
        let p = unit_params();
        let f = FieldState {
            omega1: Complex64::from_polar(0.1, 0.3),
            omega2: Complex64::from_polar(0.1, 0.3),
            nu: 0.2,
        };
        let default = step(&f, &p, (1.0, 1.0), 0.05, &PropagationOptions::default()).unwrap();
        let literal = step(
            &f,
            &p,
            (1.0, 1.0),
            0.05,
            &PropagationOptions {
                literal_rho_ca: true,
                ..PropagationOptions::default()
            },
        )
        .unwrap();
        assert_ne!(default.omega2, literal.omega2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        // Passivity: with n_a = 0 the medium has no inversion, so total exit
        // power never exceeds total input power, for any detunings and
        // either rho_cb convention.
        #[test]
        fn passivity(
            g_ab in 0.1f64..10.0,
            g_ca in 0.1f64..10.0,
            g_cb_frac in 1e-4f64..0.5,
            d1 in -5.0f64..5.0,
            d2 in -5.0f64..5.0,
            dcb in -5.0f64..5.0,
            nb in 0.05f64..0.95,
            o1 in 1e-3f64..2.0,
            o2 in 1e-3f64..2.0,
            phase in 0.0f64..std::f64::consts::TAU,
            eta in 0.0f64..5.0,
            conj in proptest::bool::ANY,
        ) {
            let p = LambdaAtomParams {
                gamma_ab: g_ab,
                gamma_ca: g_ca,
                gamma_cb: g_cb_frac * g_ab.min(g_ca),
                omega_ab: d1,
                omega_ac: d2,
                omega_cb: dcb,
                n_a: 0.0,
                n_b: nb,
                n_c: 1.0 - nb,
            };
            let f = FieldState {
                omega1: Complex64::new(o1, 0.0),
                omega2: Complex64::from_polar(o2, phase),
                nu: 0.0,
            };
            let medium = unit_medium(eta, 400);
            let opts = PropagationOptions { conjugate_omega2: conj, literal_rho_ca: false };
            let (out, _) = propagate_with(&f, &p, &medium, &opts).unwrap();
            prop_assert!(out.total_power() <= f.total_power() * (1.0 + 1e-9));
        }

        // eta = 0 makes propagate the identity, bit for bit.
        #[test]
        fn identity_at_zero_coupling(o1 in -2.0f64..2.0, o2 in -2.0f64..2.0, d in -3.0f64..3.0) {
            let mut p = unit_params();
            p.omega_cb = d;
            let f = fields(o1, o2);
            let (out, _) = propagate(&f, &p, &unit_medium(0.0, 50)).unwrap();
            prop_assert_eq!(out, f);
        }
    }
}
