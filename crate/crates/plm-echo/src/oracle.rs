//! Closed-form storage/retrieval expressions used as the test oracle for the
//! propagation integrator.
//!
//! Couplings enter only through the ratio r = |g_s/g_e| and the resonant
//! absorption coefficients α₀; absolute coupling strength is gauged away. The
//! working quantities are
//!
//! ```text
//! α_s = α₀_s sin²(θ₀/2)        absorption on 2–3 given the prepared spin wave
//! α_e = α₀_e cos²(θ₀/2)        re-absorption on 1–3 during retrieval
//! x   = r · tan(θ₀/2)          symmetry parameter; x = 1 ⇔ α_s = α_e
//!                              (when α₀_s = r² α₀_e)
//! η   = [2x/(1+x²)]² (1 − e^{−(α_s+α_e)L/2})²
//! ```
//!
//! The efficiency follows from the echo field at the entry face: the stored
//! coherence at depth z scales as e^{−α_s z/2}, each slice radiates backward
//! with source weight √(α_s α_e)·(sinθ₀ / (sin²+r⁻²cos²-combination)) and is
//! re-absorbed by e^{−α_e z/2} on the way out; ∫₀^L of the product gives the
//! bracket and the prefactor collapses to 2x/(1+x²).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// RF pulse area θ₀.
    pub theta0: f64,
    /// Coupling ratio r = |g_s/g_e|.
    pub coupling_ratio: f64,
    /// Resonant absorption coefficient on 2–3 (1/m).
    pub alpha0_s: f64,
    /// Resonant absorption coefficient on 1–3 (1/m).
    pub alpha0_e: f64,
    /// Medium length (m).
    pub length: f64,
    /// Programmed storage time T (s).
    pub storage_t: f64,
    /// Composite preparation phase φ_c.
    pub composite_phase: f64,
    /// Group velocity for the retardation term z/v_g inside the echo
    /// envelope argument; infinity drops the term.
    pub v_g: f64,
}

impl OracleParams {
    pub fn new(
        theta0: f64,
        coupling_ratio: f64,
        alpha0_s: f64,
        alpha0_e: f64,
        length: f64,
        storage_t: f64,
        composite_phase: f64,
    ) -> Result<Self> {
        if !(coupling_ratio > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coupling ratio must be positive, got {coupling_ratio}"
            )));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "medium length must be positive, got {length}"
            )));
        }
        if alpha0_s < 0.0 || alpha0_e < 0.0 {
            return Err(Error::InvalidArgument("absorption coefficients must be >= 0".into()));
        }
        Ok(OracleParams {
            theta0,
            coupling_ratio,
            alpha0_s,
            alpha0_e,
            length,
            storage_t,
            composite_phase,
            v_g: f64::INFINITY,
        })
    }

    /// α_s = α₀_s sin²(θ₀/2).
    pub fn alpha_s(&self) -> f64 {
        self.alpha0_s * (0.5 * self.theta0).sin().powi(2)
    }

    /// α_e = α₀_e cos²(θ₀/2).
    pub fn alpha_e(&self) -> f64 {
        self.alpha0_e * (0.5 * self.theta0).cos().powi(2)
    }

    /// x = r tan(θ₀/2).
    pub fn x(&self) -> Result<f64> {
        symmetry_parameter(self.coupling_ratio, self.theta0)
    }

    /// Whether α₀_s = r²·α₀_e holds, i.e. the α-values and the coupling
    /// ratio describe the same pair of transitions.
    pub fn couplings_consistent(&self, tol: f64) -> bool {
        let lhs = self.alpha0_s;
        let rhs = self.coupling_ratio * self.coupling_ratio * self.alpha0_e;
        (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs()).max(1e-300)
    }
}

/// Weak-field transmitted amplitude ratio e^{−α_s z/2} at depth z.
pub fn transmitted_amplitude(params: &OracleParams, z: f64) -> Result<f64> {
    if !(0.0..=params.length).contains(&z) {
        return Err(Error::InvalidArgument(format!(
            "z = {z} outside the medium [0, {}]",
            params.length
        )));
    }
    Ok((-0.5 * params.alpha_s() * z).exp())
}

/// Storage-snapshot coherences at detuning Δ and depth z for a unit-coupling
/// convention (couplings folded; magnitudes and ratios are the tested
/// quantities):
///
/// ```text
/// σ23 = −i sin²(θ₀/2) e^{−α_s z/2} b̃(Δ)
/// σ13 = (1/2) sinθ₀ e^{iφ_c} e^{iΔT} e^{−α_s z/2} b̃(Δ)
/// ```
pub fn stored_coherences(params: &OracleParams, delta: f64, z: f64, spectrum: C64) -> (C64, C64) {
    let half = 0.5 * params.theta0;
    let att = (-0.5 * params.alpha_s() * z).exp();
    let s23 = -C64::i() * half.sin().powi(2) * att * spectrum;
    let s13 = 0.5
        * params.theta0.sin()
        * C64::from_polar(1.0, params.composite_phase + delta * params.storage_t)
        * att
        * spectrum;
    (s23, s13)
}

/// Echo field inside the medium:
///
/// ```text
/// b_e(z, t) = −i [2x/(1+x²)] e^{iφ_c} b_s(t − t_s − T + z/v_g)
///             · e^{α_e z/2} [e^{−(α_e+α_s)z/2} − e^{−(α_e+α_s)L/2}]
/// ```
///
/// `input` is the signal envelope b_s(·) referenced so that its own peak sits
/// at argument 0, and `t` is measured from t_s.
pub fn echo_closed_form(
    params: &OracleParams,
    z: f64,
    t: f64,
    input: &dyn Fn(f64) -> C64,
) -> C64 {
    let x = params.coupling_ratio * (0.5 * params.theta0).tan();
    let prefactor = -C64::i()
        * (2.0 * x / (1.0 + x * x))
        * C64::from_polar(1.0, params.composite_phase);
    let a_tot = params.alpha_s() + params.alpha_e();
    let bracket = (params.alpha_e() * z * 0.5).exp()
        * ((-0.5 * a_tot * z).exp() - (-0.5 * a_tot * params.length).exp());
    let retard = if params.v_g.is_finite() { z / params.v_g } else { 0.0 };
    prefactor * bracket * input(t - params.storage_t + retard)
}

/// η = [2x/(1+x²)]² (1 − e^{−(α_sL + α_eL)/2})².
pub fn retrieval_efficiency(x: f64, alpha_s_l: f64, alpha_e_l: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let pref = 2.0 * x / (1.0 + x * x);
    let depth = 1.0 - (-0.5 * (alpha_s_l + alpha_e_l)).exp();
    (pref * depth).powi(2)
}

/// Symmetry parameter x = r·tan(θ₀/2); the matched-absorption condition is
/// x = 1. Singular exactly at θ₀ ∈ {0, π}.
pub fn symmetry_parameter(coupling_ratio: f64, theta0: f64) -> Result<f64> {
    if !(coupling_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coupling ratio must be positive, got {coupling_ratio}"
        )));
    }
    if theta0 <= 0.0 || theta0 >= std::f64::consts::PI {
        return Err(Error::InvalidArgument(format!(
            "pulse area must lie strictly inside (0, pi), got {theta0}"
        )));
    }
    Ok(coupling_ratio * (0.5 * theta0).tan())
}
