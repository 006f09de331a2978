//! Instantaneous pulse algebra: RF rotations on the spin doublet and optical
//! π-pulses, applied as exact two-level unitaries on the tracked coherence
//! amplitudes.
//!
//! # Rotation convention (frozen)
//!
//! A pulse of area θ and phase φ on the ordered pair (lo, hi) maps level
//! amplitudes as
//!
//! ```text
//! a_lo' =            cos(θ/2) a_lo + i e^{-iφ} sin(θ/2) a_hi
//! a_hi' = i e^{+iφ} sin(θ/2) a_lo +            cos(θ/2) a_hi
//! ```
//!
//! and coherence amplitudes ⟨P̂_xy⟩ = a_x* a_y transform by conjugation,
//! M → U* M Uᵀ. Free evolution in the rotating frame multiplies optical
//! coherences by e^{-iΔt} per bin (both excited levels share one Δ per atom).
//!
//! With this convention the preparation sequence RF(θ₀, φ₀) → π(1–4, φ₁) →
//! wait T → π(1–4, φ₂) leaves the spin wave
//!
//! ```text
//! rho12(Δ) = (i/2) sin θ₀ · e^{iΔT} · e^{iφ_c},   φ_c = φ₀ − φ₁ + φ₂ + π,
//! ```
//!
//! where the deterministic carrier phases (ω₄₁T, ω₂₁τ) are absorbed into the
//! frame. Only phase differences across bins are physical observables in the
//! tests; φ_c is reported for bookkeeping.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleState, Level, N_LEVELS, N_PAIRS, PAIRS, RHO12};
use crate::{Error, Result};

/// Transitions addressable by an optical π-pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiTransition {
    /// |1⟩↔|4⟩ — preparation and storage-extending rephasing pairs.
    Opt14,
    /// |2⟩↔|4⟩ — storage-shortening rephasing pairs.
    Opt24,
    /// |3⟩↔|s⟩ — shelving for on-demand readout.
    Shelf3s,
}

impl PiTransition {
    pub fn levels(self) -> (Level, Level) {
        match self {
            PiTransition::Opt14 => (Level::G1, Level::E4),
            PiTransition::Opt24 => (Level::G2, Level::E4),
            PiTransition::Shelf3s => (Level::E3, Level::Shelf),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PiTransition::Opt14 => "1-4",
            PiTransition::Opt24 => "2-4",
            PiTransition::Shelf3s => "3-s",
        }
    }
}

/// RF pulse on the spin transition |1⟩↔|2⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfPulse {
    /// Pulse area θ in [0, 2π].
    pub theta: f64,
    pub phase: f64,
    pub wavevector: [f64; 3],
    pub time: f64,
}

impl RfPulse {
    pub fn new(theta: f64, phase: f64, wavevector: [f64; 3], time: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::TAU).contains(&theta) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "RF pulse area must lie in [0, 2pi], got {theta}"
            )));
        }
        if !phase.is_finite() || wavevector.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("RF pulse phase/wavevector must be finite".into()));
        }
        Ok(RfPulse { theta, phase, wavevector, time })
    }
}

/// Optical π-pulse (area fixed at π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalPiPulse {
    pub transition: PiTransition,
    pub phase: f64,
    pub wavevector: [f64; 3],
    pub time: f64,
}

impl OpticalPiPulse {
    pub fn new(
        transition: PiTransition,
        phase: f64,
        wavevector: [f64; 3],
        time: f64,
    ) -> Result<Self> {
        if !phase.is_finite() || wavevector.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument(
                "optical pulse phase/wavevector must be finite".into(),
            ));
        }
        Ok(OpticalPiPulse { transition, phase, wavevector, time })
    }
}

/// Spin-wave preparation: RF pulse followed after `tau` by two π-pulses on
/// 1–4 separated by `storage_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlmPrep {
    pub rf: RfPulse,
    pub pulse1: OpticalPiPulse,
    pub pulse2: OpticalPiPulse,
    /// RF → first laser pulse delay.
    pub tau: f64,
    /// Laser–laser delay T; also the programmed storage time.
    pub storage_t: f64,
}

impl PlmPrep {
    pub fn new(
        rf: RfPulse,
        pulse1: OpticalPiPulse,
        pulse2: OpticalPiPulse,
        tau: f64,
        storage_t: f64,
    ) -> Result<Self> {
        if pulse1.transition != PiTransition::Opt14 || pulse2.transition != PiTransition::Opt14 {
            return Err(Error::InvalidArgument(
                "spin-wave preparation pulses must act on 1-4".into(),
            ));
        }
        if !(storage_t > 0.0) || tau < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "preparation delays must satisfy T > 0, tau >= 0 (got T {storage_t}, tau {tau})"
            )));
        }
        Ok(PlmPrep { rf, pulse1, pulse2, tau, storage_t })
    }

    /// Bin-independent phase of the prepared spin wave under this crate's
    /// rotation convention: φ_c = φ₀ − φ₁ + φ₂ + π, wrapped to (−π, π].
    pub fn composite_phase(&self) -> f64 {
        wrap_phase(self.rf.phase - self.pulse1.phase + self.pulse2.phase + std::f64::consts::PI)
    }

    /// Scattered spin-wave wavevector δk_sc = k₀ − k₁ + k₂.
    pub fn scattered_wavevector(&self) -> [f64; 3] {
        let k0 = self.rf.wavevector;
        let k1 = self.pulse1.wavevector;
        let k2 = self.pulse2.wavevector;
        [k0[0] - k1[0] + k2[0], k0[1] - k1[1] + k2[1], k0[2] - k1[2] + k2[2]]
    }
}

pub fn wrap_phase(p: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut x = p % tau;
    if x > std::f64::consts::PI {
        x -= tau;
    } else if x <= -std::f64::consts::PI {
        x += tau;
    }
    x
}

/// Apply the two-level rotation U(θ, φ) on (lo, hi) to every (cell, bin):
/// coherences via M → U* M Uᵀ, populations via the bin-averaged diagonal.
fn rotate_pair(state: &mut EnsembleState, lo: Level, hi: Level, theta: f64, phase: f64) {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    if s == 0.0 && c == 1.0 {
        return;
    }
    let u_ll = C64::new(c, 0.0);
    let u_lh = C64::i() * C64::from_polar(s, -phase);
    let u_hl = C64::i() * C64::from_polar(s, phase);
    let u_hh = C64::new(c, 0.0);

    let li = lo as usize;
    let hi_i = hi as usize;
    let n_bins = state.spectral().n_bins();
    let n_cells = state.spatial().n_cells;
    let n_sites = n_bins * n_cells;
    let weights = state.spectral().weights().to_vec();
    let pops = *state.populations();

    // Per-pair source composition for the conjugation, resolved once.
    let mut m = [[C64::new(0.0, 0.0); N_LEVELS]; N_LEVELS];
    let mut new_diag = [0.0f64; N_LEVELS];
    let mut diag_acc = [0.0f64; N_LEVELS];

    // Gather plane pointers by (x, y) lookup table: entry (x, y) holds the
    // pair index and whether it is stored conjugated.
    let mut pair_of = [[(usize::MAX, false); N_LEVELS]; N_LEVELS];
    for (idx, &(a, b)) in PAIRS.iter().enumerate() {
        pair_of[a as usize][b as usize] = (idx, false);
        pair_of[b as usize][a as usize] = (idx, true);
    }

    // Work site by site; the 5x5 conjugation only mixes rows/cols lo and hi.
    let mut snapshot = vec![C64::new(0.0, 0.0); N_PAIRS];
    for site in 0..n_sites {
        for idx in 0..N_PAIRS {
            snapshot[idx] = state.plane(idx)[site];
        }
        for x in 0..N_LEVELS {
            for y in 0..N_LEVELS {
                m[x][y] = if x == y {
                    C64::new(pops[x], 0.0)
                } else {
                    let (idx, conj) = pair_of[x][y];
                    if conj {
                        snapshot[idx].conj()
                    } else {
                        snapshot[idx]
                    }
                };
            }
        }
        // rows: M' = U* M, touching rows lo and hi only
        for y in 0..N_LEVELS {
            let a = m[li][y];
            let b = m[hi_i][y];
            m[li][y] = u_ll.conj() * a + u_lh.conj() * b;
            m[hi_i][y] = u_hl.conj() * a + u_hh.conj() * b;
        }
        // cols: M'' = M' U^T, touching cols lo and hi only
        for x in 0..N_LEVELS {
            let a = m[x][li];
            let b = m[x][hi_i];
            m[x][li] = a * u_ll + b * u_lh;
            m[x][hi_i] = a * u_hl + b * u_hh;
        }
        for (idx, &(a, b)) in PAIRS.iter().enumerate() {
            state.plane_mut(idx)[site] = m[a as usize][b as usize];
        }
        let w = weights[site % n_bins] / n_cells as f64;
        for x in 0..N_LEVELS {
            diag_acc[x] += w * m[x][x].re;
        }
    }
    new_diag.copy_from_slice(&diag_acc);
    state.set_populations(new_diag);
}

/// Exact RF rotation on the spin transition |1⟩↔|2⟩.
pub fn apply_rf_rotation(state: &mut EnsembleState, pulse: &RfPulse) {
    rotate_pair(state, Level::G1, Level::G2, pulse.theta, pulse.phase);
}

/// Exact optical π-pulse: swaps the two addressed level amplitudes with the
/// phase imprint i·e^{±iφ}; coherences sharing one addressed level are
/// relabeled with that phase (3–s moves sigma13 ↔ sigma1s and
/// sigma23 ↔ sigma2s).
pub fn apply_optical_pi(state: &mut EnsembleState, pulse: &OpticalPiPulse) {
    let (lo, hi) = pulse.transition.levels();
    rotate_pair(state, lo, hi, std::f64::consts::PI, pulse.phase);
}

/// Prepare the spin wave on a fresh state. Writes the closed form
/// rho12(Δ) = (i/2) sinθ₀ e^{iΔT} e^{iφ_c} with populations cos²(θ₀/2),
/// sin²(θ₀/2); equal to the explicit pulse-sequence composition to 1e-12.
pub fn prepare_plm(state: &mut EnsembleState, prep: &PlmPrep) -> Result<()> {
    if !state.is_fresh(1e-12) {
        return Err(Error::Precondition(
            "spin-wave preparation requires a fresh state (all atoms in |1>)".into(),
        ));
    }
    let theta0 = prep.rf.theta;
    let phi_c = prep.composite_phase();
    let amp = 0.5 * theta0.sin();
    let t = prep.storage_t;

    let n_bins = state.spectral().n_bins();
    let detunings = state.spectral().detunings().to_vec();
    let plane = state.plane_mut(RHO12);
    for (site, v) in plane.iter_mut().enumerate() {
        let d = detunings[site % n_bins];
        *v = C64::i() * C64::from_polar(amp, d * t + phi_c);
    }
    let half = 0.5 * theta0;
    state.set_populations([half.cos().powi(2), half.sin().powi(2), 0.0, 0.0, 0.0]);
    state.prep_time = Some(prep.rf.time + prep.tau + prep.storage_t);
    state.plm_wavevector = Some(prep.scattered_wavevector());
    Ok(())
}

/// Run the preparation as its explicit pulse sequence (RF, wait τ, π, wait T,
/// π). Used by the timeline executor and by tests as the independent route.
pub fn prepare_plm_composed(state: &mut EnsembleState, prep: &PlmPrep) -> Result<()> {
    if !state.is_fresh(1e-12) {
        return Err(Error::Precondition(
            "spin-wave preparation requires a fresh state (all atoms in |1>)".into(),
        ));
    }
    apply_rf_rotation(state, &prep.rf);
    state.free_evolve(prep.tau);
    apply_optical_pi(state, &prep.pulse1);
    state.free_evolve(prep.storage_t);
    apply_optical_pi(state, &prep.pulse2);
    state.prep_time = Some(prep.rf.time + prep.tau + prep.storage_t);
    state.plm_wavevector = Some(prep.scattered_wavevector());
    Ok(())
}

/// Two π-pulses on 1–4 or 2–4 separated by `t_prime`: multiplies the spin
/// wave by e^{+iΔT'} (1–4 pair) or e^{-iΔT'} (2–4 pair), reprogramming the
/// rephasing time; populations are restored. Composed from the exact pulse
/// operations plus free evolution.
pub fn apply_rephasing_pair(
    state: &mut EnsembleState,
    transition: PiTransition,
    t_prime: f64,
) -> Result<()> {
    if transition == PiTransition::Shelf3s {
        return Err(Error::InvalidArgument(
            "rephasing pairs act on 1-4 or 2-4, not 3-s".into(),
        ));
    }
    if !(t_prime > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rephasing pair separation must be > 0, got {t_prime}"
        )));
    }
    let p1 = OpticalPiPulse { transition, phase: 0.0, wavevector: [0.0; 3], time: 0.0 };
    let p2 = OpticalPiPulse { transition, phase: 0.0, wavevector: [0.0; 3], time: t_prime };
    apply_optical_pi(state, &p1);
    state.free_evolve(t_prime);
    apply_optical_pi(state, &p2);
    Ok(())
}
