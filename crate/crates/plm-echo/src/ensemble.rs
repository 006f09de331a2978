//! Discretized inhomogeneously broadened multilevel ensemble.
//!
//! The ensemble is sampled on a spectral grid of detuning bins (one shared
//! optical detuning per atom class, applied to both excited levels) and a
//! uniform spatial grid of cells along the propagation axis. The state keeps
//! one complex expectation amplitude ⟨P̂ₗₘ⟩ per level pair per (cell, bin),
//! which stays exact under instantaneous pulses, free evolution and the
//! linear-regime field coupling. Populations are global: every pulse in the
//! supported protocols acts uniformly across bins and cells, so the diagonal
//! never develops structure; we store the (cell, bin)-averaged values.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Atomic levels: |1⟩, |2⟩ ground spin doublet, |3⟩, |4⟩ optically excited
/// doublet, |s⟩ auxiliary long-lived shelf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    G1 = 0,
    G2 = 1,
    E3 = 2,
    E4 = 3,
    Shelf = 4,
}

pub const N_LEVELS: usize = 5;

impl Level {
    pub const ALL: [Level; N_LEVELS] = [Level::G1, Level::G2, Level::E3, Level::E4, Level::Shelf];

    /// Levels that carry the shared inhomogeneous optical shift Δ.
    pub fn is_optical(self) -> bool {
        matches!(self, Level::E3 | Level::E4)
    }
}

/// Ordered level pairs (lo < hi) whose coherence amplitudes are tracked.
/// `PAIRS[i]` stores ⟨P̂_{lo,hi}⟩ = ⟨lo|ρ|hi⟩-style amplitudes.
pub const PAIRS: [(Level, Level); N_PAIRS] = [
    (Level::G1, Level::G2),    // rho12, the spin wave
    (Level::G1, Level::E3),    // sigma13
    (Level::G1, Level::E4),    // sigma14
    (Level::G1, Level::Shelf), // sigma1s
    (Level::G2, Level::E3),    // sigma23
    (Level::G2, Level::E4),    // sigma24
    (Level::G2, Level::Shelf), // sigma2s
    (Level::E3, Level::E4),    // sigma34
    (Level::E3, Level::Shelf), // sigma3s
    (Level::E4, Level::Shelf), // sigma4s
];

pub const N_PAIRS: usize = 10;

pub const RHO12: usize = 0;
pub const SIGMA13: usize = 1;
pub const SIGMA14: usize = 2;
pub const SIGMA1S: usize = 3;
pub const SIGMA23: usize = 4;
pub const SIGMA24: usize = 5;
pub const SIGMA2S: usize = 6;
pub const SIGMA34: usize = 7;
pub const SIGMA3S: usize = 8;
pub const SIGMA4S: usize = 9;

/// Index of the tracked pair (lo, hi); panics if lo >= hi.
pub fn pair_index(lo: Level, hi: Level) -> usize {
    PAIRS
        .iter()
        .position(|&(a, b)| a == lo && b == hi)
        .expect("pair_index requires lo < hi in level order")
}

/// Decay class of a coherence: ground/shelf spin pairs and the excited-state
/// spin pair decay with the spin rate; pairs mixing one optical level with a
/// ground/shelf level decay with the optical rate.
fn pair_is_optical(idx: usize) -> bool {
    let (a, b) = PAIRS[idx];
    a.is_optical() != b.is_optical()
}

/// Signed count of inhomogeneous phase factors for free evolution:
/// ⟨P̂_ab⟩ = ⟨a|..|b⟩ evolves as e^{-iΔt·(opt(b)-opt(a))}.
fn pair_detuning_sign(idx: usize) -> f64 {
    let (a, b) = PAIRS[idx];
    (b.is_optical() as i8 as f64) - (a.is_optical() as i8 as f64)
}

/// Optical transitions that carry a propagating field or a macroscopic
/// polarization in this model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptTransition {
    /// |2⟩↔|3⟩, the signal transition.
    T23,
    /// |1⟩↔|3⟩, the echo transition.
    T13,
}

impl OptTransition {
    pub fn ground_level(self) -> Level {
        match self {
            OptTransition::T23 => Level::G2,
            OptTransition::T13 => Level::G1,
        }
    }

    pub fn pair(self) -> usize {
        match self {
            OptTransition::T23 => SIGMA23,
            OptTransition::T13 => SIGMA13,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OptTransition::T23 => "2-3",
            OptTransition::T13 => "1-3",
        }
    }
}

/// Line-shape of the inhomogeneous distribution G(Δ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Rectangular,
    Gaussian,
    Lorentzian,
}

impl Profile {
    pub fn default_span(self, delta_in: f64) -> f64 {
        match self {
            Profile::Rectangular => delta_in,
            // Wide enough that the truncated tails are negligible.
            Profile::Gaussian | Profile::Lorentzian => 6.0 * delta_in,
        }
    }
}

/// Discretized inhomogeneous line: detuning bins with normalized weights.
///
/// Bins are placed at midpoints of `n` equal sub-intervals of
/// `[-span/2, span/2]`, so a rectangular profile has exactly uniform density
/// and an odd bin count puts one bin exactly at line center. `delta_in` is the
/// FWHM of the profile (the full width for the rectangular case).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    profile: Profile,
    delta_in: f64,
    span: f64,
    detunings: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralGrid {
    pub fn build(profile: Profile, delta_in: f64, n_bins: usize, span: f64) -> Result<Self> {
        if !(delta_in > 0.0) || !delta_in.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inhomogeneous linewidth must be positive, got {delta_in}"
            )));
        }
        if n_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "spectral grid needs at least 2 bins, got {n_bins}"
            )));
        }
        if !(span >= delta_in) || !span.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "span {span} must be at least the linewidth {delta_in}"
            )));
        }
        match profile {
            Profile::Rectangular => {
                if span != delta_in {
                    return Err(Error::InvalidArgument(format!(
                        "rectangular profile requires span == delta_in (got span {span})"
                    )));
                }
            }
            Profile::Gaussian | Profile::Lorentzian => {
                if span < 3.0 * delta_in {
                    return Err(Error::InvalidArgument(format!(
                        "span {span} must be >= 3x the linewidth for {profile:?}"
                    )));
                }
            }
        }

        let db = span / n_bins as f64;
        let detunings: Vec<f64> = (0..n_bins)
            .map(|m| -0.5 * span + (m as f64 + 0.5) * db)
            .collect();
        let mut weights: Vec<f64> = detunings
            .iter()
            .map(|&d| match profile {
                Profile::Rectangular => 1.0,
                Profile::Gaussian => {
                    // FWHM = delta_in
                    (-4.0 * std::f64::consts::LN_2 * d * d / (delta_in * delta_in)).exp()
                }
                Profile::Lorentzian => {
                    let half = 0.5 * delta_in;
                    half * half / (d * d + half * half)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }

        Ok(SpectralGrid { profile, delta_in, span, detunings, weights })
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn delta_in(&self) -> f64 {
        self.delta_in
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn n_bins(&self) -> usize {
        self.detunings.len()
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bin_spacing(&self) -> f64 {
        self.span / self.n_bins() as f64
    }

    /// Weight density (per rad/s) at line center, as the discrete grid
    /// realizes it. This calibrates the field–atom coupling so that the
    /// weak-field line-center transmission is exactly Beer–Lambert.
    pub fn center_weight_density(&self) -> f64 {
        let db = self.bin_spacing();
        let mut best = (f64::INFINITY, 0usize);
        for (m, &d) in self.detunings.iter().enumerate() {
            if d.abs() < best.0 {
                best = (d.abs(), m);
            }
        }
        let m = best.1;
        // Even bin counts straddle zero; average the two central bins.
        if self.n_bins() % 2 == 0 {
            let partner = if self.detunings[m] > 0.0 { m - 1 } else { m + 1 };
            0.5 * (self.weights[m] + self.weights[partner]) / db
        } else {
            self.weights[m] / db
        }
    }
}

/// Uniform spatial grid of `n_cells` cells over a medium of length `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub length: f64,
    pub n_cells: usize,
}

impl SpatialGrid {
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if !(length > 0.0) || n_cells == 0 {
            return Err(Error::InvalidArgument(format!(
                "spatial grid needs positive length and cells (got {length}, {n_cells})"
            )));
        }
        Ok(SpatialGrid { length, n_cells })
    }

    pub fn dz(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Cell center coordinate, strictly inside (0, L).
    pub fn center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dz()
    }
}

/// Level-scheme frequencies (rad/s) and the group velocity used for
/// retardation bookkeeping. ω31 is derived as ω32 + ω21 so the identity holds
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub omega21: f64,
    pub omega32: f64,
    pub omega41: f64,
    pub omega3s: f64,
    pub v_g: f64,
}

impl LevelScheme {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega21", self.omega21),
            ("omega32", self.omega32),
            ("omega41", self.omega41),
            ("omega3s", self.omega3s),
            ("v_g", self.v_g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "level scheme field {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn omega31(&self) -> f64 {
        self.omega32 + self.omega21
    }
}

/// Coherence decay rates (1/s). Zero everywhere is the ideal model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecayRates {
    /// 1/T2,s for spin coherences (ground doublet, shelf pairs, excited pair).
    pub gamma_spin: f64,
    /// 1/T2,o for optical coherences.
    pub gamma_opt: f64,
    /// 1/T1,o for optical populations; not applied to amplitudes here, used by
    /// the luminescence-noise estimator.
    pub gamma_pop: f64,
}

impl DecayRates {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_spin < 0.0 || self.gamma_opt < 0.0 || self.gamma_pop < 0.0 {
            return Err(Error::InvalidArgument("decay rates must be >= 0".into()));
        }
        Ok(())
    }
}

/// Elapsed time per coherence class for [`EnsembleState::apply_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecayIntervals {
    pub spin: f64,
    pub optical: f64,
}

impl DecayIntervals {
    pub fn uniform(t: f64) -> Self {
        DecayIntervals { spin: t, optical: t }
    }
}

/// Full ensemble state: global populations plus one complex amplitude per
/// tracked level pair per (cell, bin). Plane layout is `cell * n_bins + bin`.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    spectral: SpectralGrid,
    spatial: SpatialGrid,
    scheme: LevelScheme,
    populations: [f64; N_LEVELS],
    planes: Vec<Vec<C64>>,
    /// Atom number; bookkeeping only (dynamics are per-atom normalized).
    pub n_atoms: f64,
    /// Completion time of the most recent spin-wave preparation.
    pub prep_time: Option<f64>,
    /// Wavevector tag δk_sc carried by the spin wave, for phase-matching
    /// reports; spatial phases are not imprinted on the 1D grid.
    pub plm_wavevector: Option<[f64; 3]>,
}

impl EnsembleState {
    /// All atoms in |1⟩, no coherences.
    pub fn init(spectral: SpectralGrid, spatial: SpatialGrid, scheme: LevelScheme) -> Self {
        let n = spatial.n_cells * spectral.n_bins();
        let planes = (0..N_PAIRS).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
        EnsembleState {
            spectral,
            spatial,
            scheme,
            populations: [1.0, 0.0, 0.0, 0.0, 0.0],
            planes,
            n_atoms: 1.0,
            prep_time: None,
            plm_wavevector: None,
        }
    }

    pub fn spectral(&self) -> &SpectralGrid {
        &self.spectral
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn populations(&self) -> &[f64; N_LEVELS] {
        &self.populations
    }

    pub fn population(&self, level: Level) -> f64 {
        self.populations[level as usize]
    }

    pub(crate) fn set_populations(&mut self, pops: [f64; N_LEVELS]) {
        self.populations = pops;
    }

    pub fn plane(&self, pair: usize) -> &[C64] {
        &self.planes[pair]
    }

    pub fn plane_mut(&mut self, pair: usize) -> &mut [C64] {
        &mut self.planes[pair]
    }

    /// Move a plane out for an extended borrow (propagation hot loop); pair
    /// with `put_plane`.
    pub(crate) fn take_plane(&mut self, pair: usize) -> Vec<C64> {
        std::mem::take(&mut self.planes[pair])
    }

    pub(crate) fn put_plane(&mut self, pair: usize, plane: Vec<C64>) {
        self.planes[pair] = plane;
    }

    pub fn idx(&self, cell: usize, bin: usize) -> usize {
        cell * self.spectral.n_bins() + bin
    }

    pub fn coherence(&self, pair: usize, cell: usize, bin: usize) -> C64 {
        self.planes[pair][cell * self.spectral.n_bins() + bin]
    }

    /// True when no coherence exceeds `tol` and all atoms sit in |1⟩.
    pub fn is_fresh(&self, tol: f64) -> bool {
        (self.populations[0] - 1.0).abs() <= tol
            && self.populations[1..].iter().all(|&p| p.abs() <= tol)
            && self
                .planes
                .iter()
                .all(|plane| plane.iter().all(|c| c.norm_sqr() <= tol * tol))
    }

    /// Exponential amplitude decay per coherence class. Populations are
    /// untouched (weak-signal regime; optical populations are negligible).
    pub fn apply_decay(&mut self, intervals: DecayIntervals, rates: &DecayRates) -> Result<()> {
        rates.validate()?;
        if intervals.spin < 0.0 || intervals.optical < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "decay intervals must be >= 0, got spin {} optical {}",
                intervals.spin, intervals.optical
            )));
        }
        let f_spin = (-rates.gamma_spin * intervals.spin).exp();
        let f_opt = (-rates.gamma_opt * intervals.optical).exp();
        for (idx, plane) in self.planes.iter_mut().enumerate() {
            let f = if pair_is_optical(idx) { f_opt } else { f_spin };
            if f != 1.0 {
                for c in plane.iter_mut() {
                    *c *= f;
                }
            }
        }
        Ok(())
    }

    /// Free evolution for `dt` in the rotating frame: optical coherences pick
    /// up e^{∓iΔ·dt} per bin, spin coherences and populations are static.
    pub fn free_evolve(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let n_bins = self.spectral.n_bins();
        let phases: Vec<C64> = self
            .spectral
            .detunings
            .iter()
            .map(|&d| C64::from_polar(1.0, -d * dt))
            .collect();
        for idx in 0..N_PAIRS {
            let sign = pair_detuning_sign(idx);
            if sign == 0.0 {
                continue;
            }
            let plane = &mut self.planes[idx];
            for chunk in plane.chunks_mut(n_bins) {
                if sign > 0.0 {
                    for (c, ph) in chunk.iter_mut().zip(&phases) {
                        *c *= ph;
                    }
                } else {
                    for (c, ph) in chunk.iter_mut().zip(&phases) {
                        *c *= ph.conj();
                    }
                }
            }
        }
    }

    /// Weighted sum Σ_m w_m σ(Δ_m) of the transition's coherence at one cell,
    /// in fixed bin order.
    pub fn macroscopic_polarization(
        &self,
        transition: OptTransition,
        cell: usize,
    ) -> Result<C64> {
        if cell >= self.spatial.n_cells {
            return Err(Error::InvalidArgument(format!(
                "cell {cell} out of range (n_cells {})",
                self.spatial.n_cells
            )));
        }
        let n_bins = self.spectral.n_bins();
        let row = &self.planes[transition.pair()][cell * n_bins..(cell + 1) * n_bins];
        let mut acc = C64::new(0.0, 0.0);
        for (c, &w) in row.iter().zip(self.spectral.weights()) {
            acc += w * c;
        }
        Ok(acc)
    }

    /// NaN/Inf scan used by the propagation stages.
    pub(crate) fn check_finite(&self) -> Result<()> {
        for plane in &self.planes {
            for c in plane {
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(Error::NumericalFailure(
                        "non-finite coherence amplitude in ensemble state".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn test_scheme() -> LevelScheme {
    const TWO_PI: f64 = std::f64::consts::TAU;
    LevelScheme {
        omega21: TWO_PI * 34.533e6,
        omega32: TWO_PI * 5.1649e14,
        omega41: TWO_PI * (5.1649e14 + 34.533e6 + 75e6),
        omega3s: TWO_PI * (5.1649e14 - 46.175e6),
        v_g: 1e3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const TWO_PI: f64 = std::f64::consts::TAU;

    fn small_state(n_bins: usize) -> EnsembleState {
        let spectral =
            SpectralGrid::build(Profile::Rectangular, TWO_PI * 1e6, n_bins, TWO_PI * 1e6).unwrap();
        let spatial = SpatialGrid::new(0.01, 4).unwrap();
        EnsembleState::init(spectral, spatial, test_scheme())
    }

    #[test]
    fn rectangular_two_bins_symmetric() {
        let delta_in = TWO_PI * 1e6;
        let g = SpectralGrid::build(Profile::Rectangular, delta_in, 2, delta_in).unwrap();
        assert_relative_eq!(g.detunings()[0], -0.25 * delta_in, max_relative = 1e-15);
        assert_relative_eq!(g.detunings()[1], 0.25 * delta_in, max_relative = 1e-15);
        assert_abs_diff_eq!(g.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_fwhm_half_weight() {
        let delta_in = TWO_PI * 1e6;
        let g = SpectralGrid::build(Profile::Gaussian, delta_in, 401, 6.0 * delta_in).unwrap();
        // Interpolate weights at 0 and at delta_in/2; their ratio encodes the
        // FWHM definition.
        let interp = |target: f64| -> f64 {
            let d = g.detunings();
            let w = g.weights();
            let i = d.partition_point(|&x| x < target);
            let (i0, i1) = (i - 1, i);
            let frac = (target - d[i0]) / (d[i1] - d[i0]);
            w[i0] + frac * (w[i1] - w[i0])
        };
        let ratio = interp(0.5 * delta_in) / interp(0.0);
        assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        let w = TWO_PI * 1e6;
        assert!(SpectralGrid::build(Profile::Rectangular, 0.0, 4, w).is_err());
        assert!(SpectralGrid::build(Profile::Rectangular, w, 1, w).is_err());
        assert!(SpectralGrid::build(Profile::Gaussian, w, 4, 0.5 * w).is_err());
        assert!(SpectralGrid::build(Profile::Gaussian, w, 4, 2.0 * w).is_err());
        assert!(SpectralGrid::build(Profile::Rectangular, w, 4, 2.0 * w).is_err());
    }

    #[test]
    fn init_state_is_fresh() {
        let state = small_state(8);
        assert!(state.is_fresh(0.0));
        assert_eq!(state.population(Level::G1), 1.0);
        assert_eq!(state.population(Level::G2), 0.0);
        for cell in 0..state.spatial().n_cells {
            let p = state.macroscopic_polarization(OptTransition::T23, cell).unwrap();
            assert_eq!(p, C64::new(0.0, 0.0));
            let p = state.macroscopic_polarization(OptTransition::T13, cell).unwrap();
            assert_eq!(p, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn decay_zero_rates_is_identity() {
        let mut state = small_state(8);
        for c in state.plane_mut(SIGMA13).iter_mut() {
            *c = C64::new(0.3, -0.4);
        }
        let before = state.plane(SIGMA13).to_vec();
        state
            .apply_decay(DecayIntervals::uniform(1.0), &DecayRates::default())
            .unwrap();
        assert_eq!(before, state.plane(SIGMA13));
    }

    #[test]
    fn decay_scales_spin_by_e_inverse() {
        let mut state = small_state(4);
        state.plane_mut(RHO12)[0] = C64::new(0.5, 0.0);
        let t2s = 3.7e-3;
        let rates = DecayRates { gamma_spin: 1.0 / t2s, ..Default::default() };
        state
            .apply_decay(DecayIntervals { spin: t2s, optical: 0.0 }, &rates)
            .unwrap();
        assert_relative_eq!(
            state.plane(RHO12)[0].re,
            0.5 * (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn decay_optical_tenth_after_ln10_lifetimes() {
        let mut state = small_state(4);
        state.plane_mut(SIGMA13)[0] = C64::new(1.0, 0.0);
        state.plane_mut(SIGMA23)[0] = C64::new(0.0, 1.0);
        let rates = DecayRates { gamma_opt: 1.0 / 10e-6, ..Default::default() };
        state
            .apply_decay(DecayIntervals { spin: 0.0, optical: 23.0259e-6 }, &rates)
            .unwrap();
        assert_abs_diff_eq!(state.plane(SIGMA13)[0].norm(), 0.100, epsilon = 1e-3);
        assert_abs_diff_eq!(state.plane(SIGMA23)[0].norm(), 0.100, epsilon = 1e-3);
    }

    #[test]
    fn decay_rejects_negative_interval() {
        let mut state = small_state(4);
        let err = state
            .apply_decay(DecayIntervals { spin: -1.0, optical: 0.0 }, &DecayRates::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn polarization_of_uniform_coherence_is_value() {
        let mut state = small_state(16);
        let c = C64::new(0.25, -0.125);
        for v in state.plane_mut(SIGMA23).iter_mut() {
            *v = c;
        }
        let p = state.macroscopic_polarization(OptTransition::T23, 2).unwrap();
        assert_relative_eq!(p.re, c.re, max_relative = 1e-12);
        assert_relative_eq!(p.im, c.im, max_relative = 1e-12);
    }

    #[test]
    fn polarization_dephased_spin_wave_is_suppressed() {
        // Phases e^{iΔT} with T·Δ_in = 2π·10 dephase to the sinc envelope.
        let delta_in = TWO_PI * 1e6;
        let grid =
            SpectralGrid::build(Profile::Rectangular, delta_in, 401, delta_in).unwrap();
        let spatial = SpatialGrid::new(0.01, 1).unwrap();
        let mut state = EnsembleState::init(grid, spatial, test_scheme());
        let t = TWO_PI * 10.0 / delta_in;
        let detunings = state.spectral().detunings().to_vec();
        for (v, &d) in state.plane_mut(SIGMA13).iter_mut().zip(&detunings) {
            *v = C64::from_polar(1.0, d * t);
        }
        let p = state.macroscopic_polarization(OptTransition::T13, 0).unwrap();
        assert!(p.norm() <= 0.07, "dephased polarization {} too large", p.norm());
    }

    #[test]
    fn polarization_rephases_at_programmed_time() {
        // sigma13 carrying e^{iΔ(t - t_s - T)} evaluated at t = t_s + T.
        let mut state = small_state(64);
        for v in state.plane_mut(SIGMA13).iter_mut() {
            *v = C64::new(1.0, 0.0);
        }
        let p = state.macroscopic_polarization(OptTransition::T13, 0).unwrap();
        assert_relative_eq!(p.re, 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(p.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn free_evolution_phases_match_classes() {
        let mut state = small_state(8);
        state.plane_mut(SIGMA13)[3] = C64::new(1.0, 0.0);
        state.plane_mut(SIGMA34)[3] = C64::new(1.0, 0.0);
        state.plane_mut(SIGMA3S)[3] = C64::new(1.0, 0.0);
        state.plane_mut(RHO12)[3] = C64::new(1.0, 0.0);
        let d = state.spectral().detunings()[3];
        let t = 0.37e-6;
        state.free_evolve(t);
        let expect = C64::from_polar(1.0, -d * t);
        assert_relative_eq!(state.plane(SIGMA13)[3].re, expect.re, max_relative = 1e-12);
        assert_relative_eq!(state.plane(SIGMA13)[3].im, expect.im, max_relative = 1e-12);
        // excited-excited pair sees no inhomogeneous phase
        assert_relative_eq!(state.plane(SIGMA34)[3].re, 1.0, max_relative = 1e-12);
        // 3-s pair rotates opposite to 1-3
        assert_relative_eq!(state.plane(SIGMA3S)[3].im, expect.conj().im, max_relative = 1e-12);
        // spin wave is static
        assert_eq!(state.plane(RHO12)[3], C64::new(1.0, 0.0));
    }

    proptest! {
        #[test]
        fn weights_normalized_across_profiles(
            profile_idx in 0usize..3,
            n_bins in 2usize..1000,
            delta_in in 1e3f64..1e9,
            span_mult in 3.0f64..12.0,
        ) {
            let profile = [Profile::Rectangular, Profile::Gaussian, Profile::Lorentzian][profile_idx];
            let span = match profile {
                Profile::Rectangular => delta_in,
                _ => span_mult * delta_in,
            };
            let g = SpectralGrid::build(profile, delta_in, n_bins, span).unwrap();
            let total: f64 = g.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(g.detunings().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn dephasing_envelope_bound_rectangular(t_mult in 3.0f64..40.0) {
            // |Σ w e^{iΔT}| <= 2π/(T·Δ_in) once T·Δ_in >> 2π (rectangular).
            let delta_in = 1.0;
            let grid = SpectralGrid::build(Profile::Rectangular, delta_in, 801, delta_in).unwrap();
            let spatial = SpatialGrid::new(1.0, 1).unwrap();
            let mut state = EnsembleState::init(grid, spatial, test_scheme());
            let t = TWO_PI * t_mult / delta_in;
            let det = state.spectral().detunings().to_vec();
            for (v, &d) in state.plane_mut(SIGMA13).iter_mut().zip(&det) {
                *v = C64::from_polar(1.0, d * t);
            }
            let p = state.macroscopic_polarization(OptTransition::T13, 0).unwrap();
            prop_assert!(p.norm() <= TWO_PI / (t * delta_in) + 1e-12);
        }

        #[test]
        fn polarization_is_linear(scale_re in -2.0f64..2.0, scale_im in -2.0f64..2.0) {
            let mut state = small_state(32);
            let det = state.spectral().detunings().to_vec();
            for (v, &d) in state.plane_mut(SIGMA23).iter_mut().zip(det.iter().cycle()) {
                *v = C64::from_polar(1.0, d * 1e-7);
            }
            let p1 = state.macroscopic_polarization(OptTransition::T23, 1).unwrap();
            let s = C64::new(scale_re, scale_im);
            for v in state.plane_mut(SIGMA23).iter_mut() {
                *v *= s;
            }
            let p2 = state.macroscopic_polarization(OptTransition::T23, 1).unwrap();
            prop_assert!((p2 - s * p1).norm() <= 1e-12 * (1.0 + p2.norm()));
        }
    }
}
