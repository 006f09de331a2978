//! TOML run configuration: parsing with unknown-key rejection, defaulting,
//! and resolution into grids, stage parameters and a protocol timeline.
//!
//! All physical quantities are SI with the unit in the key name
//! (`*_rad_per_s`, `*_s`, `*_m`, `*_per_m`). Optional knobs resolve from the
//! inhomogeneous linewidth: the signal FWHM defaults to 25/Δ_in, the time
//! step to FWHM/40, the storage time to 40×FWHM, and the group velocity to
//! dz/dt (the exact-transport choice, which also fixes the cell transit used
//! for stage-boundary margins).

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::ensemble::{DecayRates, LevelScheme, Profile, SpatialGrid, SpectralGrid};
use crate::phasematch::{Geometry, WaveVector, DEFAULT_MATCH_TOLERANCE};
use crate::propagation::{RunSetup, SignalShape, StageConfig};
use crate::protocols::{
    build_basic, build_frequency_preserving, build_on_demand, build_reprogrammed, NoiseConfig,
    ProtocolParams, ProtocolTimeline, TimescaleBudget, Variant,
};
use crate::pulse::PiTransition;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grids: GridsSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    pub stage: StageSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub budget: Option<BudgetSection>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub material: Option<MaterialSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSection {
    pub profile: Profile,
    pub delta_in_rad_per_s: f64,
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
    /// Defaults to the profile's natural span (Δ_in rectangular, 6Δ_in
    /// otherwise).
    #[serde(default)]
    pub span_rad_per_s: Option<f64>,
    #[serde(default = "default_n_cells")]
    pub n_cells: usize,
    #[serde(default = "default_length")]
    pub length_m: f64,
}

fn default_n_bins() -> usize {
    401
}

fn default_n_cells() -> usize {
    200
}

fn default_length() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub omega21_rad_per_s: f64,
    pub omega32_rad_per_s: f64,
    pub omega41_rad_per_s: f64,
    pub omega3s_rad_per_s: f64,
    /// Defaults to dz/dt.
    #[serde(default)]
    pub v_g_m_per_s: Option<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        const TAU: f64 = std::f64::consts::TAU;
        SchemeSection {
            omega21_rad_per_s: TAU * 34.533e6,
            omega32_rad_per_s: TAU * 5.1649e14,
            omega41_rad_per_s: TAU * (5.1649e14 + 34.533e6 + 75e6),
            omega3s_rad_per_s: TAU * (5.1649e14 - 46.175e6),
            v_g_m_per_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub alpha0_s_per_m: f64,
    pub alpha0_e_per_m: f64,
    /// Defaults to sqrt(alpha0_s/alpha0_e).
    #[serde(default)]
    pub coupling_ratio: Option<f64>,
    /// Defaults to min(signal FWHM / 40, 1/Δ_in).
    #[serde(default)]
    pub dt_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub variant: Variant,
    #[serde(default = "default_theta0")]
    pub theta0_rad: f64,
    #[serde(default)]
    pub phi0_rad: f64,
    #[serde(default)]
    pub tau_s: Option<f64>,
    #[serde(default)]
    pub storage_t_s: Option<f64>,
    /// Signal arrival time; defaults to tau + T + 4×FWHM.
    #[serde(default)]
    pub t0_s: Option<f64>,
    #[serde(default)]
    pub t_prime_s: Option<f64>,
    #[serde(default)]
    pub pair_transition: Option<PairTransition>,
    #[serde(default)]
    pub t1_s: Option<f64>,
    #[serde(default)]
    pub t_read_s: Option<f64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            variant: Variant::Basic,
            theta0_rad: default_theta0(),
            phi0_rad: 0.0,
            tau_s: None,
            storage_t_s: None,
            t0_s: None,
            t_prime_s: None,
            pair_transition: None,
            t1_s: None,
            t_read_s: None,
        }
    }
}

fn default_theta0() -> f64 {
    0.5 * std::f64::consts::PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairTransition {
    #[serde(rename = "1-4")]
    Opt14,
    #[serde(rename = "2-4")]
    Opt24,
}

impl From<PairTransition> for PiTransition {
    fn from(p: PairTransition) -> Self {
        match p {
            PairTransition::Opt14 => PiTransition::Opt14,
            PairTransition::Opt24 => PiTransition::Opt24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default = "default_shape")]
    pub shape: ShapeKind,
    /// Defaults to 25/Δ_in.
    #[serde(default)]
    pub fwhm_s: Option<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Second-bump delay for the double-gaussian shape; defaults to FWHM.
    #[serde(default)]
    pub separation_s: Option<f64>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Stage half-window in units of the FWHM.
    #[serde(default = "default_window_pad")]
    pub window_pad: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        SignalSection {
            shape: ShapeKind::Gaussian,
            fwhm_s: None,
            amplitude: 1.0,
            separation_s: None,
            ratio: default_ratio(),
            window_pad: default_window_pad(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Gaussian,
    DoubleGaussian,
}

fn default_shape() -> ShapeKind {
    ShapeKind::Gaussian
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_ratio() -> f64 {
    0.55
}

fn default_window_pad() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default)]
    pub gamma_spin_per_s: f64,
    #[serde(default)]
    pub gamma_opt_per_s: f64,
    #[serde(default)]
    pub gamma_pop_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default)]
    pub t2_star_s: Option<f64>,
    #[serde(default)]
    pub dt_pulse_s: Option<f64>,
    #[serde(default)]
    pub t2_opt_s: Option<f64>,
    #[serde(default)]
    pub t2_spin_s: Option<f64>,
    #[serde(default)]
    pub t1_opt_s: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub pulse_error: f64,
    pub n_atoms: f64,
    pub gate_s: f64,
    pub collection: f64,
    /// Defaults to the budget's T1,opt; required when that is absent.
    #[serde(default)]
    pub t1_opt_s: Option<f64>,
    #[serde(default = "default_n_signal")]
    pub n_signal_photons: f64,
}

fn default_n_signal() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub k_s: [f64; 3],
    pub k0: [f64; 3],
    pub k1: [f64; 3],
    pub k2: [f64; 3],
    #[serde(default)]
    pub k_w: Option<[f64; 3]>,
    #[serde(default)]
    pub k_r1: Option<[f64; 3]>,
    pub target_k31_rad_per_m: f64,
    #[serde(default)]
    pub target_k32_rad_per_m: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance_rad: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_MATCH_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub ion: String,
    #[serde(default)]
    pub isotope: Option<u32>,
    pub site: String,
    #[serde(default)]
    pub b_tesla: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Common per-transition depth: sets α_sL = α_eL = value (θ₀ and the
    /// coupling ratio fixed by the protocol section).
    AlphaL,
    /// Preparation pulse area θ₀.
    Theta0,
}

/// Fully resolved run inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub setup: RunSetup,
    pub params: ProtocolParams,
    pub variant: Variant,
    pub timeline: ProtocolTimeline,
    pub rates: DecayRates,
    pub budget: Option<(TimescaleBudget, f64)>,
    pub noise: Option<(NoiseConfig, f64)>,
    pub geometry: Option<Geometry>,
    /// The input config with every optional knob filled in; serializing it
    /// reproduces this resolution exactly.
    pub effective: SimConfig,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Fill defaults, build grids/stage/timeline, and run the optional
    /// timescale gate.
    pub fn resolve(&self) -> Result<Resolved> {
        let g = &self.grids;
        let span = g
            .span_rad_per_s
            .unwrap_or_else(|| g.profile.default_span(g.delta_in_rad_per_s));
        let spectral = SpectralGrid::build(g.profile, g.delta_in_rad_per_s, g.n_bins, span)?;
        let spatial = SpatialGrid::new(g.length_m, g.n_cells)?;

        let fwhm = self.signal.fwhm_s.unwrap_or(25.0 / g.delta_in_rad_per_s);
        if !(fwhm > 0.0) {
            return Err(Error::InvalidConfig("signal fwhm must be positive".into()));
        }
        // the step must resolve both the envelope and the 1/Δ_in response of
        // the inhomogeneous line
        let dt = self.stage.dt_s.unwrap_or((fwhm / 40.0).min(1.0 / g.delta_in_rad_per_s));
        let v_g = self.scheme.v_g_m_per_s.unwrap_or(spatial.dz() / dt);
        let coupling_ratio = match self.stage.coupling_ratio {
            Some(r) => r,
            None => {
                if self.stage.alpha0_e_per_m > 0.0 {
                    (self.stage.alpha0_s_per_m / self.stage.alpha0_e_per_m).sqrt()
                } else {
                    1.0
                }
            }
        };
        let stage = StageConfig {
            alpha0_s: self.stage.alpha0_s_per_m,
            alpha0_e: self.stage.alpha0_e_per_m,
            coupling_ratio,
            theta0: self.protocol.theta0_rad,
            v_g,
            dt,
        };
        stage.validate_for(&spatial)?;

        let scheme = LevelScheme {
            omega21: self.scheme.omega21_rad_per_s,
            omega32: self.scheme.omega32_rad_per_s,
            omega41: self.scheme.omega41_rad_per_s,
            omega3s: self.scheme.omega3s_rad_per_s,
            v_g,
        };
        scheme.validate()?;

        let tau = self.protocol.tau_s.unwrap_or(fwhm);
        let storage_t = self.protocol.storage_t_s.unwrap_or(40.0 * fwhm);
        // reprogramming pairs sit between preparation and signal; leave room
        let pair_room = match self.protocol.variant {
            Variant::Reprogrammed => 3.0 * self.protocol.t_prime_s.unwrap_or(0.0),
            _ => 0.0,
        };
        let t0 = self.protocol.t0_s.unwrap_or(tau + storage_t + 4.0 * fwhm + pair_room);
        let transit = spatial.length / v_g;
        let shape = match self.signal.shape {
            ShapeKind::Gaussian => SignalShape::Gaussian,
            ShapeKind::DoubleGaussian => SignalShape::DoubleGaussian {
                separation: self.signal.separation_s.unwrap_or(fwhm),
                ratio: self.signal.ratio,
            },
        };
        let params = ProtocolParams {
            theta0: self.protocol.theta0_rad,
            phi0: self.protocol.phi0_rad,
            tau,
            storage_t,
            t0,
            signal_shape: shape,
            signal_fwhm: fwhm,
            signal_amplitude: self.signal.amplitude,
            window_pad: self.signal.window_pad,
            stage_margin: transit + 2.0 * dt,
        };

        let timeline = match self.protocol.variant {
            Variant::Basic => build_basic(&params)?,
            Variant::FrequencyPreserving => build_frequency_preserving(&params)?,
            Variant::Reprogrammed => {
                let t_prime = self.protocol.t_prime_s.ok_or_else(|| {
                    Error::InvalidConfig("reprogrammed variant needs t_prime_s".into())
                })?;
                let pair = self.protocol.pair_transition.unwrap_or(PairTransition::Opt14);
                build_reprogrammed(&params, t_prime, pair.into())?
            }
            Variant::OnDemand => {
                let t1 = self.protocol.t1_s.ok_or_else(|| {
                    Error::InvalidConfig("on-demand variant needs t1_s".into())
                })?;
                let t_read = self.protocol.t_read_s.ok_or_else(|| {
                    Error::InvalidConfig("on-demand variant needs t_read_s".into())
                })?;
                build_on_demand(&params, t1, t_read)?
            }
        };

        let rates = DecayRates {
            gamma_spin: self.decay.gamma_spin_per_s,
            gamma_opt: self.decay.gamma_opt_per_s,
            gamma_pop: self.decay.gamma_pop_per_s,
        };
        rates.validate()?;

        let budget = self.budget.as_ref().map(|b| {
            (
                TimescaleBudget {
                    t2_star: Some(b.t2_star_s.unwrap_or(1.0 / g.delta_in_rad_per_s)),
                    dt_s: Some(fwhm),
                    dt_pulse: b.dt_pulse_s.or(Some(0.0)),
                    storage_t: Some(storage_t),
                    t_prime: self.protocol.t_prime_s,
                    tau: Some(tau),
                    t0: Some(t0),
                    t2_opt: b.t2_opt_s,
                    t2_spin: b.t2_spin_s,
                    t1_opt: b.t1_opt_s,
                },
                b.margin,
            )
        });

        let noise = match &self.noise {
            Some(n) => {
                let t1_opt = n
                    .t1_opt_s
                    .or(self.budget.as_ref().and_then(|b| b.t1_opt_s))
                    .ok_or_else(|| {
                        Error::InvalidConfig(
                            "noise section needs t1_opt_s (directly or via the budget)".into(),
                        )
                    })?;
                Some((
                    NoiseConfig {
                        pulse_error: n.pulse_error,
                        n_atoms: n.n_atoms,
                        t0,
                        t1_opt,
                        gate: n.gate_s,
                        collection: n.collection,
                    },
                    n.n_signal_photons,
                ))
            }
            None => None,
        };

        let geometry = self.geometry.as_ref().map(|gm| Geometry {
            k_s: WaveVector::from(gm.k_s),
            k0: WaveVector::from(gm.k0),
            k1: WaveVector::from(gm.k1),
            k2: WaveVector::from(gm.k2),
            k_w: gm.k_w.map(WaveVector::from),
            k_r1: gm.k_r1.map(WaveVector::from),
            target_k31: gm.target_k31_rad_per_m,
            target_k32: gm.target_k32_rad_per_m,
            length: g.length_m,
            tolerance: gm.tolerance_rad,
        });
        if let Some(geom) = &geometry {
            geom.validate()?;
        }

        let mut effective = self.clone();
        effective.grids.span_rad_per_s = Some(span);
        effective.scheme.v_g_m_per_s = Some(v_g);
        effective.stage.coupling_ratio = Some(coupling_ratio);
        effective.stage.dt_s = Some(dt);
        effective.protocol.tau_s = Some(tau);
        effective.protocol.storage_t_s = Some(storage_t);
        effective.protocol.t0_s = Some(t0);
        effective.signal.fwhm_s = Some(fwhm);
        if matches!(self.signal.shape, ShapeKind::DoubleGaussian) {
            effective.signal.separation_s = Some(self.signal.separation_s.unwrap_or(fwhm));
        }

        Ok(Resolved {
            setup: RunSetup { spectral, spatial, scheme, stage },
            params,
            variant: self.protocol.variant,
            timeline,
            rates,
            budget,
            noise,
            geometry,
            effective,
        })
    }
}
