//! Shared builders for the integration suites: scale-free benchmark setups
//! (time in units of 1/Δ_in) with per-transition depths chosen per case.

use plm_echo::ensemble::{DecayRates, LevelScheme, Profile, SpatialGrid, SpectralGrid};
use plm_echo::propagation::{run_timeline, EchoReport, RunSetup, SignalShape, StageConfig};
use plm_echo::protocols::{ProtocolParams, ProtocolTimeline};

pub const DELTA_IN: f64 = 2.0 * std::f64::consts::PI * 1.0e6;

pub struct Case {
    pub setup: RunSetup,
    pub params: ProtocolParams,
    pub fwhm: f64,
}

#[derive(Clone, Copy)]
pub struct CaseSpec {
    pub theta0: f64,
    /// Total working depth (alpha_s + alpha_e)·L; r = 1 so alpha0_s·L =
    /// alpha0_e·L = this for every theta0.
    pub depth_total: f64,
    pub n_bins: usize,
    pub n_cells: usize,
    /// Signal FWHM in units of 1/Δ_in.
    pub fwhm_units: f64,
    /// Time step in units of 1/Δ_in; `None` means FWHM/40 capped at 1/Δ_in.
    pub dt_units: Option<f64>,
    pub window_pad: f64,
    pub shape: SignalShape,
}

impl CaseSpec {
    pub fn new(theta0: f64, depth_total: f64, n_bins: usize, n_cells: usize) -> Self {
        CaseSpec {
            theta0,
            depth_total,
            n_bins,
            n_cells,
            fwhm_units: 25.0,
            dt_units: None,
            window_pad: 2.5,
            shape: SignalShape::Gaussian,
        }
    }

    pub fn build(self) -> Case {
        let fwhm = self.fwhm_units / DELTA_IN;
        let dt = match self.dt_units {
            Some(u) => u / DELTA_IN,
            None => (fwhm / 40.0).min(1.0 / DELTA_IN),
        };
        let length = 0.01;
        let spatial = SpatialGrid::new(length, self.n_cells).unwrap();
        let v_g = spatial.dz() / dt;
        let spectral =
            SpectralGrid::build(Profile::Rectangular, DELTA_IN, self.n_bins, DELTA_IN).unwrap();
        let scheme = LevelScheme {
            omega21: 2.0 * std::f64::consts::PI * 34.533e6,
            omega32: 2.0 * std::f64::consts::PI * 5.1649e14,
            omega41: 2.0 * std::f64::consts::PI * (5.1649e14 + 34.533e6 + 75e6),
            omega3s: 2.0 * std::f64::consts::PI * (5.1649e14 - 46.175e6),
            v_g,
        };
        let stage = StageConfig {
            alpha0_s: self.depth_total / length,
            alpha0_e: self.depth_total / length,
            coupling_ratio: 1.0,
            theta0: self.theta0,
            v_g,
            dt,
        };
        let tau = fwhm;
        let storage_t = 40.0 * fwhm;
        let t0 = tau + storage_t + 4.0 * fwhm;
        let params = ProtocolParams {
            theta0: self.theta0,
            phi0: 0.0,
            tau,
            storage_t,
            t0,
            signal_shape: self.shape,
            signal_fwhm: fwhm,
            signal_amplitude: 1.0,
            window_pad: self.window_pad,
            stage_margin: length / v_g + 2.0 * dt,
        };
        Case { setup: RunSetup { spectral, spatial, scheme, stage }, params, fwhm }
    }
}

pub fn case(theta0: f64, depth_total: f64, n_bins: usize, n_cells: usize, fwhm_units: f64) -> Case {
    CaseSpec { fwhm_units, ..CaseSpec::new(theta0, depth_total, n_bins, n_cells) }.build()
}

pub fn case_shaped(
    theta0: f64,
    depth_total: f64,
    n_bins: usize,
    n_cells: usize,
    fwhm_units: f64,
    shape: SignalShape,
) -> Case {
    CaseSpec { fwhm_units, shape, ..CaseSpec::new(theta0, depth_total, n_bins, n_cells) }.build()
}

pub fn run(case: &Case, timeline: &ProtocolTimeline) -> EchoReport {
    run_timeline(timeline, &case.setup, &DecayRates::default()).unwrap()
}
