//! Envelope-level comparison of the propagation integrator against the
//! closed-form solutions, across the symmetry-parameter/depth grid and the
//! three line profiles.
//!
//! The closed forms neglect the dispersion of the absorption line (an
//! envelope advance of order α_sL/(π·Δ_in)), so each comparison uses a pulse
//! long enough that the neglected term stays well inside the 2% budget, with
//! the time step capped at 1/Δ_in so the atomic response stays resolved.

mod common;

use common::{run, CaseSpec, DELTA_IN};
use plm_echo::ensemble::{EnsembleState, LevelScheme, Profile, SpatialGrid, SpectralGrid};
use plm_echo::oracle::{echo_closed_form, OracleParams};
use plm_echo::propagation::{
    propagate_absorption, Direction, FieldEnvelope, SignalShape, SignalSpec, StageConfig,
};
use plm_echo::protocols::build_basic;
use plm_echo::pulse::{prepare_plm, OpticalPiPulse, PiTransition, PlmPrep, RfPulse};
use plm_echo::C64;

const PI: f64 = std::f64::consts::PI;

fn l2_rel(sim: &[C64], reference: &[C64]) -> f64 {
    let num: f64 = sim.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn echo_envelopes_match_closed_form_across_grid() {
    let mut worst = 0.0f64;
    for depth in [1.0, 2.0, 5.0, 10.0] {
        for x in [0.5, 1.0, 2.0] {
            let theta0 = 2.0 * f64::atan(x);
            let c = CaseSpec {
                fwhm_units: 150.0,
                dt_units: Some(1.0),
                window_pad: 2.0,
                ..CaseSpec::new(theta0, depth, 201, 100)
            }
            .build();
            let timeline = build_basic(&c.params).unwrap();
            let report = run(&c, &timeline);

            let params = OracleParams::new(
                theta0,
                1.0,
                c.setup.stage.alpha0_s,
                c.setup.stage.alpha0_e,
                c.setup.spatial.length,
                c.params.storage_t,
                PI, // composite phase of the zero-phase preparation pulses
            )
            .unwrap();
            let sigma = c.fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let input = move |u: f64| C64::new((-u * u / (2.0 * sigma * sigma)).exp(), 0.0);
            let t_s = c.params.t0;
            let oracle_ref: Vec<C64> = (0..report.echo.samples.len())
                .map(|k| echo_closed_form(&params, 0.0, report.echo.time(k) - t_s, &input))
                .collect();
            let l2 = l2_rel(&report.echo.samples, &oracle_ref);
            worst = worst.max(l2);
            assert!(l2 < 0.02, "echo L2 {l2:.4} at x={x}, depth={depth}");
        }
    }
    println!("[oracle-equivalence] worst echo L2 error {worst:.2e}");
}

/// Transmitted envelope against e^{-alpha_s L/2}·input across the grid. The
/// attenuated reference at alpha_s L = 8 is tiny, so the deep-depth cases use
/// a longer pulse to keep the neglected dispersion advance inside the budget.
#[test]
fn transmitted_envelopes_match_beer_lambert() {
    let mut worst = 0.0f64;
    for depth in [1.0f64, 2.0, 5.0, 10.0] {
        for x in [0.5, 1.0, 2.0] {
            let theta0 = 2.0 * f64::atan(x);
            let (fwhm_units, n_bins) = if depth > 5.0 { (520.0, 501) } else { (300.0, 301) };
            let c = CaseSpec {
                fwhm_units,
                dt_units: Some(1.0),
                window_pad: 2.0,
                ..CaseSpec::new(theta0, depth, n_bins, 50)
            }
            .build();
            let dt = c.setup.stage.dt;
            let spec = SignalSpec {
                shape: SignalShape::Gaussian,
                center: c.params.t0,
                fwhm: c.fwhm,
                amplitude: 1.0,
            };
            let t0 = c.params.t0 - 2.0 * c.fwhm;
            let n = (4.0 * c.fwhm / dt).round() as usize;
            let input = FieldEnvelope {
                samples: (0..n).map(|k| spec.sample(t0 + k as f64 * dt)).collect(),
                dt,
                t_start: t0,
                direction: Direction::Forward,
                carrier: plm_echo::ensemble::OptTransition::T23,
            };
            let mut state = EnsembleState::init(
                c.setup.spectral.clone(),
                c.setup.spatial,
                c.setup.scheme,
            );
            let prep = PlmPrep::new(
                RfPulse::new(theta0, 0.0, [0.0; 3], 0.0).unwrap(),
                OpticalPiPulse::new(PiTransition::Opt14, 0.0, [0.0; 3], c.params.tau).unwrap(),
                OpticalPiPulse::new(
                    PiTransition::Opt14,
                    0.0,
                    [0.0; 3],
                    c.params.tau + c.params.storage_t,
                )
                .unwrap(),
                c.params.tau,
                c.params.storage_t,
            )
            .unwrap();
            prepare_plm(&mut state, &prep).unwrap();
            let out = propagate_absorption(&mut state, &input, &c.setup.stage).unwrap();
            let att = (-0.5 * c.setup.stage.alpha_s() * c.setup.spatial.length).exp();
            let reference: Vec<C64> = input.samples.iter().map(|s| s * att).collect();
            let l2 = l2_rel(&out.samples, &reference);
            worst = worst.max(l2);
            assert!(l2 < 0.02, "transmitted L2 {l2:.4} at x={x}, depth={depth}");
        }
    }
    println!("[oracle-equivalence] worst transmitted L2 error {worst:.2e}");
}

/// Line-center Beer–Lambert transmission for the gaussian and lorentzian
/// profiles validates the numerical coupling calibration.
#[test]
fn calibration_holds_for_smooth_profiles() {
    for profile in [Profile::Gaussian, Profile::Lorentzian] {
        let fwhm = 60.0 / DELTA_IN;
        let dt = 1.0 / DELTA_IN;
        let length = 0.01;
        let spatial = SpatialGrid::new(length, 50).unwrap();
        let v_g = spatial.dz() / dt;
        let spectral = SpectralGrid::build(profile, DELTA_IN, 801, 6.0 * DELTA_IN).unwrap();
        let scheme = LevelScheme {
            omega21: 1e8,
            omega32: 1e15,
            omega41: 1.1e15,
            omega3s: 0.9e15,
            v_g,
        };
        let alpha_s_l = 2.0;
        let stage = StageConfig {
            alpha0_s: 2.0 * alpha_s_l / length,
            alpha0_e: 2.0 * alpha_s_l / length,
            coupling_ratio: 1.0,
            theta0: PI / 2.0,
            v_g,
            dt,
        };
        let mut state = EnsembleState::init(spectral, spatial, scheme);
        let prep = PlmPrep::new(
            RfPulse::new(PI / 2.0, 0.0, [0.0; 3], 0.0).unwrap(),
            OpticalPiPulse::new(PiTransition::Opt14, 0.0, [0.0; 3], 1e-9).unwrap(),
            OpticalPiPulse::new(PiTransition::Opt14, 0.0, [0.0; 3], 1e-9 + 40.0 * fwhm).unwrap(),
            1e-9,
            40.0 * fwhm,
        )
        .unwrap();
        prepare_plm(&mut state, &prep).unwrap();

        let t_s = 5.0 * fwhm;
        let spec = SignalSpec { shape: SignalShape::Gaussian, center: t_s, fwhm, amplitude: 1.0 };
        let n = (4.0 * fwhm / dt).round() as usize;
        let t0 = t_s - 2.0 * fwhm;
        let input = FieldEnvelope {
            samples: (0..n).map(|k| spec.sample(t0 + k as f64 * dt)).collect(),
            dt,
            t_start: t0,
            direction: Direction::Forward,
            carrier: plm_echo::ensemble::OptTransition::T23,
        };
        let out = propagate_absorption(&mut state, &input, &stage).unwrap();
        let ratio = (out.energy() / input.energy()).sqrt();
        let expect = (-0.5 * alpha_s_l).exp();
        let rel = (ratio / expect - 1.0).abs();
        println!("[oracle-equivalence] {profile:?} line-center transmission error {rel:.2e}");
        assert!(rel < 0.01, "{profile:?}: transmission {ratio} vs {expect}");
    }
}
