//! Protocol timelines for the memory variants, timescale validation and the
//! luminescence-noise estimator.
//!
//! Builders emit fully expanded event lists (RF pulse, the two preparation
//! π-pulses, optional reprogramming/shelving pulses, one absorption stage,
//! one retrieval stage). Free evolution and decay are applied automatically
//! across every inter-event gap by the executor; explicit `Wait` events are
//! markers for the long delays and carry no extra dynamics.

use serde::{Deserialize, Serialize};

use crate::ensemble::OptTransition;
use crate::propagation::{SignalShape, SignalSpec};
use crate::pulse::{OpticalPiPulse, PiTransition, PlmPrep, RfPulse};
use crate::{Error, Result};

/// Protocol variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Basic,
    FrequencyPreserving,
    Reprogrammed,
    OnDemand,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::FrequencyPreserving => "frequency-preserving",
            Variant::Reprogrammed => "reprogrammed",
            Variant::OnDemand => "on-demand",
        }
    }
}

/// A timed protocol action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Rf(RfPulse),
    OpticalPi(OpticalPiPulse),
    PlmPrep(PlmPrep),
    /// Forward absorption stage; the event time is the window start.
    Absorb { signal: SignalSpec, duration: f64 },
    /// Backward retrieval stage; the event time is the window start.
    Retrieve { carrier: OptTransition, duration: f64 },
    /// Marker for a long free-evolution/decay interval.
    Wait { duration: f64 },
}

impl EventKind {
    fn label(&self) -> &'static str {
        match self {
            EventKind::Rf(_) => "rf-pulse",
            EventKind::OpticalPi(_) => "optical-pi",
            EventKind::PlmPrep(_) => "plm-prep",
            EventKind::Absorb { .. } => "absorb",
            EventKind::Retrieve { .. } => "retrieve",
            EventKind::Wait { .. } => "decay-interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub time: f64,
    pub kind: EventKind,
}

/// Validated, time-ordered event list for one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTimeline {
    pub variant: Variant,
    pub events: Vec<TimedEvent>,
    /// Where the echo peak is expected, for reporting and timing checks.
    pub expected_peak_time: Option<f64>,
    pub echo_carrier: OptTransition,
}

impl ProtocolTimeline {
    /// Strictly increasing times, exactly one absorb, exactly one retrieve,
    /// retrieve after absorb.
    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::InvalidTimeline("timeline has no events".into()));
        }
        for w in self.events.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidTimeline(format!(
                    "event times must be strictly increasing ({} at {} then {} at {})",
                    w[0].kind.label(),
                    w[0].time,
                    w[1].kind.label(),
                    w[1].time
                )));
            }
        }
        let absorbs: Vec<usize> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e.kind, EventKind::Absorb { .. }))
            .map(|(i, _)| i)
            .collect();
        let retrieves: Vec<usize> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e.kind, EventKind::Retrieve { .. }))
            .map(|(i, _)| i)
            .collect();
        if absorbs.len() != 1 {
            return Err(Error::InvalidTimeline(format!(
                "timeline must contain exactly one absorb stage, found {}",
                absorbs.len()
            )));
        }
        if retrieves.len() != 1 {
            return Err(Error::InvalidTimeline(format!(
                "timeline must contain exactly one retrieve stage, found {}",
                retrieves.len()
            )));
        }
        if retrieves[0] < absorbs[0] {
            return Err(Error::InvalidTimeline("retrieve must come after absorb".into()));
        }
        Ok(())
    }

    pub fn absorb_event(&self) -> Option<&TimedEvent> {
        self.events.iter().find(|e| matches!(e.kind, EventKind::Absorb { .. }))
    }

    pub fn retrieve_event(&self) -> Option<&TimedEvent> {
        self.events.iter().find(|e| matches!(e.kind, EventKind::Retrieve { .. }))
    }
}

/// Common inputs for the timeline builders. Times are absolute; the RF pulse
/// fires at t = 0 and the signal envelope is centered at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub theta0: f64,
    pub phi0: f64,
    /// RF → first preparation pulse delay.
    pub tau: f64,
    /// Preparation pulse separation; also the programmed storage time T.
    pub storage_t: f64,
    /// Signal arrival time t_s (center of the input envelope).
    pub t0: f64,
    pub signal_shape: SignalShape,
    pub signal_fwhm: f64,
    pub signal_amplitude: f64,
    /// Half-window of each propagation stage in units of the signal FWHM.
    pub window_pad: f64,
    /// Dead time reserved after a propagation window before the next event
    /// (retarded-frame synchronization; at least one medium transit).
    pub stage_margin: f64,
}

impl ProtocolParams {
    fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0) || self.theta0 >= std::f64::consts::PI {
            return Err(Error::InvalidConfig(format!(
                "theta0 must lie in (0, pi), got {}",
                self.theta0
            )));
        }
        if !(self.storage_t > 0.0) || self.tau < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "need storage time T > 0 and tau >= 0 (got {}, {})",
                self.storage_t, self.tau
            )));
        }
        if !(self.signal_fwhm > 0.0) || !(self.signal_amplitude.is_finite()) {
            return Err(Error::InvalidConfig("signal duration/amplitude invalid".into()));
        }
        if !(self.window_pad > 0.0) || self.stage_margin < 0.0 {
            return Err(Error::InvalidConfig("window pad/stage margin invalid".into()));
        }
        let prep_end = self.tau + self.storage_t;
        if self.t0 - self.window_pad * self.signal_fwhm <= prep_end {
            return Err(Error::InvalidConfig(format!(
                "signal window (starts {}) would overlap the preparation (ends {})",
                self.t0 - self.window_pad * self.signal_fwhm,
                prep_end
            )));
        }
        Ok(())
    }

    fn signal(&self) -> SignalSpec {
        SignalSpec {
            shape: self.signal_shape,
            center: self.t0,
            fwhm: self.signal_fwhm,
            amplitude: self.signal_amplitude,
        }
    }

    fn half_window(&self) -> f64 {
        self.window_pad * self.signal_fwhm
    }
}

fn prep_events(params: &ProtocolParams) -> Result<Vec<TimedEvent>> {
    let rf = RfPulse::new(params.theta0, params.phi0, [0.0; 3], 0.0)?;
    let p1 = OpticalPiPulse::new(PiTransition::Opt14, 0.0, [0.0; 3], params.tau)?;
    let p2 = OpticalPiPulse::new(
        PiTransition::Opt14,
        0.0,
        [0.0; 3],
        params.tau + params.storage_t,
    )?;
    Ok(vec![
        TimedEvent { time: rf.time, kind: EventKind::Rf(rf) },
        TimedEvent { time: p1.time, kind: EventKind::OpticalPi(p1) },
        TimedEvent { time: p2.time, kind: EventKind::OpticalPi(p2) },
    ])
}

fn absorb_retrieve_events(
    params: &ProtocolParams,
    peak_time: f64,
    carrier: OptTransition,
) -> (TimedEvent, TimedEvent, TimedEvent) {
    let hw = params.half_window();
    let absorb_start = params.t0 - hw;
    let prep_end = params.tau + params.storage_t;
    let wait = TimedEvent {
        time: 0.5 * (prep_end + absorb_start),
        kind: EventKind::Wait { duration: absorb_start - prep_end },
    };
    let absorb = TimedEvent {
        time: absorb_start,
        kind: EventKind::Absorb { signal: params.signal(), duration: 2.0 * hw },
    };
    let retrieve = TimedEvent {
        time: peak_time - hw,
        kind: EventKind::Retrieve { carrier, duration: 2.0 * hw },
    };
    (wait, absorb, retrieve)
}

/// Basic variant: prepare the spin wave, absorb on 2–3, retrieve backward on
/// 1–3 at t_s + T.
pub fn build_basic(params: &ProtocolParams) -> Result<ProtocolTimeline> {
    params.validate()?;
    let mut events = prep_events(params)?;
    let peak = params.t0 + params.storage_t;
    let (wait, absorb, retrieve) = absorb_retrieve_events(params, peak, OptTransition::T13);
    events.push(wait);
    events.push(absorb);
    events.push(retrieve);
    let timeline = ProtocolTimeline {
        variant: Variant::Basic,
        events,
        expected_peak_time: Some(peak),
        echo_carrier: OptTransition::T13,
    };
    timeline.validate()?;
    Ok(timeline)
}

/// Frequency-preserving variant: θ₀ is pinned to π/2 and an RF π-pulse after
/// absorption relabels the stored coherence so the echo leaves on 2–3 at the
/// signal frequency.
pub fn build_frequency_preserving(params: &ProtocolParams) -> Result<ProtocolTimeline> {
    params.validate()?;
    let half_pi = 0.5 * std::f64::consts::PI;
    if (params.theta0 - half_pi).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "frequency-preserving readout requires theta0 = pi/2, got {}",
            params.theta0
        )));
    }
    let mut events = prep_events(params)?;
    let peak = params.t0 + params.storage_t;
    let (wait, absorb, retrieve) = absorb_retrieve_events(params, peak, OptTransition::T23);
    let absorb_end = absorb.time + 2.0 * params.half_window();
    let rf_pi_time = absorb_end + params.stage_margin + 0.5 * params.signal_fwhm;
    if rf_pi_time >= retrieve.time {
        return Err(Error::InvalidConfig(
            "storage time too short to fit the frequency-switching RF pulse".into(),
        ));
    }
    let rf_pi = RfPulse::new(std::f64::consts::PI, 0.0, [0.0; 3], rf_pi_time)?;
    events.push(wait);
    events.push(absorb);
    events.push(TimedEvent { time: rf_pi_time, kind: EventKind::Rf(rf_pi) });
    events.push(retrieve);
    let timeline = ProtocolTimeline {
        variant: Variant::FrequencyPreserving,
        events,
        expected_peak_time: Some(peak),
        echo_carrier: OptTransition::T23,
    };
    timeline.validate()?;
    Ok(timeline)
}

/// Reprogrammed storage: a π-pulse pair on 1–4 (pair separation T') extends
/// the storage time to T + T'; a pair on 2–4 shortens it to T − T' and then
/// requires T' < T.
pub fn build_reprogrammed(
    params: &ProtocolParams,
    t_prime: f64,
    pair_transition: PiTransition,
) -> Result<ProtocolTimeline> {
    params.validate()?;
    if !(t_prime > 0.0) {
        return Err(Error::InvalidConfig(format!("T' must be positive, got {t_prime}")));
    }
    let peak = match pair_transition {
        PiTransition::Opt14 => params.t0 + params.storage_t + t_prime,
        PiTransition::Opt24 => {
            if t_prime >= params.storage_t {
                return Err(Error::InvalidConfig(format!(
                    "shortening pair needs T' < T (got T' {} >= T {})",
                    t_prime, params.storage_t
                )));
            }
            params.t0 + params.storage_t - t_prime
        }
        PiTransition::Shelf3s => {
            return Err(Error::InvalidConfig("rephasing pair must act on 1-4 or 2-4".into()))
        }
    };
    let mut events = prep_events(params)?;
    let prep_end = params.tau + params.storage_t;
    let absorb_start = params.t0 - params.half_window();
    let gap = absorb_start - prep_end;
    let margin = 0.05 * gap;
    if t_prime > gap - 2.0 * margin {
        return Err(Error::InvalidConfig(format!(
            "pair separation T' = {t_prime} does not fit in the {gap} s between \
             preparation and the signal window"
        )));
    }
    let pair1 = prep_end + margin;
    for t in [pair1, pair1 + t_prime] {
        let p = OpticalPiPulse::new(pair_transition, 0.0, [0.0; 3], t)?;
        events.push(TimedEvent { time: t, kind: EventKind::OpticalPi(p) });
    }
    let (_, absorb, retrieve) = absorb_retrieve_events(params, peak, OptTransition::T13);
    events.push(absorb);
    events.push(retrieve);
    let timeline = ProtocolTimeline {
        variant: Variant::Reprogrammed,
        events,
        expected_peak_time: Some(peak),
        echo_carrier: OptTransition::T13,
    };
    timeline.validate()?;
    Ok(timeline)
}

/// On-demand readout: a π-pulse on 3–s at t_s + t1 shelves the stored
/// coherence (freezing its optical phase), a second π-pulse at `t_read`
/// restores it, and the echo leaves at t_read + (T − t1).
pub fn build_on_demand(params: &ProtocolParams, t1: f64, t_read: f64) -> Result<ProtocolTimeline> {
    params.validate()?;
    if !(t1 > 0.0) || t1 >= params.storage_t {
        return Err(Error::InvalidConfig(format!(
            "shelving delay t1 must satisfy 0 < t1 < T (got t1 {} vs T {})",
            t1, params.storage_t
        )));
    }
    let shelf_time = params.t0 + t1;
    let absorb_end = params.t0 + params.half_window();
    if shelf_time < absorb_end + params.stage_margin {
        return Err(Error::InvalidConfig(format!(
            "t1 = {t1} puts the shelving pulse inside the absorption window"
        )));
    }
    if t_read <= shelf_time {
        return Err(Error::InvalidConfig(format!(
            "readout time {t_read} must come after the shelving pulse at {shelf_time}"
        )));
    }
    let peak = t_read + (params.storage_t - t1);
    let mut events = prep_events(params)?;
    let (wait, absorb, retrieve) = absorb_retrieve_events(params, peak, OptTransition::T13);
    if retrieve.time <= t_read {
        return Err(Error::InvalidConfig(
            "retrieval window would start before the readout pulse".into(),
        ));
    }
    events.push(wait);
    events.push(absorb);
    for t in [shelf_time, t_read] {
        let p = OpticalPiPulse::new(PiTransition::Shelf3s, 0.0, [0.0; 3], t)?;
        events.push(TimedEvent { time: t, kind: EventKind::OpticalPi(p) });
    }
    events.push(retrieve);
    let timeline = ProtocolTimeline {
        variant: Variant::OnDemand,
        events,
        expected_peak_time: Some(peak),
        echo_carrier: OptTransition::T13,
    };
    timeline.validate()?;
    Ok(timeline)
}

/// Timescale inputs for the ordering checks; entries are optional and only
/// present values are checked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimescaleBudget {
    /// Inhomogeneous dephasing time scale T2* ~ 1/Δ_in.
    pub t2_star: Option<f64>,
    /// Signal pulse duration δt_s.
    pub dt_s: Option<f64>,
    /// Control pulse duration δt_{1,2}.
    pub dt_pulse: Option<f64>,
    /// Storage time T.
    pub storage_t: Option<f64>,
    pub t_prime: Option<f64>,
    pub tau: Option<f64>,
    /// Preparation → signal delay t0.
    pub t0: Option<f64>,
    pub t2_opt: Option<f64>,
    pub t2_spin: Option<f64>,
    pub t1_opt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub pass: bool,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimescaleReport {
    pub margin: f64,
    pub checks: Vec<ConstraintCheck>,
}

impl TimescaleReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// Check the protocol's timescale orderings with a configurable margin for
/// the strong inequalities (default 10, one order of magnitude).
pub fn validate_timescales(budget: &TimescaleBudget, margin: f64) -> TimescaleReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, lhs: Option<f64>, relation: &str, rhs: Option<f64>| {
        if let (Some(l), Some(r)) = (lhs, rhs) {
            let pass = match relation {
                "<=" => l <= r,
                "<" => l < r,
                ">=" => l >= r,
                _ => unreachable!(),
            };
            checks.push(ConstraintCheck {
                name: name.to_string(),
                pass,
                lhs: l,
                relation: relation.to_string(),
                rhs: r,
            });
        }
    };
    push("T2* << dt_s", budget.t2_star, "<=", budget.dt_s.map(|v| v / margin));
    push("dt_pulse << dt_s", budget.dt_pulse, "<=", budget.dt_s.map(|v| v / margin));
    push("T >> T2*", budget.storage_t, ">=", budget.t2_star.map(|v| v * margin));
    push("T < T2,o", budget.storage_t, "<", budget.t2_opt);
    push("tau << T2,s", budget.tau, "<=", budget.t2_spin.map(|v| v / margin));
    push("t0 < T2,s", budget.t0, "<", budget.t2_spin);
    TimescaleReport { margin, checks }
}

/// Luminescence-noise model inputs. The residual excited fraction left by an
/// imperfect π-pulse decays for t0 before the gated detection window opens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Residual excited-state fraction per imperfect π-pulse.
    pub pulse_error: f64,
    /// Atom count.
    pub n_atoms: f64,
    /// Preparation → signal delay t0.
    pub t0: f64,
    /// Optical population lifetime T1,o.
    pub t1_opt: f64,
    /// Detection gate δt_d.
    pub gate: f64,
    /// Geometric collection factor into the detection mode.
    pub collection: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pulse_error) {
            return Err(Error::InvalidConfig(format!(
                "pulse error must lie in [0,1], got {}",
                self.pulse_error
            )));
        }
        if !(self.collection > 0.0 && self.collection <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "collection factor must lie in (0,1], got {}",
                self.collection
            )));
        }
        if self.n_atoms < 0.0 || self.t0 < 0.0 || !(self.t1_opt > 0.0) || self.gate < 0.0 {
            return Err(Error::InvalidConfig("noise model times/counts invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// Mean luminescence photons inside the detection gate.
    pub mu_noise: f64,
    /// η·n_signal / mu_noise; infinite when the noise vanishes.
    pub snr: f64,
}

/// mu_noise = N ε μ_geo (δt_d / T1,o) e^{−t0/T1,o}.
pub fn estimate_noise(noise: &NoiseConfig, eta: f64, n_signal_photons: f64) -> Result<NoiseEstimate> {
    noise.validate()?;
    let mu_noise = noise.n_atoms
        * noise.pulse_error
        * noise.collection
        * (noise.gate / noise.t1_opt)
        * (-noise.t0 / noise.t1_opt).exp();
    let snr = if mu_noise == 0.0 { f64::INFINITY } else { eta * n_signal_photons / mu_noise };
    Ok(NoiseEstimate { mu_noise, snr })
}
