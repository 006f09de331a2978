//! Photon-echo quantum memory simulator driven by a pre-created long-lived
//! macroscopic (PLM) spin coherence.
//!
//! The crate models a four-level rare-earth-like ensemble (two ground spin
//! sublevels, two optically excited sublevels, plus an auxiliary shelving
//! level) with inhomogeneously broadened optical transitions. An RF pulse and
//! a pair of optical π-pulses imprint a spin wave on the ground doublet before
//! any signal arrives; a weak signal absorbed on 2–3 then leaves behind a
//! 1–3 coherence that rephases after the programmed storage time and is read
//! out as a backward-propagating echo on 1–3.
//!
//! Module map:
//! - [`ensemble`] — spectral/spatial grids, the discretized ensemble state,
//!   decay and free evolution, macroscopic polarization.
//! - [`pulse`] — exact instantaneous RF rotations and optical π-pulses,
//!   spin-wave preparation and rephasing pairs.
//! - [`propagation`] — coupled light–atom integration for the absorption and
//!   backward-retrieval stages, plus the protocol timeline executor.
//! - [`oracle`] — closed-form transmission, stored-coherence, echo and
//!   efficiency expressions used as the test oracle for `propagation`.
//! - [`phasematch`] — wavevector bookkeeping for the scattered spin-wave
//!   vector, backward echo geometry and Raman outputs.
//! - [`protocols`] — timeline builders for the protocol variants, timescale
//!   validation and the luminescence-noise estimator.
//! - [`materials`] — embedded hyperfine/coherence data for candidate crystals
//!   with feasibility checks.
//! - [`config`]/[`report`] — TOML configuration and JSON/CSV reporting for
//!   the CLI.

pub mod config;
pub mod ensemble;
pub mod materials;
pub mod oracle;
pub mod phasematch;
pub mod propagation;
pub mod protocols;
pub mod pulse;
pub mod report;

mod error;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
