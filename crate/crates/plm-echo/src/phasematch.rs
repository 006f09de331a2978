//! Wavevector bookkeeping for the spin-wave memory.
//!
//! The spin wave carries δk_sc = k₀ − k₁ + k₂ from the preparation pulses;
//! the echo leaves along k_e = k_s + δk_sc, which points backward for the
//! geometry k_s ↑↑ k₀ ↑↑ k₁ ↑↓ k₂ with k₀ ≪ k₁,₂ and k_s < k₁,₂. Matching is
//! judged by the accumulated phase slip | |k_e| − |k(ω₃₁)| |·L against a
//! sub-radian tolerance. Raman readout adds k_out1 = k_s − k_W + k_R1 and
//! k_out2 = k_out1 + δk_sc; only the vector algebra is modeled here.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Neg, Sub};

use crate::{Error, Result};

/// Default accumulated-phase-slip tolerance (radians).
pub const DEFAULT_MATCH_TOLERANCE: f64 = 0.1;

/// 3-vector of rad/m components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WaveVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        WaveVector { x, y, z }
    }

    pub fn zero() -> Self {
        WaveVector::new(0.0, 0.0, 0.0)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for WaveVector {
    fn from(v: [f64; 3]) -> Self {
        WaveVector::new(v[0], v[1], v[2])
    }
}

impl Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::new(-self.x, -self.y, -self.z)
    }
}

/// Beam geometry for the matching reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub k_s: WaveVector,
    pub k0: WaveVector,
    pub k1: WaveVector,
    pub k2: WaveVector,
    /// Raman write/read beams, when the Raman identities are wanted.
    pub k_w: Option<WaveVector>,
    pub k_r1: Option<WaveVector>,
    /// Target magnitude |k(ω₃₁)| for the echo carrier (rad/m).
    pub target_k31: f64,
    /// Target magnitude |k(ω₃₂)| (rad/m), reported when present.
    pub target_k32: Option<f64>,
    /// Medium length (m), converting mismatch to accumulated phase.
    pub length: f64,
    /// Phase-slip tolerance (rad).
    pub tolerance: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_s", &self.k_s),
            ("k0", &self.k0),
            ("k1", &self.k1),
            ("k2", &self.k2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} has non-finite components")));
            }
        }
        if !(self.target_k31 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target |k(omega31)| must be positive, got {}",
                self.target_k31
            )));
        }
        if !(self.length > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "geometry length and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn delta_k_sc(&self) -> WaveVector {
        scattered_wavevector(self.k0, self.k1, self.k2)
    }
}

/// δk_sc = k₀ − k₁ + k₂.
pub fn scattered_wavevector(k0: WaveVector, k1: WaveVector, k2: WaveVector) -> WaveVector {
    k0 - k1 + k2
}

/// Echo wavevector report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoMatch {
    pub k_e: WaveVector,
    /// Accumulated phase slip | |k_e| − |k(ω₃₁)| |·L (rad).
    pub residual: f64,
    /// Magnitude condition |residual| ≤ tolerance.
    pub matched: bool,
    /// Echo direction has k_e·ẑ < 0.
    pub backward: bool,
    /// Both conditions.
    pub matched_backward: bool,
}

/// k_e = k_s + δk_sc, with the magnitude-mismatch residual against
/// |k(ω₃₁)| and the backward check on the z-component.
pub fn echo_wavevector(geometry: &Geometry) -> Result<EchoMatch> {
    geometry.validate()?;
    let k_e = geometry.k_s + geometry.delta_k_sc();
    let residual = (k_e.norm() - geometry.target_k31).abs() * geometry.length;
    let matched = residual <= geometry.tolerance;
    let backward = k_e.z < 0.0;
    Ok(EchoMatch { k_e, residual, matched, backward, matched_backward: matched && backward })
}

/// Raman output wavevectors: k_out1 = k_s − k_W + k_R1 and
/// k_out2 = k_out1 + δk_sc.
pub fn raman_output_wavevectors(geometry: &Geometry) -> Result<(WaveVector, WaveVector)> {
    let (k_w, k_r1) = match (geometry.k_w, geometry.k_r1) {
        (Some(w), Some(r)) => (w, r),
        _ => {
            return Err(Error::InvalidArgument(
                "Raman output requires both k_w and k_r1".into(),
            ))
        }
    };
    let k_out1 = geometry.k_s - k_w + k_r1;
    let k_out2 = k_out1 + geometry.delta_k_sc();
    Ok((k_out1, k_out2))
}
