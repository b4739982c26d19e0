//! Frequency-dependent propagation attenuation.
//!
//! Floor structures damp high-frequency content faster with distance
//! than low-frequency content. We model the amplitude transfer over a
//! travel distance l at angular frequency omega as
//!
//! ```text
//! H(l, omega) = exp(-0.5 * alpha * l * omega)
//! ```
//!
//! i.e. log-amplitude decays linearly in both distance and frequency
//! with material coefficient alpha (s/m). Applied to band features the
//! transfer is diagonal: each band is scaled by H evaluated at the
//! band's center frequency.

use crate::error::{Error, Result};
use crate::types::FeatureVector;
use serde::{Deserialize, Serialize};

/// Material attenuation coefficient wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationModel {
    /// Attenuation coefficient alpha (s/m); larger means faster
    /// high-frequency roll-off with distance.
    pub alpha_s_per_m: f64,
}

impl AttenuationModel {
    pub fn new(alpha_s_per_m: f64) -> Result<Self> {
        if !(alpha_s_per_m >= 0.0) || !alpha_s_per_m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha_s_per_m",
                reason: format!("must be nonnegative and finite, got {alpha_s_per_m}"),
            });
        }
        Ok(Self { alpha_s_per_m })
    }

    /// Amplitude scale factor exp(-0.5 * alpha * l * omega).
    pub fn amplitude_scale(&self, distance_m: f64, omega_rad_s: f64) -> f64 {
        (-0.5 * self.alpha_s_per_m * distance_m * omega_rad_s).exp()
    }

    /// Apply the diagonal band transfer to a feature vector, using each
    /// band's arithmetic center frequency. Distance must be nonnegative.
    pub fn apply_attenuation(
        &self,
        features: &FeatureVector,
        distance_m: f64,
    ) -> Result<FeatureVector> {
        if !(distance_m >= 0.0) || !distance_m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "distance_m",
                reason: format!("must be nonnegative and finite, got {distance_m}"),
            });
        }
        let centers = features.band_centers_rad_s();
        let scaled: Vec<f64> = features
            .values()
            .iter()
            .zip(&centers)
            .map(|(v, w)| v * self.amplitude_scale(distance_m, *w))
            .collect();
        features.with_values(scaled)
    }
}
