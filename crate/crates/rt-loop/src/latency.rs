use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ms_to_us, RtError};

/// Expected intention-to-assistance band, ms. Measurements outside it are
/// flagged, not rejected.
pub const TARGET_BAND_MS: (f64, f64) = (500.0, 550.0);
/// Acceptable band for the mean, ms.
pub const ACCEPT_BAND_MS: (f64, f64) = (500.0, 600.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceRange {
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Delay of every hop between a muscle contraction and the PAM response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyConfig {
    pub sensor_to_cloud_ms: f64,
    /// Sampled uniformly per classification.
    pub cloud_inference_ms: InferenceRange,
    pub cloud_to_driver_ms: f64,
    pub valve_response_ms: f64,
    pub pam_actuation_ms: f64,
    pub window_stride_ms: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            sensor_to_cloud_ms: 30.0,
            cloud_inference_ms: InferenceRange {
                min_ms: 200.0,
                max_ms: 250.0,
            },
            cloud_to_driver_ms: 30.0,
            valve_response_ms: 50.0,
            pam_actuation_ms: 100.0,
            window_stride_ms: 250.0,
        }
    }
}

impl LatencyConfig {
    /// Every transport and actuation delay zero; only the stride remains.
    pub fn zero() -> Self {
        Self {
            sensor_to_cloud_ms: 0.0,
            cloud_inference_ms: InferenceRange { min_ms: 0.0, max_ms: 0.0 },
            cloud_to_driver_ms: 0.0,
            valve_response_ms: 0.0,
            pam_actuation_ms: 0.0,
            window_stride_ms: 250.0,
        }
    }

    pub fn validate(&self) -> Result<(), RtError> {
        let delays = [
            ("sensor_to_cloud_ms", self.sensor_to_cloud_ms),
            ("cloud_inference_ms.min_ms", self.cloud_inference_ms.min_ms),
            ("cloud_inference_ms.max_ms", self.cloud_inference_ms.max_ms),
            ("cloud_to_driver_ms", self.cloud_to_driver_ms),
            ("valve_response_ms", self.valve_response_ms),
            ("pam_actuation_ms", self.pam_actuation_ms),
        ];
        for (name, v) in delays {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RtError::Latency(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if self.cloud_inference_ms.min_ms > self.cloud_inference_ms.max_ms {
            return Err(RtError::Latency("inference min exceeds max".into()));
        }
        if !(self.window_stride_ms.is_finite() && self.window_stride_ms > 0.0) {
            return Err(RtError::Latency("window stride must be positive".into()));
        }
        Ok(())
    }

    pub fn sample_inference_us<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let lo = ms_to_us(self.cloud_inference_ms.min_ms);
        let hi = ms_to_us(self.cloud_inference_ms.max_ms);
        if lo >= hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }

    /// Fixed part of the budget: every hop except window alignment.
    pub fn fixed_ms(&self, inference_ms: f64) -> f64 {
        self.sensor_to_cloud_ms + inference_ms + self.cloud_to_driver_ms + self.valve_response_ms + self.pam_actuation_ms
    }
}
