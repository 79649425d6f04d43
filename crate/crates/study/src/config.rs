use serde::{Deserialize, Serialize};

use chromashift::adaptation::{AdaptationParams, Trajectory, TriphasicSchedule};
use chromashift::psychophysics::{ParamGrid, PsychometricParams, PLACEMENT_SIGMA};

use crate::StudyError;

/// Patch layout hints passed through to the client.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub size_deg: f64,
    pub eccentricity_deg: f64,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        Self {
            size_deg: 4.0,
            eccentricity_deg: 6.0,
        }
    }
}

/// Everything that defines a session. Missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub schedule: TriphasicSchedule,
    /// Seconds of D65 before the first calibration trial.
    pub warmup: f64,
    pub calibration_trials: u32,
    /// Spread of calibration midpoints around D65.
    pub calibration_sigma: f64,
    /// Spread of measurement midpoints around the running prediction.
    pub sigma_place: f64,
    /// Seconds the patches stay on screen.
    pub display_duration: f64,
    /// Seconds after the patches disappear in which a response is on time.
    pub response_window: f64,
    /// Minimum seconds between a response and the next trial.
    pub rest: f64,
    /// Idle seconds during measurement after which the session is flagged.
    pub max_gap: f64,
    /// Constants predicting the adaptation state before any measurement.
    pub prior: AdaptationParams,
    /// Psychometric function used when calibration gave no fit.
    pub fallback_psychometric: PsychometricParams,
    /// Luminance of the patch colors, relative to display white.
    pub patch_luminance: f64,
    pub patch: PatchGeometry,
    pub seed: u64,
    pub grid: ParamGrid,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            schedule: TriphasicSchedule::study(Trajectory::Linear { phi: 1.47 }, 0.0002),
            warmup: 60.0,
            calibration_trials: 70,
            calibration_sigma: PLACEMENT_SIGMA,
            sigma_place: PLACEMENT_SIGMA,
            display_duration: 0.75,
            response_window: 3.0,
            rest: 0.0,
            max_gap: 30.0,
            prior: AdaptationParams { k1: 0.1, k2: 0.7 },
            fallback_psychometric: PsychometricParams { k: 400.0, x0: 0.0 },
            patch_luminance: 0.4,
            patch: PatchGeometry::default(),
            seed: 0,
            grid: ParamGrid::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::InvalidConfig(m));
        self.schedule
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        self.schedule
            .direction()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        self.grid
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        self.prior
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        let nonneg = [
            ("warmup", self.warmup),
            ("calibration_sigma", self.calibration_sigma),
            ("sigma_place", self.sigma_place),
            ("rest", self.rest),
        ];
        for (name, x) in nonneg {
            if !(x >= 0.0) || !x.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        let positive = [
            ("display_duration", self.display_duration),
            ("response_window", self.response_window),
            ("max_gap", self.max_gap),
        ];
        for (name, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return bad(format!("{name} must be finite and > 0, got {x}"));
            }
        }
        if !(self.patch_luminance > 0.0 && self.patch_luminance <= 1.0) {
            return bad(format!("patch_luminance must lie in (0, 1], got {}", self.patch_luminance));
        }
        let f = &self.fallback_psychometric;
        if !f.k.is_finite() || !f.x0.is_finite() {
            return bad("fallback_psychometric must be finite".into());
        }
        Ok(())
    }
}
