//! Adaptation-state dynamics.
//!
//! The adaptation state `a(t)` follows the illuminant `A(t)` through
//!
//! ```text
//! a'(t) = k1 * (k2 * A(t) - a(t))
//! ```
//!
//! applied component-wise to u'v' offsets from D65, starting at `a(0) = D65`.
//! For the triphasic ramp/hold/return program the solution has a closed form;
//! [`ode`] integrates the same equation numerically for any program and is
//! used as the reference.

mod daylight;
pub mod ode;

use serde::{Deserialize, Serialize};

use crate::colorimetry::{jnd, ChromaticityUv};
use crate::{Error, Result};

pub use daylight::{daylight_locus, daylight_range, daylight_x, daylight_y, distance_to_locus};
pub use ode::{adaptation_at, adaptation_ode, AdaptationState, IlluminantProgram, DEFAULT_DT};

/// Rate (`k1`, 1/s) and completeness (`k2`, in `[0, 1]`) of adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationParams {
    pub k1: f64,
    pub k2: f64,
}

impl AdaptationParams {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let p = Self { k1, k2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !self.k1.is_finite() {
            return Err(Error::InvalidParameter(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.k2) {
            return Err(Error::InvalidParameter(format!(
                "k2 must lie in [0, 1], got {}",
                self.k2
            )));
        }
        Ok(())
    }
}

/// Population fits by trajectory.
pub mod fitted {
    use super::AdaptationParams;

    pub const DAYLIGHT: AdaptationParams = AdaptationParams { k1: 0.127, k2: 0.712 };
    pub const LINEAR_1_470: AdaptationParams = AdaptationParams { k1: 0.101, k2: 0.685 };
    pub const LINEAR_1_863: AdaptationParams = AdaptationParams { k1: 0.107, k2: 0.638 };
    pub const LINEAR_2_256: AdaptationParams = AdaptationParams { k1: 0.069, k2: 0.707 };
}

/// Path of the illuminant away from D65.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trajectory", rename_all = "lowercase")]
pub enum Trajectory {
    /// Straight line at angle `phi` (radians, counter-clockwise from +u').
    Linear { phi: f64 },
    /// The daylight locus toward lower color temperatures.
    Daylight,
}

impl Trajectory {
    /// The four trajectories of the measurement study, in the order the
    /// fitted constants are tabulated.
    pub fn study_set() -> [(Trajectory, AdaptationParams); 4] {
        [
            (Trajectory::Daylight, fitted::DAYLIGHT),
            (Trajectory::Linear { phi: 1.470 }, fitted::LINEAR_1_470),
            (Trajectory::Linear { phi: 1.863 }, fitted::LINEAR_1_863),
            (Trajectory::Linear { phi: 2.256 }, fitted::LINEAR_2_256),
        ]
    }

    pub fn label(&self) -> String {
        match self {
            Trajectory::Linear { phi } => format!("linear@{phi:.3}"),
            Trajectory::Daylight => "daylight".to_string(),
        }
    }

    /// Point at u'v' distance `distance` along the trajectory from D65.
    pub fn point(&self, distance: f64) -> Result<ChromaticityUv> {
        match *self {
            Trajectory::Linear { phi } => {
                Ok(ChromaticityUv::d65() + ChromaticityUv::direction(phi) * distance)
            }
            Trajectory::Daylight => daylight_locus(distance),
        }
    }

    /// Largest distance the trajectory is defined for.
    pub fn max_distance(&self) -> f64 {
        match self {
            Trajectory::Linear { .. } => f64::INFINITY,
            Trajectory::Daylight => daylight_range().1,
        }
    }

    /// Unit direction used to project offsets onto the trajectory. For the
    /// daylight locus this is the chord from D65 to the point at `extent`.
    pub fn direction(&self, extent: f64) -> Result<ChromaticityUv> {
        match *self {
            Trajectory::Linear { phi } => Ok(ChromaticityUv::direction(phi)),
            Trajectory::Daylight => {
                let chord = daylight_locus(extent)? - ChromaticityUv::d65();
                let n = chord.norm();
                if n == 0.0 {
                    return Err(Error::InvalidParameter(
                        "daylight chord needs a non-zero extent".into(),
                    ));
                }
                Ok(chord * (1.0 / n))
            }
        }
    }
}

/// Ramp away from D65 at speed `v` for `distance`, hold for `t1`, jump back
/// to D65 and stay there for `t2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriphasicSchedule {
    #[serde(flatten)]
    pub trajectory: Trajectory,
    /// u'v' distance per second.
    pub v: f64,
    /// Ramp length in u'v' units.
    #[serde(rename = "D")]
    pub distance: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Which part of a triphasic schedule a time falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Ramp,
    Hold,
    Return,
}

impl TriphasicSchedule {
    /// The study protocol: 6 JND ramp, one minute hold, one minute return.
    pub fn study(trajectory: Trajectory, v: f64) -> Self {
        Self {
            trajectory,
            v,
            distance: jnd(6.0),
            t1: 60.0,
            t2: 60.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::InvalidParameter(format!("v must be > 0, got {}", self.v)));
        }
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "distance must be > 0, got {}",
                self.distance
            )));
        }
        if !(self.t1 >= 0.0 && self.t2 >= 0.0) {
            return Err(Error::InvalidParameter("t1 and t2 must be >= 0".into()));
        }
        if let Trajectory::Linear { phi } = self.trajectory {
            if !phi.is_finite() {
                return Err(Error::InvalidParameter("phi must be finite".into()));
            }
        }
        if self.distance > self.trajectory.max_distance() {
            return Err(Error::InvalidParameter(format!(
                "distance {} exceeds the trajectory's defined range {}",
                self.distance,
                self.trajectory.max_distance()
            )));
        }
        Ok(())
    }

    pub fn ramp_end(&self) -> f64 {
        self.distance / self.v
    }

    pub fn hold_end(&self) -> f64 {
        self.ramp_end() + self.t1
    }

    pub fn end(&self) -> f64 {
        self.hold_end() + self.t2
    }

    pub fn phase(&self, t: f64) -> Phase {
        if t < self.ramp_end() {
            Phase::Ramp
        } else if t < self.hold_end() {
            Phase::Hold
        } else {
            Phase::Return
        }
    }

    /// Projection direction for stimuli and offsets.
    pub fn direction(&self) -> Result<ChromaticityUv> {
        self.trajectory.direction(self.distance)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.end()) {
            return Err(Error::TimeOutOfRange { t, end: self.end() });
        }
        Ok(())
    }

    /// Distance of the illuminant from D65 along the trajectory at `t`.
    pub fn illuminant_distance(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.phase(t) {
            Phase::Ramp => self.v * t,
            Phase::Hold => self.distance,
            Phase::Return => 0.0,
        })
    }

    pub fn illuminant_at(&self, t: f64) -> Result<ChromaticityUv> {
        let d = self.illuminant_distance(t)?;
        if d == 0.0 {
            return Ok(ChromaticityUv::d65());
        }
        self.trajectory.point(d)
    }

    /// Closed-form adaptation state.
    pub fn adaptation_closed_form(&self, p: &AdaptationParams, t: f64) -> Result<ChromaticityUv> {
        self.check_time(t)?;
        let offset = p.k2 * self.unit_response(p.k1, t);
        Ok(ChromaticityUv::d65() + self.direction()? * offset)
    }

    /// Scalar adaptation offset along the trajectory divided by `k2`.
    ///
    /// The solution is linear in `k2`, so `a(t) = d65 + k2 * h(t; k1) * u`;
    /// this returns `h`. Phases two and three are continuity-matched
    /// exponential relaxations from the state at the previous boundary.
    pub fn unit_response(&self, k1: f64, t: f64) -> f64 {
        self.unit_response_anchored(k1, t, self.unit_anchors(k1))
    }

    /// `h` at the end of the ramp and at the end of the hold. These depend on
    /// `k1` only, so callers evaluating many times share them.
    pub(crate) fn unit_anchors(&self, k1: f64) -> (f64, f64) {
        let t_ramp = self.ramp_end();
        let at_ramp_end = self.v * (t_ramp + (-k1 * t_ramp).exp_m1() / k1);
        let at_hold_end =
            self.distance + (at_ramp_end - self.distance) * (-k1 * (self.hold_end() - t_ramp)).exp();
        (at_ramp_end, at_hold_end)
    }

    #[inline]
    pub(crate) fn unit_response_anchored(&self, k1: f64, t: f64, anchors: (f64, f64)) -> f64 {
        let t_ramp = self.ramp_end();
        if t < t_ramp {
            return self.v * (t + (-k1 * t).exp_m1() / k1);
        }
        let t_hold = self.hold_end();
        if t < t_hold {
            return self.distance + (anchors.0 - self.distance) * (-k1 * (t - t_ramp)).exp();
        }
        anchors.1 * (-k1 * (t - t_hold)).exp()
    }
}

impl IlluminantProgram for TriphasicSchedule {
    fn illuminant(&self, t: f64) -> Result<ChromaticityUv> {
        self.illuminant_at(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.ramp_end(), self.hold_end()]
    }

    fn illuminant_in_segment(&self, t: f64, segment: usize) -> Result<ChromaticityUv> {
        match segment {
            0 => self.trajectory.point(self.v * t.min(self.ramp_end())),
            1 => self.trajectory.point(self.distance),
            _ => Ok(ChromaticityUv::d65()),
        }
    }
}

/// Gap `|A(t) - a(t)|` along a linear ramp at speed `v` started at t = 0.
pub fn ramp_gap(v: f64, p: &AdaptationParams, t: f64) -> f64 {
    v * ramp_gap_per_speed(p, t)
}

/// `(1 - k2) t + (k2 / k1)(1 - e^(-k1 t))`, the ramp gap at unit speed. Every
/// term is non-negative, so nothing cancels.
pub fn ramp_gap_per_speed(p: &AdaptationParams, t: f64) -> f64 {
    let x = p.k1 * t;
    // Below this 1 - e^(-x) loses all of its digits to underflow; the series
    // is exact to double precision there.
    let lagged = if x < 1e-10 { t * (1.0 - 0.5 * x) } else { -(-x).exp_m1() / p.k1 };
    (1.0 - p.k2) * t + p.k2 * lagged
}
