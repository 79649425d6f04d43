//! Likelihood of measurement responses under the adaptation model.

use serde::{Deserialize, Serialize};

use super::{log_sigmoid, Choice, PsychometricParams, TrialRecord};
use crate::adaptation::{AdaptationParams, TriphasicSchedule};
use crate::colorimetry::ChromaticityUv;
use crate::{Error, Result};

/// `ln(1e-12)`: per-response log-probability floor.
pub const LOG_FLOOR: f64 = -27.631_021_115_928_547;

/// Responses collected under one illuminant schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrials {
    pub schedule: TriphasicSchedule,
    pub trials: Vec<TrialRecord>,
}

/// A log-likelihood and the number of responses whose probability hit the
/// floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    pub value: f64,
    pub clamped: usize,
}

/// A response reduced to the scalars the likelihood needs.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Obs {
    pub t: f64,
    /// Midpoint offset from D65 along the schedule direction.
    pub m: f64,
    pub lag: bool,
    pub schedule: usize,
}

pub(crate) struct Prepared {
    pub schedules: Vec<TriphasicSchedule>,
    pub obs: Vec<Obs>,
}

pub(crate) fn prepare(sessions: &[SessionTrials]) -> Result<Prepared> {
    let d65 = ChromaticityUv::d65();
    let mut schedules = Vec::with_capacity(sessions.len());
    let mut obs = Vec::new();
    for (si, s) in sessions.iter().enumerate() {
        s.schedule.validate()?;
        let dir = s.schedule.direction()?;
        for r in &s.trials {
            if !(r.t >= 0.0 && r.t <= s.schedule.end()) {
                return Err(Error::TimeOutOfRange {
                    t: r.t,
                    end: s.schedule.end(),
                });
            }
            if !r.midpoint.is_finite() {
                return Err(Error::NonFinite(format!("midpoint of trial {}", r.index)));
            }
            obs.push(Obs {
                t: r.t,
                m: (r.midpoint - d65).dot(dir),
                lag: r.choice == Choice::Lagging,
                schedule: si,
            });
        }
        schedules.push(s.schedule);
    }
    Ok(Prepared { schedules, obs })
}

/// Log-probability of one response with its floor applied.
#[inline]
pub(crate) fn term(m: f64, h: f64, lag: bool, k2: f64, p: &PsychometricParams) -> (f64, bool) {
    let z = p.k * (m - k2 * h - p.x0);
    let l = log_sigmoid(if lag { z } else { -z });
    if l < LOG_FLOOR {
        (LOG_FLOOR, true)
    } else {
        (l, false)
    }
}

impl Prepared {
    /// `h(t; k1)` for every response; the adaptation offset is `k2 * h`.
    pub fn unit_responses(&self, k1: f64, out: &mut Vec<f64>) {
        out.clear();
        let anchors: Vec<(f64, f64)> = self.schedules.iter().map(|s| s.unit_anchors(k1)).collect();
        out.extend(self.obs.iter().map(|o| {
            self.schedules[o.schedule].unit_response_anchored(k1, o.t, anchors[o.schedule])
        }));
    }

    pub fn eval(&self, hs: &[f64], k2: f64, p: &PsychometricParams) -> Likelihood {
        let mut value = 0.0;
        let mut clamped = 0;
        for (o, &h) in self.obs.iter().zip(hs) {
            let (l, c) = term(o.m, h, o.lag, k2, p);
            value += l;
            clamped += c as usize;
        }
        Likelihood { value, clamped }
    }
}

/// Log-likelihood of `trials` observed under `s`, with the adaptation state
/// from the closed form and offsets projected on the schedule direction.
pub fn log_likelihood(
    trials: &[TrialRecord],
    s: &TriphasicSchedule,
    pa: &AdaptationParams,
    pp: &PsychometricParams,
) -> Result<Likelihood> {
    log_likelihood_sessions(
        &[SessionTrials {
            schedule: *s,
            trials: trials.to_vec(),
        }],
        pa,
        pp,
    )
}

/// Log-likelihood pooled over several schedules.
pub fn log_likelihood_sessions(
    sessions: &[SessionTrials],
    pa: &AdaptationParams,
    pp: &PsychometricParams,
) -> Result<Likelihood> {
    let prep = prepare(sessions)?;
    let mut hs = Vec::new();
    prep.unit_responses(pa.k1, &mut hs);
    Ok(prep.eval(&hs, pa.k2, pp))
}
