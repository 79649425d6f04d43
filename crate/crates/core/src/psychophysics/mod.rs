//! Two-alternative forced-choice psychophysics: the psychometric function,
//! its calibration, likelihood-based estimation of the adaptation constants,
//! stimulus placement, simulated observers and signal-detection analysis.

mod fit;
mod likelihood;
mod records;
mod sdt;
mod stimuli;

use serde::{Deserialize, Serialize};

use crate::colorimetry::ChromaticityUv;

pub use fit::{
    fit_adaptation, fit_adaptation_brute_force, fit_adaptation_point, FitResult, ParamGrid,
    CI_DROP,
};
pub use likelihood::{log_likelihood, log_likelihood_sessions, Likelihood, SessionTrials, LOG_FLOOR};
pub use records::{
    group_records, read_records, write_records, CalibrationRecord, Record, ScheduleRecord, TrialRecord,
    SCHEMA_VERSION,
};
pub use sdt::{d_prime, sdt_analysis, DetectionRecord, SdtResult};
pub use stimuli::{
    place_stimuli, simulate_calibration, simulate_observer, ObserverConfig, Placement, PLACEMENT_SIGMA,
    STIMULUS_HALF_SEPARATION, STIMULUS_PERIOD,
};

/// Which of the two patches the observer judged less saturated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    /// The patch nearer to D65 along the trajectory.
    Lagging,
    /// The patch further along the trajectory.
    Further,
}

/// Slope `k` (per u'v' unit) and bias `x0` (u'v') of the logistic
/// psychometric function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsychometricParams {
    pub k: f64,
    pub x0: f64,
}

/// Probability of choosing the lagging patch when the stimulus midpoint
/// sits `offset` ahead of the adaptation state.
pub fn psychometric(offset: f64, p: &PsychometricParams) -> f64 {
    sigmoid(p.k * (offset - p.x0))
}

/// `(m - a) . dir`.
pub fn signed_offset(m: ChromaticityUv, a: ChromaticityUv, dir: ChromaticityUv) -> f64 {
    (m - a).dot(dir)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(z))` without overflow or cancellation.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Outcome of [`fit_psychometric`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    pub params: PsychometricParams,
    pub log_likelihood: f64,
    /// No finite maximum exists: the choices are (quasi-)separable by
    /// offset. The slope is then reported at [`SLOPE_BOUND`].
    pub separable: bool,
    pub converged: bool,
}

/// Largest slope magnitude reported by [`fit_psychometric`].
pub const SLOPE_BOUND: f64 = 1e5;

/// Maximum-likelihood logistic fit to calibration responses.
pub fn fit_psychometric(records: &[CalibrationRecord]) -> crate::Result<PsychometricFit> {
    let data: Vec<(f64, bool)> = records
        .iter()
        .map(|r| (r.m_offset, r.choice == Choice::Lagging))
        .collect();
    fit_logistic(&data)
}

fn logistic_ll(data: &[(f64, bool)], p: &PsychometricParams) -> f64 {
    data.iter()
        .map(|&(x, lag)| {
            let z = p.k * (x - p.x0);
            log_sigmoid(if lag { z } else { -z })
        })
        .sum()
}

fn separable_fit(data: &[(f64, bool)]) -> Option<PsychometricFit> {
    let lag = data.iter().filter(|d| d.1).map(|d| d.0);
    let fur = data.iter().filter(|d| !d.1).map(|d| d.0);
    let (lag_min, lag_max) = lag.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
    let (fur_min, fur_max) = fur.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
    let jnd = crate::colorimetry::JND;
    let params = if lag_min == f64::INFINITY {
        // Never chose lagging: the curve sits to the right of every point.
        PsychometricParams { k: SLOPE_BOUND, x0: fur_max + jnd }
    } else if fur_min == f64::INFINITY {
        PsychometricParams { k: SLOPE_BOUND, x0: lag_min - jnd }
    } else if fur_max <= lag_min {
        PsychometricParams { k: SLOPE_BOUND, x0: 0.5 * (fur_max + lag_min) }
    } else if lag_max <= fur_min {
        PsychometricParams { k: -SLOPE_BOUND, x0: 0.5 * (lag_max + fur_min) }
    } else {
        return None;
    };
    Some(PsychometricFit {
        params,
        log_likelihood: logistic_ll(data, &params),
        separable: true,
        converged: false,
    })
}

fn fit_logistic(data: &[(f64, bool)]) -> crate::Result<PsychometricFit> {
    if data.len() < 2 {
        return Err(crate::Error::InvalidParameter(
            "psychometric fit needs at least 2 records".into(),
        ));
    }
    if data.iter().any(|d| !d.0.is_finite()) {
        return Err(crate::Error::NonFinite("calibration offset".into()));
    }
    if let Some(fit) = separable_fit(data) {
        return Ok(fit);
    }
    // Logistic regression in b0 + b1 * x / JND with damped Newton steps.
    let scale = crate::colorimetry::JND;
    let to_params = |b: [f64; 2]| {
        let k = b[1] / scale;
        PsychometricParams { k, x0: if k != 0.0 { -b[0] / k } else { 0.0 } }
    };
    let ll = |b: [f64; 2]| -> f64 {
        data.iter()
            .map(|&(x, lag)| {
                let z = b[0] + b[1] * x / scale;
                log_sigmoid(if lag { z } else { -z })
            })
            .sum()
    };
    let mut b = [0.0, 0.0];
    let mut cur = ll(b);
    let mut converged = false;
    for _ in 0..200 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, lag) in data {
            let xs = x / scale;
            let p = sigmoid(b[0] + b[1] * xs);
            let r = if lag { 1.0 } else { 0.0 } - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * xs;
            h00 += w;
            h01 += w * xs;
            h11 += w * xs * xs;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            break;
        }
        let step = [(h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det];
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let nb = [b[0] + t * step[0], b[1] + t * step[1]];
            let nl = ll(nb);
            if nl >= cur {
                let gain = nl - cur;
                b = nb;
                cur = nl;
                accepted = true;
                if gain < 1e-12 && (step[0].abs() + step[1].abs()) * t < 1e-9 {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
        if (b[1] / scale).abs() > SLOPE_BOUND {
            break;
        }
    }
    let mut params = to_params(b);
    if params.k.abs() > SLOPE_BOUND {
        params.k = SLOPE_BOUND.copysign(params.k);
        converged = false;
    }
    Ok(PsychometricFit {
        params,
        log_likelihood: logistic_ll(data, &params),
        separable: false,
        converged,
    })
}
