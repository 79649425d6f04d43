//! Stimulus placement and a simulated observer for the measurement protocol.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{psychometric, signed_offset, CalibrationRecord, Choice, PsychometricParams, TrialRecord, SCHEMA_VERSION};
use crate::adaptation::{adaptation_at, AdaptationParams, TriphasicSchedule};
use crate::colorimetry::{in_srgb_gamut, ChromaticityUv, JND};
use crate::Result;

/// Onset-to-onset interval: 0.75 s presentation plus a 3 s response window.
pub const STIMULUS_PERIOD: f64 = 3.75;
/// The two patches sit this far on either side of the midpoint.
pub const STIMULUS_HALF_SEPARATION: f64 = 3.0 * JND;
/// Standard deviation of midpoint jitter around the placement center.
pub const PLACEMENT_SIGMA: f64 = 1.5 * JND;

const MAX_RESAMPLES: usize = 100;

/// A pair of stimuli for one 2AFC presentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub further: ChromaticityUv,
    pub lagging: ChromaticityUv,
    pub midpoint: ChromaticityUv,
    /// No in-gamut draw was found and the midpoint was pulled toward D65.
    pub clamped: bool,
}

fn pair(m: ChromaticityUv, dir: ChromaticityUv) -> (ChromaticityUv, ChromaticityUv) {
    (
        m + dir * STIMULUS_HALF_SEPARATION,
        m - dir * STIMULUS_HALF_SEPARATION,
    )
}

fn displayable(m: ChromaticityUv, dir: ChromaticityUv) -> bool {
    let (f, l) = pair(m, dir);
    in_srgb_gamut(f) && in_srgb_gamut(l)
}

/// Midpoint drawn from `Normal(center, sigma)` along `dir`, with the two
/// patches 6 JND apart around it.
pub fn place_stimuli<R: Rng + ?Sized>(
    center: ChromaticityUv,
    dir: ChromaticityUv,
    sigma: f64,
    rng: &mut R,
) -> Placement {
    let mut m = center;
    let mut ok = false;
    for _ in 0..MAX_RESAMPLES {
        let z: f64 = rng.sample(StandardNormal);
        m = center + dir * (sigma * z);
        if displayable(m, dir) {
            ok = true;
            break;
        }
    }
    let clamped = !ok;
    if clamped {
        let d65 = ChromaticityUv::d65();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if displayable(d65 + (m - d65) * mid, dir) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        m = d65 + (m - d65) * lo;
    }
    let (further, lagging) = pair(m, dir);
    Placement {
        further,
        lagging,
        midpoint: m,
        clamped,
    }
}

/// Protocol settings for [`simulate_observer`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    /// Constants used to predict the adaptation state for placement.
    pub prior: AdaptationParams,
    pub sigma: f64,
    pub period: f64,
    /// Step of the reference integrator producing the true state.
    pub dt: f64,
    pub block: u32,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            prior: AdaptationParams { k1: 0.1, k2: 0.7 },
            sigma: PLACEMENT_SIGMA,
            period: STIMULUS_PERIOD,
            dt: 0.01,
            block: 0,
        }
    }
}

/// Run the measurement timeline for a simulated observer whose adaptation
/// follows `truth` and who answers according to the psychometric function.
pub fn simulate_observer<R: Rng + ?Sized>(
    truth: &AdaptationParams,
    pp: &PsychometricParams,
    s: &TriphasicSchedule,
    cfg: &ObserverConfig,
    rng: &mut R,
) -> Result<Vec<TrialRecord>> {
    s.validate()?;
    truth.validate()?;
    let dir = s.direction()?;
    let n = (s.end() / cfg.period).floor() as usize + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * cfg.period).collect();
    let states = adaptation_at(s, truth, &times, cfg.dt)?;
    let mut out = Vec::with_capacity(n);
    for (k, (&t, &a)) in times.iter().zip(&states).enumerate() {
        let center = s.adaptation_closed_form(&cfg.prior, t)?;
        let p = place_stimuli(center, dir, cfg.sigma, rng);
        let g = psychometric(signed_offset(p.midpoint, a, dir), pp);
        let choice = if rng.random::<f64>() < g {
            Choice::Lagging
        } else {
            Choice::Further
        };
        let latency = 0.3 + 0.9 * rng.random::<f64>();
        out.push(TrialRecord {
            schema: SCHEMA_VERSION,
            block: cfg.block,
            index: k as u32,
            t,
            further: p.further,
            lagging: p.lagging,
            midpoint: p.midpoint,
            choice,
            latency: Some(latency),
            late: false,
            clamped: p.clamped,
        });
    }
    Ok(out)
}

/// Calibration responses with the state held at D65 and midpoints drawn
/// from `Normal(0, sigma)`.
pub fn simulate_calibration<R: Rng + ?Sized>(
    pp: &PsychometricParams,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<CalibrationRecord> {
    (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            let x = sigma * z;
            let choice = if rng.random::<f64>() < psychometric(x, pp) {
                Choice::Lagging
            } else {
                Choice::Further
            };
            CalibrationRecord {
                schema: SCHEMA_VERSION,
                index: i as u32,
                t: i as f64 * STIMULUS_PERIOD,
                m_offset: x,
                choice,
                latency: Some(0.3 + 0.9 * rng.random::<f64>()),
                late: false,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::Trajectory;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn zero_sigma_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ChromaticityUv::d65() + ChromaticityUv::new(0.003, 0.004);
        let dir = ChromaticityUv::direction(1.47);
        let p = place_stimuli(a, dir, 0.0, &mut rng);
        assert_eq!(p.midpoint, a);
        assert!(!p.clamped);
    }

    #[test]
    fn patches_are_six_jnd_apart_and_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dir = ChromaticityUv::direction(2.256);
        for _ in 0..1000 {
            let p = place_stimuli(ChromaticityUv::d65(), dir, PLACEMENT_SIGMA, &mut rng);
            assert!((p.further.distance(p.lagging) - 0.024).abs() < 1e-9);
            let mid = (p.further + p.lagging) * 0.5;
            assert!(mid.distance(p.midpoint) < 1e-12);
            let d = p.further - p.lagging;
            assert!((d.u * dir.v - d.v * dir.u).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoints_are_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let center = ChromaticityUv::d65();
        let dir = ChromaticityUv::direction(1.863);
        let mut xs: Vec<f64> = (0..10_000)
            .map(|_| signed_offset(place_stimuli(center, dir, PLACEMENT_SIGMA, &mut rng).midpoint, center, dir))
            .collect();
        xs.sort_by(f64::total_cmp);
        let normal = Normal::new(0.0, PLACEMENT_SIGMA).unwrap();
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.36 / n.sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn far_out_placement_is_pulled_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dir = ChromaticityUv::direction(-1.6);
        let center = ChromaticityUv::d65() + dir * 0.4;
        let p = place_stimuli(center, dir, 1e-4, &mut rng);
        assert!(p.clamped);
        assert!(in_srgb_gamut(p.further) && in_srgb_gamut(p.lagging));
    }

    #[test]
    fn timeline_and_extremes() {
        let s = TriphasicSchedule::study(Trajectory::Linear { phi: 1.47 }, 0.0003);
        let truth = AdaptationParams { k1: 0.101, k2: 0.685 };
        let cfg = ObserverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let steep = PsychometricParams { k: 1e12, x0: 0.0 };
        let recs = simulate_observer(&truth, &steep, &s, &cfg, &mut rng).unwrap();
        assert_eq!(recs.len(), (s.end() / 3.75).floor() as usize + 1);
        assert_eq!(recs[1].t, 3.75);
        let dir = s.direction().unwrap();
        let states = adaptation_at(&s, &truth, &recs.iter().map(|r| r.t).collect::<Vec<_>>(), 0.01).unwrap();
        for (r, a) in recs.iter().zip(states) {
            let x = signed_offset(r.midpoint, a, dir);
            if x.abs() > 1e-9 {
                assert_eq!(r.choice == Choice::Lagging, x > 0.0);
            }
        }
        let coin = PsychometricParams { k: 0.0, x0: 0.0 };
        let mut lag = 0usize;
        let mut total = 0usize;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let recs = simulate_observer(&truth, &coin, &s, &cfg, &mut rng).unwrap();
            lag += recs.iter().filter(|r| r.choice == Choice::Lagging).count();
            total += recs.len();
        }
        let frac = lag as f64 / total as f64;
        let se = (0.25 / total as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "{frac}");
    }
}
