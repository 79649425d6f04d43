//! Yes/no signal-detection analysis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// One detection response. `signal` says whether the artifact was present,
/// `response` whether the participant reported it. An optional confidence
/// rating (higher = more sure the signal was present) yields ROC points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(default)]
    pub condition: String,
    pub signal: bool,
    pub response: bool,
    #[serde(default)]
    pub rating: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdtResult {
    pub condition: String,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub correct_rejections: usize,
    /// Rates after the 1/(2N) correction of 0 and 1.
    pub hit_rate: f64,
    pub fa_rate: f64,
    pub d_prime: f64,
    /// `(false-alarm rate, hit rate)` pairs from the ratings, ordered from
    /// the strictest criterion, including (0, 0) and (1, 1).
    pub roc: Vec<(f64, f64)>,
}

fn z(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `z(hit) - z(fa)`.
pub fn d_prime(hit_rate: f64, fa_rate: f64) -> f64 {
    z(hit_rate) - z(fa_rate)
}

fn corrected(k: usize, n: usize) -> f64 {
    let n = n as f64;
    let r = k as f64 / n;
    if r == 0.0 {
        0.5 / n
    } else if r == 1.0 {
        1.0 - 0.5 / n
    } else {
        r
    }
}

fn analyse(condition: &str, recs: &[&DetectionRecord]) -> Option<SdtResult> {
    let hits = recs.iter().filter(|r| r.signal && r.response).count();
    let misses = recs.iter().filter(|r| r.signal && !r.response).count();
    let fas = recs.iter().filter(|r| !r.signal && r.response).count();
    let crs = recs.iter().filter(|r| !r.signal && !r.response).count();
    let (ns, nn) = (hits + misses, fas + crs);
    if ns == 0 || nn == 0 {
        return None;
    }
    let hit_rate = corrected(hits, ns);
    let fa_rate = corrected(fas, nn);
    let mut levels: Vec<u32> = recs.iter().filter_map(|r| r.rating).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut roc = vec![(0.0, 0.0)];
    if recs.iter().all(|r| r.rating.is_some()) {
        for &c in levels.iter().rev() {
            let h = recs.iter().filter(|r| r.signal && r.rating >= Some(c)).count();
            let f = recs.iter().filter(|r| !r.signal && r.rating >= Some(c)).count();
            roc.push((f as f64 / nn as f64, h as f64 / ns as f64));
        }
    } else {
        roc.push((fas as f64 / nn as f64, hits as f64 / ns as f64));
    }
    if roc.last() != Some(&(1.0, 1.0)) {
        roc.push((1.0, 1.0));
    }
    Some(SdtResult {
        condition: condition.to_string(),
        hits,
        misses,
        false_alarms: fas,
        correct_rejections: crs,
        hit_rate,
        fa_rate,
        d_prime: d_prime(hit_rate, fa_rate),
        roc,
    })
}

/// Per-condition analysis in order of first appearance. Conditions without
/// both signal and noise trials are skipped.
pub fn sdt_analysis(records: &[DetectionRecord]) -> Vec<SdtResult> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.condition.as_str()) {
            order.push(&r.condition);
        }
    }
    order
        .into_iter()
        .filter_map(|c| {
            let recs: Vec<&DetectionRecord> = records.iter().filter(|r| r.condition == c).collect();
            analyse(c, &recs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(signal: bool, response: bool, rating: Option<u32>) -> DetectionRecord {
        DetectionRecord {
            condition: "c".into(),
            signal,
            response,
            rating,
        }
    }

    #[test]
    fn equal_rates_give_zero() {
        assert_eq!(d_prime(0.3, 0.3), 0.0);
        assert_eq!(d_prime(0.701, 0.125), -d_prime(0.125, 0.701));
    }

    #[test]
    fn extreme_rates_are_corrected() {
        let recs: Vec<_> = (0..10)
            .map(|_| rec(true, true, None))
            .chain((0..10).map(|_| rec(false, false, None)))
            .collect();
        let r = &sdt_analysis(&recs)[0];
        assert_eq!(r.hit_rate, 0.95);
        assert_eq!(r.fa_rate, 0.05);
        assert!(r.d_prime.is_finite() && r.d_prime > 3.0);
    }

    #[test]
    fn roc_from_ratings() {
        let recs = vec![
            rec(true, true, Some(3)),
            rec(true, true, Some(2)),
            rec(true, false, Some(1)),
            rec(false, true, Some(2)),
            rec(false, false, Some(1)),
            rec(false, false, Some(1)),
        ];
        let r = &sdt_analysis(&recs)[0];
        assert_eq!(r.roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.roc.last(), Some(&(1.0, 1.0)));
        assert_eq!(r.roc[1], (0.0, 1.0 / 3.0));
        assert_eq!(r.roc[2], (1.0 / 3.0, 2.0 / 3.0));
        for w in r.roc.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn conditions_need_both_trial_types() {
        let recs = vec![rec(true, true, None)];
        assert!(sdt_analysis(&recs).is_empty());
    }
}
