//! Grid maximum-likelihood estimation of the adaptation constants with
//! profile-likelihood confidence intervals.
//!
//! For a fixed `k1` every response's log-probability is a log-sigmoid of an
//! affine function of `k2`, so each likelihood row is concave in `k2` unless
//! the probability floor is active somewhere. Each term is also monotone in
//! `k2`, so the floor is active inside a row only if it is active at one of
//! the row's ends. Rows without floored terms are solved by a safeguarded
//! Newton iteration on the row derivative and then checked on the grid
//! points around the continuous maximizer; the other rows are scanned
//! exhaustively. The result is the same grid point an exhaustive search
//! finds, which [`fit_adaptation_brute_force`] exists to confirm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::{prepare, Prepared};
use super::{sigmoid, PsychometricParams, SessionTrials};
use crate::adaptation::AdaptationParams;
use crate::{Error, Result};

/// Half the 95% chi-square quantile with one degree of freedom.
pub const CI_DROP: f64 = 1.92;

/// Rectangular search grid over `(k1, k2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub k1_min: f64,
    pub k1_max: f64,
    pub k1_step: f64,
    pub k2_min: f64,
    pub k2_max: f64,
    pub k2_step: f64,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            k1_min: 0.0004,
            k1_max: 0.5,
            k1_step: 0.0004,
            k2_min: 0.0,
            k2_max: 1.0,
            k2_step: 0.0006,
        }
    }
}

fn axis_len(min: f64, max: f64, step: f64) -> usize {
    ((max - min) / step + 1e-9).floor() as usize + 1
}

impl ParamGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k1_min > 0.0
            && self.k1_max >= self.k1_min
            && self.k1_step > 0.0
            && self.k2_min >= 0.0
            && self.k2_max <= 1.0
            && self.k2_max >= self.k2_min
            && self.k2_step > 0.0
            && [self.k1_max, self.k2_max, self.k1_step, self.k2_step]
                .iter()
                .all(|x| x.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("bad parameter grid {self:?}")));
        }
        Ok(())
    }

    pub fn k1_len(&self) -> usize {
        axis_len(self.k1_min, self.k1_max, self.k1_step)
    }

    pub fn k2_len(&self) -> usize {
        axis_len(self.k2_min, self.k2_max, self.k2_step)
    }

    pub fn k1(&self, i: usize) -> f64 {
        self.k1_min + i as f64 * self.k1_step
    }

    pub fn k2(&self, j: usize) -> f64 {
        self.k2_min + j as f64 * self.k2_step
    }
}

/// Grid maximum-likelihood estimate with 95% profile-likelihood intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: AdaptationParams,
    pub log_likelihood: f64,
    pub ci_k1: [f64; 2],
    pub ci_k2: [f64; 2],
    /// An interval reaches the edge of the grid.
    pub ci_k1_truncated: bool,
    pub ci_k2_truncated: bool,
    /// Both intervals span the whole grid: the data do not constrain the
    /// constants.
    pub flat: bool,
    /// Responses on the probability floor at the estimate.
    pub clamped: usize,
    pub n_trials: usize,
    pub grid: ParamGrid,
}

enum Shape {
    /// No floored term anywhere on the row.
    Concave,
    /// Every grid value of the row.
    Full(Vec<f64>),
}

struct Row {
    max: f64,
    jmax: usize,
    shape: Shape,
}

struct Search<'a> {
    prep: &'a Prepared,
    pp: PsychometricParams,
    grid: ParamGrid,
    n2: usize,
}

impl Search<'_> {
    fn ll(&self, hs: &[f64], j: usize) -> (f64, usize) {
        let l = self.prep.eval(hs, self.grid.k2(j), &self.pp);
        (l.value, l.clamped)
    }

    /// First and second derivative of the unfloored row likelihood.
    fn derivatives(&self, hs: &[f64], k2: f64) -> (f64, f64) {
        let p = &self.pp;
        let (mut d1, mut d2) = (0.0, 0.0);
        for (o, &h) in self.prep.obs.iter().zip(hs) {
            let s = if o.lag { 1.0 } else { -1.0 };
            let z = s * p.k * (o.m - k2 * h - p.x0);
            let q = sigmoid(-z);
            d1 += q * (-s * p.k * h);
            d2 -= q * (1.0 - q) * p.k * p.k * h * h;
        }
        (d1, d2)
    }

    /// Whether any response hits the probability floor at `k2`.
    fn any_floored(&self, hs: &[f64], k2: f64) -> bool {
        let p = &self.pp;
        self.prep.obs.iter().zip(hs).any(|(o, &h)| {
            let z = p.k * (o.m - k2 * h - p.x0);
            let zl = if o.lag { z } else { -z };
            // log_sigmoid(zl) >= zl, so only strongly negative arguments
            // can reach the floor.
            zl < -20.0 && super::likelihood::term(o.m, h, o.lag, k2, p).1
        })
    }

    /// Continuous maximizer of a concave row on `[k2_min, k2_max]`, found by
    /// Newton steps kept inside a shrinking bracket.
    fn row_argmax(&self, hs: &[f64], start: f64) -> f64 {
        let lo0 = self.grid.k2(0);
        let hi0 = self.grid.k2(self.n2 - 1);
        let tol = self.grid.k2_step * 1e-3;
        let (mut lo, mut hi) = (lo0, hi0);
        let (mut lo_seen, mut hi_seen) = (false, false);
        let mut x = start.clamp(lo0, hi0);
        for _ in 0..200 {
            let (d1, d2) = self.derivatives(hs, x);
            if d1 == 0.0 && d2 == 0.0 {
                // No response depends on k2: the row is constant and the
                // tie goes to the smallest k2.
                return lo0;
            }
            if x == lo0 {
                lo_seen = true;
                if d1 <= 0.0 {
                    return lo0;
                }
            }
            if x == hi0 {
                hi_seen = true;
                if d1 >= 0.0 {
                    return hi0;
                }
            }
            if d1 > 0.0 {
                lo = x;
            } else if d1 < 0.0 {
                hi = x;
            } else {
                return x;
            }
            if d2 < 0.0 {
                let step = -d1 / d2;
                if step.abs() < tol {
                    return (x + step).clamp(lo, hi);
                }
                let nx = x + step;
                if nx > lo && nx < hi {
                    x = nx;
                    continue;
                }
                // Newton left the bracket; test the grid edge once before
                // falling back to bisection.
                if nx <= lo && lo == lo0 && !lo_seen {
                    x = lo0;
                    continue;
                }
                if nx >= hi && hi == hi0 && !hi_seen {
                    x = hi0;
                    continue;
                }
            } else if lo == lo0 && !lo_seen {
                x = lo0;
                continue;
            } else if hi == hi0 && !hi_seen {
                x = hi0;
                continue;
            }
            if hi - lo < tol {
                break;
            }
            x = 0.5 * (lo + hi);
        }
        0.5 * (lo + hi)
    }

    fn row(&self, hs: &[f64], start: f64) -> (Row, f64) {
        let last = self.n2 - 1;
        if !self.any_floored(hs, self.grid.k2(0)) && !self.any_floored(hs, self.grid.k2(last)) {
            let c = self.row_argmax(hs, start);
            let jc = (c - self.grid.k2_min) / self.grid.k2_step;
            let f = jc.floor();
            let frac = jc - f;
            let f = f as isize;
            let a = if frac < 0.01 { f - 1 } else { f };
            let b = if frac > 0.99 { f + 2 } else { f + 1 };
            let (mut max, mut jmax) = (f64::NEG_INFINITY, 0);
            for j in a.max(0)..=b.min(last as isize) {
                let v = self.ll(hs, j as usize).0;
                if v > max {
                    max = v;
                    jmax = j as usize;
                }
            }
            (Row { max, jmax, shape: Shape::Concave }, c)
        } else {
            let vals: Vec<f64> = (0..self.n2).map(|j| self.ll(hs, j).0).collect();
            let (mut max, mut jmax) = (f64::NEG_INFINITY, 0);
            for (j, &v) in vals.iter().enumerate() {
                if v > max {
                    max = v;
                    jmax = j;
                }
            }
            (Row { max, jmax, shape: Shape::Full(vals) }, start)
        }
    }

    /// Maximal runs of grid indices with likelihood at least `thr`.
    fn superlevel(&self, hs: &[f64], row: &Row, thr: f64) -> Vec<(usize, usize)> {
        match &row.shape {
            Shape::Full(vals) => {
                let mut runs = Vec::new();
                let mut start = None;
                for (j, &v) in vals.iter().enumerate() {
                    match (v >= thr, start) {
                        (true, None) => start = Some(j),
                        (false, Some(s)) => {
                            runs.push((s, j - 1));
                            start = None;
                        }
                        _ => {}
                    }
                }
                if let Some(s) = start {
                    runs.push((s, vals.len() - 1));
                }
                runs
            }
            Shape::Concave => {
                let above = |j: usize| self.ll(hs, j).0 >= thr;
                // Smallest j in [0, jmax] above threshold.
                let (mut a, mut b) = (0usize, row.jmax);
                while a < b {
                    let mid = (a + b) / 2;
                    if above(mid) {
                        b = mid;
                    } else {
                        a = mid + 1;
                    }
                }
                let lo = a;
                // Largest j in [jmax, last] above threshold.
                let (mut a, mut b) = (row.jmax, self.n2 - 1);
                while a < b {
                    let mid = (a + b).div_ceil(2);
                    if above(mid) {
                        a = mid;
                    } else {
                        b = mid - 1;
                    }
                }
                vec![(lo, a)]
            }
        }
    }
}

fn component_containing(mut runs: Vec<(usize, usize)>, at: usize) -> (usize, usize) {
    runs.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs {
        match merged.last_mut() {
            Some(last) if s <= last.1 + 1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
        .into_iter()
        .find(|&(s, e)| s <= at && at <= e)
        .unwrap_or((at, at))
}

fn setup<'a>(prep: &'a Prepared, pp: &PsychometricParams, grid: &ParamGrid) -> Result<Search<'a>> {
    grid.validate()?;
    if !pp.k.is_finite() || !pp.x0.is_finite() {
        return Err(Error::NonFinite("psychometric parameters".into()));
    }
    if prep.obs.is_empty() {
        return Err(Error::InvalidParameter("no measurement trials to fit".into()));
    }
    Ok(Search {
        prep,
        pp: *pp,
        grid: *grid,
        n2: grid.k2_len(),
    })
}

/// Row maxima. Rows are processed in chunks so that each row's solver can
/// start from its neighbour's maximizer; the start point only affects speed.
fn rows(search: &Search, start: f64) -> Vec<Row> {
    let idx: Vec<usize> = (0..search.grid.k1_len()).collect();
    idx.par_chunks(64)
        .map(|chunk| {
            let mut hs = Vec::new();
            let mut warm = start;
            chunk
                .iter()
                .map(|&i| {
                    search.prep.unit_responses(search.grid.k1(i), &mut hs);
                    let (row, c) = search.row(&hs, warm);
                    warm = c;
                    row
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn best(rows: &[Row]) -> (usize, usize, f64) {
    let mut b = (0, rows[0].jmax, rows[0].max);
    for (i, r) in rows.iter().enumerate().skip(1) {
        if r.max > b.2 {
            b = (i, r.jmax, r.max);
        }
    }
    b
}

/// Maximum-likelihood `(k1, k2)` on `grid` and 95% profile intervals.
///
/// Ties between grid points go to the smallest `k1`, then the smallest `k2`.
pub fn fit_adaptation(
    sessions: &[SessionTrials],
    pp: &PsychometricParams,
    grid: &ParamGrid,
) -> Result<FitResult> {
    let prep = prepare(sessions)?;
    let search = setup(&prep, pp, grid)?;
    let rows = rows(&search, 0.5 * (grid.k2_min + grid.k2_max));
    let (ib, jb, llb) = best(&rows);
    let thr = llb - CI_DROP;
    let n1 = rows.len();
    let n2 = search.n2;

    let (i_lo, i_hi, j_lo, j_hi) = {
        let mut i_lo = ib;
        while i_lo > 0 && rows[i_lo - 1].max >= thr {
            i_lo -= 1;
        }
        let mut i_hi = ib;
        while i_hi + 1 < n1 && rows[i_hi + 1].max >= thr {
            i_hi += 1;
        }
        let runs: Vec<(usize, usize)> = rows
            .par_iter()
            .enumerate()
            .filter(|(_, r)| r.max >= thr)
            .map_init(Vec::new, |hs, (i, r)| {
                prep.unit_responses(grid.k1(i), hs);
                search.superlevel(hs, r, thr)
            })
            .flatten()
            .collect();
        let (j_lo, j_hi) = component_containing(runs, jb);
        (i_lo, i_hi, j_lo, j_hi)
    };
    let flat = i_lo == 0 && i_hi == n1 - 1 && j_lo == 0 && j_hi == n2 - 1;

    let mut hs = Vec::new();
    prep.unit_responses(grid.k1(ib), &mut hs);
    let clamped = search.ll(&hs, jb).1;
    Ok(FitResult {
        params: AdaptationParams {
            k1: grid.k1(ib),
            k2: grid.k2(jb),
        },
        log_likelihood: llb,
        ci_k1: [grid.k1(i_lo), grid.k1(i_hi)],
        ci_k2: [grid.k2(j_lo), grid.k2(j_hi)],
        ci_k1_truncated: i_lo == 0 || i_hi == n1 - 1,
        ci_k2_truncated: j_lo == 0 || j_hi == n2 - 1,
        flat,
        clamped,
        n_trials: prep.obs.len(),
        grid: *grid,
    })
}

/// Grid estimate without intervals, for running predictions. `warm` seeds
/// the per-row solver and does not change the result.
pub fn fit_adaptation_point(
    sessions: &[SessionTrials],
    pp: &PsychometricParams,
    grid: &ParamGrid,
    warm: Option<AdaptationParams>,
) -> Result<(AdaptationParams, f64)> {
    let prep = prepare(sessions)?;
    let search = setup(&prep, pp, grid)?;
    let start = warm.map_or(0.5 * (grid.k2_min + grid.k2_max), |w| w.k2);
    let rows = rows(&search, start);
    let (ib, jb, llb) = best(&rows);
    Ok((
        AdaptationParams {
            k1: grid.k1(ib),
            k2: grid.k2(jb),
        },
        llb,
    ))
}

/// Exhaustive reference implementation of [`fit_adaptation`]: evaluates
/// every grid point. Intended for small grids in tests.
pub fn fit_adaptation_brute_force(
    sessions: &[SessionTrials],
    pp: &PsychometricParams,
    grid: &ParamGrid,
) -> Result<FitResult> {
    let prep = prepare(sessions)?;
    let search = setup(&prep, pp, grid)?;
    let (n1, n2) = (grid.k1_len(), search.n2);
    let mut table = vec![0.0; n1 * n2];
    let mut hs = Vec::new();
    for i in 0..n1 {
        prep.unit_responses(grid.k1(i), &mut hs);
        for j in 0..n2 {
            table[i * n2 + j] = search.ll(&hs, j).0;
        }
    }
    let (mut ib, mut jb, mut llb) = (0, 0, f64::NEG_INFINITY);
    for i in 0..n1 {
        for j in 0..n2 {
            if table[i * n2 + j] > llb {
                (ib, jb, llb) = (i, j, table[i * n2 + j]);
            }
        }
    }
    let thr = llb - CI_DROP;
    let prof1: Vec<f64> = (0..n1)
        .map(|i| (0..n2).map(|j| table[i * n2 + j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let prof2: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| table[i * n2 + j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let run = |prof: &[f64], at: usize| {
        let (mut lo, mut hi) = (at, at);
        while lo > 0 && prof[lo - 1] >= thr {
            lo -= 1;
        }
        while hi + 1 < prof.len() && prof[hi + 1] >= thr {
            hi += 1;
        }
        (lo, hi)
    };
    let (i_lo, i_hi) = run(&prof1, ib);
    let (j_lo, j_hi) = run(&prof2, jb);
    let flat = i_lo == 0 && i_hi == n1 - 1 && j_lo == 0 && j_hi == n2 - 1;
    prep.unit_responses(grid.k1(ib), &mut hs);
    Ok(FitResult {
        params: AdaptationParams {
            k1: grid.k1(ib),
            k2: grid.k2(jb),
        },
        log_likelihood: llb,
        ci_k1: [grid.k1(i_lo), grid.k1(i_hi)],
        ci_k2: [grid.k2(j_lo), grid.k2(j_hi)],
        ci_k1_truncated: i_lo == 0 || i_hi == n1 - 1,
        ci_k2_truncated: j_lo == 0 || j_hi == n2 - 1,
        flat,
        clamped: search.ll(&hs, jb).1,
        n_trials: prep.obs.len(),
        grid: *grid,
    })
}
