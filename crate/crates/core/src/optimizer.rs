//! Power-optimal traversal of candidate trajectories under a bound on the
//! gap between the illuminant and the viewer's adaptation state.
//!
//! Along a linear ramp at speed `v` the gap grows monotonically in time and
//! in `v`, so the bound is active at `t_max` and the optimal speed solves
//! `gap(t_max; v) = delta_t` directly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{ramp_gap, ramp_gap_per_speed, AdaptationParams, Trajectory};
use crate::colorimetry::{in_srgb_gamut, ChromaticityUv, JND};
use crate::pipeline::DeploymentSchedule;
use crate::power::PowerModel;
use crate::{Error, Result};

/// Largest ramp speed whose gap at `t_max` stays within `delta_t`.
pub fn optimal_velocity(p: &AdaptationParams, delta_t: f64, t_max: f64) -> Result<f64> {
    p.validate()?;
    if !(delta_t >= 0.0) || !delta_t.is_finite() {
        return Err(Error::InvalidParameter(format!("delta_t must be >= 0, got {delta_t}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max must be > 0, got {t_max}")));
    }
    if delta_t == 0.0 {
        return Ok(0.0);
    }
    let per_speed = ramp_gap_per_speed(p, t_max);
    if !(per_speed > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_max = {t_max} is too short to move the illuminant"
        )));
    }
    Ok(delta_t / per_speed)
}

/// Gap between illuminant and adaptation `t` seconds into a ramp at `v`.
pub fn gap_at(v: f64, p: &AdaptationParams, t: f64) -> f64 {
    ramp_gap(v, p, t)
}

/// A trajectory with the adaptation constants measured on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub trajectory: Trajectory,
    pub params: AdaptationParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Seconds allowed to reach the terminal illuminant.
    pub t_max: f64,
    /// Largest permitted gap, in u'v'.
    pub delta_t: f64,
    pub candidates: Vec<Candidate>,
}

impl Default for OptimizationConfig {
    /// Two minutes, five JND, the four measured trajectories.
    fn default() -> Self {
        Self {
            t_max: 120.0,
            delta_t: 5.0 * JND,
            candidates: Trajectory::study_set()
                .into_iter()
                .map(|(trajectory, params)| Candidate { trajectory, params })
                .collect(),
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if !(self.delta_t > 0.0) || !self.delta_t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta_t must be > 0, got {}",
                self.delta_t
            )));
        }
        for c in &self.candidates {
            c.params.validate()?;
        }
        Ok(())
    }
}

/// Why a terminal illuminant was pulled back toward D65.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// The trajectory is not defined that far (daylight locus).
    Trajectory,
    /// The illuminant's white is outside the display gamut.
    Gamut,
}

/// Outcome of optimizing one trajectory for one gap allowance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub delta_t: f64,
    pub delta_t_jnd: f64,
    /// Ramp speed. Lower than the unconstrained optimum when truncated, so
    /// the terminal is still reached at `t_max`.
    pub v: f64,
    pub terminal_distance: f64,
    pub terminal: ChromaticityUv,
    pub relative_power: f64,
    pub saving: f64,
    pub truncated: Option<Truncation>,
}

/// Largest distance `<= d` along `traj` whose white the display can show.
fn gamut_limit(traj: &Trajectory, d: f64) -> Result<f64> {
    if in_srgb_gamut(traj.point(d)?) {
        return Ok(d);
    }
    let (mut lo, mut hi) = (0.0, d);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if in_srgb_gamut(traj.point(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Fastest ramp along `c` keeping the gap within `delta_t`, shortened if
/// the trajectory or the display gamut ends first. Returns the speed, the
/// distance reached at `t_max` and why it was shortened.
pub fn feasible_velocity(
    c: &Candidate,
    delta_t: f64,
    t_max: f64,
) -> Result<(f64, f64, Option<Truncation>)> {
    let v_opt = optimal_velocity(&c.params, delta_t, t_max)?;
    let mut d = v_opt * t_max;
    let mut truncated = None;
    if d > c.trajectory.max_distance() {
        d = c.trajectory.max_distance();
        truncated = Some(Truncation::Trajectory);
    }
    let g = gamut_limit(&c.trajectory, d)?;
    if g < d {
        d = g;
        truncated = Some(Truncation::Gamut);
    }
    let v = if truncated.is_some() { d / t_max } else { v_opt };
    Ok((v, d, truncated))
}

/// Optimize a single (trajectory, allowance, time limit) cell.
pub fn evaluate(
    c: &Candidate,
    delta_t: f64,
    t_max: f64,
    model: &PowerModel,
) -> Result<ParetoPoint> {
    let (v, d, truncated) = feasible_velocity(c, delta_t, t_max)?;
    let terminal = c.trajectory.point(d)?;
    let relative_power = model.relative(terminal)?;
    Ok(ParetoPoint {
        delta_t,
        delta_t_jnd: delta_t / JND,
        v,
        terminal_distance: d,
        terminal,
        relative_power,
        saving: 1.0 - relative_power,
        truncated,
    })
}

/// Saving versus allowance for one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoCurve {
    pub candidate: Candidate,
    pub points: Vec<ParetoPoint>,
}

/// Optimize every candidate at every allowance in `delta_ts`.
pub fn pareto_sweep(
    cfg: &OptimizationConfig,
    delta_ts: &[f64],
    model: &PowerModel,
) -> Result<Vec<ParetoCurve>> {
    cfg.validate()?;
    cfg.candidates
        .iter()
        .map(|c| {
            let points = delta_ts
                .par_iter()
                .map(|&dt| evaluate(c, dt, cfg.t_max, model))
                .collect::<Result<Vec<_>>>()?;
            Ok(ParetoCurve {
                candidate: *c,
                points,
            })
        })
        .collect()
}

pub const PARETO_HEADER: &str = "trajectory,delta_t,delta_t_jnd,v,terminal_distance,terminal_u,terminal_v,relative_power,saving,truncated";

fn truncation_label(t: Option<Truncation>) -> &'static str {
    match t {
        None => "",
        Some(Truncation::Trajectory) => "trajectory",
        Some(Truncation::Gamut) => "gamut",
    }
}

pub fn write_pareto_csv(path: &Path, curves: &[ParetoCurve]) -> Result<()> {
    let mut s = String::from(PARETO_HEADER);
    s.push('\n');
    for c in curves {
        for p in &c.points {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                c.candidate.trajectory.label(),
                p.delta_t,
                p.delta_t_jnd,
                p.v,
                p.terminal_distance,
                p.terminal.u,
                p.terminal.v,
                p.relative_power,
                p.saving,
                truncation_label(p.truncated)
            )
            .unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Savings over a grid of allowances (rows) and time limits (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub candidate: Candidate,
    pub delta_t: Vec<f64>,
    pub t_max: Vec<f64>,
    /// `cells[i][j]` is the optimum at `delta_t[i]`, `t_max[j]`.
    pub cells: Vec<Vec<ParetoPoint>>,
}

impl Heatmap {
    pub fn saving(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].saving
    }
}

pub fn sensitivity_heatmap(
    c: &Candidate,
    delta_ts: &[f64],
    t_maxs: &[f64],
    model: &PowerModel,
) -> Result<Heatmap> {
    c.params.validate()?;
    let cells = delta_ts
        .par_iter()
        .map(|&dt| {
            t_maxs
                .iter()
                .map(|&tm| evaluate(c, dt, tm, model))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Heatmap {
        candidate: *c,
        delta_t: delta_ts.to_vec(),
        t_max: t_maxs.to_vec(),
        cells,
    })
}

pub const HEATMAP_HEADER: &str =
    "delta_t,delta_t_jnd,t_max,v,terminal_distance,relative_power,saving,truncated";

pub fn write_heatmap_csv(path: &Path, h: &Heatmap) -> Result<()> {
    let mut s = String::from(HEATMAP_HEADER);
    s.push('\n');
    for (row, &dt) in h.cells.iter().zip(&h.delta_t) {
        for (p, &tm) in row.iter().zip(&h.t_max) {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                dt,
                dt / JND,
                tm,
                p.v,
                p.terminal_distance,
                p.relative_power,
                p.saving,
                truncation_label(p.truncated)
            )
            .unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// The winning trajectory for a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub candidate: Candidate,
    pub point: ParetoPoint,
    /// Every candidate's optimum in configuration order.
    pub all: Vec<ParetoPoint>,
}

impl Selection {
    pub fn schedule(&self, t_max: f64) -> DeploymentSchedule {
        DeploymentSchedule {
            trajectory: self.candidate.trajectory,
            v: self.point.v,
            t_max,
        }
    }
}

/// Candidate with the lowest terminal power; ties go to the earlier one.
pub fn select_trajectory(cfg: &OptimizationConfig, model: &PowerModel) -> Result<Selection> {
    cfg.validate()?;
    if cfg.candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate trajectories".into()));
    }
    let all = cfg
        .candidates
        .par_iter()
        .map(|c| evaluate(c, cfg.delta_t, cfg.t_max, model))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, p) in all.iter().enumerate() {
        if p.relative_power < all[best].relative_power {
            best = i;
        }
    }
    Ok(Selection {
        candidate: cfg.candidates[best],
        point: all[best],
        all,
    })
}
