//! Fixed-step RK4 integration of the adaptation equation.

use serde::{Deserialize, Serialize};

use super::AdaptationParams;
use crate::colorimetry::ChromaticityUv;
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;

/// Adaptation state at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationState {
    pub time: f64,
    pub value: ChromaticityUv,
}

/// An illuminant as a function of time, possibly piecewise.
///
/// Programs with discontinuities list them in [`breakpoints`]; the integrator
/// stops exactly on each one and evaluates the illuminant of an interval with
/// [`illuminant_in_segment`], so a jump never leaks into the neighbouring
/// interval through an endpoint sample.
///
/// [`breakpoints`]: IlluminantProgram::breakpoints
/// [`illuminant_in_segment`]: IlluminantProgram::illuminant_in_segment
pub trait IlluminantProgram {
    fn illuminant(&self, t: f64) -> Result<ChromaticityUv>;

    /// Sorted interior discontinuities.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Illuminant at `t` using the formula of segment `segment`, counting
    /// segments from zero between consecutive breakpoints.
    fn illuminant_in_segment(&self, t: f64, _segment: usize) -> Result<ChromaticityUv> {
        self.illuminant(t)
    }
}

impl<F: Fn(f64) -> ChromaticityUv> IlluminantProgram for F {
    fn illuminant(&self, t: f64) -> Result<ChromaticityUv> {
        Ok(self(t))
    }
}

struct Integrator<'a, P: ?Sized> {
    program: &'a P,
    k1: f64,
    k2: f64,
    d65: ChromaticityUv,
    breakpoints: Vec<f64>,
}

impl<P: IlluminantProgram + ?Sized> Integrator<'_, P> {
    fn target(&self, t: f64, segment: usize) -> Result<ChromaticityUv> {
        let a = self.program.illuminant_in_segment(t, segment)?;
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("illuminant at t = {t} is {a:?}")));
        }
        Ok((a - self.d65) * self.k2)
    }

    fn segment(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t)
    }

    /// Integrate the offset `x` from `t0` to `t1` with steps no longer than
    /// `dt`. `[t0, t1]` must not straddle a breakpoint.
    fn advance(&self, mut x: ChromaticityUv, t0: f64, t1: f64, dt: f64) -> Result<ChromaticityUv> {
        let len = t1 - t0;
        if len <= 0.0 {
            return Ok(x);
        }
        let seg = self.segment(t0);
        let n = (len / dt).ceil().max(1.0) as usize;
        let h = len / n as f64;
        let k1 = self.k1;
        let f = |x: ChromaticityUv, y: ChromaticityUv| (y - x) * k1;
        for i in 0..n {
            let t = t0 + len * i as f64 / n as f64;
            let y0 = self.target(t, seg)?;
            let ym = self.target(t + 0.5 * h, seg)?;
            let y1 = self.target(t + h, seg)?;
            let s1 = f(x, y0);
            let s2 = f(x + s1 * (0.5 * h), ym);
            let s3 = f(x + s2 * (0.5 * h), ym);
            let s4 = f(x + s3 * h, y1);
            x = x + (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0);
        }
        Ok(x)
    }
}

fn check(p: &AdaptationParams, dt: f64) -> Result<()> {
    p.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

fn integrator<'a, P: IlluminantProgram + ?Sized>(
    program: &'a P,
    p: &AdaptationParams,
) -> Integrator<'a, P> {
    let mut breakpoints: Vec<f64> = program
        .breakpoints()
        .into_iter()
        .filter(|b| b.is_finite())
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    Integrator {
        program,
        k1: p.k1,
        k2: p.k2,
        d65: ChromaticityUv::d65(),
        breakpoints,
    }
}

/// Integrate from `a(0) = d65` to `t_end`, returning the state after every
/// step. Steps are shortened where needed to land on breakpoints and `t_end`.
pub fn adaptation_ode<P: IlluminantProgram + ?Sized>(
    program: &P,
    p: &AdaptationParams,
    t_end: f64,
    dt: f64,
) -> Result<Vec<AdaptationState>> {
    check(p, dt)?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    let ig = integrator(program, p);
    let mut stops: Vec<f64> = ig
        .breakpoints
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < t_end)
        .collect();
    stops.push(t_end);

    let mut out = vec![AdaptationState {
        time: 0.0,
        value: ig.d65,
    }];
    let mut x = ChromaticityUv::ZERO;
    let mut t0 = 0.0;
    for &stop in &stops {
        let len = stop - t0;
        if len <= 0.0 {
            continue;
        }
        let n = (len / dt).ceil().max(1.0) as usize;
        for i in 0..n {
            let a = t0 + len * i as f64 / n as f64;
            let b = if i + 1 == n { stop } else { t0 + len * (i + 1) as f64 / n as f64 };
            x = ig.advance(x, a, b, f64::INFINITY)?;
            out.push(AdaptationState {
                time: b,
                value: ig.d65 + x,
            });
        }
        t0 = stop;
    }
    Ok(out)
}

/// Integrate from `a(0) = d65` and report the state at each of the sorted
/// `times`.
pub fn adaptation_at<P: IlluminantProgram + ?Sized>(
    program: &P,
    p: &AdaptationParams,
    times: &[f64],
    dt: f64,
) -> Result<Vec<ChromaticityUv>> {
    check(p, dt)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter("sample times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("sample times must be sorted".into()));
    }
    let ig = integrator(program, p);
    let mut out = Vec::with_capacity(times.len());
    let mut x = ChromaticityUv::ZERO;
    let mut t0 = 0.0;
    let mut bp = ig.breakpoints.iter().copied().filter(|&b| b > 0.0).peekable();
    for &t in times {
        while let Some(&b) = bp.peek() {
            if b >= t {
                break;
            }
            x = ig.advance(x, t0, b, dt)?;
            t0 = b;
            bp.next();
        }
        x = ig.advance(x, t0, t, dt)?;
        t0 = t0.max(t);
        out.push(ig.d65 + x);
    }
    Ok(out)
}
