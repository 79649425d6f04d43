//! The CIE daylight locus as an arc-length parameterized curve through D65.

use std::sync::LazyLock;

use crate::colorimetry::{xyz_uv, ChromaticityUv, Xyz};
use crate::{Error, Result};

/// CCT span over which the D-series formula is defined.
pub const MIN_CCT: f64 = 4000.0;
pub const MAX_CCT: f64 = 25000.0;

const TABLE_LEN: usize = 8193;

/// CIE x chromaticity of the D-series illuminant at `cct` kelvin.
pub fn daylight_x(cct: f64) -> f64 {
    let t = cct;
    if t <= 7000.0 {
        -4.6070e9 / t.powi(3) + 2.9678e6 / t.powi(2) + 0.09911e3 / t + 0.244063
    } else {
        -2.0064e9 / t.powi(3) + 1.9018e6 / t.powi(2) + 0.24748e3 / t + 0.237040
    }
}

/// Judd's quadratic for the locus, y as a function of x.
pub fn daylight_y(x: f64) -> f64 {
    -3.000 * x * x + 2.870 * x - 0.275
}

fn curve_uv(x: f64) -> ChromaticityUv {
    let y = daylight_y(x);
    xyz_uv(Xyz::new(x / y, 1.0, (1.0 - x - y) / y)).expect("daylight chromaticities are valid")
}

struct Locus {
    /// Samples of x, increasing (decreasing CCT).
    xs: Vec<f64>,
    /// Arc length along the curve in u'v' from the point nearest D65.
    arcs: Vec<f64>,
    /// Translation that moves the curve exactly through D65.
    offset: ChromaticityUv,
}

static LOCUS: LazyLock<Locus> = LazyLock::new(build_locus);

fn build_locus() -> Locus {
    let x_lo = daylight_x(MAX_CCT);
    let x_hi = daylight_x(MIN_CCT);
    let n = TABLE_LEN;
    let xs: Vec<f64> = (0..n)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (n - 1) as f64)
        .collect();
    let pts: Vec<ChromaticityUv> = xs.iter().map(|&x| curve_uv(x)).collect();

    // Arc length: chord sum over a fine table with Simpson's midpoint
    // correction of each interval via its midpoint sample.
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let mid = curve_uv(0.5 * (xs[i - 1] + xs[i]));
        let seg = pts[i - 1].distance(mid) + mid.distance(pts[i]);
        cum[i] = cum[i - 1] + seg;
    }

    // Point of the curve closest to D65, refined by golden section.
    let d65 = ChromaticityUv::d65();
    let nearest = (0..n)
        .min_by(|&a, &b| {
            pts[a]
                .distance(d65)
                .partial_cmp(&pts[b].distance(d65))
                .unwrap()
        })
        .unwrap();
    let (mut a, mut b) = (
        xs[nearest.saturating_sub(1)],
        xs[(nearest + 1).min(n - 1)],
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if curve_uv(c).distance(d65) < curve_uv(d).distance(d65) {
            b = d;
        } else {
            a = c;
        }
    }
    let x_ref = 0.5 * (a + b);
    let s_ref = arc_at(&xs, &cum, x_ref);
    let arcs = cum.iter().map(|s| s - s_ref).collect();
    Locus {
        xs,
        arcs,
        offset: d65 - curve_uv(x_ref),
    }
}

fn arc_at(xs: &[f64], cum: &[f64], x: f64) -> f64 {
    let i = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => return cum[i],
        Err(i) => i.clamp(1, xs.len() - 1),
    };
    let f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    cum[i - 1] + f * (cum[i] - cum[i - 1])
}

/// Signed arc-length range `(min, max)` of the defined locus relative to
/// D65. Positive arcs run toward lower color temperatures.
pub fn daylight_range() -> (f64, f64) {
    let l = &*LOCUS;
    (l.arcs[0], *l.arcs.last().unwrap())
}

/// Point at signed arc length `arc` (u'v' units) from D65 along the daylight
/// locus; positive toward warmer daylights (D50 and below).
pub fn daylight_locus(arc: f64) -> Result<ChromaticityUv> {
    let l = &*LOCUS;
    let (min, max) = daylight_range();
    if !arc.is_finite() || arc < min || arc > max {
        return Err(Error::DaylightOutOfRange { arc, min, max });
    }
    if arc == 0.0 {
        return Ok(ChromaticityUv::d65());
    }
    let i = match l.arcs.binary_search_by(|p| p.partial_cmp(&arc).unwrap()) {
        Ok(i) => return Ok(curve_uv(l.xs[i]) + l.offset),
        Err(i) => i.clamp(1, l.xs.len() - 1),
    };
    let f = (arc - l.arcs[i - 1]) / (l.arcs[i] - l.arcs[i - 1]);
    let x = l.xs[i - 1] + f * (l.xs[i] - l.xs[i - 1]);
    Ok(curve_uv(x) + l.offset)
}

/// Distance of the translated locus from `p`, searched over the whole curve.
pub fn distance_to_locus(p: ChromaticityUv) -> f64 {
    let l = &*LOCUS;
    l.xs
        .iter()
        .map(|&x| (curve_uv(x) + l.offset).distance(p))
        .fold(f64::INFINITY, f64::min)
}
