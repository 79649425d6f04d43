//! Parsers for the compact argument forms.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

use chromashift::adaptation::{AdaptationParams, Trajectory};
use chromashift::colorimetry::JND;
use chromashift::power::DisplayPowerParams;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn floats(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().ok()).collect()
}

/// A u'v' distance, plain or with a `jnd` suffix: `0.02`, `5jnd`.
pub fn distance(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let (num, scale) = match t.strip_suffix("jnd") {
        Some(n) => (n.trim(), JND),
        None => (t.as_str(), 1.0),
    };
    let x: f64 = num.parse().with_context(|| format!("not a distance: {s:?}"))?;
    if !x.is_finite() {
        bail!("not a finite distance: {s:?}");
    }
    Ok(x * scale)
}

/// Comma-separated distances, or `start:stop:step` with inclusive stop.
pub fn distances(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b, h) = (distance(parts[0])?, distance(parts[1])?, distance(parts[2])?);
        if !(h > 0.0) || b < a {
            bail!("bad range {s:?}");
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * h).collect());
    }
    s.split(',').map(distance).collect()
}

/// Comma-separated numbers, or `start:stop:step` with inclusive stop.
pub fn numbers(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let p: Vec<f64> = parts.iter().map(|x| x.trim().parse()).collect::<Result<_, _>>()?;
        if !(p[2] > 0.0) || p[1] < p[0] {
            bail!("bad range {s:?}");
        }
        let n = ((p[1] - p[0]) / p[2] + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| p[0] + i as f64 * p[2]).collect());
    }
    floats(s).with_context(|| format!("not a number list: {s:?}"))
}

/// `k1,k2` or a JSON file with those fields.
pub fn adaptation_params(s: &str) -> Result<AdaptationParams> {
    let p = match floats(s) {
        Some(v) if v.len() == 2 => AdaptationParams { k1: v[0], k2: v[1] },
        _ => read_json(Path::new(s))?,
    };
    p.validate()?;
    Ok(p)
}

/// `default`, `r,g,b`, `r,g,b,static` or a JSON file.
pub fn display_params(s: &str) -> Result<DisplayPowerParams> {
    let p = if s == "default" {
        DisplayPowerParams::default()
    } else {
        match floats(s) {
            Some(v) if v.len() == 3 || v.len() == 4 => DisplayPowerParams {
                p_disp: [v[0], v[1], v[2]],
                p_static: v.get(3).copied().unwrap_or(0.0),
            },
            _ => read_json(Path::new(s))?,
        }
    };
    p.validate()?;
    Ok(p)
}

/// `daylight`, `linear@<phi>` or a bare angle in radians.
pub fn trajectory(s: &str) -> Result<Trajectory> {
    let t = s.trim().to_ascii_lowercase();
    if t == "daylight" {
        return Ok(Trajectory::Daylight);
    }
    let phi = t.strip_prefix("linear@").unwrap_or(&t);
    let phi: f64 = phi.parse().with_context(|| format!("not a trajectory: {s:?}"))?;
    if !phi.is_finite() {
        bail!("not a finite angle: {s:?}");
    }
    Ok(Trajectory::Linear { phi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_forms() {
        assert_eq!(distance("0.02").unwrap(), 0.02);
        assert_eq!(distance("5jnd").unwrap(), 5.0 * JND);
        assert_eq!(distance("5 JND").unwrap(), 5.0 * JND);
        assert!(distance("five").is_err());
        assert!(distance("inf").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(distances("0jnd:1jnd:0.5jnd").unwrap(), vec![0.0, 0.5 * JND, JND]);
        assert_eq!(numbers("120:180:30").unwrap(), vec![120.0, 150.0, 180.0]);
        assert_eq!(numbers("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(numbers("3:1:1").is_err());
    }

    #[test]
    fn params_and_trajectories() {
        let p = adaptation_params("0.101,0.685").unwrap();
        assert_eq!((p.k1, p.k2), (0.101, 0.685));
        assert!(adaptation_params("0.1,1.5").is_err());
        assert_eq!(display_params("1,1,2").unwrap(), DisplayPowerParams::default());
        assert_eq!(display_params("1,1,2,0.5").unwrap().p_static, 0.5);
        assert!(display_params("1,0,2").is_err());
        assert_eq!(trajectory("daylight").unwrap(), Trajectory::Daylight);
        assert_eq!(trajectory("linear@1.47").unwrap(), Trajectory::Linear { phi: 1.47 });
        assert_eq!(trajectory("2.256").unwrap(), Trajectory::Linear { phi: 2.256 });
    }
}
