//! Display power of colors, scenes and illuminants.
//!
//! Power of a pixel is affine in its linear drive. The power of an
//! illuminant `T` is the expected pixel power over a natural-scene color
//! histogram after every color has been adapted from D65 to `T` and brought
//! back into gamut.

mod histogram;
mod landscape;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorimetry::{cat_from_d65, ChromaticityUv, ClipPolicy, LinearRgb};
use crate::{Error, Result};

pub use histogram::{
    bin_index, build_histogram, corpus_files, is_image_path, ColorHistogram, DEFAULT_BINS,
    HISTOGRAM_HEADER,
};
pub use landscape::{power_landscape, savings_boundary, GridSpec, PowerLandscape};

/// Affine per-channel power model of an emissive display.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayPowerParams {
    /// Power per unit linear drive of R, G and B.
    pub p_disp: [f64; 3],
    /// Drive-independent power.
    pub p_static: f64,
}

impl Default for DisplayPowerParams {
    /// Blue subpixels drawing twice the power of red and green.
    fn default() -> Self {
        Self {
            p_disp: [1.0, 1.0, 2.0],
            p_static: 0.0,
        }
    }
}

impl DisplayPowerParams {
    pub fn validate(&self) -> Result<()> {
        if self.p_disp.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p_disp components must be > 0, got {:?}",
                self.p_disp
            )));
        }
        if !(self.p_static >= 0.0) || !self.p_static.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "p_static must be >= 0, got {}",
                self.p_static
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let p: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        p.validate()?;
        Ok(p)
    }
}

pub fn pixel_power(c: LinearRgb, p: &DisplayPowerParams) -> f64 {
    p.p_disp[0] * c.r + p.p_disp[1] * c.g + p.p_disp[2] * c.b + p.p_static
}

/// Expected pixel power over `h` after adapting every bin from D65 to the
/// illuminant at chromaticity `t`.
pub fn illuminant_power(
    t: ChromaticityUv,
    h: &ColorHistogram,
    p: &DisplayPowerParams,
    clip: ClipPolicy,
) -> Result<f64> {
    PowerModel::new(h, *p, clip)?.absolute(t)
}

/// A histogram prepared for repeated power evaluation, normalized to D65.
#[derive(Clone, Debug)]
pub struct PowerModel {
    r: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    params: DisplayPowerParams,
    clip: ClipPolicy,
    d65_power: f64,
}

impl PowerModel {
    pub fn new(h: &ColorHistogram, params: DisplayPowerParams, clip: ClipPolicy) -> Result<Self> {
        params.validate()?;
        let n = h.len();
        let mut m = Self {
            r: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            params,
            clip,
            d65_power: 1.0,
        };
        for (c, w) in h.bins() {
            m.r.push(c.r);
            m.g.push(c.g);
            m.b.push(c.b);
            m.w.push(w);
        }
        m.d65_power = m.absolute(ChromaticityUv::d65())?;
        if !(m.d65_power > 0.0) {
            return Err(Error::InvalidParameter(
                "histogram has zero power under D65".into(),
            ));
        }
        Ok(m)
    }

    pub fn params(&self) -> &DisplayPowerParams {
        &self.params
    }

    pub fn d65_power(&self) -> f64 {
        self.d65_power
    }

    /// Power under the illuminant at `t`, in the units of the power params.
    pub fn absolute(&self, t: ChromaticityUv) -> Result<f64> {
        let m = cat_from_d65(t)?.to_rows();
        let p = &self.params;
        let mut acc = 0.0;
        match self.clip {
            ClipPolicy::Clamp => {
                for i in 0..self.w.len() {
                    let (r, g, b) = (self.r[i], self.g[i], self.b[i]);
                    let r2 = (m[0][0] * r + m[0][1] * g + m[0][2] * b).clamp(0.0, 1.0);
                    let g2 = (m[1][0] * r + m[1][1] * g + m[1][2] * b).clamp(0.0, 1.0);
                    let b2 = (m[2][0] * r + m[2][1] * g + m[2][2] * b).clamp(0.0, 1.0);
                    acc += self.w[i] * (p.p_disp[0] * r2 + p.p_disp[1] * g2 + p.p_disp[2] * b2);
                }
            }
            policy => {
                for i in 0..self.w.len() {
                    let (r, g, b) = (self.r[i], self.g[i], self.b[i]);
                    let c = policy.apply(LinearRgb::new(
                        m[0][0] * r + m[0][1] * g + m[0][2] * b,
                        m[1][0] * r + m[1][1] * g + m[1][2] * b,
                        m[2][0] * r + m[2][1] * g + m[2][2] * b,
                    ));
                    acc += self.w[i] * (p.p_disp[0] * c.r + p.p_disp[1] * c.g + p.p_disp[2] * c.b);
                }
            }
        }
        Ok(acc + p.p_static)
    }

    /// Power under `t` divided by the power under D65.
    pub fn relative(&self, t: ChromaticityUv) -> Result<f64> {
        Ok(self.absolute(t)? / self.d65_power)
    }

    /// Fractional saving `1 - relative(t)`.
    pub fn savings(&self, t: ChromaticityUv) -> Result<f64> {
        Ok(1.0 - self.relative(t)?)
    }
}
