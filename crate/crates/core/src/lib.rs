//! Models the time course of chromatic adaptation under a changing scene
//! illuminant and uses it to plan display-power-saving illuminant shifts for
//! emissive displays.
//!
//! The crate is organised bottom-up:
//!
//! * [`colorimetry`]: sRGB/XYZ/u'v' conversions and the linear Bradford CAT.
//! * [`power`]: per-pixel OLED power, natural-scene color histograms and the
//!   relative power landscape over illuminant chromaticity.
//! * [`adaptation`]: the first-order adaptation dynamics, illuminant programs,
//!   closed-form adaptation trajectories and an RK4 reference integrator.
//! * [`psychophysics`]: psychometric calibration, 2AFC stimulus placement,
//!   maximum-likelihood fitting of the adaptation constants, simulated
//!   observers and signal-detection analysis.
//! * [`optimizer`]: optimal traversal velocity, Pareto sweeps and sensitivity
//!   grids.
//! * [`pipeline`]: the per-frame illuminant director, image shifting and the
//!   dynamic-lighting target.

pub mod adaptation;
pub mod colorimetry;
mod error;
pub mod optimizer;
pub mod pipeline;
pub mod power;
pub mod psychophysics;

pub use error::{Error, Result};
