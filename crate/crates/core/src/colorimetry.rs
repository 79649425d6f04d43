//! Color-space conversions and the linear Bradford chromatic adaptation
//! transform.
//!
//! Everything here is exact double-precision linear algebra. Nothing is
//! clipped: colors pushed outside the display gamut by a CAT are returned as
//! is and it is up to the caller (see [`ClipPolicy`]) to
//! decide how to bring them back.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::LazyLock;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// u'v' distance of one just-noticeable difference.
pub const JND: f64 = 0.004;

/// u'v' distance of `n` just-noticeable differences.
pub fn jnd(n: f64) -> f64 {
    n * JND
}

/// Bradford sharpened cone matrix (XYZ -> LMS), rows as published by
/// Lindbloom.
pub const BRADFORD: [[f64; 3]; 3] = [
    [0.8951, 0.2664, -0.1614],
    [-0.7502, 1.7135, 0.0367],
    [0.0389, -0.0685, 1.0296],
];

/// CIE xy of the sRGB primaries and white.
pub const SRGB_RED_XY: (f64, f64) = (0.64, 0.33);
pub const SRGB_GREEN_XY: (f64, f64) = (0.30, 0.60);
pub const SRGB_BLUE_XY: (f64, f64) = (0.15, 0.06);
pub const D65_XY: (f64, f64) = (0.3127, 0.3290);

struct Matrices {
    rgb_to_xyz: Matrix3<f64>,
    xyz_to_rgb: Matrix3<f64>,
    bradford: Matrix3<f64>,
    bradford_inv: Matrix3<f64>,
}

fn xy_to_xyz(xy: (f64, f64)) -> Vector3<f64> {
    let (x, y) = xy;
    Vector3::new(x / y, 1.0, (1.0 - x - y) / y)
}

static MATRICES: LazyLock<Matrices> = LazyLock::new(|| {
    // Columns are the primaries scaled so that R = G = B = 1 lands on the
    // white point.
    let primaries = Matrix3::from_columns(&[
        xy_to_xyz(SRGB_RED_XY),
        xy_to_xyz(SRGB_GREEN_XY),
        xy_to_xyz(SRGB_BLUE_XY),
    ]);
    let white = xy_to_xyz(D65_XY);
    let scale = primaries
        .lu()
        .solve(&white)
        .expect("sRGB primaries are linearly independent");
    let rgb_to_xyz = primaries * Matrix3::from_diagonal(&scale);
    let xyz_to_rgb = rgb_to_xyz.try_inverse().expect("invertible");
    let bradford = Matrix3::from_fn(|r, c| BRADFORD[r][c]);
    let bradford_inv = bradford.try_inverse().expect("invertible");
    Matrices {
        rgb_to_xyz,
        xyz_to_rgb,
        bradford,
        bradford_inv,
    }
});

/// Linear-light display RGB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl LinearRgb {
    pub const BLACK: LinearRgb = LinearRgb::new(0.0, 0.0, 0.0);
    pub const WHITE: LinearRgb = LinearRgb::new(1.0, 1.0, 1.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.r, self.g, self.b)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    pub fn in_gamut(self) -> bool {
        self.to_array().iter().all(|c| (0.0..=1.0).contains(c))
    }
}

impl Add for LinearRgb {
    type Output = LinearRgb;
    fn add(self, o: LinearRgb) -> LinearRgb {
        LinearRgb::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl Sub for LinearRgb {
    type Output = LinearRgb;
    fn sub(self, o: LinearRgb) -> LinearRgb {
        LinearRgb::new(self.r - o.r, self.g - o.g, self.b - o.b)
    }
}

impl Mul<f64> for LinearRgb {
    type Output = LinearRgb;
    fn mul(self, s: f64) -> LinearRgb {
        LinearRgb::new(self.r * s, self.g * s, self.b * s)
    }
}

/// CIE 1931 tristimulus values; `y` is relative luminance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Xyz {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Xyz {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// White of the sRGB encoding, luminance 1.
    pub fn d65() -> Xyz {
        rgb_xyz(LinearRgb::WHITE)
    }
}

/// Cone responses in the Bradford sharpened basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lms {
    pub l: f64,
    pub m: f64,
    pub s: f64,
}

impl Lms {
    pub fn from_xyz(c: Xyz) -> Lms {
        let v = MATRICES.bradford * c.to_vector();
        Lms {
            l: v.x,
            m: v.y,
            s: v.z,
        }
    }

    pub fn to_xyz(self) -> Xyz {
        Xyz::from_vector(MATRICES.bradford_inv * Vector3::new(self.l, self.m, self.s))
    }
}

/// A point in the CIE 1976 u'v' plane.
///
/// Also used as a 2-vector for offsets and directions in that plane, which is
/// where the adaptation dynamics live.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ChromaticityUv {
    pub u: f64,
    pub v: f64,
}

impl From<[f64; 2]> for ChromaticityUv {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<ChromaticityUv> for [f64; 2] {
    fn from(c: ChromaticityUv) -> Self {
        [c.u, c.v]
    }
}

impl ChromaticityUv {
    pub const ZERO: ChromaticityUv = ChromaticityUv::new(0.0, 0.0);

    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Unit vector at angle `phi` radians, counter-clockwise from +u'.
    pub fn direction(phi: f64) -> Self {
        Self::new(phi.cos(), phi.sin())
    }

    /// u'v' chromaticity of D65 as encoded by sRGB.
    pub fn d65() -> ChromaticityUv {
        *D65_UV
    }

    pub fn dot(self, o: ChromaticityUv) -> f64 {
        self.u * o.u + self.v * o.v
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn distance(self, o: ChromaticityUv) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

static D65_UV: LazyLock<ChromaticityUv> =
    LazyLock::new(|| xyz_uv(Xyz::d65()).expect("D65 is not degenerate"));

impl Add for ChromaticityUv {
    type Output = ChromaticityUv;
    fn add(self, o: ChromaticityUv) -> ChromaticityUv {
        ChromaticityUv::new(self.u + o.u, self.v + o.v)
    }
}

impl Sub for ChromaticityUv {
    type Output = ChromaticityUv;
    fn sub(self, o: ChromaticityUv) -> ChromaticityUv {
        ChromaticityUv::new(self.u - o.u, self.v - o.v)
    }
}

impl Mul<f64> for ChromaticityUv {
    type Output = ChromaticityUv;
    fn mul(self, s: f64) -> ChromaticityUv {
        ChromaticityUv::new(self.u * s, self.v * s)
    }
}

impl Neg for ChromaticityUv {
    type Output = ChromaticityUv;
    fn neg(self) -> ChromaticityUv {
        ChromaticityUv::new(-self.u, -self.v)
    }
}

/// A light source: chromaticity plus relative luminance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Illuminant {
    pub chromaticity: ChromaticityUv,
    pub luminance: f64,
}

impl Illuminant {
    /// An illuminant at unit luminance, the luminance of the sRGB white.
    pub fn new(chromaticity: ChromaticityUv) -> Self {
        Self {
            chromaticity,
            luminance: 1.0,
        }
    }

    pub fn d65() -> Self {
        Self::new(ChromaticityUv::d65())
    }

    pub fn white(&self) -> Result<Xyz> {
        if !(self.luminance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "illuminant luminance must be positive, got {}",
                self.luminance
            )));
        }
        uv_xyz(self.chromaticity, self.luminance)
    }
}

/// A 3x3 transform acting on linear RGB column vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatMatrix(pub Matrix3<f64>);

impl CatMatrix {
    pub fn identity() -> Self {
        CatMatrix(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Option<CatMatrix> {
        self.0.try_inverse().map(CatMatrix)
    }

    pub fn then(&self, next: &CatMatrix) -> CatMatrix {
        CatMatrix(next.0 * self.0)
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn max_abs_diff(&self, o: &CatMatrix) -> f64 {
        (self.0 - o.0).abs().max()
    }
}

/// sRGB EOTF on a normalized encoded value.
pub fn srgb_eotf(e: f64) -> f64 {
    if e <= 0.04045 {
        e / 12.92
    } else {
        ((e + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_eotf`].
pub fn srgb_oetf(l: f64) -> f64 {
    if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

static DECODE_LUT: LazyLock<[f64; 256]> =
    LazyLock::new(|| std::array::from_fn(|i| srgb_eotf(i as f64 / 255.0)));

/// Linear value of one 8-bit sRGB code.
pub fn srgb_decode_channel(code: u8) -> f64 {
    DECODE_LUT[code as usize]
}

pub fn srgb_decode(c8: [u8; 3]) -> LinearRgb {
    LinearRgb::new(
        srgb_decode_channel(c8[0]),
        srgb_decode_channel(c8[1]),
        srgb_decode_channel(c8[2]),
    )
}

/// Encode to 8 bits, clamping each channel to [0, 1] first.
pub fn srgb_encode(c: LinearRgb) -> [u8; 3] {
    c.to_array()
        .map(|l| (srgb_oetf(l.clamp(0.0, 1.0)) * 255.0).round() as u8)
}

pub fn rgb_xyz(c: LinearRgb) -> Xyz {
    Xyz::from_vector(MATRICES.rgb_to_xyz * c.to_vector())
}

pub fn xyz_rgb(x: Xyz) -> LinearRgb {
    LinearRgb::from_vector(MATRICES.xyz_to_rgb * x.to_vector())
}

pub fn xyz_uv(x: Xyz) -> Result<ChromaticityUv> {
    let denom = x.x + 15.0 * x.y + 3.0 * x.z;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateChromaticity(format!(
            "X + 15Y + 3Z = {denom} for {x:?}"
        )));
    }
    Ok(ChromaticityUv::new(4.0 * x.x / denom, 9.0 * x.y / denom))
}

pub fn uv_xyz(c: ChromaticityUv, y: f64) -> Result<Xyz> {
    if !(c.v > 0.0) || !c.is_finite() {
        return Err(Error::DegenerateChromaticity(format!(
            "v' must be positive, got {c:?}"
        )));
    }
    Ok(Xyz::new(
        y * 9.0 * c.u / (4.0 * c.v),
        y,
        y * (12.0 - 3.0 * c.u - 20.0 * c.v) / (4.0 * c.v),
    ))
}

/// Chromaticity of a linear RGB color, `None` for black and other colors
/// without a defined chromaticity.
pub fn rgb_uv(c: LinearRgb) -> Option<ChromaticityUv> {
    xyz_uv(rgb_xyz(c)).ok()
}

/// Linear RGB of the white of `c` at luminance 1.
pub fn uv_white_rgb(c: ChromaticityUv) -> Result<LinearRgb> {
    Ok(xyz_rgb(uv_xyz(c, 1.0)?))
}

/// Whether the chromaticity can be produced by non-negative sRGB drive.
pub fn in_srgb_gamut(c: ChromaticityUv) -> bool {
    match uv_white_rgb(c) {
        Ok(rgb) => rgb.to_array().iter().all(|&x| x >= -1e-12),
        Err(_) => false,
    }
}

fn white_lms(w: Xyz) -> Result<Vector3<f64>> {
    let lms = MATRICES.bradford * w.to_vector();
    if lms.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::SingularWhite([lms.x, lms.y, lms.z]));
    }
    Ok(lms)
}

/// Bradford adaptation acting on XYZ.
pub fn bradford_xyz_matrix(src_white: Xyz, dst_white: Xyz) -> Result<Matrix3<f64>> {
    let src = white_lms(src_white)?;
    let dst = white_lms(dst_white)?;
    let gain = Matrix3::from_diagonal(&dst.component_div(&src));
    Ok(MATRICES.bradford_inv * gain * MATRICES.bradford)
}

/// Linear Bradford CAT taking colors rendered under `src_white` to colors
/// with the same appearance under `dst_white`, expressed on linear sRGB.
pub fn bradford_cat(src_white: Xyz, dst_white: Xyz) -> Result<CatMatrix> {
    let xyz = bradford_xyz_matrix(src_white, dst_white)?;
    Ok(CatMatrix(MATRICES.xyz_to_rgb * xyz * MATRICES.rgb_to_xyz))
}

/// CAT from D65 to an illuminant at the same luminance.
pub fn cat_from_d65(target: ChromaticityUv) -> Result<CatMatrix> {
    bradford_cat(Xyz::d65(), uv_xyz(target, 1.0)?)
}

pub fn apply_cat(c: LinearRgb, m: &CatMatrix) -> LinearRgb {
    LinearRgb::from_vector(m.0 * c.to_vector())
}

/// Adapt a chromaticity between two adaptation states, keeping luminance.
pub fn adapt_chromaticity(
    c: ChromaticityUv,
    from_state: ChromaticityUv,
    to_state: ChromaticityUv,
) -> Result<ChromaticityUv> {
    let m = bradford_xyz_matrix(uv_xyz(from_state, 1.0)?, uv_xyz(to_state, 1.0)?)?;
    xyz_uv(Xyz::from_vector(m * uv_xyz(c, 1.0)?.to_vector()))
}

/// How colors outside the unit RGB cube are brought back into gamut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipPolicy {
    /// Clamp each channel to [0, 1] independently.
    #[default]
    Clamp,
    /// Move toward the gray of equal luminance until the color fits.
    Project,
}

impl ClipPolicy {
    pub fn apply(self, c: LinearRgb) -> LinearRgb {
        if c.in_gamut() {
            return c;
        }
        match self {
            ClipPolicy::Clamp => LinearRgb::new(
                c.r.clamp(0.0, 1.0),
                c.g.clamp(0.0, 1.0),
                c.b.clamp(0.0, 1.0),
            ),
            ClipPolicy::Project => {
                let y = luminance(c).clamp(0.0, 1.0);
                let gray = [y; 3];
                let mut s: f64 = 1.0;
                for (ci, gi) in c.to_array().into_iter().zip(gray) {
                    let d = ci - gi;
                    if ci > 1.0 {
                        s = s.min((1.0 - gi) / d);
                    } else if ci < 0.0 {
                        s = s.min(-gi / d);
                    }
                }
                let s = s.max(0.0);
                LinearRgb::new(
                    (y + s * (c.r - y)).clamp(0.0, 1.0),
                    (y + s * (c.g - y)).clamp(0.0, 1.0),
                    (y + s * (c.b - y)).clamp(0.0, 1.0),
                )
            }
        }
    }
}

impl std::str::FromStr for ClipPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(ClipPolicy::Clamp),
            "project" => Ok(ClipPolicy::Project),
            other => Err(Error::InvalidParameter(format!(
                "unknown clip policy {other:?}, expected clamp or project"
            ))),
        }
    }
}

/// Relative luminance Y of a linear RGB color.
pub fn luminance(c: LinearRgb) -> f64 {
    rgb_xyz(c).y
}
