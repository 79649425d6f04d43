//! Deployment side: the illuminant schedule a display follows, the per-frame
//! CAT, offline processing of frame sequences with power accounting, and the
//! constrained target for content whose own lighting changes over time.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptationParams, IlluminantProgram, Trajectory};
use crate::colorimetry::{
    adapt_chromaticity, apply_cat, cat_from_d65, rgb_uv, srgb_decode, srgb_encode, CatMatrix,
    ChromaticityUv, ClipPolicy, LinearRgb,
};
use crate::power::{is_image_path, DisplayPowerParams};
use crate::{Error, Result};

/// Ramp from D65 along `trajectory` at speed `v` until `t_max`, then hold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSchedule {
    #[serde(flatten)]
    pub trajectory: Trajectory,
    /// u'v' distance per second.
    pub v: f64,
    /// Seconds until the terminal illuminant is reached.
    pub t_max: f64,
}

impl DeploymentSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::InvalidParameter(format!("v must be >= 0, got {}", self.v)));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_max must be > 0, got {}",
                self.t_max
            )));
        }
        if let Trajectory::Linear { phi } = self.trajectory {
            if !phi.is_finite() {
                return Err(Error::NonFinite("trajectory angle".into()));
            }
        }
        if self.terminal_distance() > self.trajectory.max_distance() {
            return Err(Error::InvalidParameter(format!(
                "terminal distance {} exceeds the trajectory limit {}",
                self.terminal_distance(),
                self.trajectory.max_distance()
            )));
        }
        Ok(())
    }

    pub fn terminal_distance(&self) -> f64 {
        self.v * self.t_max
    }

    pub fn terminal(&self) -> Result<ChromaticityUv> {
        self.trajectory.point(self.terminal_distance())
    }

    /// Distance of the illuminant from D65 at time `t`.
    pub fn distance_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        Ok(self.v * t.min(self.t_max))
    }

    pub fn illuminant_at(&self, t: f64) -> Result<ChromaticityUv> {
        self.trajectory.point(self.distance_at(t)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let s: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

impl IlluminantProgram for DeploymentSchedule {
    fn illuminant(&self, t: f64) -> Result<ChromaticityUv> {
        self.illuminant_at(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.t_max]
    }
}

/// CAT a display applies at time `t` of the schedule.
pub fn frame_cat(s: &DeploymentSchedule, t: f64) -> Result<CatMatrix> {
    cat_from_d65(s.illuminant_at(t)?)
}

/// Linear result of the CAT for one pixel before clipping, and whether it
/// left the unit cube.
#[inline]
fn shifted_pixel(code: [u8; 3], m: &CatMatrix, clip: ClipPolicy) -> (LinearRgb, bool) {
    let c = apply_cat(srgb_decode(code), m);
    let out = !c.in_gamut();
    (clip.apply(c), out)
}

/// Decode, apply `m` in linear light, bring back into gamut and re-encode.
pub fn apply_shift_image(img: &RgbImage, m: &CatMatrix, clip: ClipPolicy) -> RgbImage {
    shift_with_stats(img, m, clip, &DisplayPowerParams::default()).0
}

/// Shifted image, mean pixel power of the clipped linear colors, and the
/// number of pixels that needed clipping.
fn shift_with_stats(
    img: &RgbImage,
    m: &CatMatrix,
    clip: ClipPolicy,
    dp: &DisplayPowerParams,
) -> (RgbImage, f64, usize) {
    let mut out = RgbImage::new(img.width(), img.height());
    let mut power = 0.0;
    let mut clipped = 0;
    for (src, dst) in img.pixels().zip(out.pixels_mut()) {
        let (c, was_out) = shifted_pixel(src.0, m, clip);
        power += dp.p_disp[0] * c.r + dp.p_disp[1] * c.g + dp.p_disp[2] * c.b;
        clipped += was_out as usize;
        dst.0 = srgb_encode(c);
    }
    let n = (img.width() as usize * img.height() as usize).max(1);
    (out, power / n as f64 + dp.p_static, clipped)
}

/// Uniform dimming in linear light, the trivial power-saving baseline.
pub fn dim_image(img: &RgbImage, scale: f64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&scale) {
        return Err(Error::InvalidParameter(format!("dimming scale must lie in [0, 1], got {scale}")));
    }
    let mut out = img.clone();
    for p in out.pixels_mut() {
        p.0 = srgb_encode(srgb_decode(p.0) * scale);
    }
    Ok(out)
}

/// Chromaticity of the mean linear pixel.
pub fn gray_world_illuminant(img: &RgbImage) -> Result<ChromaticityUv> {
    let n = img.width() as usize * img.height() as usize;
    if n == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let mut acc = LinearRgb::new(0.0, 0.0, 0.0);
    for p in img.pixels() {
        acc = acc + srgb_decode(p.0);
    }
    rgb_uv(acc * (1.0 / n as f64))
        .ok_or_else(|| Error::DegenerateChromaticity("image is black".into()))
}

/// Per-frame outcome of [`process_sequence`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub index: usize,
    pub file: String,
    pub time: f64,
    pub illuminant: ChromaticityUv,
    /// Mean pixel power of the shifted frame.
    pub power: f64,
    /// The same frame shown without a shift.
    pub d65_power: f64,
    pub clip_fraction: f64,
    pub clip: ClipPolicy,
}

pub const FRAME_REPORT_HEADER: &str =
    "index,file,time,illuminant_u,illuminant_v,power,d65_power,relative_power,clip_fraction,clip";

pub fn write_frame_reports(path: &Path, reports: &[FrameReport]) -> Result<()> {
    let mut s = String::from(FRAME_REPORT_HEADER);
    s.push('\n');
    for r in reports {
        let clip = match r.clip {
            ClipPolicy::Clamp => "clamp",
            ClipPolicy::Project => "project",
        };
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.file,
            r.time,
            r.illuminant.u,
            r.illuminant.v,
            r.power,
            r.d65_power,
            r.power / r.d65_power,
            r.clip_fraction,
            clip
        )
        .unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// Energy of a sequence shown at `fps`: the sum of frame powers times the
/// frame duration.
pub fn sequence_energy(reports: &[FrameReport], fps: f64) -> f64 {
    reports.iter().map(|r| r.power).sum::<f64>() / fps
}

fn trailing_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Image files directly inside `dir` in frame order. When every name ends in
/// a number the frames are ordered by it and must be consecutive.
pub fn sequence_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    if files.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    let numbers: Option<Vec<u64>> = files.iter().map(|p| trailing_number(p)).collect();
    match numbers {
        Some(_) => {
            files.sort_by_key(|p| (trailing_number(p), p.clone()));
            let nums: Vec<u64> = files.iter().filter_map(|p| trailing_number(p)).collect();
            let mut missing = Vec::new();
            for w in nums.windows(2) {
                if w[1] == w[0] {
                    return Err(Error::Format {
                        path: dir.to_path_buf(),
                        message: format!("two frames numbered {}", w[0]),
                    });
                }
                missing.extend(w[0] + 1..w[1]);
            }
            if !missing.is_empty() {
                return Err(Error::MissingFrames(missing));
            }
        }
        None => files.sort(),
    }
    Ok(files)
}

/// Shift every frame in `in_dir` by the schedule's CAT at `t = k / fps`,
/// write the results under the same names into `out_dir` and report the
/// power of each frame.
pub fn process_sequence(
    in_dir: &Path,
    out_dir: &Path,
    s: &DeploymentSchedule,
    fps: f64,
    dp: &DisplayPowerParams,
    clip: ClipPolicy,
) -> Result<Vec<FrameReport>> {
    s.validate()?;
    dp.validate()?;
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::InvalidParameter(format!("fps must be > 0, got {fps}")));
    }
    let frames = sequence_frames(in_dir)?;
    fs::create_dir_all(out_dir)?;
    let identity = CatMatrix::identity();
    frames
        .par_iter()
        .enumerate()
        .map(|(k, path)| {
            let img = image::open(path)
                .map_err(|e| Error::Image {
                    path: path.clone(),
                    source: e,
                })?
                .to_rgb8();
            let time = k as f64 / fps;
            let illuminant = s.illuminant_at(time)?;
            let m = cat_from_d65(illuminant)?;
            let (out, power, clipped) = shift_with_stats(&img, &m, clip, dp);
            let (_, d65_power, _) = shift_with_stats(&img, &identity, clip, dp);
            let name = path.file_name().expect("frame has a file name");
            let target = out_dir.join(name);
            out.save(&target).map_err(|e| Error::Image {
                path: target.clone(),
                source: e,
            })?;
            let n = (img.width() as usize * img.height() as usize).max(1);
            Ok(FrameReport {
                index: k,
                file: name.to_string_lossy().into_owned(),
                time,
                illuminant,
                power,
                d65_power,
                clip_fraction: clipped as f64 / n as f64,
                clip,
            })
        })
        .collect()
}

/// Default resampling rate of content illuminant tracks, in Hz.
pub const DYNAMIC_RATE: f64 = 10.0;

/// One resampled instant of [`dynamic_target`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicSample {
    pub t: f64,
    /// Illuminant of the original content.
    pub content: ChromaticityUv,
    /// Adaptation of a viewer of the original content.
    pub content_state: ChromaticityUv,
    /// Adaptation of a viewer of the shifted content.
    pub state: ChromaticityUv,
    /// The content illuminant carried over to the shifted viewer's state.
    pub matched: ChromaticityUv,
    /// Illuminant to render.
    pub target: ChromaticityUv,
}

/// Linear interpolation of a sorted track.
fn interpolate(track: &[(f64, ChromaticityUv)], t: f64) -> ChromaticityUv {
    let i = track.partition_point(|s| s.0 <= t);
    if i == 0 {
        return track[0].1;
    }
    if i == track.len() {
        return track[i - 1].1;
    }
    let (t0, a) = track[i - 1];
    let (t1, b) = track[i];
    if t1 == t0 {
        return b;
    }
    a + (b - a) * ((t - t0) / (t1 - t0))
}

/// Exact solution of the adaptation equation over a step of length `h`
/// while the illuminant moves linearly from `y0` to `y1`.
fn adapt_step(
    state: ChromaticityUv,
    y0: ChromaticityUv,
    y1: ChromaticityUv,
    h: f64,
    p: &AdaptationParams,
) -> ChromaticityUv {
    let d65 = ChromaticityUv::d65();
    let g0 = (y0 - d65) * p.k2;
    let g1 = (y1 - d65) * p.k2;
    let slope = (g1 - g0) * (1.0 / h);
    let decay = (-p.k1 * h).exp();
    let rise = -(-p.k1 * h).exp_m1() / p.k1;
    let x = state - d65;
    d65 + g1 + (x - g0) * decay - slope * rise
}

fn clamp_to_disk(c: ChromaticityUv, center: ChromaticityUv, radius: f64) -> ChromaticityUv {
    let d = c - center;
    let n = d.norm();
    if n <= radius {
        c
    } else {
        center + d * (radius / n)
    }
}

/// Illuminant schedule for content with its own time-varying lighting.
///
/// `track` samples the content illuminant. It is resampled every
/// `1 / rate` seconds from its first sample and both viewers start adapted to
/// D65 there. At each sample the rendered illuminant is the `preferred`
/// program's value pulled into the disk of radius `delta_d` around the
/// content illuminant as the shifted viewer would have to see it; between
/// samples illuminants move linearly and the adaptation equation is solved
/// exactly.
pub fn dynamic_target<P: IlluminantProgram + ?Sized>(
    track: &[(f64, ChromaticityUv)],
    preferred: &P,
    p: &AdaptationParams,
    delta_d: f64,
    rate: f64,
) -> Result<Vec<DynamicSample>> {
    p.validate()?;
    if !(delta_d >= 0.0) || !delta_d.is_finite() {
        return Err(Error::InvalidParameter(format!("delta_d must be >= 0, got {delta_d}")));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate must be > 0, got {rate}")));
    }
    if track.is_empty() {
        return Err(Error::InvalidParameter("empty illuminant track".into()));
    }
    if track.iter().any(|(t, c)| !t.is_finite() || !c.is_finite()) {
        return Err(Error::NonFinite("illuminant track".into()));
    }
    if track.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::InvalidParameter("illuminant track must be sorted by time".into()));
    }
    let t0 = track[0].0;
    let span = track[track.len() - 1].0 - t0;
    let n = (span * rate + 1e-9).floor() as usize + 1;
    let d65 = ChromaticityUv::d65();

    let mut out: Vec<DynamicSample> = Vec::with_capacity(n);
    for k in 0..n {
        let t = t0 + k as f64 / rate;
        let content = interpolate(track, t);
        let want = preferred.illuminant(t)?;
        let (content_state, state, matched, target) = match out.last() {
            None => {
                let matched = adapt_chromaticity(content, d65, d65)?;
                (d65, d65, matched, clamp_to_disk(want, matched, delta_d))
            }
            Some(prev) => {
                let h = t - prev.t;
                let content_state = adapt_step(prev.content_state, prev.content, content, h, p);
                // The shifted viewer's state depends on the target through
                // the step, weakly (by about k2 * k1 * h), so a short fixed
                // point iteration settles it.
                let mut target = want;
                let mut state = adapt_step(prev.state, prev.target, target, h, p);
                let mut matched = adapt_chromaticity(content, content_state, state)?;
                for _ in 0..64 {
                    let next = clamp_to_disk(want, matched, delta_d);
                    let moved = next.distance(target);
                    target = next;
                    state = adapt_step(prev.state, prev.target, target, h, p);
                    matched = adapt_chromaticity(content, content_state, state)?;
                    if moved == 0.0 {
                        break;
                    }
                }
                (content_state, state, matched, target)
            }
        };
        out.push(DynamicSample {
            t,
            content,
            content_state,
            state,
            matched,
            target,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{adaptation_at, fitted};
    use crate::colorimetry::{jnd, uv_white_rgb};

    fn ramp() -> DeploymentSchedule {
        DeploymentSchedule {
            trajectory: Trajectory::Linear { phi: 1.47 },
            v: 4.49e-4,
            t_max: 120.0,
        }
    }

    #[test]
    fn schedule_holds_after_t_max() {
        let s = ramp();
        assert_eq!(s.illuminant_at(0.0).unwrap(), ChromaticityUv::d65());
        let end = s.terminal().unwrap();
        assert_eq!(s.illuminant_at(120.0).unwrap(), end);
        assert_eq!(s.illuminant_at(5000.0).unwrap(), end);
        assert!(s.illuminant_at(-1.0).is_err());
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = ramp();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"trajectory\":\"linear\""));
        let back: DeploymentSchedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn invalid_schedules() {
        let mut s = ramp();
        s.t_max = 0.0;
        assert!(s.validate().is_err());
        let mut s = ramp();
        s.v = -1.0;
        assert!(s.validate().is_err());
        let s = DeploymentSchedule {
            trajectory: Trajectory::Daylight,
            v: 1.0,
            t_max: 120.0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn frame_cat_examples() {
        let s = ramp();
        assert!(frame_cat(&s, 0.0).unwrap().max_abs_diff(&CatMatrix::identity()) < 1e-12);
        let end = frame_cat(&s, 120.0).unwrap();
        assert_eq!(frame_cat(&s, 400.0).unwrap(), end);
        let mid = s.trajectory.point(s.v * 60.0).unwrap();
        assert!(frame_cat(&s, 60.0).unwrap().max_abs_diff(&cat_from_d65(mid).unwrap()) < 1e-15);
    }

    #[test]
    fn frame_cat_steps_are_small() {
        let s = ramp();
        let fps = 30.0;
        let mut prev = frame_cat(&s, 0.0).unwrap();
        let mut worst: f64 = 0.0;
        for k in 1..(130.0 * fps) as usize {
            let m = frame_cat(&s, k as f64 / fps).unwrap();
            worst = worst.max(m.max_abs_diff(&prev));
            prev = m;
        }
        // Entries are Lipschitz in the illuminant distance: a frame never
        // moves them by more than the mean rate over the whole ramp times
        // the u'v' step, with a margin for curvature.
        let step = s.v / fps;
        let rate = frame_cat(&s, s.t_max).unwrap().max_abs_diff(&CatMatrix::identity())
            / s.terminal_distance();
        assert!(worst <= 1.2 * rate * step, "{worst} vs {}", rate * step);
        assert!(worst > 0.0);
        assert_eq!(frame_cat(&s, 125.0).unwrap(), frame_cat(&s, 125.0 + 1.0 / fps).unwrap());
    }

    #[test]
    fn identity_shift_keeps_codes() {
        let img = RgbImage::from_fn(16, 16, |x, y| image::Rgb([(x * 16) as u8, (y * 16) as u8, 77]));
        let out = apply_shift_image(&img, &CatMatrix::identity(), ClipPolicy::Clamp);
        for (a, b) in img.pixels().zip(out.pixels()) {
            for c in 0..3 {
                assert!((a.0[c] as i32 - b.0[c] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn white_becomes_the_target_white() {
        let target = ChromaticityUv::d65() + ChromaticityUv::direction(1.47) * jnd(5.0);
        let img = RgbImage::from_pixel(4, 4, image::Rgb([255, 255, 255]));
        let out = apply_shift_image(&img, &cat_from_d65(target).unwrap(), ClipPolicy::Clamp);
        let expected = srgb_encode(ClipPolicy::Clamp.apply(uv_white_rgb(target).unwrap()));
        assert!(out.pixels().all(|p| p.0 == expected));
    }

    #[test]
    fn dimming_halves_linear_light() {
        let img = RgbImage::from_pixel(2, 2, image::Rgb([255, 255, 255]));
        let out = dim_image(&img, 0.5).unwrap();
        let l = srgb_decode(out.get_pixel(0, 0).0);
        assert!((l.r - 0.5).abs() < 5e-3);
        assert!(dim_image(&img, 1.5).is_err());
    }

    #[test]
    fn gray_world_examples() {
        let solid = RgbImage::from_pixel(3, 3, image::Rgb([200, 120, 40]));
        let c = rgb_uv(srgb_decode([200, 120, 40])).unwrap();
        assert!(gray_world_illuminant(&solid).unwrap().distance(c) < 1e-12);

        let mut half = RgbImage::from_pixel(2, 1, image::Rgb([255, 0, 0]));
        half.put_pixel(1, 0, image::Rgb([0, 0, 255]));
        let mean = (srgb_decode([255, 0, 0]) + srgb_decode([0, 0, 255])) * 0.5;
        assert!(gray_world_illuminant(&half).unwrap().distance(rgb_uv(mean).unwrap()) < 1e-12);

        let black = RgbImage::new(2, 2);
        assert!(matches!(gray_world_illuminant(&black), Err(Error::DegenerateChromaticity(_))));
    }

    #[test]
    fn gray_world_follows_a_shift() {
        let img = RgbImage::from_fn(64, 64, |x, y| {
            image::Rgb([(40 + x * 2) as u8, (60 + y * 2) as u8, (100 + (x + y) % 50) as u8])
        });
        let before = gray_world_illuminant(&img).unwrap();
        let shift = ChromaticityUv::direction(1.863) * jnd(4.0);
        let m = cat_from_d65(ChromaticityUv::d65() + shift).unwrap();
        let after = gray_world_illuminant(&apply_shift_image(&img, &m, ClipPolicy::Clamp)).unwrap();
        assert!((after - before).distance(shift) < 1e-3);
    }

    #[test]
    fn frame_names_and_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::from_pixel(2, 2, image::Rgb([10, 20, 30]));
        for i in [1, 2, 3, 10] {
            img.save(dir.path().join(format!("f{i}.png"))).unwrap();
        }
        match sequence_frames(dir.path()) {
            Err(Error::MissingFrames(m)) => assert_eq!(m, vec![4, 5, 6, 7, 8, 9]),
            other => panic!("{other:?}"),
        }
        for i in 4..10 {
            img.save(dir.path().join(format!("f{i}.png"))).unwrap();
        }
        let frames = sequence_frames(dir.path()).unwrap();
        let names: Vec<_> = frames.iter().map(|p| trailing_number(p).unwrap()).collect();
        assert_eq!(names, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn adapt_step_matches_the_integrator() {
        let p = fitted::LINEAR_1_863;
        let y0 = ChromaticityUv::d65() + ChromaticityUv::new(0.004, 0.001);
        let y1 = ChromaticityUv::d65() + ChromaticityUv::new(-0.003, 0.006);
        let h = 0.7;
        let lin = move |t: f64| y0 + (y1 - y0) * (t / h);
        let start = ChromaticityUv::d65();
        let oracle = adaptation_at(&lin, &p, &[h], 1e-4).unwrap()[0];
        assert!(adapt_step(start, y0, y1, h, &p).distance(oracle) < 1e-12);
    }

    #[test]
    fn static_content_reduces_to_the_static_schedule() {
        let s = ramp();
        let p = fitted::LINEAR_1_470;
        let gap = crate::optimizer::gap_at(s.v, &p, s.t_max);
        let track = [(0.0, ChromaticityUv::d65()), (200.0, ChromaticityUv::d65())];
        let out = dynamic_target(&track, &s, &p, gap, DYNAMIC_RATE).unwrap();
        for x in &out {
            let want = s.illuminant_at(x.t).unwrap();
            assert!(x.target.distance(want) < 1e-12, "t = {}", x.t);
        }
    }

    #[test]
    fn zero_allowance_follows_the_match() {
        let s = ramp();
        let track = [
            (0.0, ChromaticityUv::d65()),
            (30.0, ChromaticityUv::d65() + ChromaticityUv::direction(0.3) * jnd(3.0)),
        ];
        let out = dynamic_target(&track, &s, &fitted::LINEAR_1_470, 0.0, DYNAMIC_RATE).unwrap();
        for x in &out {
            assert!(x.target.distance(x.matched) < 1e-12);
        }
    }
}
