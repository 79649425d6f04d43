//! Relative power over a grid of illuminant chromaticities and its
//! break-even contour.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PowerModel;
use crate::colorimetry::{in_srgb_gamut, ChromaticityUv};
use crate::{Error, Result};

/// Bounds and resolution of a landscape grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nu: usize,
    pub nv: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            u_min: 0.12,
            u_max: 0.30,
            v_min: 0.40,
            v_max: 0.56,
            nu: 256,
            nv: 256,
        }
    }
}

/// Nodes spaced `(max - min) / (n - 1)` apart, shifted so that one node
/// falls exactly on `anchor`.
fn anchored_axis(min: f64, max: f64, n: usize, anchor: f64) -> (Vec<f64>, usize) {
    let step = (max - min) / (n - 1) as f64;
    let i0 = ((anchor - min) / step).round().clamp(0.0, (n - 1) as f64) as usize;
    let nodes = (0..n)
        .map(|i| {
            if i == i0 {
                anchor
            } else {
                anchor + (i as f64 - i0 as f64) * step
            }
        })
        .collect();
    (nodes, i0)
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.u_min, self.u_max, self.v_min, self.v_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.u_min >= self.u_max || self.v_min >= self.v_max {
            return Err(Error::InvalidParameter(format!("bad grid bounds {self:?}")));
        }
        if self.nu < 2 || self.nv < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2x2 nodes".into()));
        }
        let d = ChromaticityUv::d65();
        if !(self.u_min..=self.u_max).contains(&d.u) || !(self.v_min..=self.v_max).contains(&d.v) {
            return Err(Error::InvalidParameter("grid must contain D65".into()));
        }
        Ok(())
    }

    /// Node coordinates along u' and v', and the indices of the D65 node.
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>, (usize, usize)) {
        let d = ChromaticityUv::d65();
        let (us, i0) = anchored_axis(self.u_min, self.u_max, self.nu, d.u);
        let (vs, j0) = anchored_axis(self.v_min, self.v_max, self.nv, d.v);
        (us, vs, (i0, j0))
    }
}

/// Relative power sampled on a grid; row-major with `v` as the slow index.
#[derive(Clone, Debug)]
pub struct PowerLandscape {
    us: Vec<f64>,
    vs: Vec<f64>,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl PowerLandscape {
    /// A landscape from precomputed values, `values[j * us.len() + i]`.
    pub fn from_values(us: Vec<f64>, vs: Vec<f64>, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = us.len() * vs.len();
        if values.len() != n || valid.len() != n || us.len() < 2 || vs.len() < 2 {
            return Err(Error::InvalidParameter("landscape shape mismatch".into()));
        }
        Ok(Self { us, vs, values, valid })
    }

    pub fn us(&self) -> &[f64] {
        &self.us
    }

    pub fn vs(&self) -> &[f64] {
        &self.vs
    }

    pub fn node(&self, i: usize, j: usize) -> ChromaticityUv {
        ChromaticityUv::new(self.us[i], self.vs[j])
    }

    /// Relative power at node `(i, j)`, `None` outside the valid region.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let k = j * self.us.len() + i;
        self.valid[k].then_some(self.values[k])
    }

    /// Value at the node nearest to `c`.
    pub fn nearest(&self, c: ChromaticityUv) -> Option<f64> {
        let idx = |xs: &[f64], x: f64| {
            (0..xs.len())
                .min_by(|&a, &b| (xs[a] - x).abs().total_cmp(&(xs[b] - x).abs()))
                .unwrap_or(0)
        };
        self.value(idx(&self.us, c.u), idx(&self.vs, c.v))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        writeln!(f, "u,v,relative_power,valid")?;
        for (j, &v) in self.vs.iter().enumerate() {
            for (i, &u) in self.us.iter().enumerate() {
                let k = j * self.us.len() + i;
                let val = if self.valid[k] { self.values[k].to_string() } else { String::new() };
                writeln!(f, "{u},{v},{val},{}", self.valid[k] as u8)?;
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Grayscale image of the relative power clipped at 1, highest v' on
    /// the top row; invalid nodes are black.
    pub fn to_image(&self) -> GrayImage {
        let (nu, nv) = (self.us.len(), self.vs.len());
        GrayImage::from_fn(nu as u32, nv as u32, |x, y| {
            let j = nv - 1 - y as usize;
            let byte = self
                .value(x as usize, j)
                .map(|r| (r.clamp(0.0, 1.0) * 255.0).round() as u8)
                .unwrap_or(0);
            image::Luma([byte])
        })
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Sweep the relative power over `grid`. Nodes whose chromaticity cannot be
/// shown with non-negative sRGB drive are marked invalid.
pub fn power_landscape(grid: &GridSpec, model: &PowerModel) -> Result<PowerLandscape> {
    grid.validate()?;
    let (us, vs, _) = grid.axes();
    let nu = us.len();
    let cells: Vec<(f64, bool)> = (0..nu * vs.len())
        .into_par_iter()
        .map(|k| {
            let c = ChromaticityUv::new(us[k % nu], vs[k / nu]);
            if !in_srgb_gamut(c) {
                return Ok((f64::NAN, false));
            }
            Ok((model.relative(c)?, true))
        })
        .collect::<Result<_>>()?;
    let (values, valid) = cells.into_iter().unzip();
    PowerLandscape::from_values(us, vs, values, valid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Edge {
    /// From node (i, j) to (i + 1, j).
    H(usize, usize),
    /// From node (i, j) to (i, j + 1).
    V(usize, usize),
}

/// Iso-contour of `l` at `level` by marching squares, stitched into
/// polylines. Closed loops repeat their first point at the end. Squares
/// touching an invalid node are skipped.
pub fn contour(l: &PowerLandscape, level: f64) -> Vec<Vec<ChromaticityUv>> {
    let (nu, nv) = (l.us.len(), l.vs.len());
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..nv - 1 {
        for i in 0..nu - 1 {
            let corners = [l.value(i, j), l.value(i + 1, j), l.value(i + 1, j + 1), l.value(i, j + 1)];
            let Some(vals) = corners.iter().copied().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            let above: Vec<bool> = vals.iter().map(|&x| x >= level).collect();
            let (b, r, t, lft) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let crossing = [
                (above[0] != above[1], b),
                (above[1] != above[2], r),
                (above[2] != above[3], t),
                (above[3] != above[0], lft),
            ];
            let cut: Vec<Edge> = crossing.iter().filter(|c| c.0).map(|c| c.1).collect();
            match cut.len() {
                2 => segments.push((cut[0], cut[1])),
                4 => {
                    let center_above = vals.iter().sum::<f64>() / 4.0 >= level;
                    // Pair the cut edges around whichever diagonal is
                    // disconnected through the center.
                    if center_above == above[0] {
                        segments.push((b, r));
                        segments.push((t, lft));
                    } else {
                        segments.push((lft, b));
                        segments.push((r, t));
                    }
                }
                _ => {}
            }
        }
    }
    stitch(l, level, &segments)
}

fn edge_point(l: &PowerLandscape, level: f64, e: Edge) -> ChromaticityUv {
    let (a, b) = match e {
        Edge::H(i, j) => ((i, j), (i + 1, j)),
        Edge::V(i, j) => ((i, j), (i, j + 1)),
    };
    let va = l.value(a.0, a.1).unwrap_or(level);
    let vb = l.value(b.0, b.1).unwrap_or(level);
    let f = if vb == va { 0.5 } else { ((level - va) / (vb - va)).clamp(0.0, 1.0) };
    let pa = l.node(a.0, a.1);
    let pb = l.node(b.0, b.1);
    pa + (pb - pa) * f
}

fn stitch(l: &PowerLandscape, level: f64, segments: &[(Edge, Edge)]) -> Vec<Vec<ChromaticityUv>> {
    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(k);
        at.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start: usize, from: Edge, used: &mut Vec<bool>| {
        let mut edges = vec![from];
        let mut seg = start;
        let mut cur = from;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == cur { b } else { a };
            edges.push(next);
            cur = next;
            match at[&cur].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        edges
    };
    // Open chains start at an edge used by exactly one segment; the rest
    // are loops. Iterate in segment order for deterministic output.
    for k in 0..segments.len() {
        for end in [segments[k].0, segments[k].1] {
            if !used[k] && at[&end].len() == 1 {
                let edges = walk(k, end, &mut used);
                lines.push(edges);
            }
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            let edges = walk(k, segments[k].0, &mut used);
            lines.push(edges);
        }
    }
    lines
        .into_iter()
        .map(|edges| edges.into_iter().map(|e| edge_point(l, level, e)).collect())
        .collect()
}

/// Break-even contour where the relative power equals 1.
pub fn savings_boundary(l: &PowerLandscape) -> Vec<Vec<ChromaticityUv>> {
    contour(l, 1.0)
}
