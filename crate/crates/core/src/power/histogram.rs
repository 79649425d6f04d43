//! Quantized color histograms of natural-scene corpora.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use log::warn;
use rayon::prelude::*;

use crate::colorimetry::{srgb_eotf, LinearRgb};
use crate::{Error, Result};

pub const DEFAULT_BINS: u32 = 64;
pub const HISTOGRAM_HEADER: &str = "# chromashift-histogram v1";

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "ppm", "pnm", "pgm", "pbm"];

/// Normalized density over `bins_per_channel^3` cells of 8-bit sRGB codes.
///
/// Only occupied bins are stored, sorted by flat index
/// `(r * B + g) * B + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorHistogram {
    bins_per_channel: u32,
    entries: Vec<(u32, f64)>,
}

fn check_bins(bins: u32) -> Result<()> {
    if !(16..=256).contains(&bins) {
        return Err(Error::InvalidParameter(format!(
            "bins per channel must lie in 16..=256, got {bins}"
        )));
    }
    Ok(())
}

/// Dense integer counts; summing integers keeps the result independent of
/// the order images are visited in.
struct Counts {
    bins: u32,
    counts: Vec<u64>,
}

impl Counts {
    fn new(bins: u32) -> Self {
        Self {
            bins,
            counts: vec![0; (bins as usize).pow(3)],
        }
    }

    fn add(&mut self, code: [u8; 3]) {
        self.counts[bin_index(self.bins, code) as usize] += 1;
    }

    fn add_image(&mut self, img: &RgbImage) {
        for p in img.pixels() {
            self.add(p.0);
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }

    fn finish(self) -> Option<ColorHistogram> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return None;
        }
        let entries = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c as f64 / total as f64))
            .collect();
        Some(ColorHistogram {
            bins_per_channel: self.bins,
            entries,
        })
    }
}

/// Flat bin index of an 8-bit code.
pub fn bin_index(bins: u32, code: [u8; 3]) -> u32 {
    let q = |c: u8| c as u32 * bins / 256;
    (q(code[0]) * bins + q(code[1])) * bins + q(code[2])
}

/// Linear value at the center of bin `i` along one channel.
fn center_linear(bins: u32, i: u32) -> f64 {
    let code = (i as f64 + 0.5) * 256.0 / bins as f64 - 0.5;
    srgb_eotf(code / 255.0)
}

impl ColorHistogram {
    /// Histogram from explicit entries; weights are renormalized to sum to 1.
    pub fn from_entries(bins: u32, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        check_bins(bins)?;
        let n = bins.pow(3);
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate histogram bin".into()));
        }
        if entries
            .iter()
            .any(|&(i, w)| i >= n || !(w >= 0.0) || !w.is_finite())
        {
            return Err(Error::InvalidParameter(
                "histogram bin out of range or weight negative".into(),
            ));
        }
        entries.retain(|e| e.1 > 0.0);
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("histogram has no mass".into()));
        }
        if (total - 1.0).abs() > 1e-12 {
            for e in &mut entries {
                e.1 /= total;
            }
        }
        Ok(Self {
            bins_per_channel: bins,
            entries,
        })
    }

    /// Histogram of a list of 8-bit colors, one count each.
    pub fn from_codes(codes: &[[u8; 3]], bins: u32) -> Result<Self> {
        check_bins(bins)?;
        let mut c = Counts::new(bins);
        for &code in codes {
            c.add(code);
        }
        c.finish()
            .ok_or_else(|| Error::InvalidParameter("no colors to count".into()))
    }

    /// Pooled histogram of in-memory images.
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a RgbImage>, bins: u32) -> Result<Self> {
        check_bins(bins)?;
        let mut c = Counts::new(bins);
        for img in images {
            c.add_image(img);
        }
        c.finish()
            .ok_or_else(|| Error::InvalidParameter("images have no pixels".into()))
    }

    pub fn bins_per_channel(&self) -> u32 {
        self.bins_per_channel
    }

    /// Number of occupied bins.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Weight of the bin containing `code`.
    pub fn weight_of(&self, code: [u8; 3]) -> f64 {
        let i = bin_index(self.bins_per_channel, code);
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    /// Linear color at the center of flat bin `index`.
    pub fn bin_center(&self, index: u32) -> LinearRgb {
        let b = self.bins_per_channel;
        LinearRgb::new(
            center_linear(b, index / (b * b)),
            center_linear(b, index / b % b),
            center_linear(b, index % b),
        )
    }

    /// Occupied bins as (center color, weight).
    pub fn bins(&self) -> impl Iterator<Item = (LinearRgb, f64)> + '_ {
        self.entries.iter().map(|&(i, w)| (self.bin_center(i), w))
    }

    /// Weighted mean linear color.
    pub fn mean_color(&self) -> LinearRgb {
        self.bins()
            .fold(LinearRgb::BLACK, |acc, (c, w)| acc + c * w)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        writeln!(f, "{HISTOGRAM_HEADER}")?;
        writeln!(f, "bins_per_channel,{}", self.bins_per_channel)?;
        writeln!(f, "r_bin,g_bin,b_bin,weight")?;
        let b = self.bins_per_channel;
        for &(i, w) in &self.entries {
            writeln!(f, "{},{},{},{}", i / (b * b), i / b % b, i % b, w)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let fmt = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = BufReader::new(fs::File::open(path)?).lines();
        let mut next = || lines.next().transpose();
        if next()?.as_deref().map(str::trim) != Some(HISTOGRAM_HEADER) {
            return Err(fmt(format!("missing header {HISTOGRAM_HEADER:?}")));
        }
        let bins: u32 = next()?
            .as_deref()
            .and_then(|l| l.trim().strip_prefix("bins_per_channel,"))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fmt("missing bins_per_channel line".into()))?;
        check_bins(bins)?;
        next()?;
        let mut entries = Vec::new();
        let mut line_no = 3;
        while let Some(line) = next()? {
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            let parsed = (f.len() == 4)
                .then(|| {
                    Some((
                        f[0].parse::<u32>().ok()?,
                        f[1].parse::<u32>().ok()?,
                        f[2].parse::<u32>().ok()?,
                        f[3].parse::<f64>().ok()?,
                    ))
                })
                .flatten();
            let Some((r, g, b, w)) = parsed.filter(|p| p.0 < bins && p.1 < bins && p.2 < bins) else {
                return Err(fmt(format!("line {line_no}: malformed bin {line:?}")));
            };
            entries.push(((r * bins + g) * bins + b, w));
        }
        Self::from_entries(bins, entries)
    }
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if is_image_path(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Whether `path` has one of the image extensions the toolkit reads.
pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files under `dir`, recursively, in sorted path order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    collect_images(dir, &mut files)?;
    files.sort();
    Ok(files)
}

/// Pooled pixel histogram of every readable image under `corpus`.
pub fn build_histogram(corpus: &Path, bins: u32) -> Result<ColorHistogram> {
    check_bins(bins)?;
    let files = corpus_files(corpus)?;
    let counts = files
        .par_iter()
        .fold(
            || (Counts::new(bins), 0usize),
            |(mut c, n), path| match image::open(path) {
                Ok(img) => {
                    c.add_image(&img.to_rgb8());
                    (c, n + 1)
                }
                Err(e) => {
                    warn!("skipping unreadable image {}: {e}", path.display());
                    (c, n)
                }
            },
        )
        .reduce(
            || (Counts::new(bins), 0),
            |(a, n), (b, m)| (a.merge(b), n + m),
        );
    let (counts, readable) = counts;
    if readable == 0 {
        return Err(Error::EmptyCorpus(corpus.to_path_buf()));
    }
    counts
        .finish()
        .ok_or_else(|| Error::EmptyCorpus(corpus.to_path_buf()))
}
