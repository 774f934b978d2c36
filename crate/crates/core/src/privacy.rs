//! Measurements of how much scene information survives hashing: collision
//! censuses, maps of where extrema come from, and audits of the digitised
//! record.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::curves::CameraProgram;
use crate::error::{Error, Result};
use crate::hashing::{parse_header, Fingerprint, FINGERPRINT_HEADER_LEN};
use crate::imaging::GrayImage;
use crate::par;
use crate::rng::SplitMix64;

/// Largest image space enumerated exhaustively.
pub const MAX_CENSUS: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollisionCensus {
    /// Number of images fingerprinted.
    pub image_space_size: u64,
    /// `levels^(width*height)` when it fits in 128 bits.
    pub full_space_size: Option<u128>,
    /// True when every image of the space was enumerated; otherwise the
    /// counts below are lower bounds from a random sample.
    pub exhaustive: bool,
    pub distinct_hash_count: u64,
    pub max_preimage_size: u64,
    pub min_preimage_size: u64,
    /// Preimage size -> number of hashes with that many preimages.
    pub preimage_histogram: BTreeMap<u64, u64>,
}

impl CollisionCensus {
    pub fn collision_ratio(&self) -> f64 {
        self.distinct_hash_count as f64 / self.image_space_size as f64
    }

    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "exhaustive,{}", self.exhaustive);
        let _ = writeln!(out, "image_space_size,{}", self.image_space_size);
        if let Some(full) = self.full_space_size {
            let _ = writeln!(out, "full_space_size,{full}");
        }
        let _ = writeln!(out, "distinct_hash_count,{}", self.distinct_hash_count);
        let _ = writeln!(out, "collision_ratio,{}", self.collision_ratio());
        let _ = writeln!(out, "max_preimage_size,{}", self.max_preimage_size);
        let _ = writeln!(out, "min_preimage_size,{}", self.min_preimage_size);
        out.push_str("preimage_size,hash_count\n");
        for (size, count) in &self.preimage_histogram {
            let _ = writeln!(out, "{size},{count}");
        }
        out
    }
}

/// Number of multisets of `n` pairs drawn from the `levels*(levels+1)/2`
/// ordered pairs with `min <= max`: an upper bound on distinct hashes.
pub fn multiset_bound(levels: u64, n: u64) -> Option<u128> {
    let p = (levels as u128) * (levels as u128 + 1) / 2;
    // C(p + n - 1, n), built incrementally so every step is exact.
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        c = c.checked_mul(p + i - 1)? / i;
    }
    Some(c)
}

fn level_values(levels: usize) -> Vec<u8> {
    (0..levels)
        .map(|l| ((l * 255 + (levels - 1) / 2) / (levels - 1)) as u8)
        .collect()
}

fn check_census_args(width: usize, height: usize, levels: usize, program: &CameraProgram) -> Result<()> {
    if !(2..=256).contains(&levels) {
        return Err(Error::Argument(format!("levels must be in 2..=256, got {levels}")));
    }
    if program.width() != width || program.height() != height {
        return Err(Error::Argument(format!(
            "program is {}x{}, census frame is {width}x{height}",
            program.width(),
            program.height()
        )));
    }
    Ok(())
}

/// Hash key of one image: sorted pairs packed as `min << 8 | max`.
fn hash_key(pixels: &[u8], curves: &[Vec<usize>]) -> Vec<u16> {
    let mut key: Vec<u16> = curves
        .iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((u8::MAX, 0u8), |(lo, hi), &i| {
                (lo.min(pixels[i]), hi.max(pixels[i]))
            });
            (lo as u16) << 8 | hi as u16
        })
        .collect();
    key.sort_unstable();
    key
}

fn curve_offsets(program: &CameraProgram) -> Vec<Vec<usize>> {
    let w = program.width();
    program
        .curves()
        .iter()
        .map(|c| c.pixels().iter().map(|&(x, y)| y as usize * w + x as usize).collect())
        .collect()
}

fn summarize(
    counts: HashMap<Vec<u16>, u64>,
    examined: u64,
    full: Option<u128>,
    exhaustive: bool,
) -> CollisionCensus {
    let mut preimage_histogram = BTreeMap::new();
    for &c in counts.values() {
        *preimage_histogram.entry(c).or_insert(0) += 1;
    }
    CollisionCensus {
        image_space_size: examined,
        full_space_size: full,
        exhaustive,
        distinct_hash_count: counts.len() as u64,
        max_preimage_size: preimage_histogram.keys().next_back().copied().unwrap_or(0),
        min_preimage_size: preimage_histogram.keys().next().copied().unwrap_or(0),
        preimage_histogram,
    }
}

/// Fingerprints every `width`×`height` image whose pixels take `levels`
/// evenly spaced intensities in `[0, 255]`, and counts how many images share
/// each hash.
pub fn collision_census(
    width: usize,
    height: usize,
    levels: usize,
    program: &CameraProgram,
) -> Result<CollisionCensus> {
    check_census_args(width, height, levels, program)?;
    let pixels = width * height;
    let size = u32::try_from(pixels)
        .ok()
        .and_then(|p| (levels as u64).checked_pow(p))
        .filter(|&s| s <= MAX_CENSUS)
        .ok_or_else(|| {
            Error::Feasibility(format!(
                "{levels}^{pixels} images exceed the exhaustive census bound of 2^24 = {MAX_CENSUS}"
            ))
        })?;
    let values = level_values(levels);
    let curves = curve_offsets(program);

    const CHUNKS: u64 = 256;
    let chunk = size.div_ceil(CHUNKS);
    let partials = par::map_range(CHUNKS as usize, |c| {
        let mut counts: HashMap<Vec<u16>, u64> = HashMap::new();
        let mut img = vec![0u8; pixels];
        let start = c as u64 * chunk;
        for index in start..(start + chunk).min(size) {
            let mut rest = index;
            for px in img.iter_mut() {
                *px = values[(rest % levels as u64) as usize];
                rest /= levels as u64;
            }
            *counts.entry(hash_key(&img, &curves)).or_insert(0) += 1;
        }
        counts
    });
    let mut counts: HashMap<Vec<u16>, u64> = HashMap::new();
    for part in partials {
        for (k, v) in part {
            *counts.entry(k).or_insert(0) += v;
        }
    }
    Ok(summarize(counts, size, Some(size as u128), true))
}

/// Census over `samples` random images, for spaces too large to enumerate.
/// Hash and preimage counts are lower bounds for the full space.
pub fn collision_census_sampled(
    width: usize,
    height: usize,
    levels: usize,
    program: &CameraProgram,
    samples: u64,
    seed: u64,
) -> Result<CollisionCensus> {
    check_census_args(width, height, levels, program)?;
    let values = level_values(levels);
    let curves = curve_offsets(program);
    let full = u32::try_from(width * height)
        .ok()
        .and_then(|p| (levels as u128).checked_pow(p));
    let mut rng = SplitMix64::new(seed);
    let mut img = vec![0u8; width * height];
    let mut counts: HashMap<Vec<u16>, u64> = HashMap::new();
    for _ in 0..samples {
        for px in img.iter_mut() {
            *px = values[rng.below(levels as u64) as usize];
        }
        *counts.entry(hash_key(&img, &curves)).or_insert(0) += 1;
    }
    Ok(summarize(counts, samples, full, false))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub width: usize,
    pub height: usize,
    /// Row-major; true where some curve's extremum was observed.
    pub extrema_mask: Vec<bool>,
    /// Histogram of the `2n` extrema intensities.
    pub sampled_histogram: [u64; 256],
    pub full_histogram: [u64; 256],
    /// Total-variation distance between the two normalized histograms.
    pub divergence: f64,
}

impl CoverageReport {
    pub fn mask_pixels(&self) -> usize {
        self.extrema_mask.iter().filter(|&&m| m).count()
    }

    /// Fraction of the frame that contributed to the hash.
    pub fn coverage(&self) -> f64 {
        self.mask_pixels() as f64 / self.extrema_mask.len() as f64
    }

    /// Mask as an image: 255 where an extremum was observed.
    pub fn mask_image(&self) -> GrayImage {
        let data = self.extrema_mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
        GrayImage::new(self.width, self.height, data).expect("mask matches frame")
    }

    /// `intensity,sampled,full` lines.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("intensity,sampled,full\n");
        for v in 0..256 {
            let _ = writeln!(out, "{v},{},{}", self.sampled_histogram[v], self.full_histogram[v]);
        }
        out
    }
}

/// Total-variation distance between two count histograms.
pub fn tv_distance(a: &[u64], b: &[u64]) -> f64 {
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / ta - y as f64 / tb).abs())
        .sum::<f64>()
}

/// Where each curve's extrema were observed and how their intensities
/// compare with the scene's. Ties keep the first pixel in trace order.
pub fn coverage_map(image: &GrayImage, program: &CameraProgram) -> Result<CoverageReport> {
    let (w, h) = (image.width(), image.height());
    if program.width() != w || program.height() != h {
        return Err(Error::Argument(format!(
            "image is {w}x{h} but program expects {}x{}",
            program.width(),
            program.height()
        )));
    }
    if program.n() == 0 {
        return Err(Error::EmptyInput("program has no curves".into()));
    }
    let mut mask = vec![false; w * h];
    let mut sampled = [0u64; 256];
    for curve in program.curves() {
        let px = curve.pixels();
        let at = |i: usize| image.get(px[i].0 as usize, px[i].1 as usize);
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 1..px.len() {
            if at(i) < at(lo) {
                lo = i;
            }
            if at(i) > at(hi) {
                hi = i;
            }
        }
        for i in [lo, hi] {
            mask[px[i].1 as usize * w + px[i].0 as usize] = true;
        }
        sampled[at(lo) as usize] += 1;
        sampled[at(hi) as usize] += 1;
    }
    let full = image.histogram();
    Ok(CoverageReport {
        width: w,
        height: h,
        extrema_mask: mask,
        divergence: tv_distance(&sampled, &full),
        sampled_histogram: sampled,
        full_histogram: full,
    })
}

/// Result of checking a digitised fingerprint record.
#[derive(Clone, Debug, PartialEq)]
pub struct LeakAudit {
    pub n: usize,
    pub header_bytes: usize,
    pub payload_bytes: usize,
    /// Coordinates, curve indices or other positional fields in the record.
    /// The format has none, so a record that parses always reports zero.
    pub positional_fields: usize,
    pub randomized_per_image: bool,
    /// Payload bytes per source pixel, when the source size is given.
    pub payload_ratio: Option<f64>,
}

impl LeakAudit {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "n={} header={}B payload={}B positional_fields={}",
            self.n, self.header_bytes, self.payload_bytes, self.positional_fields
        );
        if let Some(r) = self.payload_ratio {
            let _ = write!(s, " payload_ratio={r:.6}");
        }
        s
    }
}

/// Checks that a fingerprint file holds nothing but its header and sorted
/// `(min, max)` bytes.
pub fn leak_audit(bytes: &[u8], source_size: Option<(usize, usize)>) -> Result<LeakAudit> {
    let header = parse_header(bytes)?;
    let fp = Fingerprint::from_bytes(bytes)?;
    let payload_bytes = bytes.len() - FINGERPRINT_HEADER_LEN;
    debug_assert_eq!(payload_bytes, 2 * header.n);
    let payload_ratio = match source_size {
        Some((w, h)) if w * h > 0 => Some(payload_bytes as f64 / (w * h) as f64),
        Some(_) => return Err(Error::Argument("source image size must be non-zero".into())),
        None => None,
    };
    Ok(LeakAudit {
        n: fp.n(),
        header_bytes: FINGERPRINT_HEADER_LEN,
        payload_bytes,
        positional_fields: 0,
        randomized_per_image: fp.randomized_per_image(),
        payload_ratio,
    })
}
