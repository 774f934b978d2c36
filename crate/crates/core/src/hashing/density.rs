//! 2-D views of a fingerprint over (max, min) intensity space.

use std::fmt::Write as _;

use super::Fingerprint;
use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Kernel evaluation is cut off beyond this many bandwidths.
const KERNEL_CUTOFF: f64 = 4.0;

/// Square grid of normalized mass. Rows index the minimum intensity, columns
/// the maximum, so every fingerprint lands on or below the diagonal
/// (`row <= col`).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    resolution: usize,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major values, `resolution * resolution` long.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mass in the cell for min-bin `row` and max-bin `col`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Total mass in cells with `row > col`.
    pub fn mass_above_diagonal(&self) -> f64 {
        let r = self.resolution;
        (0..r)
            .flat_map(|row| (0..row).map(move |col| (row, col)))
            .map(|(row, col)| self.get(row, col))
            .sum()
    }

    /// Total-variation distance to another grid of the same resolution.
    pub fn tv_distance(&self, other: &DensityGrid) -> Result<f64> {
        if self.resolution != other.resolution {
            return Err(Error::Argument(format!(
                "grid resolutions differ: {} vs {}",
                self.resolution, other.resolution
            )));
        }
        Ok(0.5
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Grayscale rendering scaled so the densest cell is 255.
    pub fn to_image(&self) -> GrayImage {
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
        let data = self
            .values
            .iter()
            .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::new(self.resolution, self.resolution, data).expect("square grid")
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        self.to_image().to_pgm()
    }

    /// `row,col,value` lines for every cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                let _ = writeln!(out, "{row},{col},{}", self.get(row, col));
            }
        }
        out
    }
}

fn bin_of(v: u8, bins: usize) -> usize {
    v as usize * bins / 256
}

/// Normalized count of pairs per `(min, max)` cell.
pub fn histogram2d(fp: &Fingerprint, bins: usize) -> Result<DensityGrid> {
    if bins == 0 {
        return Err(Error::Argument("histogram needs at least one bin".into()));
    }
    if fp.is_empty() {
        return Err(Error::EmptyInput("fingerprint has no pairs".into()));
    }
    let mut values = vec![0.0; bins * bins];
    for p in fp.pairs() {
        values[bin_of(p.min, bins) * bins + bin_of(p.max, bins)] += 1.0;
    }
    let n = fp.n() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(DensityGrid {
        resolution: bins,
        values,
    })
}

/// Silverman's rule of thumb, `1.06 * sd * n^(-1/5)`, with the sample
/// standard deviation. `None` for fewer than two samples.
pub fn silverman_bandwidth(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some(1.06 * var.sqrt() * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate of the fingerprint on a
/// `resolution`² grid.
///
/// Cell `i` is centred at intensity `(i + 0.5) * 256 / resolution - 0.5`.
/// With an explicit `bandwidth` (in intensity units) the kernel is isotropic;
/// otherwise each axis gets its own Silverman bandwidth, falling back to one
/// cell width when an axis has zero spread. Cells with `row > col` lie
/// outside the support of any fingerprint and are forced to zero before the
/// grid is normalized.
pub fn kde_render(fp: &Fingerprint, resolution: usize, bandwidth: Option<f64>) -> Result<DensityGrid> {
    if resolution == 0 {
        return Err(Error::Argument("KDE grid needs at least one cell".into()));
    }
    if fp.is_empty() {
        return Err(Error::EmptyInput("fingerprint has no pairs".into()));
    }
    let cell = 256.0 / resolution as f64;
    let (h_max, h_min) = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => (h, h),
        Some(h) => return Err(Error::Argument(format!("bandwidth must be positive, got {h}"))),
        None => {
            if fp.n() < 2 {
                return Err(Error::Argument(
                    "automatic bandwidth needs at least two pairs".into(),
                ));
            }
            let maxes: Vec<f64> = fp.pairs().iter().map(|p| p.max as f64).collect();
            let mins: Vec<f64> = fp.pairs().iter().map(|p| p.min as f64).collect();
            let pick = |h: f64| if h > 0.0 { h } else { cell };
            (
                pick(silverman_bandwidth(&maxes).unwrap()),
                pick(silverman_bandwidth(&mins).unwrap()),
            )
        }
    };

    let centre = |i: usize| (i as f64 + 0.5) * cell - 0.5;
    let window = |v: f64, h: f64| -> Vec<(usize, f64)> {
        (0..resolution)
            .filter_map(|i| {
                let z = (centre(i) - v) / h;
                (z.abs() <= KERNEL_CUTOFF).then(|| (i, (-0.5 * z * z).exp()))
            })
            .collect()
    };

    let mut values = vec![0.0; resolution * resolution];
    // Pairs are sorted, so equal pairs are adjacent.
    let pairs = fp.pairs();
    let mut i = 0;
    while i < pairs.len() {
        let p = pairs[i];
        let mut count = 0usize;
        while i < pairs.len() && pairs[i] == p {
            count += 1;
            i += 1;
        }
        let cols = window(p.max as f64, h_max);
        let rows = window(p.min as f64, h_min);
        let mut deposited = false;
        for &(row, wr) in &rows {
            for &(col, wc) in cols.iter().filter(|&&(col, _)| col >= row) {
                values[row * resolution + col] += count as f64 * wr * wc;
                deposited = true;
            }
        }
        if !deposited {
            // Bandwidth narrower than the grid spacing: fall back to the
            // pair's own cell.
            let (row, col) = (bin_of(p.min, resolution), bin_of(p.max, resolution));
            values[row * resolution + col] += count as f64;
        }
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok(DensityGrid { resolution, values })
}
