//! Synthetic scenes: a textured mosaic and a camera panning across it.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::par;
use crate::rng::mix64;

/// Side of the mosaic tiles that carry their own brightness and contrast.
const TILE: usize = 64;

fn lattice(seed: u64, layer: u64, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64(layer.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ mix64(ix as u64 ^ mix64(iy as u64))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, layer: u64, x: f64, y: f64, spacing: f64) -> f64 {
    let (gx, gy) = (x / spacing, y / spacing);
    let (ix, iy) = (gx.floor(), gy.floor());
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (smooth(gx - ix), smooth(gy - iy));
    let (ix, iy) = (ix as i64, iy as i64);
    let v00 = lattice(seed, layer, ix, iy);
    let v10 = lattice(seed, layer, ix + 1, iy);
    let v01 = lattice(seed, layer, ix, iy + 1);
    let v11 = lattice(seed, layer, ix + 1, iy + 1);
    let top = v00 + (v10 - v00) * tx;
    let bottom = v01 + (v11 - v01) * tx;
    top + (bottom - top) * ty
}

/// Deterministic textured mosaic.
///
/// Multi-octave value noise is modulated per 64-pixel tile by a random gain
/// and offset, so the scene has sharp tile edges, regions of very different
/// contrast, and a few saturated patches.
pub fn mosaic(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Argument("mosaic dimensions must be non-zero".into()));
    }
    let rows = par::map_range(height, |y| {
        (0..width)
            .map(|x| {
                let (fx, fy) = (x as f64, y as f64);
                let noise = 0.45 * value_noise(seed, 1, fx, fy, 48.0)
                    + 0.30 * value_noise(seed, 2, fx, fy, 16.0)
                    + 0.17 * value_noise(seed, 3, fx, fy, 6.0)
                    + 0.08 * value_noise(seed, 4, fx, fy, 2.0);
                let (tx, ty) = ((x / TILE) as i64, (y / TILE) as i64);
                let gain = 0.15 + 1.6 * lattice(seed, 10, tx, ty);
                let offset = 10.0 + 235.0 * lattice(seed, 11, tx, ty);
                let v = offset + gain * (noise - 0.5) * 255.0;
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect::<Vec<u8>>()
    });
    GrayImage::new(width, height, rows.concat())
}

/// A camera sliding horizontally across a mosaic, `step` pixels per frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub step: usize,
    pub seed: u64,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            frames: 200,
            width: 320,
            height: 240,
            step: 4,
            seed: 2021,
        }
    }
}

impl Trajectory {
    pub fn render(&self) -> Result<Vec<GrayImage>> {
        if self.frames == 0 {
            return Err(Error::Argument("trajectory needs at least one frame".into()));
        }
        let total_width = self.width + self.step * (self.frames - 1);
        let scene = mosaic(total_width, self.height, self.seed)?;
        par::map_range(self.frames, |i| scene.crop(i * self.step, 0, self.width, self.height))
            .into_iter()
            .collect()
    }

    /// Writes `frame_0000.pgm`, `frame_0001.pgm`, ... into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let frames = self.render()?;
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let path = dir.join(format!("frame_{i:04}.pgm"));
                f.save_pgm(&path).map(|_| path)
            })
            .collect()
    }
}
