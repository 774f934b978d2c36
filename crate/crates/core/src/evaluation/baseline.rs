//! SIFT-lite: a small Harris-corner and gradient-histogram descriptor used as
//! a conventional, image-revealing baseline. It shares SIFT's descriptor
//! layout but none of its scale-space machinery.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

pub const MAX_KEYPOINTS: usize = 200;
pub const DESCRIPTOR_LEN: usize = 128;
pub const MIN_SIDE: usize = 32;

const HARRIS_K: f64 = 0.04;
/// Responses below this fraction of the strongest are ignored.
const RELATIVE_THRESHOLD: f64 = 0.01;
const PATCH: usize = 16;
const HALF: usize = PATCH / 2;
const CELL: usize = 4;
const BINS: usize = 8;
const CLAMP: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    pub response: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Vec<f64>,
}

struct Gradients {
    w: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

fn sobel(image: &GrayImage) -> Gradients {
    let (w, h) = (image.width(), image.height());
    let px = |x: isize, y: isize| {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        image.get(cx, cy) as f64
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            gy[i] = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
        }
    }
    Gradients { w, gx, gy }
}

/// Separable 5-tap Gaussian (sigma = 1) with clamped borders.
fn smooth(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let taps: Vec<f64> = (-2i32..=2).map(|d| (-(d * d) as f64 / 2.0).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / norm).collect();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|k| {
                    let sx = (x as isize + k as isize - 2).clamp(0, w as isize - 1) as usize;
                    taps[k] * src[y * w + sx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..5)
                .map(|k| {
                    let sy = (y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
                    taps[k] * tmp[sy * w + x]
                })
                .sum();
        }
    }
    out
}

/// Harris response `det(M) - 0.04 trace(M)^2` of the smoothed structure
/// tensor at every pixel.
pub fn harris_response(image: &GrayImage) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let g = sobel(image);
    let xx: Vec<f64> = g.gx.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = g.gy.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = g.gx.iter().zip(&g.gy).map(|(a, b)| a * b).collect();
    let (sxx, syy, sxy) = (smooth(&xx, w, h), smooth(&yy, w, h), smooth(&xy, w, h));
    (0..w * h)
        .map(|i| {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let tr = sxx[i] + syy[i];
            det - HARRIS_K * tr * tr
        })
        .collect()
}

/// Up to [`MAX_KEYPOINTS`] Harris corners far enough from the border for a
/// full descriptor patch, after 3x3 non-maximum suppression.
pub fn detect(image: &GrayImage) -> Result<Vec<Keypoint>> {
    let (w, h) = (image.width(), image.height());
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::Argument(format!(
            "baseline needs at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}"
        )));
    }
    let r = harris_response(image);
    let peak = r.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = RELATIVE_THRESHOLD * peak;
    let mut kps = Vec::new();
    for y in HALF..=h - HALF {
        for x in HALF..=w - HALF {
            let v = r[y * w + x];
            if v <= threshold {
                continue;
            }
            // On plateaus keep the first pixel in raster order.
            let is_max = (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| {
                    if dx == 0 && dy == 0 {
                        return true;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        return true;
                    }
                    let n = r[ny as usize * w + nx as usize];
                    if (dy, dx) < (0, 0) { v > n } else { v >= n }
                })
            });
            if is_max {
                kps.push(Keypoint { x, y, response: v });
            }
        }
    }
    kps.sort_by(|a, b| b.response.total_cmp(&a.response).then((a.y, a.x).cmp(&(b.y, b.x))));
    kps.truncate(MAX_KEYPOINTS);
    Ok(kps)
}

/// Detects keypoints and describes each with a 4x4 grid of 8-bin gradient
/// orientation histograms over a 16x16 patch (normalized, clamped at 0.2,
/// renormalized). Keypoints whose patch has no gradient are dropped.
pub fn baseline_descriptors(image: &GrayImage) -> Result<Vec<Feature>> {
    let kps = detect(image)?;
    let g = sobel(image);
    Ok(kps
        .into_iter()
        .filter_map(|kp| describe(&g, &kp).map(|descriptor| Feature { keypoint: kp, descriptor }))
        .collect())
}

fn describe(g: &Gradients, kp: &Keypoint) -> Option<Vec<f64>> {
    let mut d = vec![0.0; DESCRIPTOR_LEN];
    for py in 0..PATCH {
        for px in 0..PATCH {
            let i = (kp.y + py - HALF) * g.w + (kp.x + px - HALF);
            let (gx, gy) = (g.gx[i], g.gy[i]);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(2.0 * PI);
            let bin = ((angle / (2.0 * PI) * BINS as f64) as usize).min(BINS - 1);
            let cell = (py / CELL) * (PATCH / CELL) + px / CELL;
            d[cell * BINS + bin] += mag;
        }
    }
    normalize(&mut d)?;
    d.iter_mut().for_each(|v| *v = v.min(CLAMP));
    normalize(&mut d)?;
    Some(d)
}

fn normalize(v: &mut [f64]) -> Option<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{synth_image, Synth};

    #[test]
    fn constant_image_has_no_corners() {
        let img = synth_image(Synth::Constant(120), 64, 64).unwrap();
        assert!(baseline_descriptors(&img).unwrap().is_empty());
    }

    #[test]
    fn too_small() {
        let img = synth_image(Synth::Constant(1), 31, 40).unwrap();
        assert!(matches!(baseline_descriptors(&img), Err(Error::Argument(_))));
    }

    #[test]
    fn response_matches_direct_filter_arithmetic() {
        // Recompute the response at a few pixels with plain nested loops.
        let img = synth_image(Synth::Checker(8), 48, 48).unwrap();
        let r = harris_response(&img);
        let p = |x: i64, y: i64| img.get(x.clamp(0, 47) as usize, y.clamp(0, 47) as usize) as f64;
        let grad = |x: i64, y: i64| {
            let mut gx = 0.0;
            let mut gy = 0.0;
            let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
            for (j, row) in kx.iter().enumerate() {
                for (i, &k) in row.iter().enumerate() {
                    gx += k * p(x + i as i64 - 1, y + j as i64 - 1);
                    gy += kx[i][j] * p(x + i as i64 - 1, y + j as i64 - 1);
                }
            }
            (gx, gy)
        };
        let wts: Vec<f64> = (-2..=2).map(|d: i64| (-(d * d) as f64 / 2.0).exp()).collect();
        let s: f64 = wts.iter().sum();
        for &(x, y) in &[(7i64, 7i64), (8, 8), (12, 7), (20, 20), (0, 0)] {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -2..=2i64 {
                for dx in -2..=2i64 {
                    let wgt = wts[(dx + 2) as usize] * wts[(dy + 2) as usize] / (s * s);
                    let (gx, gy) = grad((x + dx).clamp(0, 47), (y + dy).clamp(0, 47));
                    a += wgt * gx * gx;
                    b += wgt * gy * gy;
                    c += wgt * gx * gy;
                }
            }
            let expected = a * b - c * c - 0.04 * (a + b) * (a + b);
            let got = r[y as usize * 48 + x as usize];
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "({x},{y}) {got} vs {expected}");
        }
    }

    #[test]
    fn checkerboard_corners() {
        let img = synth_image(Synth::Checker(8), 64, 64).unwrap();
        let feats = baseline_descriptors(&img).unwrap();
        // Interior corners sit between pixels 8k-1 and 8k. Those whose
        // descriptor patch fits: k = 2..=7 on each axis... limited by the
        // 8-pixel margin, i.e. k in 1..=7 with pixel in [8, 56].
        let near_corner = |v: usize| v.is_multiple_of(8) || v % 8 == 7;
        assert!(!feats.is_empty());
        for f in &feats {
            assert!(near_corner(f.keypoint.x) && near_corner(f.keypoint.y), "{:?}", f.keypoint);
        }
        // one keypoint per corner
        let mut cells: Vec<(usize, usize)> = feats
            .iter()
            .map(|f| ((f.keypoint.x + 1) / 8, (f.keypoint.y + 1) / 8))
            .collect();
        let before = cells.len();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), before);
        for f in &feats {
            let n: f64 = f.descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }
}
