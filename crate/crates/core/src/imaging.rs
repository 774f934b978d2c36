//! Grayscale rasters: the scene in front of the simulated camera.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// 8-bit single-channel image stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// Deterministic fixture patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Synth {
    Constant(u8),
    HRamp,
    VRamp,
    /// Alternating 0/255 blocks of the given side, starting with 0 at the origin.
    Checker(usize),
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Argument(format!(
                "{} pixel values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Applies `f` to every intensity.
    pub fn map(&self, f: impl Fn(u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rotates a quarter turn clockwise as displayed (x right, y down).
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // New image is h wide, w tall; new (x', y') = (h - 1 - y, x).
        let mut data = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                data[x * h + (h - 1 - y)] = self.get(x, y);
            }
        }
        Self {
            width: h,
            height: w,
            data,
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Argument(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }

    /// 256-bin intensity histogram.
    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &v in &self.data {
            h[v as usize] += 1;
        }
        h
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    /// Decodes a binary PGM with maxval 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let magic = pnm_token(bytes, &mut cursor)?;
        if magic != b"P5" {
            return Err(Error::Format("not a binary PGM (P5) file".into()));
        }
        let width = pnm_number(bytes, &mut cursor)?;
        let height = pnm_number(bytes, &mut cursor)?;
        let maxval = pnm_number(bytes, &mut cursor)?;
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
            return Err(Error::Format("truncated PGM header".into()));
        }
        cursor += 1;
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
        let raster = &bytes[cursor..];
        if raster.len() < expected {
            return Err(Error::Format(format!(
                "PGM raster has {} bytes, expected {expected}",
                raster.len()
            )));
        }
        Self::new(width, height, raster[..expected].to_vec())
            .map_err(|e| Error::Format(e.to_string()))
    }

    /// Decodes PNG or PGM bytes, converting colour to luma.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(b"P5") {
            return Self::from_pgm(bytes);
        }
        if !bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            return Err(Error::Format("unsupported image format (expected PNG or PGM)".into()));
        }
        let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| Error::Format(format!("PNG decode failed: {e}")))?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let data = match decoded {
            DynamicImage::ImageLuma8(img) => img.into_raw(),
            DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
                decoded.into_luma8().into_raw()
            }
            other => other
                .into_rgb8()
                .pixels()
                .map(|p| luma(p.0[0], p.0[1], p.0[2]))
                .collect(),
        };
        Self::new(w, h, data)
    }
}

/// BT.601 luma, rounded half-up: `0.299 R + 0.587 G + 0.114 B`.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Reads a PNG or PGM file as grayscale.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    GrayImage::decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn synth_image(kind: Synth, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Argument(format!(
            "image dimensions must be non-zero, got {width}x{height}"
        )));
    }
    let ramp = |i: usize, n: usize| if n <= 1 { 0 } else { (255 * i / (n - 1)) as u8 };
    match kind {
        Synth::Constant(c) => GrayImage::new(width, height, vec![c; width * height]),
        Synth::HRamp => GrayImage::from_fn(width, height, |x, _| ramp(x, width)),
        Synth::VRamp => GrayImage::from_fn(width, height, |_, y| ramp(y, height)),
        Synth::Checker(cell) => {
            if cell == 0 {
                return Err(Error::Argument("checker cell size must be non-zero".into()));
            }
            GrayImage::from_fn(width, height, |x, y| {
                if (x / cell + y / cell) % 2 == 0 {
                    0
                } else {
                    255
                }
            })
        }
    }
}

fn pnm_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if start == *cursor {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&bytes[start..*cursor])
}

fn pnm_number(bytes: &[u8], cursor: &mut usize) -> Result<usize> {
    let tok = pnm_token(bytes, cursor)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("malformed number in PGM header".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb};

    fn png_bytes(img: DynamicImage) -> Vec<u8> {
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn red_png_converts_to_luma() {
        // round(0.299 * 255) = round(76.245) = 76
        let img = ImageBuffer::from_pixel(2, 1, Rgb([255u8, 0, 0]));
        let g = GrayImage::decode(&png_bytes(DynamicImage::ImageRgb8(img))).unwrap();
        assert_eq!((g.width(), g.height()), (2, 1));
        assert_eq!(g.data(), &[76, 76]);
    }

    #[test]
    fn luma_rounds_half_up() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 255, 0), 150); // 149.685
        assert_eq!(luma(0, 0, 255), 29); // 29.07
        assert_eq!(luma(10, 10, 10), 10);
    }

    #[test]
    fn gray_png_passthrough() {
        let img = image::GrayImage::from_raw(3, 1, vec![0, 128, 255]).unwrap();
        let g = GrayImage::decode(&png_bytes(DynamicImage::ImageLuma8(img))).unwrap();
        assert_eq!(g.data(), &[0, 128, 255]);
    }

    #[test]
    fn single_pixel_pgm() {
        let g = GrayImage::decode(b"P5\n1 1\n255\n\x80").unwrap();
        assert_eq!(g.data(), &[128]);
    }

    #[test]
    fn pgm_with_comments() {
        let g = GrayImage::from_pgm(b"P5 # c\n2 # w\n1\n255 \x01\x02").unwrap();
        assert_eq!(g.data(), &[1, 2]);
    }

    #[test]
    fn pgm_round_trip() {
        let img = synth_image(Synth::Checker(3), 7, 5).unwrap();
        assert_eq!(GrayImage::from_pgm(&img.to_pgm()).unwrap(), img);
    }

    #[test]
    fn rejects_unknown_format() {
        assert!(matches!(GrayImage::decode(b"GIF89a"), Err(Error::Format(_))));
        assert!(matches!(
            GrayImage::decode(b"P5\n2 2\n65535\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            GrayImage::decode(b"P5\n2 2\n255\n\x00"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_grayscale("/nonexistent/frame.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn synth_examples() {
        let c = synth_image(Synth::Constant(128), 4, 4).unwrap();
        assert_eq!(c.data(), &[128; 16]);
        let r = synth_image(Synth::HRamp, 256, 1).unwrap();
        assert_eq!(r.data(), (0..=255).collect::<Vec<u8>>().as_slice());
        let k = synth_image(Synth::Checker(1), 2, 2).unwrap();
        assert_eq!(k.data(), &[0, 255, 255, 0]);
        let v = synth_image(Synth::VRamp, 1, 3).unwrap();
        assert_eq!(v.data(), &[0, 127, 255]);
        assert_eq!(synth_image(Synth::HRamp, 1, 2).unwrap().data(), &[0, 0]);
        assert!(matches!(synth_image(Synth::HRamp, 0, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 10 + y) as u8).unwrap();
        let r = img.rotate90();
        assert_eq!((r.width(), r.height()), (3, 5));
        // top-left of the rotated image is the bottom-left of the original
        assert_eq!(r.get(0, 0), img.get(0, 2));
        assert_eq!(r.rotate90().rotate90().rotate90(), img);
    }
}
