//! The simulated analogue boundary.
//!
//! Each curve is traced over the scene and only its global minimum and
//! maximum survive. The pairs from all curves are sorted before they are
//! exposed, so the digitised [`Fingerprint`] holds exactly `2n` intensities
//! and nothing about where, or on which curve, they were observed.

mod density;

pub use density::{histogram2d, kde_render, silverman_bandwidth, DensityGrid};

use crate::curves::{CameraProgram, Curve, CurveKind};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;

pub const FINGERPRINT_MAGIC: &[u8; 4] = b"OAHF";
pub const FINGERPRINT_VERSION: u8 = 1;
/// magic + version + kind + flags + reserved + n + program digest
pub const FINGERPRINT_HEADER_LEN: usize = 4 + 1 + 1 + 1 + 1 + 4 + 8;

const FLAG_RANDOMIZED: u8 = 0b1;

/// Minimum and maximum intensity observed along one curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtremaPair {
    pub min: u8,
    pub max: u8,
}

impl ExtremaPair {
    pub fn new(min: u8, max: u8) -> Result<Self> {
        if min > max {
            return Err(Error::Argument(format!("extrema pair min {min} > max {max}")));
        }
        Ok(Self { min, max })
    }
}

/// Sorted multiset of extrema pairs; the only record that leaves the camera.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    kind: CurveKind,
    pairs: Vec<ExtremaPair>,
    program_digest: u64,
    randomized: bool,
}

impl Fingerprint {
    /// Builds a fingerprint from raw pairs, sorting them.
    pub fn from_pairs(
        kind: CurveKind,
        mut pairs: Vec<ExtremaPair>,
        program_digest: u64,
        randomized: bool,
    ) -> Self {
        pairs.sort_unstable();
        Self {
            kind,
            pairs,
            program_digest,
            randomized,
        }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    /// Pairs in ascending `(min, max)` order.
    pub fn pairs(&self) -> &[ExtremaPair] {
        &self.pairs
    }

    pub fn program_digest(&self) -> u64 {
        self.program_digest
    }

    pub fn randomized_per_image(&self) -> bool {
        self.randomized
    }

    /// Serialized size for `n` pairs.
    pub fn encoded_len(n: usize) -> usize {
        FINGERPRINT_HEADER_LEN + 2 * n
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(self.n()));
        out.extend_from_slice(FINGERPRINT_MAGIC);
        out.push(FINGERPRINT_VERSION);
        out.push(self.kind.code());
        out.push(if self.randomized { FLAG_RANDOMIZED } else { 0 });
        out.push(0);
        out.extend_from_slice(&(self.n() as u32).to_le_bytes());
        out.extend_from_slice(&self.program_digest.to_le_bytes());
        for p in &self.pairs {
            out.push(p.min);
            out.push(p.max);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = parse_header(bytes)?;
        let pairs: Vec<ExtremaPair> = bytes[FINGERPRINT_HEADER_LEN..]
            .chunks_exact(2)
            .map(|c| ExtremaPair { min: c[0], max: c[1] })
            .collect();
        if let Some(i) = pairs.iter().position(|p| p.min > p.max) {
            return Err(Error::Integrity(format!(
                "pair {i} has min {} > max {}",
                pairs[i].min, pairs[i].max
            )));
        }
        if let Some(i) = pairs.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Integrity(format!("pairs {i} and {} out of order", i + 1)));
        }
        Ok(Self {
            kind: header.kind,
            pairs,
            program_digest: header.program_digest,
            randomized: header.randomized,
        })
    }
}

/// Decoded fixed-size header of a fingerprint file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FingerprintHeader {
    pub kind: CurveKind,
    pub randomized: bool,
    pub n: usize,
    pub program_digest: u64,
}

/// Validates magic, version, reserved bits and total length.
pub fn parse_header(bytes: &[u8]) -> Result<FingerprintHeader> {
    if bytes.len() < FINGERPRINT_HEADER_LEN {
        return Err(Error::Format(format!(
            "fingerprint is {} bytes, shorter than the {FINGERPRINT_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != FINGERPRINT_MAGIC {
        return Err(Error::Format("bad fingerprint magic".into()));
    }
    if bytes[4] != FINGERPRINT_VERSION {
        return Err(Error::Format(format!("unsupported fingerprint version {}", bytes[4])));
    }
    let kind = CurveKind::from_code(bytes[5])
        .ok_or_else(|| Error::Format(format!("unknown curve kind code {}", bytes[5])))?;
    let flags = bytes[6];
    if flags & !FLAG_RANDOMIZED != 0 || bytes[7] != 0 {
        return Err(Error::Format("unknown flag or reserved bits set".into()));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let program_digest = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = Fingerprint::encoded_len(n);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "fingerprint is {} bytes, header promises {expected}",
            bytes.len()
        )));
    }
    Ok(FingerprintHeader {
        kind,
        randomized: flags & FLAG_RANDOMIZED != 0,
        n,
        program_digest,
    })
}

/// Min and max of the image over the curve's pixels.
pub fn trace_extrema(image: &GrayImage, curve: &Curve) -> Result<ExtremaPair> {
    let (w, h) = (image.width(), image.height());
    if let Some(&(x, y)) = curve
        .pixels()
        .iter()
        .find(|&&(x, y)| x as usize >= w || y as usize >= h)
    {
        return Err(Error::Argument(format!(
            "curve pixel ({x}, {y}) outside {w}x{h} image"
        )));
    }
    Ok(trace_unchecked(image, curve))
}

#[inline]
fn trace_unchecked(image: &GrayImage, curve: &Curve) -> ExtremaPair {
    let (w, data) = (image.width(), image.data());
    let (mut lo, mut hi) = (u8::MAX, u8::MIN);
    for &(x, y) in curve.pixels() {
        let v = data[y as usize * w + x as usize];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    ExtremaPair { min: lo, max: hi }
}

/// Traces every curve and returns the pairs sorted.
///
/// Curves must already be known to lie inside the image.
pub fn accumulate<'a>(image: &GrayImage, curves: impl IntoIterator<Item = &'a Curve>) -> Vec<ExtremaPair> {
    let mut pairs: Vec<ExtremaPair> = curves.into_iter().map(|c| trace_unchecked(image, c)).collect();
    pairs.sort_unstable();
    pairs
}

/// Hashes `image` with `program`.
///
/// With `per_image_seed`, a throwaway program with the same parameters but
/// that seed is used instead, modelling a camera that re-randomizes its
/// curves for every exposure. The fingerprint still records the digest of
/// the installed `program`.
pub fn fingerprint(
    image: &GrayImage,
    program: &CameraProgram,
    per_image_seed: Option<u64>,
) -> Result<Fingerprint> {
    if image.width() != program.width() || image.height() != program.height() {
        return Err(Error::Argument(format!(
            "image is {}x{} but program expects {}x{}",
            image.width(),
            image.height(),
            program.width(),
            program.height()
        )));
    }
    let pairs = match per_image_seed {
        None => accumulate(image, program.curves()),
        Some(seed) => accumulate(image, program.reseeded(seed)?.curves()),
    };
    Ok(Fingerprint {
        kind: program.kind(),
        pairs,
        program_digest: program.digest(),
        randomized: per_image_seed.is_some(),
    })
}
