//! Random curve sets: the fixed mask sequence of the simulated camera.
//!
//! A [`CameraProgram`] is generated once from a seed and never mutated. Its
//! serialized form carries the seed, so loading regenerates the curves and
//! rejects any file whose stored curves disagree.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fnv1a64;
use crate::rng::SplitMix64;

pub const PROGRAM_MAGIC: &[u8; 4] = b"OAPG";
pub const PROGRAM_VERSION: u8 = 1;
/// magic + version + kind + n + width + height + seed + r_min + r_max
pub const PROGRAM_HEADER_LEN: usize = 4 + 1 + 1 + 4 + 4 + 4 + 8 + 2 + 2;

/// Radius range used when a circle program is requested without one.
pub const DEFAULT_RADIUS: (u32, u32) = (15, 50);

const MAX_DIM: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurveKind {
    Line,
    Circle,
}

impl CurveKind {
    pub fn code(self) -> u8 {
        match self {
            CurveKind::Line => 1,
            CurveKind::Circle => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(CurveKind::Line),
            2 => Some(CurveKind::Circle),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Line => "line",
            CurveKind::Circle => "circle",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" | "lines" => Ok(CurveKind::Line),
            "circle" | "circles" => Ok(CurveKind::Circle),
            other => Err(Error::Argument(format!("unknown curve kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometric parameters of one curve, in integer pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveShape {
    Line { x0: u32, y0: u32, x1: u32, y1: u32 },
    Circle { cx: u32, cy: u32, r: u32 },
}

impl CurveShape {
    pub fn kind(&self) -> CurveKind {
        match self {
            CurveShape::Line { .. } => CurveKind::Line,
            CurveShape::Circle { .. } => CurveKind::Circle,
        }
    }
}

/// A curve together with its rasterized support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Curve {
    shape: CurveShape,
    pixels: Vec<(u32, u32)>,
}

impl Curve {
    pub fn new(shape: CurveShape, width: usize, height: usize) -> Result<Self> {
        let pixels = rasterize(shape, width, height)?;
        Ok(Self { shape, pixels })
    }

    pub fn shape(&self) -> CurveShape {
        self.shape
    }

    /// Rasterized pixels in trace order.
    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }
}

/// Immutable set of curves plus everything needed to regenerate it.
#[derive(Clone, Debug)]
pub struct CameraProgram {
    kind: CurveKind,
    width: usize,
    height: usize,
    seed: u64,
    radius: Option<(u32, u32)>,
    curves: Vec<Curve>,
    digest: u64,
}

impl PartialEq for CameraProgram {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.width == other.width
            && self.height == other.height
            && self.seed == other.seed
            && self.radius == other.radius
            && self.curves == other.curves
    }
}

impl Eq for CameraProgram {}

impl CameraProgram {
    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(r_min, r_max)` for circle programs.
    pub fn radius_range(&self) -> Option<(u32, u32)> {
        self.radius
    }

    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    /// FNV-1a 64 of the serialized program.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    /// A program with the same parameters but a different seed.
    pub fn reseeded(&self, seed: u64) -> Result<CameraProgram> {
        gen_program(self.kind, self.n(), self.width, self.height, seed, self.radius)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_program(self.kind, self.width, self.height, self.seed, self.radius, &self.curves)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        load_program(bytes)
    }
}

/// Generates `n` random curves for a `width`×`height` frame.
///
/// Lines join two distinct pixels drawn uniformly from the frame boundary.
/// Circles draw a radius uniformly from `radius` (default
/// [`DEFAULT_RADIUS`]) and then a centre uniformly among positions that keep
/// the whole circle inside the frame.
pub fn gen_program(
    kind: CurveKind,
    n: usize,
    width: usize,
    height: usize,
    seed: u64,
    radius: Option<(u32, u32)>,
) -> Result<CameraProgram> {
    if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
        return Err(Error::Argument(format!(
            "frame {width}x{height} outside 1..={MAX_DIM} per axis"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::Argument(format!("too many curves ({n})")));
    }
    let radius = match (kind, radius) {
        (CurveKind::Line, Some(_)) => {
            return Err(Error::Argument("radius range given for a line program".into()))
        }
        (CurveKind::Line, None) => None,
        (CurveKind::Circle, r) => {
            let (r_min, r_max) = r.unwrap_or(DEFAULT_RADIUS);
            if r_min < 1 || r_min > r_max || r_max > u16::MAX as u32 {
                return Err(Error::Argument(format!(
                    "radius range [{r_min}, {r_max}] must satisfy 1 <= r_min <= r_max <= 65535"
                )));
            }
            if 2 * r_max as usize >= width.min(height) {
                return Err(Error::Argument(format!(
                    "r_max {r_max} does not fit a {width}x{height} frame (need 2*r_max < {})",
                    width.min(height)
                )));
            }
            Some((r_min, r_max))
        }
    };

    let mut rng = SplitMix64::new(seed);
    let mut curves = Vec::with_capacity(n);
    match kind {
        CurveKind::Line => {
            let perimeter = perimeter_len(width, height);
            if n > 0 && perimeter < 2 {
                return Err(Error::Argument(format!(
                    "a {width}x{height} frame has no two distinct boundary pixels"
                )));
            }
            for _ in 0..n {
                let a = rng.below(perimeter);
                let mut b = rng.below(perimeter);
                while b == a {
                    b = rng.below(perimeter);
                }
                let (x0, y0) = perimeter_point(a, width, height);
                let (x1, y1) = perimeter_point(b, width, height);
                curves.push(Curve::new(CurveShape::Line { x0, y0, x1, y1 }, width, height)?);
            }
        }
        CurveKind::Circle => {
            let (r_min, r_max) = radius.expect("validated above");
            let mut offsets: Vec<Option<Vec<(i64, i64)>>> = vec![None; (r_max - r_min + 1) as usize];
            for _ in 0..n {
                let r = r_min + rng.below((r_max - r_min + 1) as u64) as u32;
                let cx = r + rng.below((width - 2 * r as usize) as u64) as u32;
                let cy = r + rng.below((height - 2 * r as usize) as u64) as u32;
                let ring = offsets[(r - r_min) as usize].get_or_insert_with(|| midpoint_circle(r as i64));
                let pixels = ring
                    .iter()
                    .map(|&(dx, dy)| ((cx as i64 + dx) as u32, (cy as i64 + dy) as u32))
                    .collect();
                curves.push(Curve {
                    shape: CurveShape::Circle { cx, cy, r },
                    pixels,
                });
            }
        }
    }
    let digest = fnv1a64(&encode_program(kind, width, height, seed, radius, &curves));
    Ok(CameraProgram {
        kind,
        width,
        height,
        seed,
        radius,
        curves,
        digest,
    })
}

fn perimeter_len(width: usize, height: usize) -> u64 {
    if width == 1 || height == 1 {
        (width * height) as u64
    } else {
        2 * (width + height) as u64 - 4
    }
}

/// Maps a perimeter index to a boundary pixel, walking clockwise from the
/// top-left corner: top edge, right edge, bottom edge, left edge.
fn perimeter_point(t: u64, width: usize, height: usize) -> (u32, u32) {
    let (w, h) = (width as u64, height as u64);
    if w == 1 || h == 1 {
        return ((t % w) as u32, (t / w) as u32);
    }
    let p = if t < w {
        (t, 0)
    } else if t < w + h - 1 {
        (w - 1, t - w + 1)
    } else if t < 2 * w + h - 2 {
        (w - 2 - (t - (w + h - 1)), h - 1)
    } else {
        (0, h - 2 - (t - (2 * w + h - 2)))
    };
    (p.0 as u32, p.1 as u32)
}

/// Rasterizes a curve into the pixels it covers.
///
/// Lines use integer Bresenham from `(x0, y0)` to `(x1, y1)`, endpoints
/// included. Circles use the integer midpoint algorithm (decision variable
/// starting at `1 - r`); the eight symmetric copies are de-duplicated and
/// sorted clockwise as displayed (y down), starting due east.
pub fn rasterize(shape: CurveShape, width: usize, height: usize) -> Result<Vec<(u32, u32)>> {
    match shape {
        CurveShape::Line { x0, y0, x1, y1 } => {
            for (x, y) in [(x0, y0), (x1, y1)] {
                if x as usize >= width || y as usize >= height {
                    return Err(Error::Argument(format!(
                        "line endpoint ({x}, {y}) outside {width}x{height} frame"
                    )));
                }
            }
            Ok(bresenham(x0 as i64, y0 as i64, x1 as i64, y1 as i64))
        }
        CurveShape::Circle { cx, cy, r } => {
            let (cx, cy, r) = (cx as usize, cy as usize, r as usize);
            if cx < r || cy < r || cx + r >= width || cy + r >= height {
                return Err(Error::Argument(format!(
                    "circle ({cx}, {cy}) r={r} not contained in {width}x{height} frame"
                )));
            }
            Ok(midpoint_circle(r as i64)
                .into_iter()
                .map(|(dx, dy)| ((cx as i64 + dx) as u32, (cy as i64 + dy) as u32))
                .collect())
        }
    }
}

fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(u32, u32)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x as u32, y as u32));
        if x == x1 && y == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Offsets of a radius-`r` midpoint circle, clockwise from east.
fn midpoint_circle(r: i64) -> Vec<(i64, i64)> {
    let mut pts = Vec::with_capacity(8 * r as usize + 8);
    let (mut x, mut y, mut d) = (0i64, r, 1 - r);
    while x <= y {
        for (a, b) in [(x, y), (y, x)] {
            pts.extend_from_slice(&[(a, b), (-a, b), (a, -b), (-a, -b)]);
        }
        if d < 0 {
            d += 2 * x + 3;
        } else {
            d += 2 * (x - y) + 5;
            y -= 1;
        }
        x += 1;
    }
    pts.sort_unstable_by(|&p, &q| clockwise_cmp(p, q));
    pts.dedup();
    pts
}

/// Exact angular order of offsets, angle measured from +x towards +y
/// (clockwise on screen).
fn clockwise_cmp(p: (i64, i64), q: (i64, i64)) -> Ordering {
    let half = |(x, y): (i64, i64)| if y > 0 || (y == 0 && x > 0) { 0 } else { 1 };
    half(p).cmp(&half(q)).then_with(|| {
        let cross = p.0 * q.1 - p.1 * q.0;
        0.cmp(&cross).then_with(|| (p.0 * p.0 + p.1 * p.1).cmp(&(q.0 * q.0 + q.1 * q.1)))
    })
}

fn encode_program(
    kind: CurveKind,
    width: usize,
    height: usize,
    seed: u64,
    radius: Option<(u32, u32)>,
    curves: &[Curve],
) -> Vec<u8> {
    let per_curve = match kind {
        CurveKind::Line => 8,
        CurveKind::Circle => 6,
    };
    let mut out = Vec::with_capacity(PROGRAM_HEADER_LEN + per_curve * curves.len());
    out.extend_from_slice(PROGRAM_MAGIC);
    out.push(PROGRAM_VERSION);
    out.push(kind.code());
    out.extend_from_slice(&(curves.len() as u32).to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    let (r_min, r_max) = radius.unwrap_or((0, 0));
    out.extend_from_slice(&(r_min as u16).to_le_bytes());
    out.extend_from_slice(&(r_max as u16).to_le_bytes());
    for c in curves {
        let fields: &[u32] = match c.shape {
            CurveShape::Line { x0, y0, x1, y1 } => &[x0, y0, x1, y1],
            CurveShape::Circle { cx, cy, r } => &[cx, cy, r],
        };
        for &v in fields {
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
    }
    out
}

/// Parses a program file and checks it against regeneration from its seed.
pub fn load_program(bytes: &[u8]) -> Result<CameraProgram> {
    if bytes.len() < PROGRAM_HEADER_LEN {
        return Err(Error::Format(format!(
            "program file is {} bytes, shorter than the {PROGRAM_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != PROGRAM_MAGIC {
        return Err(Error::Format("bad program magic".into()));
    }
    if bytes[4] != PROGRAM_VERSION {
        return Err(Error::Format(format!("unsupported program version {}", bytes[4])));
    }
    let kind = CurveKind::from_code(bytes[5])
        .ok_or_else(|| Error::Format(format!("unknown curve kind code {}", bytes[5])))?;
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let n = u32_at(6) as usize;
    let width = u32_at(10) as usize;
    let height = u32_at(14) as usize;
    let seed = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let (r_min, r_max) = (u16_at(26) as u32, u16_at(28) as u32);
    let per_curve = match kind {
        CurveKind::Line => 8,
        CurveKind::Circle => 6,
    };
    let expected = n
        .checked_mul(per_curve)
        .and_then(|b| b.checked_add(PROGRAM_HEADER_LEN))
        .ok_or_else(|| Error::Format("curve count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "program file is {} bytes, header promises {expected}",
            bytes.len()
        )));
    }
    let radius = match kind {
        CurveKind::Line if r_min != 0 || r_max != 0 => {
            return Err(Error::Format("line program with non-zero radius fields".into()))
        }
        CurveKind::Line => None,
        CurveKind::Circle => Some((r_min, r_max)),
    };
    let program = gen_program(kind, n, width, height, seed, radius)
        .map_err(|e| Error::Format(format!("invalid program parameters: {e}")))?;
    let regenerated = program.to_bytes();
    if let Some(pos) = regenerated.iter().zip(bytes).position(|(a, b)| a != b) {
        let curve = (pos - PROGRAM_HEADER_LEN) / per_curve;
        return Err(Error::Integrity(format!(
            "curve {curve} does not match regeneration from seed {seed}"
        )));
    }
    Ok(program)
}
