//! Localisation-by-retrieval protocol.
//!
//! Every `stride`-th frame of a trajectory is indexed, the rest are queried,
//! and a query counts as localised when its best match lies within
//! `tolerance` frames of the truth. Sweeps run over curve count, curve kind,
//! and fixed versus per-image-random curve sets.

pub mod baseline;
pub mod synthetic;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::curves::{gen_program, CurveKind};
use crate::error::{Error, Result};
use crate::hashing::{fingerprint, Fingerprint};
use crate::imaging::{load_grayscale, GrayImage};
use crate::localisation::kmeans::{self, nearest};
use crate::localisation::{build_index, distinct_pairs, query, train_codebook, WordIndex, DEFAULT_K};
use crate::par;
use crate::rng::derive_seed;

pub use baseline::baseline_descriptors;

/// Whether each frame is hashed with the installed program or a fresh one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Fixed,
    Random,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fixed => "fixed",
            Mode::Random => "random",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(Mode::Fixed),
            "random" | "per-image-random" | "per_image_random" => Ok(Mode::Random),
            other => Err(Error::Argument(format!("unknown mode `{other}`"))),
        }
    }
}

/// Which frames are presented as queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QuerySet {
    /// Frames not in the index (the normal protocol).
    #[default]
    Test,
    /// The indexed frames themselves.
    Train,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub stride: usize,
    pub tolerance: usize,
    pub n_values: Vec<usize>,
    pub curve_kinds: Vec<CurveKind>,
    pub modes: Vec<Mode>,
    pub k: usize,
    pub seed: u64,
    /// Circle radius range; `None` uses the program default.
    pub radius: Option<(u32, u32)>,
    pub queries: QuerySet,
    /// Append a SIFT-lite row.
    pub baseline: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            stride: 20,
            tolerance: 30,
            n_values: vec![4, 16, 64, 256, 1024, 4096],
            curve_kinds: vec![CurveKind::Circle],
            modes: vec![Mode::Fixed],
            k: DEFAULT_K,
            seed: 0,
            radius: None,
            queries: QuerySet::Test,
            baseline: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::Argument("stride must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.curve_kinds.is_empty() || self.modes.is_empty() {
            return Err(Error::Argument("n values, curve kinds and modes must be non-empty".into()));
        }
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryOutcome {
    pub query_id: u32,
    pub predicted_id: u32,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    /// `line`, `circle` or `sift-lite`.
    pub kind: String,
    pub mode: String,
    pub n: usize,
    /// Vocabulary size actually trained (may be below the requested size
    /// when the training set has fewer distinct points).
    pub k: usize,
    pub correct: usize,
    pub queries: usize,
    pub seed: u64,
    pub outcomes: Vec<QueryOutcome>,
}

impl EvalRow {
    /// `correct / queries`, or 0 when there were no queries.
    pub fn accuracy(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.correct as f64 / self.queries as f64
        }
    }

    pub fn per_query_csv(&self) -> String {
        let mut out = String::from("query_id,predicted_id,correct\n");
        for o in &self.outcomes {
            let _ = writeln!(out, "{},{},{}", o.query_id, o.predicted_id, o.correct as u8);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub frames: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,mode,n,k,accuracy,queries,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.kind,
                r.mode,
                r.n,
                r.k,
                r.accuracy(),
                r.queries,
                r.seed
            );
        }
        out
    }

    pub fn row(&self, kind: &str, mode: Mode, n: usize) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.mode == mode.name() && r.n == n)
    }
}

/// Training frames `0, stride, 2*stride, ...` and the remaining test frames.
pub fn split_trajectory(frame_count: usize, stride: usize) -> (Vec<usize>, Vec<usize>) {
    let stride = stride.max(1);
    (0..frame_count).partition(|i| i % stride == 0)
}

pub fn is_correct(predicted_id: usize, true_id: usize, tolerance: usize) -> bool {
    predicted_id.abs_diff(true_id) <= tolerance
}

/// Compares file names with digit runs ordered numerically.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(p), Some(q)) if p.is_ascii_digit() && q.is_ascii_digit() => {
                let run = |s: &[u8]| s.iter().take_while(|c| c.is_ascii_digit()).count();
                let (lx, ly) = (run(x), run(y));
                let trim = |s: &[u8]| {
                    let z = s.iter().take_while(|&&c| c == b'0').count();
                    s[z..].to_vec()
                };
                let (dx, dy) = (trim(&x[..lx]), trim(&y[..ly]));
                let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(&dy));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[lx..];
                y = &y[ly..];
            }
            (Some(p), Some(q)) => {
                if p != q {
                    return p.cmp(q);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

/// PNG and PGM files in `dir`, naturally sorted by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "pgm")) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| {
        let name = |p: &PathBuf| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        natural_cmp(&name(a), &name(b))
    });
    Ok(files)
}

/// Loads a trajectory directory in natural filename order.
pub fn load_frames(dir: &Path) -> Result<Vec<GrayImage>> {
    let files = list_frames(dir)?;
    if files.is_empty() {
        return Err(Error::Dataset(format!("no PNG or PGM frames in {}", dir.display())));
    }
    par::map(&files, |p| load_grayscale(p)).into_iter().collect()
}

/// Runs the sweep over a directory of frames.
pub fn evaluate(dataset_dir: &Path, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let frames = load_frames(dataset_dir)?;
    let mut report = evaluate_frames(&frames, config)?;
    report.dataset = dataset_dir.display().to_string();
    Ok(report)
}

/// Runs the sweep over frames already in memory, in trajectory order.
///
/// Rows come out in kind, mode, n order, followed by the baseline if
/// requested.
pub fn evaluate_frames(frames: &[GrayImage], config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let first = frames
        .first()
        .ok_or_else(|| Error::Dataset("trajectory has no frames".into()))?;
    let (w, h) = (first.width(), first.height());
    if let Some(i) = frames.iter().position(|f| f.width() != w || f.height() != h) {
        return Err(Error::Dataset(format!(
            "frame {i} is {}x{}, expected {w}x{h}",
            frames[i].width(),
            frames[i].height()
        )));
    }
    let (train, test) = split_trajectory(frames.len(), config.stride);
    let queries = match config.queries {
        QuerySet::Test => test,
        QuerySet::Train => train.clone(),
    };

    let mut rows = Vec::new();
    for &kind in &config.curve_kinds {
        for &mode in &config.modes {
            for &n in &config.n_values {
                rows.push(run_hash_row(frames, config, kind, mode, n, &train, &queries)?);
            }
        }
    }
    if config.baseline {
        rows.push(run_baseline_row(frames, config, &train, &queries)?);
    }
    Ok(EvalReport {
        dataset: "in-memory".into(),
        frames: frames.len(),
        rows,
    })
}

/// Seed of the throwaway program for frame `index` in random mode.
pub fn per_image_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Fingerprints every frame; results are in frame order.
pub fn fingerprint_frames(
    frames: &[GrayImage],
    program: &crate::CameraProgram,
    mode: Mode,
    seed: u64,
) -> Result<Vec<Fingerprint>> {
    par::map_range(frames.len(), |i| {
        let reseed = (mode == Mode::Random).then(|| per_image_seed(seed, i));
        fingerprint(&frames[i], program, reseed)
    })
    .into_iter()
    .collect()
}

fn score(
    config: &EvalConfig,
    queries: &[usize],
    predict: impl Fn(usize) -> Result<u32> + Sync + Send,
) -> Result<(usize, Vec<QueryOutcome>)> {
    let outcomes = par::map(queries, |&q| {
        predict(q).map(|p| QueryOutcome {
            query_id: q as u32,
            predicted_id: p,
            correct: is_correct(p as usize, q, config.tolerance),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((outcomes.iter().filter(|o| o.correct).count(), outcomes))
}

fn run_hash_row(
    frames: &[GrayImage],
    config: &EvalConfig,
    kind: CurveKind,
    mode: Mode,
    n: usize,
    train: &[usize],
    queries: &[usize],
) -> Result<EvalRow> {
    let (w, h) = (frames[0].width(), frames[0].height());
    let radius = match kind {
        CurveKind::Circle => config.radius,
        CurveKind::Line => None,
    };
    let program = gen_program(kind, n, w, h, config.seed, radius)?;
    let fps = fingerprint_frames(frames, &program, mode, config.seed)?;
    let train_fps: Vec<&Fingerprint> = train.iter().map(|&i| &fps[i]).collect();
    let k = config.k.min(distinct_pairs(train_fps.iter().copied()));
    if k == 0 {
        return Err(Error::Degenerate("training frames produced no extrema pairs".into()));
    }
    let codebook = train_codebook(train_fps.iter().copied(), k, config.seed)?;
    let index = build_index(train.iter().map(|&i| (i as u32, &fps[i])), &codebook)?
        .with_stride(config.stride);
    let (correct, outcomes) = score(config, queries, |q| Ok(query(&index, &fps[q], 1)?[0].0))?;
    Ok(EvalRow {
        kind: kind.name().into(),
        mode: mode.name().into(),
        n,
        k,
        correct,
        queries: queries.len(),
        seed: config.seed,
        outcomes,
    })
}

fn run_baseline_row(
    frames: &[GrayImage],
    config: &EvalConfig,
    train: &[usize],
    queries: &[usize],
) -> Result<EvalRow> {
    let features = par::map(frames, baseline_descriptors)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // Collapse identical descriptors into weights for k-means seeding.
    let mut slots: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &i in train {
        for f in &features[i] {
            let key: Vec<u64> = f.descriptor.iter().map(|v| v.to_bits()).collect();
            let slot = *slots.entry(key).or_insert_with(|| {
                points.extend_from_slice(&f.descriptor);
                weights.push(0.0);
                weights.len() - 1
            });
            weights[slot] += 1.0;
        }
    }
    let k = config.k.min(weights.len());
    if k == 0 {
        return Err(Error::Degenerate("training frames produced no baseline features".into()));
    }
    let dim = baseline::DESCRIPTOR_LEN;
    let centroids = kmeans::kmeans(&points, &weights, dim, k, config.seed)?.centroids;
    let words = |i: usize| {
        let mut hist = vec![0u32; k];
        for f in &features[i] {
            hist[nearest(&f.descriptor, &centroids, dim).0] += 1;
        }
        hist
    };
    let index = WordIndex::build(k, train.iter().map(|&i| (i as u32, words(i))).collect())?;
    let (correct, outcomes) = score(config, queries, |q| Ok(index.query_counts(&words(q), 1)?[0].0))?;
    Ok(EvalRow {
        kind: "sift-lite".into(),
        mode: Mode::Fixed.name().into(),
        n: baseline::MAX_KEYPOINTS,
        k,
        correct,
        queries: queries.len(),
        seed: config.seed,
        outcomes,
    })
}
