use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oacam::evaluation::Mode;
use oacam::CurveKind;

/// Simulated optical-analogue hashing camera: curve programs, extrema
/// fingerprints, bag-of-words localisation and privacy reports.
///
/// Relative output paths are resolved against $OACAM_OUT_DIR when it is set.
/// Exit status is 0 on success, 1 on usage errors and 2 on data or
/// integrity errors.
#[derive(Parser, Debug)]
#[command(name = "oacam", version, args_override_self = true)]
pub struct Cli {
    /// TOML file of default flag values for the subcommand, keyed by long
    /// flag name (e.g. `stride = 20`, `n = [4, 16, 64]`). Flags given on the
    /// command line win; unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Camera program files
    #[command(subcommand)]
    Program(ProgramCmd),
    /// Fingerprint one image or a directory of images
    Hash(HashArgs),
    /// Retrieval index files
    #[command(subcommand)]
    Index(IndexCmd),
    /// Rank indexed images against query fingerprints
    Query(QueryArgs),
    /// Localisation experiments
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Render fingerprints and coverage
    #[command(subcommand)]
    Viz(VizCmd),
    /// Count hash collisions over a tiny image space
    Census(CensusArgs),
    /// Check that a fingerprint file holds only sorted extrema pairs
    Audit(AuditArgs),
    /// Generate synthetic test data
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Subcommand, Debug)]
pub enum ProgramCmd {
    /// Generate a program file (magic OAPG, little-endian, 30-byte header
    /// then u16 curve parameters)
    Gen(ProgramGenArgs),
}

#[derive(Subcommand, Debug)]
pub enum IndexCmd {
    /// Train a codebook on reference fingerprints and write an index file
    /// (magic OACB)
    Build(IndexBuildArgs),
}

#[derive(Subcommand, Debug)]
pub enum EvalCmd {
    /// Sweep curve count, kind and mode over a trajectory directory and
    /// write CSV `kind,mode,n,k,accuracy,queries,seed`
    Sweep(SweepArgs),
}

#[derive(Subcommand, Debug)]
pub enum VizCmd {
    /// Render a fingerprint's (min, max) density as PGM (rows = min,
    /// columns = max) and optionally CSV `row,col,value`
    Kde(KdeArgs),
    /// Mark where each curve's extrema were observed (PGM mask) and compare
    /// sampled and full intensity histograms
    Coverage(CoverageArgs),
}

#[derive(Subcommand, Debug)]
pub enum SynthCmd {
    /// Write a panning trajectory over a textured mosaic as
    /// frame_0000.pgm, frame_0001.pgm, ...
    Trajectory(TrajectoryArgs),
    /// Write a fixture image as PGM
    Image(SynthImageArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Line,
    Circle,
}

impl From<KindArg> for CurveKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Line => CurveKind::Line,
            KindArg::Circle => CurveKind::Circle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Fixed,
    Random,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fixed => Mode::Fixed,
            ModeArg::Random => Mode::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueriesArg {
    /// Frames left out of the index
    Test,
    /// The indexed frames themselves
    Train,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Constant,
    Hramp,
    Vramp,
    Checker,
}

/// Circle radius bounds shared by program-generating commands.
#[derive(Args, Debug, Clone, Copy)]
pub struct RadiusArgs {
    /// Smallest circle radius in pixels (circles only; default 15)
    #[arg(long)]
    pub rmin: Option<u32>,
    /// Largest circle radius in pixels (circles only; default 50)
    #[arg(long)]
    pub rmax: Option<u32>,
}

#[derive(Args, Debug)]
pub struct ProgramGenArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Number of curves
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[command(flatten)]
    pub radius: RadiusArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output program file
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct HashArgs {
    /// Program file
    #[arg(long)]
    pub program: PathBuf,
    /// Single PNG or PGM image; writes `--output`
    #[arg(long, conflicts_with = "dir", required_unless_present = "dir", requires = "output")]
    pub image: Option<PathBuf>,
    /// Directory of PNG/PGM images; writes `<stem>.oahf` into `--out-dir`
    #[arg(long, requires = "out_dir")]
    pub dir: Option<PathBuf>,
    /// Output fingerprint file (magic OAHF, 20-byte header then n sorted
    /// (min, max) byte pairs)
    #[arg(short = 'o', long, conflicts_with = "dir")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-draw the curves for every image from this seed instead of using
    /// the installed ones. In directory mode image i uses a seed derived
    /// from this value and i.
    #[arg(long)]
    pub per_image_seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IndexBuildArgs {
    /// Directory of reference fingerprint files (*.oahf). Image ids come
    /// from the trailing digits of each file stem, else the file position.
    #[arg(long)]
    pub dir: PathBuf,
    /// Index every stride-th file in natural name order
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Codebook size (reduced to the number of distinct training pairs when
    /// smaller)
    #[arg(long, default_value_t = oacam::localisation::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Query fingerprint file; repeat for several
    #[arg(long = "fingerprint", required = true)]
    pub fingerprints: Vec<PathBuf>,
    /// Hits to report per query
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// CSV `query,rank,image_id,score`
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Trajectory directory of equally sized PNG/PGM frames, naturally sorted
    #[arg(long)]
    pub dir: PathBuf,
    /// Every stride-th frame is indexed, the rest are queries
    #[arg(long, default_value_t = 20)]
    pub stride: usize,
    /// A query is correct when its top hit is within this many frames
    #[arg(long, default_value_t = 30)]
    pub tolerance: usize,
    /// Curve counts, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [4, 16, 64, 256, 1024, 4096])]
    pub n: Vec<usize>,
    /// Curve kinds, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KindArg::Circle])]
    pub kind: Vec<KindArg>,
    /// Fixed program or per-image random curves, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Fixed])]
    pub mode: Vec<ModeArg>,
    /// Codebook size
    #[arg(long, default_value_t = oacam::localisation::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub radius: RadiusArgs,
    #[arg(long, value_enum, default_value_t = QueriesArg::Test)]
    pub queries: QueriesArg,
    /// Append a keypoint-descriptor baseline row (kind `sift-lite`)
    #[arg(long)]
    pub baseline: bool,
    /// Directory for per-row CSVs `query_id,predicted_id,correct`
    #[arg(long)]
    pub per_query: Option<PathBuf>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct KdeArgs {
    #[arg(long)]
    pub fingerprint: PathBuf,
    /// Grid cells per axis
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Gaussian bandwidth in intensity units (default: Silverman's rule)
    #[arg(long, conflicts_with = "raw")]
    pub bandwidth: Option<f64>,
    /// Plain 2-D histogram instead of a kernel density
    #[arg(long)]
    pub raw: bool,
    /// Output PGM, scaled so the largest cell is 255
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    /// Also write the grid as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoverageArgs {
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Output PGM mask (255 where an extremum was observed)
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    /// CSV `intensity,sampled,full`
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    #[arg(long, default_value_t = 3)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub height: usize,
    /// Evenly spaced intensities per pixel
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Existing program file; otherwise one is generated from the flags below
    #[arg(long, conflicts_with_all = ["kind", "n", "seed", "rmin", "rmax"])]
    pub program: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindArg::Line)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub radius: RadiusArgs,
    /// Sample this many random images instead of enumerating the space;
    /// counts become lower bounds
    #[arg(long)]
    pub samples: Option<u64>,
    /// Seed for `--samples`
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
    /// Report file (CSV-style key,value lines)
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long)]
    pub fingerprint: PathBuf,
    /// Source image width, for the payload-to-pixel ratio
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
    /// Horizontal shift between frames in pixels
    #[arg(long, default_value_t = 4)]
    pub step: usize,
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthImageArgs {
    #[arg(long, value_enum)]
    pub pattern: PatternArg,
    /// Gray level for `constant`
    #[arg(long, default_value_t = 128)]
    pub value: u8,
    /// Block side for `checker`
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}
