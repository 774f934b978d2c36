use std::collections::HashSet;
use std::path::{Path, PathBuf};

use oacam::curves::{gen_program, load_program, DEFAULT_RADIUS};
use oacam::evaluation::{self, natural_cmp, per_image_seed, synthetic::Trajectory, EvalConfig, QuerySet};
use oacam::hashing::{fingerprint, histogram2d, kde_render};
use oacam::imaging::{load_grayscale, synth_image, Synth};
use oacam::localisation::{build_index, distinct_pairs, query, train_codebook};
use oacam::privacy::{collision_census, collision_census_sampled, coverage_map, leak_audit};
use oacam::{par, CameraProgram, Error, Fingerprint, RetrievalIndex};

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Environment variable naming the directory for relative output paths.
pub const OUT_DIR_ENV: &str = "OACAM_OUT_DIR";

pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Program(ProgramCmd::Gen(a)) => program_gen(a),
        Command::Hash(a) => hash(a),
        Command::Index(IndexCmd::Build(a)) => index_build(a),
        Command::Query(a) => run_query(a),
        Command::Eval(EvalCmd::Sweep(a)) => eval_sweep(a),
        Command::Viz(VizCmd::Kde(a)) => viz_kde(a),
        Command::Viz(VizCmd::Coverage(a)) => viz_coverage(a),
        Command::Census(a) => census(a),
        Command::Audit(a) => audit(a),
        Command::Synth(SynthCmd::Trajectory(a)) => synth_trajectory(a),
        Command::Synth(SynthCmd::Image(a)) => synth_fixture(a),
    }
}

fn core_at(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |source| CliError::Core(match source {
        Error::Io { .. } => source,
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Integrity(m) => Error::Integrity(format!("{}: {m}", path.display())),
        Error::Dataset(m) => Error::Dataset(format!("{}: {m}", path.display())),
        Error::EmptyInput(m) => Error::EmptyInput(format!("{}: {m}", path.display())),
        Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn missing(path: &Path, what: &str) -> CliError {
    io_error(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
    )
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Resolved output file path whose directory already exists.
fn output_file(path: &Path) -> Result<PathBuf> {
    let path = resolve_output(path);
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(missing(parent, "output directory"));
    }
    if path.is_dir() {
        return Err(CliError::Usage(format!("output {} is a directory", path.display())));
    }
    Ok(path)
}

/// Resolved output directory, created if needed.
fn output_dir(path: &Path) -> Result<PathBuf> {
    let path = resolve_output(path);
    std::fs::create_dir_all(&path).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn input_file(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(missing(path, "input file"))
    }
}

fn input_dir(path: &Path) -> Result<&Path> {
    if path.is_dir() {
        Ok(path)
    } else {
        Err(missing(path, "input directory"))
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn read_program(path: &Path) -> Result<CameraProgram> {
    load_program(&read(path)?).map_err(core_at(path))
}

fn read_fingerprint(path: &Path) -> Result<Fingerprint> {
    Fingerprint::from_bytes(&read(path)?).map_err(core_at(path))
}

fn radius(kind: KindArg, r: RadiusArgs) -> Option<(u32, u32)> {
    match (kind, r.rmin, r.rmax) {
        (_, None, None) => None,
        (KindArg::Line, _, _) => Some((r.rmin.unwrap_or(0), r.rmax.unwrap_or(0))),
        (KindArg::Circle, a, b) => Some((a.unwrap_or(DEFAULT_RADIUS.0), b.unwrap_or(DEFAULT_RADIUS.1))),
    }
}

fn describe_program(p: &CameraProgram) -> String {
    let mut s = format!(
        "{} program n={} {}x{} seed={}",
        p.kind(),
        p.n(),
        p.width(),
        p.height(),
        p.seed()
    );
    if let Some((lo, hi)) = p.radius_range() {
        s.push_str(&format!(" r=[{lo},{hi}]"));
    }
    s
}

fn program_gen(a: ProgramGenArgs) -> Result<String> {
    let out = output_file(&a.output)?;
    let program = gen_program(
        a.kind.into(),
        a.n,
        a.width,
        a.height,
        a.seed,
        radius(a.kind, a.radius),
    )?;
    write(&out, program.to_bytes())?;
    Ok(format!(
        "wrote {} digest={:016x} -> {}",
        describe_program(&program),
        program.digest(),
        out.display()
    ))
}

fn hash(a: HashArgs) -> Result<String> {
    if a.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let program_path = input_file(&a.program)?;
    let mode = if a.per_image_seed.is_some() { "random" } else { "fixed" };
    if let Some(image) = &a.image {
        let image = input_file(image)?;
        let out = output_file(a.output.as_deref().expect("clap requires --output"))?;
        let program = read_program(program_path)?;
        let img = load_grayscale(image).map_err(core_at(image))?;
        let fp = par::with_jobs(a.jobs, || fingerprint(&img, &program, a.per_image_seed))
            .map_err(core_at(image))?;
        write(&out, fp.to_bytes())?;
        return Ok(format!(
            "hashed 1 image with {} {} curves ({mode}) -> {}",
            program.n(),
            program.kind(),
            out.display()
        ));
    }

    let dir = input_dir(a.dir.as_deref().expect("clap requires --image or --dir"))?;
    let out_dir = output_dir(a.out_dir.as_deref().expect("clap requires --out-dir"))?;
    let program = read_program(program_path)?;
    let files = evaluation::list_frames(dir)?;
    if files.is_empty() {
        return Err(Error::Dataset(format!("no PNG or PGM images in {}", dir.display())).into());
    }
    let mut targets = Vec::with_capacity(files.len());
    let mut seen = HashSet::new();
    for f in &files {
        let stem = f.file_stem().unwrap_or_default().to_owned();
        if !seen.insert(stem.clone()) {
            return Err(CliError::Usage(format!(
                "two images in {} share the stem {}",
                dir.display(),
                stem.to_string_lossy()
            )));
        }
        let mut name = stem;
        name.push(".oahf");
        targets.push(out_dir.join(name));
    }
    let encoded: Vec<Result<Vec<u8>>> = par::with_jobs(a.jobs, || {
        par::map_range(files.len(), |i| {
            let img = load_grayscale(&files[i]).map_err(core_at(&files[i]))?;
            let reseed = a.per_image_seed.map(|s| per_image_seed(s, i));
            let fp = fingerprint(&img, &program, reseed).map_err(core_at(&files[i]))?;
            Ok(fp.to_bytes())
        })
    });
    for (bytes, target) in encoded.into_iter().zip(&targets) {
        write(target, bytes?)?;
    }
    Ok(format!(
        "hashed {} images with {} {} curves ({mode}) -> {}",
        files.len(),
        program.n(),
        program.kind(),
        out_dir.display()
    ))
}

/// Trailing decimal digits of a file stem.
fn trailing_id(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    stem[stem.len() - digits..].parse().ok()
}

fn index_build(a: IndexBuildArgs) -> Result<String> {
    if a.stride == 0 {
        return Err(CliError::Usage("--stride must be at least 1".into()));
    }
    let dir = input_dir(&a.dir)?;
    let out = output_file(&a.output)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("oahf")))
        .collect();
    files.sort_by(|x, y| {
        natural_cmp(
            &x.file_name().unwrap_or_default().to_string_lossy(),
            &y.file_name().unwrap_or_default().to_string_lossy(),
        )
    });
    let chosen: Vec<(usize, &PathBuf)> = files.iter().enumerate().step_by(a.stride).collect();
    if chosen.is_empty() {
        return Err(Error::Dataset(format!("no .oahf fingerprints in {}", dir.display())).into());
    }

    let mut ids = HashSet::new();
    let mut entries: Vec<(u32, Fingerprint, PathBuf)> = Vec::with_capacity(chosen.len());
    for (pos, path) in chosen {
        let fp = read_fingerprint(path)?;
        let id = trailing_id(path).unwrap_or(pos as u32);
        if !ids.insert(id) {
            return Err(Error::Integrity(format!("{}: duplicate image id {id}", path.display())).into());
        }
        if let Some((_, first, first_path)) = entries.first() {
            if fp.kind() != first.kind() || fp.program_digest() != first.program_digest() {
                return Err(Error::Integrity(format!(
                    "{} was made by a different program than {}",
                    path.display(),
                    first_path.display()
                ))
                .into());
            }
        }
        entries.push((id, fp, path.clone()));
    }

    let k = a.k.min(distinct_pairs(entries.iter().map(|e| &e.1)));
    if k == 0 {
        return Err(Error::Degenerate("reference fingerprints hold no extrema pairs".into()).into());
    }
    let codebook = train_codebook(entries.iter().map(|e| &e.1), k, a.seed)?;
    let index = build_index(entries.iter().map(|e| (e.0, &e.1)), &codebook)?;
    write(&out, index.to_bytes())?;
    Ok(format!(
        "indexed {} fingerprints with k={k} words (seed {}) -> {}",
        entries.len(),
        a.seed,
        out.display()
    ))
}

fn run_query(a: QueryArgs) -> Result<String> {
    if a.top == 0 {
        return Err(CliError::Usage("--top must be at least 1".into()));
    }
    let index_path = input_file(&a.index)?;
    for f in &a.fingerprints {
        input_file(f)?;
    }
    let out = a.output.as_deref().map(output_file).transpose()?;
    let index = RetrievalIndex::from_bytes(&read(index_path)?).map_err(core_at(index_path))?;
    let mut csv = String::from("query,rank,image_id,score\n");
    let mut best = None;
    for path in &a.fingerprints {
        let fp = read_fingerprint(path)?;
        let hits = query(&index, &fp, a.top).map_err(core_at(path))?;
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        for (rank, (id, score)) in hits.iter().enumerate() {
            csv.push_str(&format!("{name},{},{id},{score}\n", rank + 1));
        }
        if best.is_none() {
            best = hits.first().copied();
        }
    }
    if let Some(out) = &out {
        write(out, &csv)?;
    }
    let (id, score) = best.ok_or(Error::EmptyIndex)?;
    let mut summary = if a.fingerprints.len() == 1 {
        format!(
            "best match for {}: image {id} (score {score:.6}) among {} entries",
            a.fingerprints[0].display(),
            index.entries().len()
        )
    } else {
        format!(
            "ranked {} queries against {} entries",
            a.fingerprints.len(),
            index.entries().len()
        )
    };
    if let Some(out) = &out {
        summary.push_str(&format!(" -> {}", out.display()));
    }
    Ok(summary)
}

fn eval_sweep(a: SweepArgs) -> Result<String> {
    if a.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let dir = input_dir(&a.dir)?;
    let out = output_file(&a.output)?;
    let per_query = a.per_query.as_deref().map(output_dir).transpose()?;
    let radius = if a.kind.contains(&KindArg::Circle) {
        radius(KindArg::Circle, a.radius)
    } else {
        if a.radius.rmin.is_some() || a.radius.rmax.is_some() {
            return Err(CliError::Usage("--rmin/--rmax need --kind circle".into()));
        }
        None
    };
    let config = EvalConfig {
        stride: a.stride,
        tolerance: a.tolerance,
        n_values: a.n,
        curve_kinds: a.kind.into_iter().map(Into::into).collect(),
        modes: a.mode.into_iter().map(Into::into).collect(),
        k: a.k,
        seed: a.seed,
        radius,
        queries: match a.queries {
            QueriesArg::Test => QuerySet::Test,
            QueriesArg::Train => QuerySet::Train,
        },
        baseline: a.baseline,
    };
    config.validate()?;
    let report = par::with_jobs(a.jobs, || evaluation::evaluate(dir, &config))?;
    write(&out, report.to_csv())?;
    if let Some(pq) = &per_query {
        for row in &report.rows {
            let name = format!("{}_{}_n{}.csv", row.kind, row.mode, row.n);
            write(&pq.join(name), row.per_query_csv())?;
        }
    }
    let queries = report.rows.first().map_or(0, |r| r.queries);
    Ok(format!(
        "evaluated {} rows over {} frames ({queries} queries each, seed {}) -> {}",
        report.rows.len(),
        report.frames,
        a.seed,
        out.display()
    ))
}

fn viz_kde(a: KdeArgs) -> Result<String> {
    let fp_path = input_file(&a.fingerprint)?;
    let out = output_file(&a.output)?;
    let csv = a.csv.as_deref().map(output_file).transpose()?;
    let fp = read_fingerprint(fp_path)?;
    let (grid, what) = if a.raw {
        (histogram2d(&fp, a.resolution).map_err(core_at(fp_path))?, "histogram".to_string())
    } else {
        let bw = a.bandwidth.map_or("auto".to_string(), |b| b.to_string());
        (
            kde_render(&fp, a.resolution, a.bandwidth).map_err(core_at(fp_path))?,
            format!("kde (bandwidth {bw})"),
        )
    };
    write(&out, grid.to_pgm())?;
    if let Some(csv) = &csv {
        write(csv, grid.to_csv())?;
    }
    Ok(format!(
        "rendered {r}x{r} {what} of {} pairs -> {}",
        fp.n(),
        out.display(),
        r = grid.resolution()
    ))
}

fn viz_coverage(a: CoverageArgs) -> Result<String> {
    let program_path = input_file(&a.program)?;
    let image_path = input_file(&a.image)?;
    let out = output_file(&a.output)?;
    let csv = a.csv.as_deref().map(output_file).transpose()?;
    let program = read_program(program_path)?;
    let image = load_grayscale(image_path).map_err(core_at(image_path))?;
    let report = coverage_map(&image, &program)?;
    write(&out, report.mask_image().to_pgm())?;
    if let Some(csv) = &csv {
        write(csv, report.histograms_csv())?;
    }
    Ok(format!(
        "extrema of {} curves cover {} of {} pixels ({:.4}%), intensity TV divergence {:.4} -> {}",
        program.n(),
        report.mask_pixels(),
        report.extrema_mask.len(),
        100.0 * report.coverage(),
        report.divergence,
        out.display()
    ))
}

fn census(a: CensusArgs) -> Result<String> {
    let out = a.output.as_deref().map(output_file).transpose()?;
    let program = match &a.program {
        Some(p) => read_program(input_file(p)?)?,
        None => gen_program(
            a.kind.into(),
            a.n,
            a.width,
            a.height,
            a.seed,
            radius(a.kind, a.radius),
        )?,
    };
    let result = match a.samples {
        Some(s) => collision_census_sampled(a.width, a.height, a.levels, &program, s, a.sample_seed)?,
        None => collision_census(a.width, a.height, a.levels, &program)?,
    };
    if let Some(out) = &out {
        let header = format!(
            "# {} levels={} sample_seed={}\n",
            describe_program(&program),
            a.levels,
            a.sample_seed
        );
        write(out, header + &result.to_report())?;
    }
    let label = if result.exhaustive { "exhaustive" } else { "sampled, lower bounds" };
    Ok(format!(
        "census ({label}) levels={} {}: {} images, {} distinct hashes (ratio {:.6}), preimage size {}..={}",
        a.levels,
        describe_program(&program),
        result.image_space_size,
        result.distinct_hash_count,
        result.collision_ratio(),
        result.min_preimage_size,
        result.max_preimage_size
    ))
}

fn audit(a: AuditArgs) -> Result<String> {
    let path = input_file(&a.fingerprint)?;
    let out = a.output.as_deref().map(output_file).transpose()?;
    let size = a.width.zip(a.height);
    let result = leak_audit(&read(path)?, size).map_err(core_at(path))?;
    let summary = format!("audit {}: ok {}", path.display(), result.summary());
    if let Some(out) = &out {
        write(out, format!("{summary}\n"))?;
    }
    Ok(summary)
}

fn synth_trajectory(a: TrajectoryArgs) -> Result<String> {
    let dir = output_dir(&a.out_dir)?;
    let t = Trajectory {
        frames: a.frames,
        width: a.width,
        height: a.height,
        step: a.step,
        seed: a.seed,
    };
    let written = t.write_to(&dir)?;
    Ok(format!(
        "wrote {} frames of {}x{} (step {}, seed {}) -> {}",
        written.len(),
        a.width,
        a.height,
        a.step,
        a.seed,
        dir.display()
    ))
}

fn synth_fixture(a: SynthImageArgs) -> Result<String> {
    let out = output_file(&a.output)?;
    let pattern = match a.pattern {
        PatternArg::Constant => Synth::Constant(a.value),
        PatternArg::Hramp => Synth::HRamp,
        PatternArg::Vramp => Synth::VRamp,
        PatternArg::Checker => Synth::Checker(a.block),
    };
    let img = synth_image(pattern, a.width, a.height)?;
    write(&out, img.to_pgm())?;
    Ok(format!("wrote {}x{} {:?} image -> {}", a.width, a.height, pattern, out.display()))
}
