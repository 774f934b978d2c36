//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oacam::curves::{gen_program, CurveKind};
use oacam::evaluation::synthetic::{mosaic, Trajectory};
use oacam::evaluation::{evaluate_frames, fingerprint_frames, per_image_seed, split_trajectory, EvalConfig, Mode};
use oacam::hashing::{accumulate, fingerprint, histogram2d, kde_render};
use oacam::localisation::{build_index, query, train_codebook};
use oacam::privacy::{collision_census, leak_audit};
use oacam::rng::SplitMix64;
use oacam::{ExtremaPair, Fingerprint, GrayImage};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

/// Histogram resolution for the rotation statistic.
const ROTATION_BINS: usize = 16;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let result = f();
    let took = start.elapsed();
    let within = limit.is_none_or(|l| took < l);
    let suffix = match limit {
        Some(l) => format!(" [{:.2}s, limit {}s]", took.as_secs_f64(), l.as_secs()),
        None => format!(" [{:.2}s]", took.as_secs_f64()),
    };
    match result {
        Ok(d) if within => Ok(d + &suffix),
        Ok(d) => Err(d + &suffix + " too slow"),
        Err(d) => Err(d + &suffix),
    }
}

fn self_retrieval() -> Outcome {
    let frames = Trajectory::default().render().map_err(|e| e.to_string())?;
    let (w, h) = (frames[0].width(), frames[0].height());
    let program = gen_program(CurveKind::Circle, 1024, w, h, 0, None).map_err(|e| e.to_string())?;
    let fps = fingerprint_frames(&frames, &program, Mode::Fixed, 0).map_err(|e| e.to_string())?;
    let (train, _) = split_trajectory(frames.len(), 20);
    let codebook = train_codebook(train.iter().map(|&i| &fps[i]), 64, 0).map_err(|e| e.to_string())?;
    let index = build_index(train.iter().map(|&i| (i as u32, &fps[i])), &codebook).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for &i in &train {
        let (id, score) = query(&index, &fps[i], 1).map_err(|e| e.to_string())?[0];
        if id != i as u32 {
            return Err(format!("frame {i} retrieved {id} at rank 1"));
        }
        worst = worst.max((score - 1.0).abs());
    }
    check(
        worst <= 1e-9,
        format!("{} training frames retrieve themselves, max |sim - 1| = {worst:.1e}", train.len()),
    )
}

fn accuracies(frames: &[GrayImage], n_values: &[usize], modes: &[Mode]) -> Result<Vec<f64>, String> {
    let config = EvalConfig {
        n_values: n_values.to_vec(),
        modes: modes.to_vec(),
        curve_kinds: vec![CurveKind::Circle],
        stride: 20,
        tolerance: 30,
        k: 64,
        ..EvalConfig::default()
    };
    let report = evaluate_frames(frames, &config).map_err(|e| e.to_string())?;
    Ok(report.rows.iter().map(|r| r.accuracy()).collect())
}

fn monotone_trend(frames: &[GrayImage]) -> Outcome {
    let acc = accuracies(frames, &[4, 64, 1024], &[Mode::Fixed])?;
    let (a4, a64, a1024) = (acc[0], acc[1], acc[2]);
    check(
        a1024 >= a64 && a64 >= a4 && a1024 >= 0.7,
        format!("accuracy n=4 {a4:.4}, n=64 {a64:.4}, n=1024 {a1024:.4} (need monotone, n=1024 >= 0.7)"),
    )
}

fn fixed_vs_random(frames: &[GrayImage]) -> Outcome {
    let acc = accuracies(frames, &[4096], &[Mode::Fixed, Mode::Random])?;
    let gap = (acc[0] - acc[1]).abs();
    check(
        gap <= 0.05,
        format!("n=4096 fixed {:.4}, random {:.4}, gap {gap:.4} (need <= 0.05)", acc[0], acc[1]),
    )
}

fn hash_budget() -> Outcome {
    let program = gen_program(CurveKind::Circle, 1000, 1280, 720, 7, Some((15, 50))).map_err(|e| e.to_string())?;
    let scene = mosaic(1280, 720, 1).map_err(|e| e.to_string())?;
    let bytes = fingerprint(&scene, &program, None).map_err(|e| e.to_string())?.to_bytes();
    let audit = leak_audit(&bytes, Some((1280, 720))).map_err(|e| e.to_string())?;
    let ratio = audit.payload_ratio.unwrap_or(f64::NAN);
    check(
        audit.payload_bytes == 2000 && ratio < 0.0025 && audit.positional_fields == 0,
        format!(
            "payload {} B for 921600 pixels, ratio {ratio:.6}, positional fields {}",
            audit.payload_bytes, audit.positional_fields
        ),
    )
}

fn census() -> Outcome {
    let program = gen_program(CurveKind::Line, 2, 3, 3, 0, None).map_err(|e| e.to_string())?;
    let c = collision_census(3, 3, 4, &program).map_err(|e| e.to_string())?;
    let total: u64 = c.preimage_histogram.iter().map(|(size, count)| size * count).sum();
    check(
        c.exhaustive && c.distinct_hash_count <= 55 && c.collision_ratio() < 0.0003 && total == 262144,
        format!(
            "{} distinct hashes over {} images (ratio {:.6}), preimage sizes sum to {total}",
            c.distinct_hash_count,
            c.image_space_size,
            c.collision_ratio()
        ),
    )
}

/// Sorted random subset of `0..=255` with `m` elements.
fn levels(rng: &mut SplitMix64, m: usize) -> Vec<u8> {
    let mut all: Vec<u8> = (0..=255).collect();
    for i in 0..m {
        let j = i + rng.below((256 - i) as u64) as usize;
        all.swap(i, j);
    }
    let mut out = all[..m].to_vec();
    out.sort_unstable();
    out
}

fn remap_equivariance() -> Outcome {
    // A strictly increasing map of all 256 levels into 256 levels is the
    // identity, so each image uses a random subset of levels and each ramp
    // maps that subset increasingly onto another random subset.
    let mut rng = SplitMix64::new(6);
    let circles = gen_program(CurveKind::Circle, 512, 96, 72, 6, Some((3, 30))).map_err(|e| e.to_string())?;
    let lines = gen_program(CurveKind::Line, 512, 96, 72, 6, None).map_err(|e| e.to_string())?;
    let mut checks = 0;
    for image in 0..100 {
        let program = if image % 2 == 0 { &circles } else { &lines };
        let m = 2 + rng.below(127) as usize;
        let domain = levels(&mut rng, m);
        let img = GrayImage::from_fn(96, 72, |_, _| domain[rng.below(m as u64) as usize]).unwrap();
        let base = fingerprint(&img, program, None).map_err(|e| e.to_string())?;
        for ramp in 0..20 {
            let range = levels(&mut rng, m);
            let mut f = [0u8; 256];
            for (&d, &r) in domain.iter().zip(&range) {
                f[d as usize] = r;
            }
            let got = fingerprint(&img.map(|v| f[v as usize]), program, None).map_err(|e| e.to_string())?;
            let mut want: Vec<ExtremaPair> = base
                .pairs()
                .iter()
                .map(|p| ExtremaPair { min: f[p.min as usize], max: f[p.max as usize] })
                .collect();
            want.sort();
            if got.pairs() != &want[..] {
                return Err(format!("image {image}, ramp {ramp}: remapped fingerprint differs"));
            }
            checks += 1;
        }
    }
    check(checks == 2000, format!("{checks} image/ramp pairs equal exactly"))
}

fn permutation_invariance() -> Outcome {
    let mut rng = SplitMix64::new(7);
    for trial in 0..100u64 {
        let (kind, radius) = if trial % 2 == 0 {
            (CurveKind::Circle, Some((2, 20)))
        } else {
            (CurveKind::Line, None)
        };
        let program = gen_program(kind, 200, 64, 48, trial, radius).map_err(|e| e.to_string())?;
        let img = GrayImage::from_fn(64, 48, |_, _| rng.below(256) as u8).unwrap();
        let reference = fingerprint(&img, &program, None).map_err(|e| e.to_string())?.to_bytes();
        let mut order: Vec<usize> = (0..program.n()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let pairs = accumulate(&img, order.iter().map(|&i| &program.curves()[i]));
        let shuffled = Fingerprint::from_pairs(kind, pairs, program.digest(), false).to_bytes();
        if shuffled != reference {
            return Err(format!("trial {trial}: shuffled curve order changed the bytes"));
        }
    }
    Ok("100 shuffled programs give byte-identical fingerprints".into())
}

fn rotation_statistic() -> Outcome {
    let program = gen_program(CurveKind::Circle, 4096, 512, 512, 8, None).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for i in 0..10u64 {
        let img = mosaic(512, 512, 100 + i).map_err(|e| e.to_string())?;
        let a = fingerprint(&img, &program, Some(per_image_seed(8, 2 * i as usize))).map_err(|e| e.to_string())?;
        let b = fingerprint(&img.rotate90(), &program, Some(per_image_seed(8, 2 * i as usize + 1)))
            .map_err(|e| e.to_string())?;
        let ha = histogram2d(&a, ROTATION_BINS).map_err(|e| e.to_string())?;
        let hb = histogram2d(&b, ROTATION_BINS).map_err(|e| e.to_string())?;
        total += ha.tv_distance(&hb).map_err(|e| e.to_string())?;
    }
    let mean = total / 10.0;
    check(
        mean <= 0.15,
        format!("mean TV over 10 images at {ROTATION_BINS} bins/axis = {mean:.4} (need <= 0.15)"),
    )
}

fn below_diagonal(frames: &[GrayImage]) -> Outcome {
    let (w, h) = (frames[0].width(), frames[0].height());
    let mut grids = 0;
    let mut worst: f64 = 0.0;
    for (n, kind, radius) in [
        (4, CurveKind::Circle, None),
        (64, CurveKind::Line, None),
        (1024, CurveKind::Circle, None),
        (4096, CurveKind::Line, None),
        (300, CurveKind::Circle, Some((1, 3))),
    ] {
        let program = gen_program(kind, n, w, h, n as u64, radius).map_err(|e| e.to_string())?;
        for frame in frames.iter().step_by(40) {
            let fp = fingerprint(frame, &program, None).map_err(|e| e.to_string())?;
            for res in [1, 2, 7, 16, 64, 256] {
                let mut views = vec![
                    histogram2d(&fp, res).map_err(|e| e.to_string())?,
                    kde_render(&fp, res, None).map_err(|e| e.to_string())?,
                ];
                for bw in [0.5, 4.0, 40.0] {
                    views.push(kde_render(&fp, res, Some(bw)).map_err(|e| e.to_string())?);
                }
                for g in views {
                    worst = worst.max(g.mass_above_diagonal());
                    grids += 1;
                }
            }
        }
    }
    check(worst == 0.0, format!("{grids} histogram/KDE grids, max mass above diagonal {worst:e}"))
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_oacam");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin)
            .args(args)
            .env_remove("OACAM_OUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let p = |name: &str| dir.path().join(name).display().to_string();
    run(&["synth", "trajectory", "--out-dir", &p("frames")])?;
    let sweep = |jobs: &str, out: &str| {
        run(&[
            "eval", "sweep", "--dir", &p("frames"), "--n", "4,16,64,256,1024,4096",
            "--kind", "circle,line", "--mode", "fixed,random", "--baseline",
            "--seed", "3", "--jobs", jobs, "-o", &p(out),
        ])
    };
    sweep("1", "a.csv")?;
    sweep("4", "b.csv")?;
    let read = |name: &str| std::fs::read(Path::new(&p(name))).map_err(|e| e.to_string());
    let (a, b) = (read("a.csv")?, read("b.csv")?);
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    check(
        a == b && rows == 25,
        format!("--jobs 1 and --jobs 4 CSVs ({rows} rows, {} bytes) byte-identical: {}", a.len(), a == b),
    )
}

fn main() {
    let frames = Trajectory::default().render().expect("synthetic trajectory renders");
    let criteria: Vec<Criterion> = vec![
        ("self-retrieval", Box::new(|| timed(Some(Duration::from_secs(10)), self_retrieval))),
        ("monotone accuracy trend", Box::new(|| timed(Some(Duration::from_secs(300)), || monotone_trend(&frames)))),
        ("fixed vs random convergence", Box::new(|| timed(None, || fixed_vs_random(&frames)))),
        ("hash budget", Box::new(|| timed(None, hash_budget))),
        ("collision census", Box::new(|| timed(Some(Duration::from_secs(120)), census))),
        ("monotone-remap equivariance", Box::new(|| timed(None, remap_equivariance))),
        ("permutation invariance", Box::new(|| timed(None, permutation_invariance))),
        ("rotation statistic", Box::new(|| timed(None, rotation_statistic))),
        ("below-diagonal mass", Box::new(|| timed(None, || below_diagonal(&frames)))),
        ("determinism across --jobs", Box::new(|| timed(None, cli_determinism))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
