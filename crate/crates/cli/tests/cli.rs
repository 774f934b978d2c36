use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oacam::Fingerprint;

fn oacam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oacam"))
        .current_dir(dir)
        .env_remove("OACAM_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = oacam(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "one-line summary expected: {stdout:?}");
    stdout
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    oacam(dir, args).status.code().unwrap()
}

fn small_trajectory(dir: &Path) -> PathBuf {
    ok(dir, &["synth", "trajectory", "--frames", "40", "--out-dir", "frames"]);
    dir.join("frames")
}

#[test]
fn program_gen_hd_circles() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = ok(
        tmp.path(),
        &[
            "program", "gen", "--kind", "circle", "--n", "1000", "--width", "1280", "--height", "720",
            "--rmin", "15", "--rmax", "50", "--seed", "7", "-o", "cam.oaprog",
        ],
    );
    assert!(summary.contains("n=1000"), "{summary}");
    let bytes = std::fs::read(tmp.path().join("cam.oaprog")).unwrap();
    assert_eq!(&bytes[..4], b"OAPG");
    assert_eq!(bytes.len(), 30 + 1000 * 6);
    let program = oacam::curves::load_program(&bytes).unwrap();
    assert_eq!(program.radius_range(), Some((15, 50)));
    assert_eq!(program.seed(), 7);
}

#[test]
fn hashing_a_constant_image_gives_equal_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["program", "gen", "--kind", "circle", "--n", "1000", "--width", "1280", "--height", "720", "--seed", "7", "-o", "cam.oaprog"]);
    ok(d, &["synth", "image", "--pattern", "constant", "--value", "77", "--width", "1280", "--height", "720", "-o", "f000.pgm"]);
    ok(d, &["hash", "--program", "cam.oaprog", "--image", "f000.pgm", "-o", "f000.oahf"]);
    let fp = Fingerprint::from_bytes(&std::fs::read(d.join("f000.oahf")).unwrap()).unwrap();
    assert_eq!(fp.n(), 1000);
    assert!(fp.pairs().iter().all(|p| p.min == 77 && p.max == 77));

    let audit = ok(d, &["audit", "--fingerprint", "f000.oahf", "--width", "1280", "--height", "720"]);
    assert!(audit.contains("payload=2000B") && audit.contains("positional_fields=0"), "{audit}");
}

#[test]
fn sweep_writes_one_row_per_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_trajectory(d);
    ok(
        d,
        &[
            "eval", "sweep", "--dir", "frames", "--stride", "20", "--tolerance", "30", "--n", "4,16,64,256,1024",
            "--kind", "circle", "--mode", "fixed", "-o", "report.csv", "--per-query", "pq",
        ],
    );
    let csv = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kind,mode,n,k,accuracy,queries,seed");
    assert_eq!(lines.len(), 6);
    for (line, n) in lines[1..].iter().zip([4, 16, 64, 256, 1024]) {
        assert!(line.starts_with(&format!("circle,fixed,{n},")), "{line}");
        assert!(line.ends_with(",38,0"), "{line}");
    }
    let per_query = std::fs::read_to_string(d.join("pq/circle_fixed_n64.csv")).unwrap();
    assert!(per_query.starts_with("query_id,predicted_id,correct\n"));
    assert_eq!(per_query.lines().count(), 39);
}

#[test]
fn hash_index_query_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_trajectory(d);
    ok(d, &["program", "gen", "--kind", "line", "--n", "256", "--width", "320", "--height", "240", "-o", "p.oaprog"]);
    ok(d, &["hash", "--program", "p.oaprog", "--dir", "frames", "--out-dir", "fps", "--jobs", "2"]);
    assert!(d.join("fps/frame_0039.oahf").is_file());
    let built = ok(d, &["index", "build", "--dir", "fps", "--stride", "10", "--k", "32", "-o", "idx.oacb"]);
    assert!(built.contains("indexed 4 fingerprints"), "{built}");
    ok(d, &["query", "--index", "idx.oacb", "--fingerprint", "fps/frame_0020.oahf", "--fingerprint", "fps/frame_0012.oahf", "-o", "hits.csv"]);
    let hits = std::fs::read_to_string(d.join("hits.csv")).unwrap();
    let mut lines = hits.lines();
    assert_eq!(lines.next(), Some("query,rank,image_id,score"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..3], ["frame_0020.oahf", "1", "20"]);
    // index weights are stored as f32
    assert!((first[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(hits.lines().count(), 1 + 2 * 4);
}

#[test]
fn visualisations_and_census() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_trajectory(d);
    ok(d, &["program", "gen", "--kind", "circle", "--n", "500", "--width", "320", "--height", "240", "-o", "p.oaprog"]);
    ok(d, &["hash", "--program", "p.oaprog", "--image", "frames/frame_0000.pgm", "-o", "f.oahf"]);
    ok(d, &["viz", "kde", "--fingerprint", "f.oahf", "--resolution", "64", "-o", "kde.pgm", "--csv", "kde.csv"]);
    let pgm = oacam::GrayImage::from_pgm(&std::fs::read(d.join("kde.pgm")).unwrap()).unwrap();
    assert_eq!((pgm.width(), pgm.height()), (64, 64));
    assert_eq!(*pgm.data().iter().max().unwrap(), 255);
    let csv = std::fs::read_to_string(d.join("kde.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("row,col,value"));
    ok(d, &["viz", "kde", "--fingerprint", "f.oahf", "--raw", "--resolution", "16", "-o", "hist.pgm"]);

    let cov = ok(d, &["viz", "coverage", "--program", "p.oaprog", "--image", "frames/frame_0000.pgm", "-o", "mask.pgm", "--csv", "cov.csv"]);
    assert!(cov.contains("TV divergence"), "{cov}");
    let mask = oacam::GrayImage::from_pgm(&std::fs::read(d.join("mask.pgm")).unwrap()).unwrap();
    let marked = mask.data().iter().filter(|&&v| v == 255).count();
    assert!(marked > 0 && marked <= 1000);

    ok(d, &["census", "--width", "3", "--height", "3", "--levels", "4", "--kind", "line", "--n", "2", "-o", "census.txt"]);
    let report = std::fs::read_to_string(d.join("census.txt")).unwrap();
    assert!(report.contains("image_space_size,262144"));
    assert_eq!(code(d, &["census", "--width", "5", "--height", "5"]), 1);
    let sampled = ok(d, &["census", "--width", "5", "--height", "5", "--samples", "2000"]);
    assert!(sampled.contains("lower bounds"), "{sampled}");
}

#[test]
fn outputs_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_trajectory(d);
    for round in ["a", "b"] {
        ok(d, &["program", "gen", "--kind", "circle", "--n", "64", "--width", "320", "--height", "240", "--seed", "4", "-o", &format!("{round}.oaprog")]);
        ok(d, &["hash", "--program", "a.oaprog", "--dir", "frames", "--out-dir", &format!("fps_{round}"), "--per-image-seed", "9"]);
        ok(d, &["index", "build", "--dir", &format!("fps_{round}"), "--stride", "5", "-o", &format!("{round}.oacb")]);
        ok(d, &["viz", "kde", "--fingerprint", &format!("fps_{round}/frame_0003.oahf"), "-o", &format!("{round}.pgm")]);
    }
    let same = |x: &str, y: &str| std::fs::read(d.join(x)).unwrap() == std::fs::read(d.join(y)).unwrap();
    assert!(same("a.oaprog", "b.oaprog"));
    assert!(same("a.oacb", "b.oacb"));
    assert!(same("a.pgm", "b.pgm"));
    for i in 0..40 {
        let f = format!("frame_{i:04}.oahf");
        assert!(same(&format!("fps_a/{f}"), &format!("fps_b/{f}")));
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(d, &[]), 1);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["eval", "sweep", "--dir", "x", "-o", "r.csv", "--bogus"]), 1);
    assert_eq!(code(d, &["program", "gen", "--kind", "line", "--n", "3", "--width", "9", "--height", "9", "--rmin", "2", "-o", "p"]), 1);
    assert_eq!(code(d, &["program", "gen", "--kind", "circle", "--n", "3", "--width", "20", "--height", "20", "-o", "p"]), 1);
    assert_eq!(code(d, &["hash", "--program", "missing.oaprog", "--image", "x.png", "-o", "y"]), 2);
    assert_eq!(code(d, &["program", "gen", "--kind", "line", "--n", "3", "--width", "9", "--height", "9", "-o", "no/such/dir/p"]), 2);

    std::fs::write(d.join("junk.oahf"), b"OAHF junk").unwrap();
    assert_eq!(code(d, &["audit", "--fingerprint", "junk.oahf"]), 2);
    ok(d, &["program", "gen", "--kind", "line", "--n", "5", "--width", "9", "--height", "9", "-o", "p.oaprog"]);
    ok(d, &["synth", "image", "--pattern", "checker", "--block", "2", "--width", "9", "--height", "9", "-o", "c.pgm"]);
    ok(d, &["hash", "--program", "p.oaprog", "--image", "c.pgm", "-o", "c.oahf"]);
    let mut bytes = std::fs::read(d.join("c.oahf")).unwrap();
    bytes.push(0);
    std::fs::write(d.join("tampered.oahf"), &bytes).unwrap();
    assert_eq!(code(d, &["audit", "--fingerprint", "tampered.oahf"]), 2);

    let mut prog = std::fs::read(d.join("p.oaprog")).unwrap();
    *prog.last_mut().unwrap() ^= 1;
    std::fs::write(d.join("bad.oaprog"), &prog).unwrap();
    assert_eq!(code(d, &["hash", "--program", "bad.oaprog", "--image", "c.pgm", "-o", "x.oahf"]), 2);
    assert!(!d.join("x.oahf").exists());
}

#[test]
fn help_documents_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for path in [
        &["program", "gen"][..],
        &["hash"],
        &["index", "build"],
        &["query"],
        &["eval", "sweep"],
        &["viz", "kde"],
        &["viz", "coverage"],
        &["census"],
        &["audit"],
        &["synth", "trajectory"],
        &["synth", "image"],
    ] {
        let mut args = path.to_vec();
        args.push("--help");
        let out = oacam(d, &args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("Usage:") && text.contains("--config"), "{args:?}: {text}");
    }
    let out = oacam(d, &["--version"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_file_and_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_trajectory(d);
    std::fs::write(d.join("sweep.toml"), "n = [4, 16]\nstride = 10\nmode = \"fixed,random\"\noutput = \"from_config.csv\"\n").unwrap();
    ok(d, &["eval", "sweep", "--config", "sweep.toml", "--dir", "frames", "--n", "8"]);
    let csv = std::fs::read_to_string(d.join("from_config.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{csv}");
    assert!(rows[0].starts_with("circle,fixed,8,") && rows[1].starts_with("circle,random,8,"));
    assert!(rows[0].contains(",36,"), "stride 10 leaves 36 queries: {csv}");

    std::fs::write(d.join("typo.toml"), "strides = 4\n").unwrap();
    let out = oacam(d, &["eval", "sweep", "--config", "typo.toml", "--dir", "frames", "-o", "r.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key 'strides'"));

    std::fs::create_dir(d.join("out")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_oacam"))
        .current_dir(d)
        .env("OACAM_OUT_DIR", "out")
        .args(["synth", "image", "--pattern", "hramp", "--width", "16", "--height", "4", "-o", "ramp.pgm"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("out/ramp.pgm").is_file());
}
