use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mhiforge::attention::FeatureVolume;
use mhiforge::frame_stream::netpbm;
use mhiforge::{ColorMode, Frame};
use mhiforge_cli::Config;

fn mhiforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhiforge"))
        .args(args)
        .env_remove("MHIFORGE_JOBS")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A bright square moving right one pixel per frame.
fn write_video(dir: &Path, frames: usize, width: usize, height: usize) {
    fs::create_dir_all(dir).unwrap();
    for t in 0..frames {
        let mut px = vec![0u8; width * height];
        for y in 2..6 {
            for x in t..t + 4 {
                px[y * width + x % width] = 200;
            }
        }
        let f = Frame::new(width, height, ColorMode::Gray8, px).unwrap();
        netpbm::write_frame(&dir.join(format!("f{:03}.pgm", t + 1)), &f).unwrap();
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mhi_writes_pgm() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 8, 16, 8);
    let out_file = tmp.path().join("m.pgm");
    let out = mhiforge(&["mhi", "--input", path(&video), "--output", path(&out_file)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let frame = netpbm::read_frame(&out_file).unwrap();
    assert_eq!((frame.width(), frame.height()), (16, 8));
    assert_eq!(frame.pixels().iter().copied().max(), Some(255));
}

#[test]
fn json_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 9, 16, 8);
    let out_file = tmp.path().join("m.ppm");
    let out = mhiforge(&[
        "--json",
        "rgb-mhi",
        "--input",
        path(&video),
        "--output",
        path(&out_file),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["parts"], serde_json::json!([[1, 3], [4, 6], [7, 9]]));
    assert_eq!(netpbm::read_frame(&out_file).unwrap().mode(), ColorMode::Rgb8);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = mhiforge(&["mhi", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert_eq!(mhiforge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mhiforge(&[]).status.code(), Some(1));
    assert_eq!(mhiforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_names_the_error() {
    let out = mhiforge(&["mhi", "--input", "/definitely/not/here", "--output", "x.pgm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("FileNotFound"), "{}", stderr(&out));
}

#[test]
fn too_short_video_for_rgb() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 5, 8, 8);
    let out = mhiforge(&[
        "rgb-mhi",
        "--input",
        path(&video),
        "--output",
        path(&tmp.path().join("o.ppm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("InsufficientFrames"));
}

#[test]
fn fuse_outputs_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    fs::write(&a, r#"{"classes": 2, "rows": [[2.0, 0.0], [0.0, 1.0]]}"#).unwrap();
    fs::write(&b, r#"{"classes": 2, "rows": [[0.0, 1.0], [0.0, 5.0]]}"#).unwrap();
    let out = mhiforge(&[
        "fuse",
        "--logits1",
        path(&a),
        "--logits2",
        path(&b),
        "--w1",
        "0.6",
        "--w2",
        "0.4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["predictions"], serde_json::json!([0, 1]));
    let p = v["probabilities"][0].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() + p[1].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn fuse_mismatch_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    fs::write(&a, r#"{"classes": 2, "rows": [[2.0, 0.0]]}"#).unwrap();
    fs::write(&b, r#"{"classes": 3, "rows": [[0.0, 1.0, 2.0]]}"#).unwrap();
    let out = mhiforge(&["fuse", "--logits1", path(&a), "--logits2", path(&b)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DimensionMismatch"), "{}", stderr(&out));

    let out = mhiforge(&[
        "fuse",
        "--logits1",
        path(&a),
        "--logits2",
        path(&a),
        "--w1",
        "0",
        "--w2",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("InvalidWeights"));
}

#[test]
fn config_file_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 20, 8, 8);
    let cfg = tmp.path().join("c.conf");
    fs::write(&cfg, "# defaults\ntarget_frames = 5\nmax_skip=0\n").unwrap();

    let out_dir = tmp.path().join("s1");
    let out = mhiforge(&[
        "--json",
        "--config",
        path(&cfg),
        "sample",
        "--input",
        path(&video),
        "--output",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 5);

    // an explicit flag wins over the file
    let out_dir = tmp.path().join("s2");
    let out = mhiforge(&[
        "--config",
        path(&cfg),
        "sample",
        "--input",
        path(&video),
        "--frames",
        "7",
        "--output",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 7);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = mhiforge(&[
        "--config",
        path(&cfg),
        "sample",
        "--input",
        path(&video),
        "--output",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("InvalidConfig"));
}

#[test]
fn config_defaults() {
    let cfg = Config::default();
    assert_eq!(
        (cfg.target_frames, cfg.max_skip, cfg.shift_limit, cfg.resize),
        (32, 10, 16, 224)
    );
    assert_eq!((cfg.w1, cfg.w2), (0.6, 0.4));
    assert!(Config::parse("w1 = 0\nw2 = 0").is_err());
    assert_eq!(Config::parse("seed=7").unwrap().seed, 7);
}

#[test]
fn sample_default_picks_32() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 50, 8, 8);
    let out_dir = tmp.path().join("s");
    let out = mhiforge(&["--json", "sample", "--input", path(&video), "--output", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["skip"], 4);
    assert_eq!(v["indices"].as_array().unwrap().len(), 32);
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 32);
}

#[test]
fn augment_writes_six_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v");
    write_video(&video, 3, 40, 30);
    let run = |name: &str| {
        let out_dir = tmp.path().join(name);
        let out = mhiforge(&[
            "augment",
            "--input",
            path(&video),
            "--bbox",
            "10,5,8,12",
            "--seed",
            "42",
            "--resize",
            "16",
            "--output",
            path(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    for label in ["c0", "l0", "r0", "c1", "l1", "r1"] {
        let fa = netpbm::read_frame(&a.join(label).join("frame_0002.pgm")).unwrap();
        assert_eq!((fa.width(), fa.height()), (16, 16));
        let fb = fs::read(b.join(label).join("frame_0002.pgm")).unwrap();
        assert_eq!(fs::read(a.join(label).join("frame_0002.pgm")).unwrap(), fb);
    }

    let out = mhiforge(&[
        "augment",
        "--input",
        path(&video),
        "--output",
        path(&tmp.path().join("c")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("InvalidBox"));
}

#[test]
fn attend_and_nlblock_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let feat = FeatureVolume::from_fn(vec![2, 3, 4, 4], |i| (i % 7) as f64 * 0.25).unwrap();
    let src = FeatureVolume::from_fn(vec![3, 4, 4], |i| (i % 5) as f64).unwrap();
    let (fp, sp, op) = (
        tmp.path().join("f.mht"),
        tmp.path().join("s.mht"),
        tmp.path().join("o.mht"),
    );
    feat.save(&fp).unwrap();
    src.save(&sp).unwrap();
    let out = mhiforge(&[
        "attend",
        "--features",
        path(&fp),
        "--saliency-src",
        path(&sp),
        "--output",
        path(&op),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(FeatureVolume::load(&op).unwrap().dims(), &[2, 3, 4, 4]);

    // zero w_z leaves the input untouched
    let params = tmp.path().join("p.mht4");
    let mut bytes = Vec::new();
    for dims in [vec![1, 2], vec![1, 2], vec![1, 2]] {
        FeatureVolume::from_fn(dims, |i| i as f64 + 0.5)
            .unwrap()
            .write_to(&mut bytes)
            .unwrap();
    }
    FeatureVolume::zeros(vec![2, 1]).unwrap().write_to(&mut bytes).unwrap();
    fs::write(&params, bytes).unwrap();
    let z = tmp.path().join("z.mht");
    let out = mhiforge(&[
        "nlblock",
        "--input",
        path(&fp),
        "--params",
        path(&params),
        "--output",
        path(&z),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(FeatureVolume::load(&z).unwrap(), feat);

    let out = mhiforge(&[
        "nlblock",
        "--input",
        path(&sp),
        "--params",
        path(&params),
        "--output",
        path(&z),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DimensionMismatch"));
}

#[test]
fn bench_report_is_deterministic_across_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let r1 = tmp.path().join("r1.json");
    let r2 = tmp.path().join("r2.json");
    let args = |report: &Path, jobs: &str| {
        mhiforge(&[
            "--jobs",
            jobs,
            "bench",
            "--classes",
            "3",
            "--samples",
            "5",
            "--seed",
            "9",
            "--report",
            path(report),
        ])
    };
    assert_eq!(args(&r1, "1").status.code(), Some(0));
    assert_eq!(args(&r2, "4").status.code(), Some(0));
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    assert_eq!(v["confusion"].as_array().unwrap().len(), 3);
    assert_eq!(v["fusion"].as_array().unwrap().len(), 5);
    assert!(v["per_class_accuracy"].is_array());
}
