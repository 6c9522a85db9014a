use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpmqir_core::dataio::{encode_pnm, read_pnm};
use mpmqir_core::postproc::ImageTensor;
use serde_json::Value;
use tempfile::TempDir;

fn mnist() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/mnist-sample-images.idx3-ubyte")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpmqir"))
        .current_dir(dir)
        .env_remove("MPMQIR_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ok(out: Output) -> Output {
    assert_eq!(
        code(&out),
        0,
        "stdout: {}\nstderr: {}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_pgm(dir: &Path) -> PathBuf {
    let bytes: Vec<u8> = (0..64).map(|i| ((i * 13 + i / 8 * 29) % 256) as u8).collect();
    let img = ImageTensor::from_bytes(8, 8, 1, &bytes).unwrap();
    let path = dir.join("small.pgm");
    fs::write(&path, encode_pnm(&img).unwrap()).unwrap();
    path
}

const QUICK: [&str; 4] = ["--steps", "25", "--gradient", "adjoint"];

#[test]
fn compress_decompress_evaluate_agree() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_pgm(d);
    let mut args = vec!["compress", "small.pgm", "--layers", "2", "-o", "small.mpmq"];
    args.extend(QUICK);
    let out = ok(run(d, &args));
    assert!(stdout(&out).starts_with("ansatz=mpm m=6 layers=2 params=40 pcr=0.6250"));
    for sibling in ["small.report.json", "small.trace.csv", "small.trace.json", "small.manifest.json"] {
        assert!(d.join(sibling).exists(), "{sibling}");
    }
    let trace = fs::read_to_string(d.join("small.trace.csv")).unwrap();
    assert!(trace.starts_with("step,loss,psnr\n0,"));
    assert!(trace.lines().last().unwrap().starts_with("25,"));

    ok(run(d, &["decompress", "small.mpmq", "-o", "a.pgm"]));
    ok(run(d, &["decompress", "small.mpmq", "-o", "b.pgm"]));
    assert_eq!(fs::read(d.join("a.pgm")).unwrap(), fs::read(d.join("b.pgm")).unwrap());
    let decoded = read_pnm(d.join("a.pgm")).unwrap();
    assert_eq!((decoded.width(), decoded.height(), decoded.channels()), (8, 8, 1));

    let eval = ok(run(
        d,
        &["evaluate", "--original", "small.pgm", "--recon", "a.pgm", "--model", "small.mpmq", "-o", "eval.json"],
    ));
    let evaluated: Value = serde_json::from_str(&stdout(&eval)).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("small.report.json")).unwrap()).unwrap();
    let quantized = &report["quality_quantized"];
    let (a, b) = (
        evaluated["psnr_mean_db"].as_f64().unwrap(),
        quantized["psnr_mean_db"].as_f64().unwrap(),
    );
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    assert_eq!(evaluated["n_theta"], 40);
    assert_eq!(evaluated["display"]["pcr"], "0.62");
    assert!(evaluated["ssim_mean"].is_null());
    assert!(d.join("eval.manifest.json").exists());
}

#[test]
fn compress_is_deterministic_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_pgm(d);
    let mut a = vec!["--jobs", "1", "compress", "small.pgm", "--layers", "2", "-o", "one.mpmq"];
    a.extend(QUICK);
    let mut b = vec!["--jobs", "3", "compress", "small.pgm", "--layers", "2", "-o", "three.mpmq"];
    b.extend(QUICK);
    ok(run(d, &a));
    ok(run(d, &b));
    assert_eq!(fs::read(d.join("one.mpmq")).unwrap(), fs::read(d.join("three.mpmq")).unwrap());
}

#[test]
fn rgb_round_trip_writes_ppm_and_per_channel_traces() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let bytes: Vec<u8> = (0..6 * 5 * 3).map(|i| (i * 7 % 256) as u8).collect();
    let img = ImageTensor::from_bytes(6, 5, 3, &bytes).unwrap();
    fs::write(d.join("rgb.ppm"), encode_pnm(&img).unwrap()).unwrap();
    let mut args = vec!["compress", "rgb.ppm", "--layers", "1", "--ansatz", "qae", "-o", "rgb.mpmq"];
    args.extend(QUICK);
    ok(run(d, &args));
    for c in 0..3 {
        assert!(d.join(format!("rgb.trace.c{c}.csv")).exists());
    }
    ok(run(d, &["decompress", "rgb.mpmq", "-o", "out.ppm"]));
    assert!(fs::read(d.join("out.ppm")).unwrap().starts_with(b"P6\n6 5\n255\n"));
}

#[test]
fn mnist_checkpoint_info() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let data = mnist();
    let out = ok(run(
        d,
        &[
            "compress", data.to_str().unwrap(), "--dataset", "mnist", "--index", "2", "--layers", "15",
            "--steps", "2", "--gradient", "adjoint", "-o", "m.mpmq",
        ],
    ));
    assert!(stdout(&out).contains("bytes=4355"));
    let info = ok(run(d, &["info", "m.mpmq"]));
    let text = stdout(&info);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "ansatz=mpm m=10 layers=15 params=540 pcr=0.6888");
    assert_eq!(lines.next().unwrap(), "width=28 height=28 channels=1 bytes=4355");
    let json: Value = serde_json::from_str(&stdout(&ok(run(d, &["info", "m.mpmq", "--json"])))).unwrap();
    assert_eq!(json["geometry"]["n_theta"], 540);
}

#[test]
fn exit_codes_by_failure_category() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_pgm(d);
    assert_eq!(code(&run(d, &["compress", "small.pgm", "--layers", "0", "-o", "x.mpmq"])), 2);
    assert_eq!(code(&run(d, &["frobnicate"])), 2);
    assert_eq!(code(&run(d, &["--jobs", "0", "info", "x"])), 2);
    assert_eq!(code(&run(d, &["info", "missing.mpmq"])), 1);

    fs::write(d.join("bad.mpmq"), b"NOPE-this-is-not-a-checkpoint").unwrap();
    assert_eq!(code(&run(d, &["info", "bad.mpmq"])), 3);
    fs::write(d.join("bad.pgm"), b"P5\n8 8\n255\nshort").unwrap();
    assert_eq!(code(&run(d, &["compress", "bad.pgm", "--layers", "1", "-o", "y.mpmq"])), 3);

    let mut args = vec!["compress", "small.pgm", "--layers", "1", "-o", "c.mpmq"];
    args.extend(QUICK);
    ok(run(d, &args));
    let mut bytes = fs::read(d.join("c.mpmq")).unwrap();
    bytes[20] ^= 0x40;
    fs::write(d.join("c.mpmq"), &bytes).unwrap();
    let out = run(d, &["decompress", "c.mpmq", "-o", "c.pgm"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CRC"));

    let mut lr = vec!["compress", "small.pgm", "--layers", "1", "--lr", "-1", "-o", "z.mpmq"];
    lr.extend(QUICK);
    assert_eq!(code(&run(d, &lr)), 2);
}

#[test]
fn sweep_rows_cover_every_cell_in_order() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let data = mnist();
    let base = [
        "sweep", "--dataset", "mnist", "--data", data.to_str().unwrap(), "--indices", "1,4",
        "--resize", "8x8", "--layers-list", "1,2,3", "--steps", "10", "--gradient", "adjoint",
    ];
    let mut a = base.to_vec();
    a.extend(["-o", "a.csv"]);
    ok(run(d, &a));
    let mut b = vec!["--jobs", "2"];
    b.extend(base);
    b.extend(["-o", "b.csv"]);
    ok(run(d, &b));

    let csv = fs::read_to_string(d.join("a.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let pcr: Vec<f64> = rows[..3].iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(pcr[0] < pcr[1] && pcr[1] < pcr[2]);
    assert!(rows.iter().all(|r| r[10] == "ok"));
    assert_eq!(rows[3][0], "4");

    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                cols.remove(9);
                cols.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&csv), strip(&fs::read_to_string(d.join("b.csv")).unwrap()));

    let mut empty = base.to_vec();
    empty[6] = "";
    empty.extend(["-o", "c.csv"]);
    assert_eq!(code(&run(d, &empty)), 2);
}

#[test]
fn compare_matches_budget_and_marks_best() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let data = mnist();
    let out = ok(run(
        d,
        &[
            "compare", "--dataset", "mnist", "--data", data.to_str().unwrap(), "--indices", "0",
            "--match-pcr", "0.69", "--steps", "1", "--gradient", "adjoint", "-o", "cmp.csv",
        ],
    ));
    assert!(stdout(&out).contains("*best"));
    let csv = fs::read_to_string(d.join("cmp.csv")).unwrap();
    let mpm: Vec<&str> = csv.lines().find(|l| l.starts_with("0,mpm,")).unwrap().split(',').collect();
    assert_eq!(mpm[2], "15");
    assert_eq!(mpm[4], "540");
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("cmp.summary.json")).unwrap()).unwrap();
    let methods = summary["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    assert_eq!(methods.iter().filter(|m| m["best_psnr"] == true).count(), 1);
    assert_eq!(methods[1]["n_theta"], 531);
    assert_eq!(methods[2]["n_theta"], 539);

    let bad = run(
        d,
        &[
            "compare", "--dataset", "mnist", "--data", data.to_str().unwrap(), "--indices", "0",
            "--match-pcr", "0.69", "--methods", "mpm,vqe", "-o", "x.csv",
        ],
    );
    assert_eq!(code(&bad), 2);
}

#[test]
fn config_file_and_replay() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_pgm(d);
    fs::write(d.join("run.cfg"), "# quick run\nlayers = 2\nsteps=15\ngradient = adjoint\n").unwrap();
    ok(run(d, &["--config", "run.cfg", "compress", "small.pgm", "-o", "cfg.mpmq"]));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(d.join("cfg.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train_config"]["steps"], 15);
    assert_eq!(manifest["geometry"]["layers"], 2);

    // Command-line flags win over config entries.
    ok(run(d, &["--config", "run.cfg", "compress", "small.pgm", "--steps", "5", "-o", "cli.mpmq"]));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(d.join("cli.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train_config"]["steps"], 5);

    let original = fs::read(d.join("cfg.mpmq")).unwrap();
    fs::remove_file(d.join("cfg.mpmq")).unwrap();
    ok(run(d, &["replay", "cfg.manifest.json"]));
    assert_eq!(fs::read(d.join("cfg.mpmq")).unwrap(), original);

    fs::write(d.join("broken.json"), "{").unwrap();
    assert_eq!(code(&run(d, &["replay", "broken.json"])), 3);
}

#[test]
fn jobs_from_environment() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_mpmqir"))
        .current_dir(d)
        .env("MPMQIR_JOBS", "0")
        .args(["info", "whatever.mpmq"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
