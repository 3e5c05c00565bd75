use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evotransit::imaging::{encode_png, load_raster};
use evotransit::Raster;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evotransit"))
}

fn write_png(path: &Path, raster: &Raster) {
    std::fs::write(path, encode_png(raster).unwrap()).unwrap();
}

struct Fixture {
    dir: tempfile::TempDir,
    start: PathBuf,
    target: PathBuf,
}

fn fixture(w: usize, h: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let start = dir.path().join("start.png");
    let target = dir.path().join("target.png");
    write_png(&start, &Raster::from_fn(w, h, |r, c| [r as u8, c as u8, 0]).unwrap());
    write_png(&target, &Raster::from_fn(w, h, |r, c| [c as u8, r as u8, 250]).unwrap());
    Fixture { dir, start, target }
}

fn transition(f: &Fixture, extra: &[&str]) -> Output {
    bin()
        .arg("transition")
        .arg("--start")
        .arg(&f.start)
        .arg("--target")
        .arg(&f.target)
        .args(extra)
        .current_dir(f.dir.path())
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn box_run_writes_frames_report_and_gif() {
    let f = fixture(32, 32);
    let out = f.dir.path().join("out");
    let o = transition(&f, &["--operator", "box", "--seed", "7", "--gif", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let frames: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.starts_with("frame_g").then_some(name)
        })
        .collect();
    assert!(frames.len() >= 6, "{frames:?}");
    assert!(out.join("transition.gif").exists());

    let raw = std::fs::read_to_string(out.join("report.json")).unwrap();
    let order = ["config", "generations", "accepted", "rejected", "final_fraction", "milestones", "termination"];
    let positions: Vec<usize> = order
        .iter()
        .map(|k| raw.find(&format!("\n  \"{k}\":")).unwrap_or_else(|| panic!("missing {k}")))
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
    let report: Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(report["termination"], "COMPLETE");
    assert_eq!(report["rejected"], 0);
    assert_eq!(report["final_fraction"], 1.0);
    let milestones = report["milestones"].as_array().unwrap();
    assert_eq!(milestones.len(), 4);
    for m in milestones {
        let frame = m["frame"].as_str().unwrap();
        assert!(out.join(frame).exists());
    }
    let last = frames.iter().max().unwrap();
    assert_eq!(
        load_raster(out.join(last)).unwrap(),
        load_raster(&f.target).unwrap()
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Complete") && stdout.contains("reproduce: evotransit transition"));
}

#[test]
fn config_echo_round_trips_flags() {
    let f = fixture(16, 16);
    let out = f.dir.path().join("o");
    let o = transition(
        &f,
        &[
            "--operator", "asym+box", "--cs", "20", "--ct", "4", "--strip-length", "33", "--box-size", "2",
            "--interleave", "2:3", "--seed", "123", "--milestones", "0.25,0.5", "--max-gens", "5000",
            "--frame-every", "100", "--out-dir", out.to_str().unwrap(), "--gif", "70", "--toggle-geometric",
            "--fit-anchors",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = &read_json(&out.join("report.json"))["config"];
    assert_eq!(c["operator"], "asym+box");
    assert_eq!(c["cs"], 20.0);
    assert_eq!(c["ct"], 4.0);
    assert_eq!(c["strip_length"], 33);
    assert_eq!(c["box_size"], 2);
    assert_eq!(c["interleave"], "2:3");
    assert_eq!(c["seed"], 123);
    assert_eq!(c["milestones"], serde_json::json!([0.25, 0.5]));
    assert_eq!(c["max_gens"], 5000);
    assert_eq!(c["frame_every"], 100);
    assert_eq!(c["out_dir"], out.to_str().unwrap());
    assert_eq!(c["gif"], 70);
    assert_eq!(c["toggle_geometric"], true);
    assert_eq!(c["fit_anchors"], true);
}

#[test]
fn reproduce_command_regenerates_identical_frames() {
    let f = fixture(20, 20);
    let out = f.dir.path().join("first");
    let o = transition(&f, &["--operator", "asym+strip", "--seed", "5", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let report = read_json(&out.join("report.json"));
    let cmd = report["reproduce"].as_str().unwrap().to_string();
    let first: Vec<_> = snapshot(&out);

    std::fs::remove_dir_all(&out).unwrap();
    let args: Vec<&str> = cmd.split_whitespace().skip(1).collect();
    let o = bin().args(&args).current_dir(f.dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(snapshot(&out), first);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn mismatched_sizes_exit_3() {
    let f = fixture(8, 8);
    write_png(&f.target, &Raster::filled(9, 8, [1, 1, 1]).unwrap());
    let o = transition(&f, &["--operator", "box"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn identical_images_exit_0_with_empty_set() {
    let f = fixture(8, 8);
    std::fs::copy(&f.start, &f.target).unwrap();
    let o = transition(&f, &["--operator", "box"]);
    assert_eq!(o.status.code(), Some(0));
    // no --out-dir: report lands in the working directory
    let report = read_json(&f.dir.path().join("report.json"));
    assert_eq!(report["termination"], "EMPTY_MUTABLE_SET");
}

#[test]
fn usage_and_io_exit_codes() {
    let f = fixture(8, 8);
    assert_eq!(transition(&f, &["--cs", "0.5"]).status.code(), Some(1));
    assert_eq!(transition(&f, &["--bogus"]).status.code(), Some(1));
    let o = bin().args(["transition", "--start", "nope.png", "--target", "nope.png"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn seed_batch_writes_per_seed_directories() {
    let f = fixture(16, 16);
    let out = f.dir.path().join("batch");
    let o = bin()
        .env("EVOTRANSIT_THREADS", "2")
        .args(["transition", "--operator", "box", "--seeds", "3..=5", "--out-dir", out.to_str().unwrap()])
        .arg("--start")
        .arg(&f.start)
        .arg("--target")
        .arg(&f.target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in 3..=5 {
        let report = read_json(&out.join(format!("seed_{seed}")).join("report.json"));
        assert_eq!(report["config"]["seed"], seed);
        assert_eq!(report["termination"], "COMPLETE");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    let seeds: Vec<_> = stdout.lines().filter(|l| l.starts_with("box seed")).collect();
    assert_eq!(seeds.len(), 3);
    assert!(seeds[0].starts_with("box seed 3:"));

    let o = bin()
        .env("EVOTRANSIT_THREADS", "zero")
        .args(["transition", "--seeds", "0..2"])
        .arg("--start")
        .arg(&f.start)
        .arg("--target")
        .arg(&f.target)
        .current_dir(f.dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn onemax_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let o = bin()
        .args(["onemax", "--operator", "asymmetric", "--n-list", "32,64", "--repeats", "30", "--seed", "4"])
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("operator,n,repeat,seed,generations"));
    assert_eq!(lines.count(), 60);
    assert!(String::from_utf8_lossy(&o.stdout).contains("better:"));

    let o = bin().args(["onemax", "--n-list", "1", "--repeats", "30"]).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("insufficient points"));
}
