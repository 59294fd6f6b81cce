use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sfsep_core::io::FrameStream;
use sfsep_core::Measurements;

fn sfsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfsep")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

// A light free-field scene: one run, no sphere grid.
const SMALL: &str = "runs = 1\n[freefield]\nplane_waves = 20\nsphere_grid = [0, 0]\n";

#[test]
fn gen_filters_writes_tables_and_passes_its_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let o = sfsep(&["gen-filters", "--check", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["filters.csv", "filter_oracle.csv", "summary.txt", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let oracle = fs::read_to_string(out.join("filter_oracle.csv")).unwrap();
    assert_eq!(oracle.lines().count(), 1 + 5 * 3);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "sed = 3\n");
    assert_eq!(code(&sfsep(&["run", "freefield", "--config", &unknown, "--out", out])), 2);
    let bad_radius = write(dir.path(), "radius.toml", "[freefield.separator]\nr = -1.0\n");
    assert_eq!(code(&sfsep(&["run", "freefield", "--config", &bad_radius, "--out", out])), 2);
    let bad_order = write(dir.path(), "order.toml", "[freefield]\nscheme_order = 2\n");
    assert_eq!(code(&sfsep(&["run", "freefield", "--config", &bad_order, "--out", out])), 2);
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&sfsep(&["run", "room", "--config", missing.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&sfsep(&["run", "custom", "--out", out])), 2);
}

#[test]
fn failed_threshold_exits_with_3_only_under_check() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = write(dir.path(), "noisy.toml", &format!("{SMALL}snr_db = -20.0\n"));
    let out = dir.path().join("o");
    let args = ["run", "freefield", "--config", &noisy, "--out", out.to_str().unwrap()];
    assert_eq!(code(&sfsep(&args)), 0);
    let mut checked = args.to_vec();
    checked.push("--check");
    let o = sfsep(&checked);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("check failed"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = sfsep(&["run", "freefield", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("report.json")).unwrap(), fs::read(out.join("xi.csv")).unwrap())
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a.1, run("c", "8").1);
}

#[test]
fn custom_frames_are_separated() {
    let dir = tempfile::tempdir().unwrap();
    let q = 32;
    let len = 200;
    let p: Vec<Vec<f64>> = (0..q).map(|i| (0..len).map(|n| ((n + 3 * i) as f64 * 0.05).sin()).collect()).collect();
    let v: Vec<Vec<f64>> = (0..q).map(|i| (0..len).map(|n| ((n + i) as f64 * 0.03).cos() * 1e-3).collect()).collect();
    let stream = FrameStream::from_measurements(&Measurements::PressureVelocity { p, v }, 48_000.0);
    stream.write_binary(fs::File::create(dir.path().join("frames.bin")).unwrap()).unwrap();
    stream.write_csv(fs::File::create(dir.path().join("frames.csv")).unwrap()).unwrap();

    let mut tables = Vec::new();
    for name in ["frames.bin", "frames.csv"] {
        let cfg = write(dir.path(), "custom.toml", &format!("[custom]\nscheme_order = 3\nframes = \"{name}\"\n[custom.separator]\nr = 0.2\norder = 2\n"));
        let out = dir.path().join(format!("out-{name}"));
        let o = sfsep(&["run", "custom", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(out.join("coefficients.csv")).unwrap();
        assert!(text.starts_with("n,mu,nu,a_out,a_in\n"));
        assert_eq!(text.lines().count(), 1 + len * 9);
        tables.push(text);
    }
    // binary frames are stored as f32, so only the row layout must agree
    let keys = |t: &str| t.lines().map(|l| l.splitn(4, ',').take(3).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
    assert_eq!(keys(&tables[0]), keys(&tables[1]));
}

#[test]
fn bench_writes_latency_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bench.toml", "[bench]\nsteps = 500\n");
    let out = dir.path().join("b");
    let o = sfsep(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(json["order_n"]["order"], 5);
    assert!(json["order_n"]["p99_ns"].as_f64().unwrap() > 0.0);
    let zero = dir.path().join("zero.toml");
    fs::write(&zero, "[bench]\nsteps = 0\n").unwrap();
    assert_eq!(code(&sfsep(&["bench", "--config", zero.to_str().unwrap(), "--out", out.to_str().unwrap()])), 2);
}
