//! Command-line integration tests: artifact plumbing, error reporting and
//! exit codes (0 success, 2 usage/config, 3 data format, 4 numerical).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_latentlens")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("latentlens-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(exe()).args(args).current_dir(dir).output().expect("spawn latentlens")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_is_deterministic_across_runs() {
    let dir = workdir("gen-det");
    run_ok(&dir, &["generate", "laminar", "--seed", "7", "--nt", "64", "-o", "a.snap"]);
    run_ok(&dir, &["generate", "laminar", "--seed", "7", "--nt", "64", "-o", "b.snap"]);
    let a = std::fs::read(dir.join("a.snap")).unwrap();
    let b = std::fs::read(dir.join("b.snap")).unwrap();
    assert_eq!(a, b);
    // manifests exist and carry the output hash
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a.snap.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], serde_json::json!(7));
    assert!(manifest["outputs"].as_object().unwrap().len() == 1);
}

#[test]
fn turbulent_file_size_follows_header_arithmetic() {
    let dir = workdir("gen-size");
    run_ok(&dir, &["generate", "turbulent", "--nt", "100000", "-o", "press.snap"]);
    let grid = latentlens::data::polar_grid(8, 8);
    let expected = latentlens::data::io::header_len(&grid) + 64 * 100_000 * 8;
    let len = std::fs::metadata(dir.join("press.snap")).unwrap().len() as usize;
    assert_eq!(len, expected);
}

#[test]
fn missing_config_key_names_the_key_and_exits_2() {
    let dir = workdir("bad-config");
    std::fs::write(dir.join("cfg.json"), r#"{"name": "x", "turbulent": {"n_radial": 8}}"#).unwrap();
    let out = run_in(&dir, &["generate", "turbulent", "--config", "cfg.json", "-o", "p.snap"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_azimuthal"), "error should name the missing key: {err}");

    // a config without the requested dataset section names that section
    std::fs::write(dir.join("cfg2.json"), r#"{"name": "x"}"#).unwrap();
    let out2 = run_in(&dir, &["generate", "laminar", "--config", "cfg2.json", "-o", "p.snap"]);
    assert_eq!(out2.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out2.stderr).contains("laminar"));
}

#[test]
fn corrupt_dataset_exits_3() {
    let dir = workdir("bad-data");
    std::fs::write(dir.join("junk.snap"), b"NOTADATASET....").unwrap();
    let out = run_in(&dir, &["pod", "junk.snap", "-o", "pod"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));
}

#[test]
fn usage_error_exits_2() {
    let dir = workdir("usage");
    let out = run_in(&dir, &["pod"]); // missing required arguments
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pod_then_plot_renders_one_panel_per_mode() {
    let dir = workdir("pod-plot");
    run_ok(&dir, &[
        "generate", "laminar", "--preset", "laminar-ae-nz2", "--nt", "96", "-o", "wake.snap",
    ]);
    run_ok(&dir, &["pod", "wake.snap", "-o", "pod", "--modes", "2"]);
    run_ok(&dir, &[
        "plot", "pod/modes.csv", "--kind", "heatmap", "--header", "--grid", "16", "12", "-o",
        "modes.svg", "--title", "modes",
    ]);
    let svg = std::fs::read_to_string(dir.join("modes.svg")).unwrap();
    assert_eq!(svg.matches("mode 1").count(), 1);
    assert_eq!(svg.matches("mode 2").count(), 1);
    // 192 cells per panel, 2 panels, plus background and 2 frames
    assert_eq!(svg.matches("<rect").count(), 2 * 192 + 3);

    run_ok(&dir, &[
        "spectrum", "wake.snap", "--method", "fft", "--normalize-std", "-o", "spec.csv",
    ]);
    run_ok(&dir, &[
        "plot", "spec.csv", "--kind", "line", "--header", "--x-first-column", "-o", "spec.svg",
    ]);
    let line_svg = std::fs::read_to_string(dir.join("spec.svg")).unwrap();
    assert_eq!(line_svg.matches("<path d=\"M").count(), 1);
}

#[test]
fn spectrum_csv_has_strouhal_axis() {
    let dir = workdir("spectrum");
    run_ok(&dir, &["generate", "turbulent", "--nt", "512", "-o", "p.snap"]);
    run_ok(&dir, &[
        "spectrum", "p.snap", "--method", "welch", "--segment", "128", "--premultiply", "-o",
        "psd.csv",
    ]);
    let text = std::fs::read_to_string(dir.join("psd.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "st,value");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    // premultiplied: zero at St = 0
    assert_eq!(first[1], 0.0);
    let rows = text.lines().count() - 1;
    assert_eq!(rows, 128 / 2 + 1);
}

#[test]
fn decompose_with_both_methods_reports_the_gap_and_rank_filter_chain_works() {
    let dir = workdir("pipeline");
    run_ok(&dir, &[
        "generate", "laminar", "--preset", "laminar-ae-nz2", "--nt", "128", "-o", "wake.snap",
    ]);
    run_ok(&dir, &["pod", "wake.snap", "-o", "pod"]);
    run_ok(&dir, &[
        "train", "wake.snap", "--preset", "laminar-ae-nz2", "--epochs", "5", "--seed", "4", "-o",
        "run",
    ]);
    let out = run_ok(&dir, &[
        "decompose", "wake.snap", "--network", "run/network.json", "--checkpoint",
        "run/checkpoint.aewts", "--basis", "pod/basis.pod", "--method", "both", "-o", "dec",
    ]);
    assert!(out.contains("dual-method max relative epsilon gap"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("dec/sensitivity_summary.json")).unwrap())
            .unwrap();
    let gap = summary["dual_method_max_relative_gap"].as_f64().unwrap();
    assert!(gap < 1e-3, "reverse-mode vs central-difference gap {gap}");

    run_ok(&dir, &[
        "rank", "--epsilon", "dec/epsilon.csv", "--target-modes", "1,2", "-o", "ranking.json",
    ]);
    let ranking: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ranking.json")).unwrap()).unwrap();
    assert_eq!(ranking["ranking"].as_array().unwrap().len(), 2);

    run_ok(&dir, &[
        "filter", "wake.snap", "--network", "run/network.json", "--checkpoint",
        "run/checkpoint.aewts", "--keep", "1", "-o", "fil",
    ]);
    let filtered = latentlens::data::io::load(&dir.join("fil/filtered.snap")).unwrap();
    assert_eq!(filtered.n_points(), 192);
    assert_eq!(filtered.n_snapshots(), 128);

    // checkpoint/config mismatch is refused with both hashes printed
    let other = run_in(&dir, &[
        "decompose", "wake.snap", "--network", "run/network.json", "--checkpoint",
        "pod/basis.pod", "--basis", "pod/basis.pod", "-o", "dec2",
    ]);
    assert_eq!(other.status.code(), Some(3));
}

#[test]
fn csv_import_layout_flag() {
    let dir = workdir("csv");
    std::fs::write(dir.join("series.csv"), "0.0,1.0\n0.5,0.5\n1.0,-0.5\n0.5,-1.0\n").unwrap();
    // rows are snapshots: 2 signals of length 4
    run_ok(&dir, &[
        "spectrum", "series.csv", "--layout", "rows=time", "--method", "fft", "--dt", "0.5",
        "-o", "out.csv",
    ]);
    let text = std::fs::read_to_string(dir.join("out.csv")).unwrap();
    assert_eq!(text.lines().count() - 1, 3); // 4-sample one-sided spectrum

    // pod ingests the same CSV: 2 signals -> at most rank-2 basis
    run_ok(&dir, &["pod", "series.csv", "--layout", "rows=time", "-o", "podcsv"]);
    let energy = std::fs::read_to_string(dir.join("podcsv/energy.csv")).unwrap();
    assert!(energy.lines().count() >= 2);
}

#[test]
fn threads_env_is_validated() {
    let dir = workdir("threads");
    let out = Command::new(exe())
        .args(["generate", "laminar", "--nt", "32", "-o", "x.snap"])
        .env("LATENTLENS_THREADS", "bogus")
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(exe())
        .args(["generate", "laminar", "--nt", "32", "-o", "x.snap"])
        .env("LATENTLENS_THREADS", "2")
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(ok.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("x.snap.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["threads"], serde_json::json!(2));
}
