//! End-to-end tests of the `usbf` binary: exit codes, artifact layout, the
//! bundled presets, and reproducibility of whole command invocations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use usbf_cli::files::ChannelDataFile;
use usbf_core::config::ExperimentConfig;

fn usbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usbf"))
        .args(args)
        .output()
        .expect("the binary should spawn")
}

fn run_ok(args: &[&str]) {
    let out = usbf(args);
    assert!(
        out.status.success(),
        "usbf {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("usbf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn presets_match_the_built_in_scales() {
    let desk = ExperimentConfig::from_file(&presets().join("desk.cfg")).unwrap();
    assert_eq!(desk, ExperimentConfig::desk_scale());
    let full = ExperimentConfig::from_file(&presets().join("full.cfg")).unwrap();
    assert_eq!(full, ExperimentConfig::full_scale());

    let text = std::fs::read_to_string(presets().join("point_target.phantom")).unwrap();
    let phantom = usbf_cli::phantom::parse_phantom(&text).unwrap();
    assert_eq!(phantom.len(), 1);
    assert_eq!(
        (phantom.scatterers[0].x, phantom.scatterers[0].z, phantom.scatterers[0].amplitude),
        (0.0, 0.05, 1.0)
    );

    let text = std::fs::read_to_string(presets().join("cyst.phantom")).unwrap();
    let phantom = usbf_cli::phantom::parse_phantom(&text).unwrap();
    assert!(phantom.len() > 15_000, "the speckle field should survive the cyst cut");

    for name in ["point_target.targets", "cyst.targets"] {
        let text = std::fs::read_to_string(presets().join(name)).unwrap();
        assert_eq!(usbf_cli::phantom::parse_targets(&text).unwrap().len(), 1);
    }
}

#[test]
fn simulate_on_an_empty_phantom_writes_a_zero_tensor() {
    let phantom = tmp("empty.phantom");
    std::fs::write(&phantom, "").unwrap();
    let out_dir = tmp("empty-sim");
    run_ok(&["simulate", "--phantom", &path_str(&phantom), "--out", &path_str(&out_dir)]);

    let data = ChannelDataFile::load(&out_dir.join("channels.usbf")).unwrap();
    match data {
        ChannelDataFile::Sa(d) => {
            assert!(d.n_channels > 0 && d.n_time > 0);
            assert!(d.samples.iter().all(|&s| s == 0.0));
        }
        _ => panic!("the default technique is sa"),
    }
    let snapshot = ExperimentConfig::from_file(&out_dir.join("config.cfg")).unwrap();
    assert_eq!(snapshot, ExperimentConfig::default());
}

#[test]
fn every_technique_survives_the_simulate_reconstruct_evaluate_chain() {
    let phantom = tmp("tri.phantom");
    std::fs::write(&phantom, "[point]\nz = 0.05\n").unwrap();
    let targets = tmp("tri.targets");
    std::fs::write(&targets, "[point]\ndepth = 0.05\n").unwrap();
    for technique in ["sa", "sta", "pa"] {
        let tech = format!("experiment.technique={technique}");
        let sim = tmp(&format!("tri-sim-{technique}"));
        run_ok(&[
            "simulate",
            "--set",
            &tech,
            "--phantom",
            &path_str(&phantom),
            "--out",
            &path_str(&sim),
        ]);
        let rec = tmp(&format!("tri-rec-{technique}"));
        run_ok(&[
            "reconstruct",
            "--set",
            &tech,
            "--data",
            &path_str(&sim.join("channels.usbf")),
            "--out",
            &path_str(&rec),
        ]);
        let eval = tmp(&format!("tri-eval-{technique}"));
        run_ok(&[
            "evaluate",
            "--image",
            &path_str(&rec.join("envelope.usbf")),
            "--targets",
            &path_str(&targets),
            "--out",
            &path_str(&eval),
        ]);
        let csv = std::fs::read_to_string(eval.join("metrics.csv")).unwrap();
        let width: f64 = csv_cell(&csv, "fwhm_mm", 0).parse().unwrap();
        assert!(
            (0.5..20.0).contains(&width),
            "{technique}: implausible focal width {width} mm"
        );
    }
}

#[test]
fn unknown_flags_exit_with_usage_code_2() {
    let out = usbf(&["--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "expected usage text, got:\n{text}");

    let out = usbf(&["simulate", "--no-such-flag", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_code_1_and_a_message() {
    let out = usbf(&["simulate", "--phantom", "/nonexistent.phantom", "--out", &path_str(&tmp("x"))]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("error") && text.contains("nonexistent"), "got:\n{text}");

    let out = usbf(&["reconstruct", "--data", "/nonexistent.usbf", "--out", &path_str(&tmp("y"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = usbf(&[
        "reconstruct",
        "--data",
        "/nonexistent.usbf",
        "--method",
        "dnnb",
        "--out",
        &path_str(&tmp("z")),
    ]);
    assert_eq!(out.status.code(), Some(1), "dnnb without --weights is a runtime error");
}

/// Column index lookup in a metrics CSV written by `evaluate`.
fn csv_cell(csv: &str, column: &str, row: usize) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header
        .iter()
        .position(|&c| c == column)
        .unwrap_or_else(|| panic!("no column `{column}` in {header:?}"));
    lines.nth(row).unwrap().split(',').nth(idx).unwrap().to_string()
}

#[test]
fn point_preset_reproduces_the_aperture_resolution_ratio() {
    let presets = presets();
    let phantom = path_str(&presets.join("point_target.phantom"));
    let targets = path_str(&presets.join("point_target.targets"));

    let mut widths = Vec::new();
    for aperture in ["small", "large"] {
        let sim = tmp(&format!("ratio-sim-{aperture}"));
        let rec = tmp(&format!("ratio-rec-{aperture}"));
        let eva = tmp(&format!("ratio-eval-{aperture}"));
        run_ok(&[
            "simulate",
            "--phantom",
            &phantom,
            "--aperture",
            aperture,
            "--out",
            &path_str(&sim),
        ]);
        run_ok(&[
            "reconstruct",
            "--data",
            &path_str(&sim.join("channels.usbf")),
            "--out",
            &path_str(&rec),
        ]);
        run_ok(&[
            "evaluate",
            "--image",
            &path_str(&rec.join("envelope.usbf")),
            "--targets",
            &targets,
            "--out",
            &path_str(&eva),
        ]);
        let csv = std::fs::read_to_string(eva.join("metrics.csv")).unwrap();
        let fwhm: f64 = csv_cell(&csv, "fwhm_mm", 0).parse().unwrap();
        assert!(fwhm.is_finite() && fwhm > 0.0);
        widths.push(fwhm);
    }
    let ratio = widths[0] / widths[1];
    assert!(
        (1.6..=2.4).contains(&ratio),
        "small/large width ratio {ratio:.3} (widths {widths:?})"
    );
}

#[test]
fn reruns_produce_bit_identical_artifacts() {
    let phantom = path_str(&presets().join("point_target.phantom"));
    let (sim_a, sim_b) = (tmp("rerun-sim-a"), tmp("rerun-sim-b"));
    for dir in [&sim_a, &sim_b] {
        run_ok(&["simulate", "--phantom", &phantom, "--out", &path_str(dir)]);
    }
    let bytes_a = std::fs::read(sim_a.join("channels.usbf")).unwrap();
    let bytes_b = std::fs::read(sim_b.join("channels.usbf")).unwrap();
    assert_eq!(bytes_a, bytes_b, "simulate must be reproducible");

    let (rec_a, rec_b) = (tmp("rerun-rec-a"), tmp("rerun-rec-b"));
    for (sim, rec) in [(&sim_a, &rec_a), (&sim_b, &rec_b)] {
        run_ok(&[
            "reconstruct",
            "--data",
            &path_str(&sim.join("channels.usbf")),
            "--out",
            &path_str(rec),
        ]);
    }
    for artifact in ["envelope.usbf", "sector.pgm", "raster.pgm", "config.cfg"] {
        let a = std::fs::read(rec_a.join(artifact)).unwrap();
        let b = std::fs::read(rec_b.join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} must be reproducible");
    }
}
