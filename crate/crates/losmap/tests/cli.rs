//! End-to-end checks of the `losmap` binary: exit codes, output layout,
//! and eval reports.

use std::path::Path;
use std::process::Command;

fn losmap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_losmap"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn simulate_run_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    write(&base.join("scene.txt"), "room 0 0 1.495 10.24 10.24 3.25\n");
    write(
        &base.join("scanner.txt"),
        "ring_count = 8\nhoriz_res_deg = 1.5\nsigma = 0.01\n",
    );
    write(&base.join("traj.txt"), "0.0 0 0 1.5 0 0 0 1\n10.0 0 0 1.5 0 0 0 1\n");

    let status = losmap()
        .args([
            "simulate",
            "--scene",
            base.join("scene.txt").to_str().unwrap(),
            "--scanner",
            base.join("scanner.txt").to_str().unwrap(),
            "--traj",
            base.join("traj.txt").to_str().unwrap(),
            "--seed",
            "7",
            "--frames",
            "5",
            "--out",
            base.join("sim").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for i in 0..5 {
        assert!(base.join(format!("sim/frame_{i:06}.ply")).is_file());
        assert!(base.join(format!("sim/normals_{i:06}.txt")).is_file());
        assert!(base.join(format!("sim/labels_{i:06}.txt")).is_file());
    }
    assert!(base.join("sim/times.txt").is_file());
    assert!(base.join("sim/trajectory.txt").is_file());

    write(&base.join("config.txt"), "update_radius = 12\n");
    let status = losmap()
        .args([
            "run",
            "--frames",
            base.join("sim").to_str().unwrap(),
            "--traj",
            base.join("sim/trajectory.txt").to_str().unwrap(),
            "--config",
            base.join("config.txt").to_str().unwrap(),
            "--out",
            base.join("out").to_str().unwrap(),
            "--dump-field-every",
            "2",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(base.join("out/static_mesh.ply").is_file());
    assert!(base.join("out/field.csv").is_file());
    assert!(base.join("out/tsdf.csv").is_file());
    assert!(base.join("out/field_000001.csv").is_file());
    let timing = std::fs::read_to_string(base.join("out/timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 6); // header + 5 frames
    for i in 0..5 {
        assert!(base.join(format!("out/mask_{i:06}.txt")).is_file());
    }

    // Identical clouds evaluate to perfect scores.
    let out = losmap()
        .args([
            "eval",
            "--recon",
            base.join("sim/frame_000000.ply").to_str().unwrap(),
            "--gt",
            base.join("sim/frame_000000.ply").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("f1 = 100"), "report: {report}");
    assert!(report.contains("rmse = 0"), "report: {report}");

    // Masks against the simulator's ground-truth labels (all static).
    let out = losmap()
        .args([
            "eval",
            "--recon",
            base.join("sim/frame_000000.ply").to_str().unwrap(),
            "--gt",
            base.join("sim/frame_000000.ply").to_str().unwrap(),
            "--est-masks",
            base.join("out/mask_000000.txt").to_str().unwrap(),
            "--gt-masks",
            base.join("sim/labels_000000.txt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("dynamic_precision"), "report: {report}");
}

#[test]
fn sensor_inside_solid_box_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    write(&base.join("scene.txt"), "box 0 0 1.5 4 4 4\n");
    write(&base.join("traj.txt"), "0.0 0 0 1.5 0 0 0 1\n5.0 0 0 1.5 0 0 0 1\n");
    let status = losmap()
        .args([
            "simulate",
            "--scene",
            base.join("scene.txt").to_str().unwrap(),
            "--traj",
            base.join("traj.txt").to_str().unwrap(),
            "--seed",
            "1",
            "--frames",
            "2",
            "--out",
            base.join("sim").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = losmap()
        .args([
            "eval",
            "--recon",
            dir.path().join("nope.ply").to_str().unwrap(),
            "--gt",
            dir.path().join("nope.ply").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Unknown config keys are a usage error for `run`.
    let base = dir.path();
    write(&base.join("cfg.txt"), "voxelsize = 1\n");
    write(&base.join("traj.txt"), "0.0 0 0 0 0 0 0 1\n");
    write(&base.join("f.xyz"), "1 0 0\n");
    let status = losmap()
        .args([
            "run",
            "--frames",
            base.join("f.xyz").to_str().unwrap(),
            "--traj",
            base.join("traj.txt").to_str().unwrap(),
            "--config",
            base.join("cfg.txt").to_str().unwrap(),
            "--format",
            "xyz",
            "--out",
            base.join("out").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_cli_usage_exits_2() {
    let status = losmap().args(["frobnicate"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
