use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_panodepth"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "panodepth {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A small configuration so the command-line tests stay fast.
fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "erp_width = 256\nerp_height = 128\ntangent_width = 100\ntangent_height = 87\n",
    )
    .unwrap();
    path
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        run(&[
            "pipeline",
            "--config",
            cfg,
            "--provider",
            "synthetic",
            "--seed",
            "7",
            "--dump",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let fa = files(&a);
    assert!(fa.len() > 60, "{} files", fa.len());
    assert_eq!(fa, files(&b));
}

#[test]
fn blending_the_dumped_maps_reproduces_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("run");
    run(&[
        "pipeline",
        "--config",
        cfg,
        "--dump",
        "--out",
        out.to_str().unwrap(),
    ]);
    let reblended = tmp.path().join("again.pfm");
    run(&[
        "blend",
        "--config",
        cfg,
        "--aligned",
        out.join("aligned").to_str().unwrap(),
        "--out",
        reblended.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out.join("disparity.pfm")).unwrap(),
        fs::read(reblended).unwrap()
    );
}

#[test]
fn provider_directories_round_trip_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let scene = tmp.path().join("scene");
    run(&[
        "synth",
        "--config",
        cfg,
        "--scene",
        "sphere",
        "--out",
        scene.to_str().unwrap(),
    ]);
    let provider = scene.join("provider");
    run(&[
        "estimate-check",
        "--config",
        cfg,
        "--dir",
        provider.to_str().unwrap(),
    ]);

    let out = tmp.path().join("run");
    let stdout = run(&[
        "pipeline",
        "--config",
        cfg,
        "--provider",
        "files",
        "--provider-dir",
        provider.to_str().unwrap(),
        "--gt",
        scene.join("gt_depth.pfm").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("AbsRel"));
    let eval = run(&[
        "eval",
        "--pred",
        out.join("disparity.pfm").to_str().unwrap(),
        "--gt",
        scene.join("gt_depth.pfm").to_str().unwrap(),
    ]);
    let metrics: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(metrics["abs_rel"].as_f64().unwrap() < 0.2);

    // a missing face is named by the contract check
    fs::remove_file(provider.join("face_13.pfm")).unwrap();
    let check = bin()
        .args([
            "estimate-check",
            "--config",
            cfg,
            "--dir",
            provider.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!check.status.success());
    assert!(String::from_utf8_lossy(&check.stdout).contains("missing faces [13]"));
}

#[test]
fn layout_lists_twenty_cameras() {
    let out = run(&["layout"]);
    let layout: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(layout["cameras"].as_array().unwrap().len(), 20);
}

#[test]
fn project_and_align_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let scene = tmp.path().join("scene");
    run(&["synth", "--config", cfg, "--out", scene.to_str().unwrap()]);

    let tangents = tmp.path().join("tangents");
    run(&[
        "project",
        "--config",
        cfg,
        "--image",
        scene.join("image.png").to_str().unwrap(),
        "--out",
        tangents.to_str().unwrap(),
    ]);
    assert!(tangents.join("face_19.png").is_file());

    let aligned = tmp.path().join("aligned");
    run(&[
        "align",
        "--config",
        cfg,
        "--dir",
        scene.join("provider").to_str().unwrap(),
        "--out",
        aligned.to_str().unwrap(),
    ]);
    assert!(aligned.join("grids_16x14.json").is_file());
    run(&[
        "estimate-check",
        "--config",
        cfg,
        "--dir",
        aligned.to_str().unwrap(),
    ]);
}

#[test]
fn ablation_table_covers_every_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let json = tmp.path().join("table.json");
    let out = run(&[
        "ablate",
        "--config",
        cfg.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("no-align / nn") && text.contains("multi-scale / poisson"));
    let table: serde_json::Value = serde_json::from_slice(&fs::read(json).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 6 * 4);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never");
    let out_dir = out_dir.to_str().unwrap();
    let out = bin()
        .args([
            "pipeline",
            "--erp-width",
            "300",
            "--erp-height",
            "100",
            "--out",
            out_dir,
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["pipeline", "--provider", "files", "--out", out_dir])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--provider-dir"));
    assert!(!tmp.path().join("never").exists());
}
