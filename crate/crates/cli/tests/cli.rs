use std::path::Path;
use std::process::{Command, Output};

use terracover::data::LandCoverClass::*;
use terracover::ClassificationMatrix;

fn terracover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_terracover")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_matrix(dir: &Path) -> String {
    let m = ClassificationMatrix::from_labels(2, 2, vec![Forest, Forest, River, SeaLake]).unwrap();
    let path = dir.join("matrix.json");
    m.save(&path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn stats_table_and_exclusion() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_matrix(dir.path());
    let out = terracover(&["stats", "--matrix", &m]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 11);
    assert!(text.contains("Forest") && text.contains("50.00%"));

    let out = terracover(&["stats", "--matrix", &m, "--exclude", "Sea Lake"]);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    assert!(!text.contains("Sea Lake"));
    let total: f64 = text.lines().skip(1).map(|l| l.trim().trim_end_matches('%').rsplit(' ').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 100.0).abs() < 0.05);
    assert!(text.contains("66.67%") && text.contains("33.33%"));
}

#[test]
fn stats_formats_and_regions() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_matrix(dir.path());
    let csv = stdout(&terracover(&["stats", "--matrix", &m, "--format", "csv", "--region", "1,2,0,2"]));
    assert!(csv.starts_with("class,count,share_percent\n"));
    assert!(csv.contains("River,1,50\n") && csv.contains("Sea Lake,1,50\n"));
    let json = stdout(&terracover(&["stats", "--matrix", &m, "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["total"], 4);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_matrix(dir.path());
    for args in [
        vec!["stats", "--matrix", &m, "--exclude", "Swamp"],
        vec!["stats", "--matrix", &m, "--region", "0,9,0,1"],
        vec!["stats", "--matrix", "/nonexistent/m.json"],
        vec!["stats", "--matrix", &m, "--exclude", "Forest,River,Sea Lake"],
    ] {
        let out = terracover(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
    assert_eq!(terracover(&["stats"]).status.code(), Some(2));
    assert_eq!(terracover(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn render_writes_map_and_legend() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_matrix(dir.path());
    let out_png = dir.path().join("map.png");
    let out = terracover(&["render", "--matrix", &m, "--out", out_png.to_str().unwrap(), "--scale", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = image::open(&out_png).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (6, 6));
    assert_eq!(img.get_pixel(0, 0).0, Forest.colour());
    assert_eq!(img.get_pixel(5, 5).0, SeaLake.colour());
    let legend = std::fs::read_to_string(dir.path().join("map.png.legend.json")).unwrap();
    assert!(legend.contains("Sea Lake"));
}

#[test]
fn synth_ingest_train_eval_scan() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    let out = terracover(&["synth", "--out", d, "--per-class", "10", "--classes", "Forest,Sea Lake", "--seed", "3"]);
    assert!(out.status.success());
    std::fs::write(data.join("Forest").join("broken.png"), b"junk").unwrap();

    let report = dir.path().join("skipped.txt");
    let out = terracover(&["ingest", d, "--skip-report", report.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("20 images, 1 skipped"));
    assert!(std::fs::read_to_string(&report).unwrap().contains("broken.png"));
    std::fs::remove_file(data.join("Forest").join("broken.png")).unwrap();

    // A narrow network keeps the end-to-end run short.
    let cfg = dir.path().join("train.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "architecture": terracover::nn::ArchitectureSpec::satellite_net(&terracover::nn::SatelliteNetOptions {
                conv_channels: [4, 4, 4, 4], hidden_units: 8, ..Default::default()
            })
        })
        .to_string(),
    )
    .unwrap();
    let model = dir.path().join("m.snet");
    let history = dir.path().join("history.csv");
    let out = terracover(&[
        "train", "--data", d, "--out", model.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
        "--epochs", "2", "--lr", "0.001", "--batch-size", "8", "--history", history.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("test accuracy"));
    assert_eq!(std::fs::read_to_string(&history).unwrap().lines().count(), 3);

    let out = terracover(&["eval", "--model", model.to_str().unwrap(), "--data", d]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("on 2 images"));

    let img = dir.path().join("scene.png");
    image::RgbImage::from_pixel(130, 70, image::Rgb([20, 60, 120])).save(&img).unwrap();
    let matrix = dir.path().join("scene.json");
    let out = terracover(&["scan", "--model", model.to_str().unwrap(), "--image", img.to_str().unwrap(), "--out", matrix.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = ClassificationMatrix::load(&matrix).unwrap();
    assert_eq!((m.rows(), m.cols(), m.source()), (1, 2, "scene.png"));

    let out = terracover(&["train", "--data", d, "--out", model.to_str().unwrap(), "--epochs", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
