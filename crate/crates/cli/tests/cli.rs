// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::Command;

use gig_cli::{cmd_benchmark, Overrides, RunConfig};
use serde_json::json;

fn gig(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gig")).args(args).output().unwrap()
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small() -> serde_json::Value {
    json!({
        "experiment": { "n_points": 600, "train": { "epochs": 30 } },
        "noise_grid": [0.1, 0.3],
        "seeds": [0, 1],
        "methods": [
            { "method": "ig", "steps": 32 },
            { "method": "geodesic_knn", "k": 5, "edge_steps": 4, "attribution_steps": 8 },
            { "method": "random" }
        ],
        "mask_k_grid": [1.0, 50.0, 65.0]
    })
}

#[test]
fn train_is_reproducible_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small());
    let out = dir.path().to_str().unwrap();
    let first = gig(&["train", "--config", &cfg, "--out", out]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let model = fs::read(dir.path().join("model.json")).unwrap();
    assert!(gig(&["train", "--config", &cfg, "--out", out]).status.success());
    assert_eq!(model, fs::read(dir.path().join("model.json")).unwrap());
    let report = fs::read_to_string(dir.path().join("train_report.csv")).unwrap();
    assert!(report.starts_with("seed,noise,epochs,final_loss,train_accuracy,test_accuracy\n0,0.15,30,"));
}

#[test]
fn attribute_writes_one_row_per_feature() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small());
    let out = dir.path().to_str().unwrap();
    assert!(gig(&["train", "--config", &cfg, "--out", out]).status.success());
    let run = gig(&["attribute", "--config", &cfg, "--out", out, "--methods", "ig", "--points", "10"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(dir.path().join("attributions_ig.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "input_id,feature_index,value,f_input,f_baseline,completeness_residual,strong_completeness_residual,method"
    );
    assert_eq!(lines.count(), 20);
    assert!(!dir.path().join("attributions_random.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut cfg = small();
    cfg["experiment"]["graph_samples"] = json!("test_only");
    cfg["methods"][1]["k"] = json!(10);
    let cfg = write_config(dir.path(), cfg);
    assert!(gig(&["train", "--config", &cfg, "--out", out]).status.success());

    // Five test points and the baseline make six graph nodes.
    let knn = gig(&["attribute", "--config", &cfg, "--out", out, "--methods", "geodesic_knn", "--points", "5"]);
    assert_eq!(knn.status.code(), Some(2), "{}", String::from_utf8_lossy(&knn.stderr));
    assert_eq!(gig(&["attribute", "--config", &cfg, "--out", out, "--methods", "nope"]).status.code(), Some(2));
    let missing = dir.path().join("missing");
    assert_eq!(gig(&["train", "--config", &cfg, "--out", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(gig(&["train", "--bogus-flag"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"noise_grid\": 3}").unwrap();
    assert_eq!(gig(&["train", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    fs::write(&bad, "{\"no_such_field\": 3}").unwrap();
    assert_eq!(gig(&["train", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let no_model = tempfile::tempdir().unwrap();
    let code = gig(&["axioms", "--out", no_model.path().to_str().unwrap()]).status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small());
    let config = RunConfig::load(&Overrides {
        config: Some(cfg.into()),
        seed: Some(9),
        methods: Some("random,geodesic_knn,enhanced_ig".into()),
        noise: Some(0.4),
        points: Some(7),
        ..Overrides::default()
    })
    .unwrap();
    assert_eq!((config.seed, config.seeds.clone(), config.noise), (9, vec![9], 0.4));
    assert_eq!(config.experiment.n_points, 600);
    assert_eq!(config.experiment.max_test_points, Some(7));
    let tags: Vec<&str> = config.methods.iter().map(|m| m.tag()).collect();
    assert_eq!(tags, ["random", "geodesic_knn", "enhanced_ig"]);
    // Parameters from the file survive; new tags get defaults.
    assert_eq!(config.methods[1], serde_json::from_value(small()["methods"][1].clone()).unwrap());
    assert_eq!(config.methods[2], gig_core::MethodConfig::from_tag("enhanced_ig").unwrap());
}

#[test]
fn axioms_cover_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg["experiment"]["n_points"] = json!(2000);
    cfg["experiment"]["train"]["epochs"] = json!(60);
    cfg["methods"][0]["steps"] = json!(512);
    let cfg = write_config(dir.path(), cfg);
    let out = dir.path().to_str().unwrap();
    assert!(gig(&["train", "--config", &cfg, "--out", out]).status.success());
    let run = gig(&["axioms", "--config", &cfg, "--out", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("axioms.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let methods: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(methods, ["ig", "geodesic_knn", "random"]);
    let ig_median: f64 = rows[0][1].parse().unwrap();
    assert!(ig_median < 1e-3, "{ig_median}");
    let changes = fs::read_to_string(dir.path().join("output_change.csv")).unwrap();
    assert_eq!(changes.lines().count(), 401);
}

#[test]
fn benchmark_writes_tables_and_wellformed_svg() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: RunConfig = serde_json::from_value(small()).unwrap();
    config.out = dir.path().to_path_buf();
    config.figure_noise = 0.12;
    let output = cmd_benchmark(&config, std::io::sink()).unwrap();
    assert_eq!(output.purity.len(), 2 * 2 * 3);
    assert_eq!(output.summary.len(), 3);

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
    assert!(summary.starts_with("method,auc_purity,stderr\n"));
    let purity = fs::read_to_string(dir.path().join("purity.csv")).unwrap();
    assert!(purity.starts_with("method,noise,seed,purity\nig,0.1,0,"));
    let curves = fs::read_to_string(dir.path().join("mask_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3 * 3);

    let mut svgs = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "svg") {
            let text = fs::read_to_string(&path).unwrap();
            let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(doc.root_element().tag_name().name(), "svg");
            svgs += 1;
        }
    }
    assert_eq!(svgs, 3 + 1);
    assert!(dir.path().join("heatmap_geodesic_knn.svg").exists());
}
