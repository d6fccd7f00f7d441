//! Command-line behaviour and exit codes.

use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xai-harmony")).args(args).output().unwrap()
}

#[test]
fn missing_seed_is_a_config_error() {
    let out = cli(&["run", "--dataset", "iris"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--seed", "0", "--dataset", "iris", "--model", "svm", "--out"]
        .into_iter()
        .chain([dir.path().to_str().unwrap()])
        .collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn skipped_cells_give_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&[
        "run",
        "--seed",
        "0",
        "--dataset",
        "iris",
        "--model",
        "knn",
        "--metric",
        "accuracy,f1-binary",
        "--grid",
        "0.5:1.5:0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["skip_count"], 1);
    assert_eq!(manifest["cells"], 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, "seed = 1\ndatasets = [\"iris\"]\nmodels = [\"logit\"]\ngrid = \"0.5:1.5:0.5\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = fs::read_to_string(out_dir.join("cells.csv")).unwrap();
    let row: Vec<&str> = cells.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "4");
    assert_eq!(row[3], "logit");
}

#[test]
fn perturb_and_attr_export_csv() {
    let out = cli(&["perturb", "--seed", "0", "--dataset", "iris", "--model", "logit", "--grid", "0.5,1,1.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "feature,p=0.5,p=1,p=1.5,anwa");
    assert_eq!(text.lines().count(), 2 + 4);

    let out = cli(&["attr", "--seed", "0", "--dataset", "iris", "--model", "logit"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 30);

    let out = cli(&["perturb", "--seed", "0", "--dataset", "iris,wine", "--model", "logit"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn datasets_fetch_from_local_files() {
    let src = tempfile::tempdir().unwrap();
    let row = "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K\n\
               50, Private, 83311, HS-grad, 9, Married-civ-spouse, Sales, Husband, Black, Female, 0, 0, 13, Mexico, >50K\n";
    fs::write(src.path().join("adult.data"), row).unwrap();
    fs::write(src.path().join("adult.test"), "|1x3 Cross validator\n").unwrap();
    let out_dir = src.path().join("prepared");
    let base = ["datasets", "fetch", "--from", src.path().to_str().unwrap(), "--dir", out_dir.to_str().unwrap()];

    let refused = cli(&base);
    assert_eq!(refused.status.code(), Some(3));

    let mut args = base.to_vec();
    args.push("--allow-unpinned");
    let ok = cli(&args);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.contains("adult.data sha256 "));
    assert!(stdout.contains("2 rows kept, 0 dropped"));
    assert!(out_dir.join("census.csv").is_file());
}
