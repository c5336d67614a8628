use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gfmm::dataset::{load_csv, CsvOptions, Normalizer};
use gfmm::selection::{split_folds, train, TrainConfig};
use gfmm::Algorithm;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfmm"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gfmm")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "gfmm {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn inconsistent_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris.csv");
    let out = dir.path().join("m.txt");
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--algo", "online", "--sigma", "0.1"],
        vec!["train", "--algo", "online", "--measure", "longest"],
        vec!["train", "--algo", "agglo-2", "--theta-min", "0.1"],
        vec!["train", "--algo", "online", "--bogus"],
        vec!["train", "--algo", "nope"],
        vec!["train", "--algo", "online", "--theta", "1.5"],
    ];
    for mut c in cases {
        c.extend(["--data", s(&iris), "--out", s(&out)]);
        let o = run(&c);
        assert_eq!(o.status.code(), Some(2), "{c:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    let o = run(&["stats", "friedman"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["stats", "holm", "--ranks", s(&data("table13_ranks.csv")), "--control", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
}

#[test]
fn train_predict_prune_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    let iris = data("iris.csv");
    let stdout = ok(&["train", "--algo", "online", "--theta", "0.26", "--data", s(&iris), "--out", s(&model)]);
    assert!(stdout.contains("boxes"), "{stdout}");
    assert!(std::fs::read_to_string(&model).unwrap().starts_with("gfmm-model 1\n"));

    let preds = dir.path().join("p.csv");
    let report = dir.path().join("p.json");
    ok(&["predict", "--model", s(&model), "--data", s(&iris), "--out", s(&preds), "--report", s(&report)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row,label,predicted,score_setosa,score_versicolor,score_virginica"
    );
    assert_eq!(lines.count(), 150);
    let r = json(&report);
    assert_eq!(r["results"]["rows"], 150);
    assert!(r["results"]["error_rate"].as_f64().unwrap() < 0.1);

    let pruned = dir.path().join("pruned.txt");
    let report = dir.path().join("prune.json");
    ok(&["prune", "--model", s(&model), "--validation", s(&iris), "--out", s(&pruned), "--report", s(&report)]);
    let r = json(&report);
    assert!(r["results"]["boxes_after"].as_u64() <= r["results"]["boxes_before"].as_u64());
    assert!(pruned.exists());
}

#[test]
fn predict_without_out_writes_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    let iris = data("iris.csv");
    ok(&["train", "--algo", "agglo-2", "--theta", "0.3", "--data", s(&iris), "--features", "petal_length,3", "--out", s(&model)]);
    let stdout = ok(&["predict", "--model", s(&model), "--data", s(&iris), "--features", "2,3"]);
    assert_eq!(stdout.lines().count(), 151);
    let o = run(&["predict", "--model", s(&model), "--data", s(&iris)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris.csv");
    for i in 0..2 {
        let m = dir.path().join(format!("m{i}.txt"));
        let r = dir.path().join(format!("r{i}.json"));
        ok(&["train", "--algo", "online", "--theta", "0.1", "--seed", "7", "--data", s(&iris), "--out", s(&m), "--report", s(&r)]);
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("m0.txt"), read("m1.txt"));
    assert_eq!(read("r0.json"), read("r1.json"));

    let m2 = dir.path().join("m2.txt");
    ok(&["train", "--algo", "online", "--theta", "0.1", "--seed", "8", "--data", s(&iris), "--out", s(&m2)]);
    assert_ne!(read("m0.txt"), read("m2.txt"));
}

#[test]
fn verify_flag_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "order-study", "--algo", "online", "--theta", "0.2", "--shuffles", "3", "--data", s(&data("iris.csv")),
        "--report", s(&dir.path().join("o.json")), "--verify",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("identical"));
}

#[test]
fn one_cell_benchmark_matches_plain_train_test() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "thetas = [0.26]\n").unwrap();
    let report = dir.path().join("b.json");
    let iris = data("iris.csv");
    ok(&["benchmark", "--algo", "online", "--data", s(&iris), "--grid", s(&grid), "--seed", "3", "--report", s(&report)]);
    let r = json(&report);

    let ds = load_csv(&iris, &CsvOptions::default()).unwrap();
    let plan = split_folds(&ds.labels, 4, 3).unwrap();
    let cfg = TrainConfig::new(Algorithm::Online, 0.26);
    let mut errors = Vec::new();
    let mut boxes = Vec::new();
    for f in 0..4 {
        let norm = Normalizer::fit(&ds, &plan.rest(f)).unwrap();
        let tr = norm.patterns(&ds, &plan.rest(f)).unwrap();
        let te = norm.patterns(&ds, &plan.fold(f)).unwrap();
        let model = train(&tr, &cfg, &[1.0; 4]).unwrap();
        errors.push(model.error_rate(&te).unwrap());
        boxes.push(model.len() as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert_eq!(r["results"]["mean_test_error"].as_f64().unwrap(), mean(&errors));
    assert_eq!(r["results"]["mean_box_count"].as_f64().unwrap(), mean(&boxes));
    for (f, fold) in r["results"]["folds"].as_array().unwrap().iter().enumerate() {
        assert_eq!(fold["test_error"].as_f64().unwrap(), errors[f]);
        assert_eq!(fold["selected"]["theta"], 0.26);
    }
}

#[test]
fn timings_stay_out_of_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "thetas = [0.2, 0.4]\n").unwrap();
    let report = dir.path().join("b.json");
    let timings = dir.path().join("t.json");
    let stdout = ok(&[
        "benchmark", "--algo", "agglo-2", "--data", s(&data("iris.csv")), "--grid", s(&grid), "--report", s(&report),
        "--timings", s(&timings),
    ]);
    assert!(stdout.contains("train s"));
    assert!(!std::fs::read_to_string(&report).unwrap().contains("seconds"));
    let t = json(&timings);
    assert_eq!(t["timings"].as_array().unwrap().len(), 4);
    assert!(t["timings"][0]["train_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn bad_grid_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "thetas = [0.2]\nsigma = [0.1]\n").unwrap();
    let o = run(&["benchmark", "--algo", "agglo-2", "--data", s(&data("iris.csv")), "--grid", s(&grid)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn friedman_prints_statistics() {
    let stdout = ok(&["stats", "friedman", "--ranks", s(&data("table13_ranks.csv"))]);
    assert!(stdout.contains("chi2_F = 22.6722"), "{stdout}");
    assert!(stdout.contains("F_F = 5.9323"), "{stdout}");
    // Ranking the raw error table gives the same matrix as the published ranks.
    let from_errors = ok(&["stats", "friedman", "--errors", s(&data("table12_errors.csv"))]);
    assert_eq!(from_errors, stdout);
}

/// Paths to every leaf in a JSON value, with its type. Arrays contribute
/// their first element only.
fn shape(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                shape(x, &format!("{prefix}.{k}"), out);
            }
        }
        Value::Array(a) => match a.first() {
            Some(x) => shape(x, &format!("{prefix}[]"), out),
            None => out.push(format!("{prefix}[] empty")),
        },
        Value::Null => out.push(format!("{prefix} null")),
        Value::Bool(_) => out.push(format!("{prefix} bool")),
        Value::Number(_) => out.push(format!("{prefix} number")),
        Value::String(_) => out.push(format!("{prefix} string")),
    }
}

#[test]
fn report_schema_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris.csv");
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "thetas = [0.3]\nsigmas = [0.0]\nmeasures = [\"longest\"]\n").unwrap();
    let m = dir.path().join("m.txt");
    let p = |n: &str| dir.path().join(n);
    ok(&["train", "--algo", "online", "--data", s(&iris), "--out", s(&m), "--report", s(&p("train.json"))]);
    ok(&["predict", "--model", s(&m), "--data", s(&iris), "--out", s(&p("p.csv")), "--report", s(&p("predict.json"))]);
    ok(&["prune", "--model", s(&m), "--validation", s(&iris), "--out", s(&p("m2.txt")), "--report", s(&p("prune.json"))]);
    ok(&["benchmark", "--algo", "agglo-2", "--data", s(&iris), "--grid", s(&grid), "--report", s(&p("benchmark.json"))]);
    ok(&["order-study", "--algo", "online", "--shuffles", "2", "--data", s(&iris), "--report", s(&p("order.json"))]);
    let t13 = data("table13_ranks.csv");
    ok(&["stats", "friedman", "--ranks", s(&t13), "--report", s(&p("friedman.json"))]);
    ok(&["stats", "holm", "--ranks", s(&t13), "--control", "AGGLO-2", "--report", s(&p("holm.json"))]);

    let mut lines = Vec::new();
    for name in ["train", "predict", "prune", "benchmark", "order", "friedman", "holm"] {
        let mut out = Vec::new();
        shape(&json(&p(&format!("{name}.json"))), name, &mut out);
        lines.extend(out);
    }
    let actual = lines.join("\n") + "\n";
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_schema.txt");
    if std::env::var_os("GFMM_BLESS").is_some() {
        std::fs::write(&golden_path, &actual).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).expect("golden file; run with GFMM_BLESS=1 to create it");
    assert_eq!(actual, golden, "report schema changed; bump schema_version and re-bless");
}
