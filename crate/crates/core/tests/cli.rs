use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-roc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn manifest(path: &Path) -> Value {
    let mut p = path.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// synth -> train -> votes in `dir`, returning the vote file name.
fn small_pipeline(dir: &Path, trees: &str) -> String {
    ok(
        dir,
        &["synth", "--n", "600", "--d", "4", "--seed", "1", "-o", "train.csv"],
    );
    ok(
        dir,
        &["synth", "--n", "400", "--d", "4", "--seed", "2", "-o", "test.csv"],
    );
    let model = format!("f{trees}.json");
    let votes = format!("v{trees}.csv");
    ok(
        dir,
        &[
            "train",
            "--data",
            "train.csv",
            "--trees",
            trees,
            "--seed",
            "7",
            "-o",
            &model,
        ],
    );
    ok(
        dir,
        &[
            "votes", "--model", &model, "--data", "test.csv", "--seed", "7", "-o", &votes,
        ],
    );
    votes
}

#[test]
fn train_records_resolved_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--n", "30", "--d", "4096", "--seed", "3", "-o", "wide.csv"],
    );
    ok(
        d,
        &[
            "train",
            "--data",
            "wide.csv",
            "--label-col",
            "label",
            "--trees",
            "3",
            "--max-depth",
            "2",
            "--max-features",
            "sqrt",
            "--seed",
            "7",
            "-o",
            "wide.model",
        ],
    );
    let m = manifest(&d.join("wide.model"));
    assert_eq!(m["subcommand"], "train");
    assert_eq!(m["results"]["features_per_split"], 64);
    assert_eq!(m["results"]["n_trees"], 3);
    assert_eq!(m["config"]["forest"]["max_depth"], 2);
    assert_eq!(m["seeds"]["forest"], 7);
    assert!(m["duration_secs"].is_number());
}

#[test]
fn validation_errors_exit_2_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "50", "--d", "2", "--seed", "1", "-o", "data.csv"]);
    let cases: &[(&[&str], &str)] = &[
        (
            &["train", "--data", "data.csv", "--trees", "0", "--seed", "1", "-o", "m"],
            "--trees",
        ),
        (&["train", "--data", "data.csv", "-o", "m"], "--seed"),
        (
            &[
                "train",
                "--data",
                "data.csv",
                "--seed",
                "1",
                "--max-features",
                "9",
                "-o",
                "m",
            ],
            "--max-features",
        ),
        (
            &[
                "train",
                "--data",
                "data.csv",
                "--seed",
                "1",
                "--resampling",
                "jackknife",
                "-o",
                "m",
            ],
            "--resampling",
        ),
        (&["votes", "--model", "m", "--data", "data.csv", "-o", "v"], "--seed"),
        (
            &["oracle", "--votes", "v", "--seed", "1", "--replicates", "0", "-o", "o"],
            "--replicates",
        ),
        (&["oracle", "--votes", "v", "--replicates", "10", "-o", "o"], "--seed"),
        (
            &["roc", "--votes", "v", "--confidence", "1.5", "-o", "b"],
            "--confidence",
        ),
        (&["roc", "--votes", "v", "--mode", "both", "-o", "b"], "--mode"),
        (
            &["synth", "--generator", "moons", "--seed", "1", "-o", "x"],
            "--generator",
        ),
    ];
    for (args, flag) in cases {
        let out = run(d, args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(flag), "{args:?}: {}", stderr(&out));
    }
    let out = run(d, &["frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["roc", "--votes", "missing.csv", "-o", "b.csv"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    fs::write(d.join("one.csv"), "# m=4\nlabel,count\n1,2\n1,3\n").unwrap();
    let out = run(d, &["roc", "--votes", "one.csv", "-o", "b.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("single class"));
}

#[test]
fn vote_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("train.csv"), "x,label\n0,0\n1,0\n2,1\n3,1\n").unwrap();
    fs::write(d.join("test.csv"), "x,label\n0.5,0\n2.5,1\n1.5,1\n").unwrap();
    ok(
        d,
        &[
            "train",
            "--data",
            "train.csv",
            "--trees",
            "4",
            "--seed",
            "1",
            "-o",
            "m.json",
        ],
    );
    ok(
        d,
        &[
            "votes", "--model", "m.json", "--data", "test.csv", "--seed", "1", "-o", "full.csv",
        ],
    );
    let full = fs::read_to_string(d.join("full.csv")).unwrap();
    let lines: Vec<&str> = full.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "label,v1,v2,v3,v4");
    ok(
        d,
        &[
            "votes", "--model", "m.json", "--data", "test.csv", "--seed", "1", "--format", "compact", "-o", "c.csv",
        ],
    );
    assert!(fs::read_to_string(d.join("c.csv")).unwrap().starts_with("# m=4\n"));
    let dim = run(
        d,
        &[
            "votes", "--model", "m.json", "--data", "full.csv", "--seed", "1", "-o", "x.csv",
        ],
    );
    assert_eq!(code(&dim), 1);
}

#[test]
fn roc_modes_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let votes = small_pipeline(d, "32");
    ok(d, &["roc", "--votes", &votes, "--mode", "classifier", "-o", "c.csv"]);
    ok(d, &["roc", "--votes", &votes, "--mode", "full", "-o", "f.csv"]);
    let (c, f) = (csv_rows(&d.join("c.csv")), csv_rows(&d.join("f.csv")));
    assert_eq!(c.len(), 34);
    let mut wider = 0;
    for (a, b) in c.iter().zip(&f) {
        assert_eq!((a[1], a[4]), (b[1], b[4]));
        assert!(b[2] <= a[2] && a[3] <= b[3] && b[5] <= a[5] && a[6] <= b[6]);
        wider += (b[6] - b[5] > a[6] - a[5]) as usize;
    }
    assert!(wider > 20);
    let m = manifest(&d.join("f.csv"));
    assert!(m["results"]["auc"].as_f64().unwrap() > 0.7);

    ok(d, &["roc", "--votes", &votes, "--m-eval", "128", "-o", "big.csv"]);
    assert_eq!(csv_rows(&d.join("big.csv")).len(), 130);
}

#[test]
fn larger_evaluation_size_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = String::from("# m=256\nlabel,count\n");
    for j in 0..40 {
        text.push_str(&format!("{},{}\n", j % 2, (j * 37) % 257));
    }
    fs::write(d.join("v.csv"), text).unwrap();
    ok(d, &["roc", "--votes", "v.csv", "--m-eval", "512", "-o", "b.csv"]);
    assert_eq!(csv_rows(&d.join("b.csv")).len(), 514);
}

#[test]
fn degenerate_votes_have_zero_width_classifier_bands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("v.csv"), "# m=8\nlabel,count\n0,0\n0,8\n1,8\n1,8\n0,0\n1,0\n").unwrap();
    ok(d, &["roc", "--votes", "v.csv", "--mode", "classifier", "-o", "b.csv"]);
    for row in csv_rows(&d.join("b.csv")) {
        assert_eq!((row[2], row[3]), (row[1], row[1]));
        assert_eq!((row[5], row[6]), (row[4], row[4]));
    }
}

#[test]
fn compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let v16 = small_pipeline(d, "16");
    let v64 = small_pipeline(d, "64");
    ok(d, &["compare", "--a", &v16, "--b", &v16, "-o", "self.csv"]);
    let rows = csv_rows(&d.join("self.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[8] == 0.0));

    ok(d, &["compare", "--a", &v16, "--b", &v64, "-o", "cmp.csv"]);
    let text = fs::read_to_string(d.join("cmp.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"delta") && header.contains(&"se_delta") && header.contains(&"tpr_a_lo"));
    for row in csv_rows(&d.join("cmp.csv")) {
        assert_eq!(row.len(), header.len());
        assert!((row[8] - (row[5] - row[2])).abs() < 1e-12);
    }
    // an estimate file compares exactly like the vote file it came from
    ok(
        d,
        &["roc", "--votes", &v64, "-o", "b64.csv", "--estimate-out", "e64.csv"],
    );
    ok(d, &["compare", "--a", &v16, "--b", "e64.csv", "-o", "cmp2.csv"]);
    assert_eq!(
        fs::read(d.join("cmp.csv")).unwrap(),
        fs::read(d.join("cmp2.csv")).unwrap()
    );

    fs::write(d.join("other.csv"), "# m=4\nlabel,count\n0,1\n1,3\n").unwrap();
    let out = run(d, &["compare", "--a", &v16, "--b", "other.csv", "-o", "x.csv"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn oracle_report_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let votes = small_pipeline(d, "16");
    let a = ok(
        d,
        &[
            "oracle",
            "--votes",
            &votes,
            "--replicates",
            "4000",
            "--seed",
            "5",
            "-o",
            "o1.csv",
        ],
    );
    let b = ok(
        d,
        &[
            "oracle",
            "--votes",
            &votes,
            "--replicates",
            "4000",
            "--seed",
            "5",
            "-o",
            "o2.csv",
        ],
    );
    assert_eq!(a, b);
    assert!(a.trim_end().ends_with("PASS"));
    assert_eq!(fs::read(d.join("o1.csv")).unwrap(), fs::read(d.join("o2.csv")).unwrap());
    assert_eq!(a.lines().count(), 1 + 18 + 1);
    let out = run(
        d,
        &[
            "oracle",
            "--votes",
            &votes,
            "--replicates",
            "4000",
            "--seed",
            "5",
            "--classifier-mode",
            "shared",
            "--poisson",
            "-o",
            "o3.csv",
        ],
    );
    assert!(code(&out) == 0 || code(&out) == 1);

    fs::write(d.join("compact.csv"), "# m=4\nlabel,count\n0,1\n1,3\n").unwrap();
    let out = run(
        d,
        &[
            "oracle",
            "--votes",
            "compact.csv",
            "--replicates",
            "10",
            "--seed",
            "5",
            "--classifier-mode",
            "shared",
            "-o",
            "o4.csv",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "200", "--d", "3", "--seed", "1", "-o", "data.csv"]);
    fs::write(d.join("cfg.toml"), "[train]\ntrees = 5\nmax_depth = 3\nseed = 11\n").unwrap();
    ok(
        d,
        &["--config", "cfg.toml", "train", "--data", "data.csv", "-o", "a.json"],
    );
    let m = manifest(&d.join("a.json"));
    assert_eq!(m["results"]["n_trees"], 5);
    assert_eq!(m["config"]["forest"]["max_depth"], 3);
    assert_eq!(m["seeds"]["forest"], 11);
    ok(
        d,
        &[
            "train", "--config", "cfg.toml", "--data", "data.csv", "--trees", "2", "-o", "b.json",
        ],
    );
    let m = manifest(&d.join("b.json"));
    assert_eq!(m["results"]["n_trees"], 2);
    assert_eq!(m["config"]["forest"]["max_depth"], 3);

    fs::write(d.join("bad.toml"), "[train]\ntreez = 5\n").unwrap();
    let out = run(
        d,
        &[
            "--config", "bad.toml", "train", "--data", "data.csv", "--seed", "1", "-o", "c.json",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("treez"));
}

#[test]
fn pipeline_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--n", "400", "--d", "3", "--seed", "1", "-o", "train.csv"],
    );
    ok(d, &["synth", "--n", "200", "--d", "3", "--seed", "2", "-o", "test.csv"]);
    ok(
        d,
        &[
            "pipeline",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--trees",
            "8",
            "--seed",
            "3",
            "--format",
            "compact",
            "--out-dir",
            "run",
        ],
    );
    for f in [
        "model.json",
        "votes.csv",
        "bands.csv",
        "estimate.csv",
        "pipeline.manifest.json",
    ] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    for f in ["model.json", "votes.csv", "bands.csv"] {
        assert!(manifest(&d.join("run").join(f)).is_object());
    }
    assert!(fs::read_to_string(d.join("run/votes.csv"))
        .unwrap()
        .starts_with("# m=8"));
}
