use std::path::Path;
use std::process::{Command, Output};

use conjecture_lab::lab::{csv_columns, read_json_records, write_csv, RecordKind};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .output()
        .expect("run lab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = lab(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["disc", "sync", "ellipsoid", "kikuchi", "sk", "multifreq"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn csv_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sk.csv");
    let o = lab(&["sk", "--n", "5", "--beta", "0.2", "--seed", "3", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_columns("sk").unwrap());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "trial");
    assert_eq!(&rows[0][3], "3");
    // The summary goes to stdout when records go to a file.
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary.is_object());
}

#[test]
fn json_round_trip_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "experiment = \"sync\"\nseed = 5\ntrials = 3\n[params]\ngraph = \"cycle:6\"\nmax_iter = 50000\n",
    )
    .unwrap();
    let out = dir.path().join("sync.json");
    let o = lab(&["--config", path_str(&cfg), "--seed", "9", "sync", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_json_records(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let trials: Vec<_> = recs.iter().filter(|r| r.kind == RecordKind::Trial).collect();
    assert_eq!(trials.len(), 3);
    for r in &recs {
        assert_eq!(r.config.master_seed, 9);
        assert_eq!(r.config.params["graph"], "cycle:6");
        assert_eq!(r.config.params["max_iter"], 50000);
    }
    assert_eq!(
        trials.iter().map(|r| r.trial.unwrap()).collect::<Vec<_>>(),
        vec![0, 1, 2]
    );
}

#[test]
fn reruns_are_identical_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let o = lab(&[
            "multifreq", "--n", "60", "--L", "3", "--lambda", "1.5", "--trials", "6", "--seed", "11",
            "--jobs", jobs, "--format", "json", "--out", path_str(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        read_json_records(&std::fs::read_to_string(out).unwrap())
            .unwrap()
            .iter()
            .map(|r| r.scientific())
            .collect::<Vec<_>>()
    };
    let a = run("1", "a.json");
    assert_eq!(a, run("1", "b.json"));
    assert_eq!(a, run("3", "c.json"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_param = dir.path().join("bad.toml");
    std::fs::write(&bad_param, "[params]\nbetaa = 0.1\n").unwrap();
    let wrong_exp = dir.path().join("wrong.toml");
    std::fs::write(&wrong_exp, "experiment = \"disc\"\n").unwrap();
    let bad_key = dir.path().join("key.toml");
    std::fs::write(&bad_key, "sed = 1\n").unwrap();

    let cases: Vec<Vec<&str>> = vec![
        vec!["sk", "--betaa", "0.1"],
        vec!["sk", "--format", "xml"],
        vec!["--config", path_str(&bad_param), "sk"],
        vec!["--config", path_str(&wrong_exp), "sk"],
        vec!["--config", path_str(&bad_key), "sk"],
        vec!["sk", "--mode", "sideways"],
        vec!["ellipsoid", "--d", "1"],
        vec!["multifreq", "--group", "so3"],
        vec!["multifreq", "--trials", "1"],
        vec!["kikuchi", "--lambda-grid", "0.5,1"],
        vec!["disc", "--matrix", "hadamard:x"],
    ];
    for args in cases {
        let o = lab(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn failing_trials_exit_3_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = lab(&[
        "kikuchi", "--n", "8", "--r", "2", "--ell", "1", "--lambda-grid", "0,1e308", "--trials", "2",
        "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let err_col = r.headers().unwrap().iter().position(|h| h == "error").unwrap();
    let errors = r
        .records()
        .filter(|x| !x.as_ref().unwrap()[err_col].is_empty())
        .count();
    assert!(errors >= 2);
}

#[test]
fn empty_record_set_is_header_only() {
    let mut buf = Vec::new();
    write_csv("multifreq", &[], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(
        text.trim_end().split(',').collect::<Vec<_>>(),
        csv_columns("multifreq").unwrap()
    );
}
