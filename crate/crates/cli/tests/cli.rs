use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn deflab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deflab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn deflab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path, command: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn bounds(v: &Value) -> (f64, f64) {
    let parse = |i: usize| v[i].as_str().unwrap().parse::<f64>().unwrap();
    (parse(0), parse(1))
}

#[test]
fn heavy_divergence_on_uniform_matches_half_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(
        dir.path(),
        &[
            "heavy-divergence",
            "--measure",
            "uniform",
            "--terms",
            "10000",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // Under the uniform measure every term is 1/(2k).
    let oracle: f64 = (1..=10_000).map(|k| 0.5 / k as f64).sum();
    let (lo, hi) = bounds(&summary(dir.path(), "heavy-divergence")["summary"]["partial_at_K"]);
    assert!(lo <= hi);
    assert!(
        (lo - oracle).abs() < 1e-3 && (hi - oracle).abs() < 1e-3,
        "[{lo}, {hi}] vs {oracle}"
    );
    assert!((oracle - 4.8938).abs() < 1e-3);
}

#[test]
fn uniform_g_case_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(dir.path(), &["verify-g", "--uniform-case", "--kmax", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("[FAIL]"));
    let csv = fs::read_to_string(dir.path().join("verify-g.csv")).unwrap();
    assert!(csv.starts_with("object_id,level_or_prefix,value_lo,value_hi,bound,pass\n"));
}

#[test]
fn low_log_bits_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(
        dir.path(),
        &[
            "--log-bits",
            "16",
            "verify-g",
            "--uniform-case",
            "--kmax",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("log-bits"));
    assert!(!dir.path().join("verify-g.csv").exists());
}

#[test]
fn identical_runs_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "--seed",
        "7",
        "series-audit",
        "--preset",
        "geometric",
        "--ratio",
        "2/3",
        "--terms",
        "64",
    ];
    for dir in [&a, &b] {
        assert_eq!(deflab(dir.path(), &args).status.code(), Some(0));
    }
    for name in ["series-audit.csv", "series-audit.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn json_tables_match_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(
        dir.path(),
        &[
            "--format",
            "json,csv",
            "heavy-branch",
            "--measure",
            "uniform",
            "--depth",
            "40",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = summary(dir.path(), "heavy-branch");
    assert_eq!(json["config"]["command"]["heavy-branch"]["depth"], 40);
    assert_eq!(json["config"]["log_bits"], 64);
    let table = &json["tables"][0];
    let mut reader = csv::Reader::from_path(dir.path().join("heavy-branch.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(serde_json::to_value(&header).unwrap(), table["columns"]);
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    assert_eq!(serde_json::to_value(&rows).unwrap(), table["rows"]);
    assert!(!rows.is_empty());
}

#[test]
fn parse_errors_name_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.txt");
    fs::write(&file, "depth 3\n0 1/2\n01 3/4x\n").unwrap();
    let o = deflab(
        dir.path(),
        &[
            "apriori",
            "--semimeasure",
            file.to_str().unwrap(),
            "--measure",
            "uniform",
            "--path",
            "000",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column 4"), "{}", stderr(&o));
}

#[test]
fn failed_check_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("u.test");
    // Level 2 holds 0 and 1, total mass 1 > 1/4.
    fs::write(&file, "1 0\n2 0\n2 1\n").unwrap();
    let o = deflab(
        dir.path(),
        &[
            "validate-test",
            "--measure",
            "uniform",
            "--test",
            file.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL]"));
    let json = summary(dir.path(), "validate-test");
    assert_eq!(json["pass"], false);
    assert!(json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["witness"].is_string()));
}

#[test]
fn family_pipeline_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(
        dir.path(),
        &["construct-dk", "--measure", "uniform", "--count", "16"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let family = dir.path().join("family.json");
    assert!(family.exists());

    let o = deflab(
        dir.path(),
        &["verify-g", "--family", family.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let a = dir.path().join("a.txt");
    fs::write(&a, "depth 6\n0 1/2\n1 1/2\n").unwrap();
    let o = deflab(
        dir.path(),
        &[
            "witness-audit",
            "--family",
            family.to_str().unwrap(),
            "--semimeasure",
            a.to_str().unwrap(),
            "-c",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn custom_series_needs_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = deflab(
        dir.path(),
        &["series-audit", "--preset", "custom", "--terms", "8"],
    );
    assert_eq!(o.status.code(), Some(2));

    let file = dir.path().join("s.txt");
    let lines: String = (1..=16)
        .map(|k| format!("1/{} 1/{}\n", 1u64 << k, 1u64 << k))
        .collect();
    fs::write(&file, lines).unwrap();
    let o = deflab(
        dir.path(),
        &[
            "series-audit",
            "--preset",
            "custom",
            file.to_str().unwrap(),
            "--terms",
            "8",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}
