use std::path::Path;
use std::process::{Command, Output};

use dualcert_cli::CSV_HEADER;
use dualcert_core::montecarlo::{sweep, CheckMode, GridSpec};
use dualcert_core::registry::{ensembles, model_families, ModelParams};

fn dualcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualcert"))
        .args(args)
        .output()
        .expect("failed to run dualcert")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn value(out: &Output, key: &str) -> String {
    stdout(out)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in output:\n{}", stdout(out)))
}

#[test]
fn bounds_sparse() {
    let out = dualcert(&[
        "bounds", "--model", "sparse", "--beta", "2", "--s", "4", "--n", "256",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&out, "m_threshold"), "93");
    let p: f64 = value(&out, "success_prob_lower").parse().unwrap();
    assert!((p - 0.7594728).abs() < 1e-6);
    assert!(stdout(&out).contains("t=2.741686507e1"));
}

#[test]
fn bounds_lowrank_and_block() {
    let out = dualcert(&[
        "bounds", "--model", "lowrank", "--beta", "1.5", "--r", "2", "--n1", "40", "--n2", "40",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&out, "m_threshold"), "690");
    assert!(value(&out, "success_prob_lower").starts_with("0.83583"));

    let out = dualcert(&[
        "bounds", "--model", "block", "--beta", "2", "--k", "3", "--B", "4", "--M", "64",
    ]);
    assert_eq!(value(&out, "m_threshold"), "227");
    assert_eq!(value(&out, "success_prob_lower"), "0.375000000");
}

#[test]
fn bounds_sign_reports_gate() {
    let out = dualcert(&[
        "bounds",
        "--model",
        "sparse",
        "--ensemble",
        "sign",
        "--beta",
        "2",
        "--epsilon",
        "0.1",
        "--s",
        "4",
        "--n",
        "256",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&out, "m_threshold"), "114");
    assert_eq!(value(&out, "gate_holds"), "false");
    let out = dualcert(&[
        "bounds",
        "--model",
        "lowrank",
        "--ensemble",
        "sign",
        "--beta",
        "2",
        "--r",
        "1",
        "--n",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bounds_rejects_small_beta() {
    let out = dualcert(&[
        "bounds", "--model", "sparse", "--beta", "1", "--s", "4", "--n", "256",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("beta must exceed 1"));
}

#[test]
fn bounds_help_states_log_base() {
    let out = dualcert(&["bounds", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("natural"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        dualcert(&["bounds", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(dualcert(&[]).status.code(), Some(1));
}

#[test]
fn certify_is_deterministic() {
    let args = [
        "certify", "--model", "sparse", "--n", "256", "--s", "4", "--m", "93", "--seed", "42",
    ];
    let first = dualcert(&args);
    let second = dualcert(&args);
    assert!(matches!(first.status.code(), Some(0) | Some(2)));
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn certify_too_few_measurements() {
    let out = dualcert(&[
        "certify", "--model", "sparse", "--n", "256", "--s", "4", "--m", "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("m < dim(T)"));
}

#[test]
fn certify_lowrank_reports_dim_t() {
    let out = dualcert(&[
        "certify", "--model", "lowrank", "--n1", "40", "--n2", "40", "--r", "2", "--m", "690",
        "--seed", "7",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    assert_eq!(value(&out, "d_T"), "156");
}

#[test]
fn certified_instance_is_solved() {
    let seed = (0..20)
        .map(|s| s.to_string())
        .find(|seed| {
            let out = dualcert(&[
                "certify", "--n", "256", "--s", "4", "--m", "93", "--seed", seed,
            ]);
            out.status.code() == Some(0)
        })
        .expect("no certified seed");
    let out = dualcert(&[
        "solve", "--n", "256", "--s", "4", "--m", "93", "--seed", &seed,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let err: f64 = value(&out, "rel_error").parse().unwrap();
    assert!(err <= 1e-4);
}

#[test]
fn solve_exit_codes() {
    let base = ["solve", "--n", "64", "--s", "3", "--m", "30", "--seed", "1"];
    let with = |extra: &[&str]| dualcert(&[&base[..], extra].concat());
    assert_eq!(with(&["--rho", "0"]).status.code(), Some(1));
    assert_eq!(with(&["--rho", "-1"]).status.code(), Some(1));
    let capped = with(&["--max-iter", "2"]);
    assert_eq!(capped.status.code(), Some(3));
    assert!(stdout(&capped).contains("primal_residual="));
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn sweep_writes_schema_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |path: &Path, threads: &str| {
        dualcert(&[
            "sweep",
            "--model",
            "sparse",
            "--n",
            "256",
            "--s",
            "4",
            "--m",
            "40:110:10",
            "--trials",
            "200",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ])
    };
    let out = run(&a, "1");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(run(&b, "4").status.code(), Some(0));
    assert_eq!(read(&a), read(&b));

    let text = String::from_utf8(read(&a)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 8);
}

#[test]
fn sweep_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = dualcert(&[
        "sweep",
        "--model",
        "block",
        "--k",
        "1,2",
        "--B",
        "4",
        "--M",
        "16",
        "--m",
        "30,60",
        "--trials",
        "12",
        "--seed",
        "3",
        "--check",
        "both",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let params = ModelParams {
        block_size: Some(4),
        blocks: Some(16),
        ..Default::default()
    };
    let mut grid = GridSpec::new(
        model_families().get("block").unwrap(),
        ensembles().get("gaussian").unwrap(),
        params,
        vec![30, 60],
    );
    grid.complexities = vec![1, 2];
    let rows = sweep(&grid, 12, 3, CheckMode::Both).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_string)
        .collect();
    assert_eq!(header, CSV_HEADER);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), rows.len());
    let close = |field: &str, expected: Option<f64>| match expected {
        None => assert_eq!(field, ""),
        Some(x) => {
            let parsed: f64 = field.parse().unwrap();
            assert!(
                (parsed - x).abs() <= 5e-9 * x.abs().max(1e-300),
                "{field} vs {x}"
            );
        }
    };
    for (rec, row) in records.iter().zip(&rows) {
        assert_eq!(&rec[0], "block");
        assert_eq!(&rec[1], "gaussian");
        assert_eq!(&rec[2], "64");
        assert_eq!(&rec[3], "");
        assert_eq!(&rec[5], "");
        assert_eq!(rec[6].parse::<usize>().unwrap(), row.params.k.unwrap());
        assert_eq!(&rec[8], "4");
        assert_eq!(&rec[9], "16");
        assert_eq!(rec[10].parse::<usize>().unwrap(), row.m);
        close(&rec[11], row.beta);
        assert_eq!(rec[12].parse::<usize>().unwrap(), 12);
        assert_eq!(rec[13].parse::<usize>().ok(), row.cert_successes);
        assert_eq!(rec[14].parse::<usize>().ok(), row.solver_successes);
        close(&rec[15], row.mean_dual_norm);
        close(&rec[16], row.max_dual_norm);
        close(&rec[17], row.theory_lower_bound);
        assert_eq!(&rec[18], "3");
    }
}

#[test]
fn sweep_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let out = dualcert(&[
        "sweep",
        "--n",
        "64",
        "--s",
        "3",
        "--m",
        "",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty grid"));
    assert!(!path.exists());

    let missing = dir.path().join("no/such/dir/x.csv");
    let out = dualcert(&[
        "sweep",
        "--n",
        "64",
        "--s",
        "3",
        "--m",
        "30",
        "--trials",
        "2",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
