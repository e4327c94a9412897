//! End-to-end runs of the `ranslice` binary.

use std::io::Write;
use std::process::{Command, Output};

use ranslice::output::{read_records, AnalysisRecord, Format, SimRecord};
use ranslice::validation::ValidationReport;
use ranslice_core::{analyze, validate, Formulas, KpiMode, Scheme, SystemConfig};

fn ranslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ranslice"))
        .args(args)
        .output()
        .expect("spawn ranslice")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const OMA_PAOI: [&str; 12] = [
    "--K", "4", "--N", "6", "--Tint", "5", "--alpha", "0.05", "--scheme", "oma", "--mode", "paoi",
];

#[test]
fn analyze_optimal_oma_meets_throughput_target() {
    let o = ranslice(&[
        "analyze", "--scheme", "oma", "--mode", "paoi", "--K", "64", "--N", "77", "--Tint", "13",
        "--alpha", "0.01",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs: Vec<AnalysisRecord> = read_records(o.stdout.as_slice(), Format::Json).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0].s1 >= 0.75, "s1 = {}", recs[0].s1);
}

#[test]
fn block_larger_than_frame_is_rejected() {
    let o = ranslice(&[
        "analyze", "--scheme", "oma", "--mode", "lr", "--K", "10", "--N", "8", "--Tint", "4",
        "--alpha", "0.01",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("K ≤ N"), "{}", stderr(&o));
}

#[test]
fn analysis_json_round_trips() {
    for (scheme, mode) in [("oma", "lr"), ("noma", "paoi")] {
        let o = ranslice(&[
            "analyze", "--format", "json", "--scheme", scheme, "--mode", mode, "--K", "6", "--N",
            "9", "--Tint", "7", "--Q", "3", "--alpha", "0.02",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let parsed: Vec<AnalysisRecord> = read_records(o.stdout.as_slice(), Format::Json).unwrap();

        let cfg = SystemConfig {
            k: 6,
            n: 9,
            t_int: 7,
            q: 3,
            alpha: 0.02,
            eps1: 0.1,
            eps2: 0.05,
        };
        let (scheme, mode): (Scheme, KpiMode) = (scheme.parse().unwrap(), mode.parse().unwrap());
        let checked = validate(&cfg, scheme, mode).unwrap();
        let r = analyze(&checked, Formulas::Consistent).unwrap();
        let expect = AnalysisRecord::new(*checked.config(), scheme, mode, Formulas::Consistent, r);
        assert_eq!(parsed, vec![expect]);
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let run = |seed: &str| {
        let mut args = vec![
            "--seed",
            seed,
            "--format",
            "csv",
            "simulate",
            "--n-slots",
            "100000",
            "--reps",
            "3",
        ];
        args.extend(OMA_PAOI);
        let o = ranslice(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        o.stdout
    };
    let a = run("42");
    assert_eq!(a, run("42"));
    assert_ne!(a, run("43"));
}

#[test]
fn perfect_noma_channel_reaches_code_rate() {
    let o = ranslice(&[
        "simulate",
        "--scheme",
        "noma",
        "--mode",
        "lr",
        "--K",
        "4",
        "--N",
        "6",
        "--alpha",
        "0",
        "--eps1",
        "0",
        "--n-slots",
        "60000",
        "--warmup",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs: Vec<SimRecord> = read_records(o.stdout.as_slice(), Format::Json).unwrap();
    assert_eq!(recs[0].s1_hat, 4.0 / 6.0);
}

#[test]
fn million_slot_run_reports_intervals() {
    let mut args = vec!["--format", "csv", "simulate", "--n-slots", "1000000"];
    args.extend(OMA_PAOI);
    let o = ranslice(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    for col in ["ci_s1", "ci_ps1", "ci_ps2"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    let recs: Vec<SimRecord> = read_records(text.as_bytes(), Format::Csv).unwrap();
    assert!(recs[0].ci_s1 > 0.0 && recs[0].ci_s1 < 0.01);
}

#[test]
fn validate_small_oma_paoi_passes() {
    let mut args = vec!["validate", "--n-slots", "1000000"];
    args.extend(OMA_PAOI);
    let o = ranslice(&args);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let report: ValidationReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.pass);
    let tvd = report
        .checks
        .iter()
        .find(|c| c.statistic == "paoi_pmf")
        .and_then(|c| c.tvd)
        .unwrap();
    assert!(tvd < 0.02, "TVD {tvd}");
}

#[test]
fn corrupted_analysis_fails_with_named_statistic() {
    for (hook, name) in [("s1", "s1"), ("timeliness", "paoi_pmf")] {
        let mut args = vec!["validate", "--n-slots", "200000", "--corrupt", hook];
        args.extend(OMA_PAOI);
        let o = ranslice(&args);
        assert_eq!(o.status.code(), Some(2));
        assert!(
            stderr(&o).lines().any(|l| l == format!("FAIL {name}")),
            "{}",
            stderr(&o)
        );
    }
}

#[test]
fn strict_noma_validation_includes_ledger() {
    let o = ranslice(&[
        "--strict-paper",
        "validate",
        "--n-slots",
        "200000",
        "--scheme",
        "noma",
        "--mode",
        "lr",
        "--K",
        "4",
        "--N",
        "8",
        "--alpha",
        "0.02",
    ]);
    let report: ValidationReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.formulas, Formulas::Printed);
    let ledger = report.ledger.expect("ledger section");
    assert!(!ledger.is_empty());

    let plain = ranslice(&[
        "validate",
        "--n-slots",
        "200000",
        "--scheme",
        "noma",
        "--mode",
        "lr",
        "--K",
        "4",
        "--N",
        "8",
        "--alpha",
        "0.02",
    ]);
    let report: ValidationReport = serde_json::from_slice(&plain.stdout).unwrap();
    assert!(report.ledger.is_none());
}

#[test]
fn unreachable_throughput_gives_infeasible_rows() {
    let o = ranslice(&[
        "alpha-sweep",
        "--scheme",
        "noma",
        "--mode",
        "paoi",
        "--K-max",
        "8",
        "--alphas",
        "0.001,0.01",
        "--s1-min",
        "0.99",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains("INFEASIBLE")), "{text}");
}

#[test]
fn scenario_file_with_flag_override() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{"K": 4, "N": 6, "T_int": 5, "Q": 2, "alpha": 0.05, "scheme": "OMA", "mode": "LR"}}"#
    )
    .unwrap();
    let path = file.path().to_str().unwrap();

    let o = ranslice(&["analyze", "--scenario", path]);
    assert!(o.status.success(), "{}", stderr(&o));
    let base: Vec<AnalysisRecord> = read_records(o.stdout.as_slice(), Format::Json).unwrap();
    assert_eq!(base[0].config.q, 2);
    assert_eq!(base[0].config.eps1, 0.1);

    let o = ranslice(&["analyze", "--scenario", path, "--Q", "4"]);
    let over: Vec<AnalysisRecord> = read_records(o.stdout.as_slice(), Format::Json).unwrap();
    assert_eq!(over[0].config.q, 4);
    assert_eq!(over[0].config.k, 4);

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(
        bad,
        r#"{{"K": 4, "N": 6, "alpha": 0.05, "scheme": "OMA", "mode": "LR", "R": 1}}"#
    )
    .unwrap();
    let o = ranslice(&["analyze", "--scenario", bad.path().to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn pareto_emits_sorted_frontier() {
    let o = ranslice(&[
        "pareto",
        "--scheme",
        "oma",
        "--mode",
        "paoi",
        "--alpha",
        "0.01",
        "--K-max",
        "12",
        "--Tint-max",
        "16",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let s1 = header.iter().position(|c| *c == "s1").unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(s1).unwrap().parse().unwrap())
        .collect();
    assert!(!values.is_empty());
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}
