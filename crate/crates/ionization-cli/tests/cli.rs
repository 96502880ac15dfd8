use std::path::Path;
use std::process::Command;

use ionization_cli::config::{parse_pairs, DEFAULT_STEP, DEFAULT_TRUNCATION};
use ionization_cli::output::{digest, parse_csv, parse_json, to_csv, to_json};
use ionization_cli::{parse_args, run, ConfigError, Format, Method, ParseFailure, RunError, Subcommand, Table};

fn args(line: &str) -> Vec<String> {
    std::iter::once("ionization".to_string()).chain(line.split_whitespace().map(String::from)).collect()
}

fn config_error(line: &str) -> ConfigError {
    match parse_args(args(line)) {
        Err(ParseFailure::Config(e)) => e,
        other => panic!("expected a configuration error for '{line}', got {other:?}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ionization"))
}

#[test]
fn pole_config_with_defaults() {
    let cfg = parse_args(args("pole --alpha0 0.05 --omega 2")).unwrap();
    assert_eq!(cfg.subcommand, Subcommand::Pole);
    assert_eq!(cfg.alpha0, 0.05);
    assert_eq!(cfg.omega, 2.0);
    assert_eq!(cfg.step, DEFAULT_STEP);
    assert_eq!(cfg.truncation, DEFAULT_TRUNCATION);
    assert_eq!(cfg.format, Format::Csv);
    assert_eq!(cfg.output, Path::new("pole.csv"));
}

#[test]
fn range_and_type_errors_name_the_token() {
    match config_error("pole --omega 0") {
        ConfigError::Range { key, token, .. } => assert_eq!((key.as_str(), token.as_str()), ("omega", "0")),
        e => panic!("{e:?}"),
    }
    match config_error("charge --step abc") {
        ConfigError::Type { key, token, .. } => assert_eq!((key.as_str(), token.as_str()), ("step", "abc")),
        e => panic!("{e:?}"),
    }
    assert!(matches!(config_error("charge --tmax=-1"), ConfigError::Range { .. }));
    assert!(matches!(config_error("charge --format xml"), ConfigError::Range { .. } | ConfigError::Type { .. }));
    assert!(matches!(config_error("charge --step 0.5 --tmax 1"), ConfigError::Range { .. }));
    assert_eq!(parse_args(args("charge --alpha0 -0.2")).unwrap().alpha0, -0.2);
}

#[test]
fn resonance_is_rejected_for_spectral_runs() {
    let e = ionization::model::binding_energy();
    let err = config_error(&format!("pole --omega {e:?}"));
    assert_eq!(err, ConfigError::Resonance { omega: e, n: 1 });
    assert!(err.to_string().contains("1 * omega"));
    let err = config_error(&format!("pole --omega {:?}", e / 3.0));
    assert!(matches!(err, ConfigError::Resonance { n: 3, .. }));
    // The time-domain solver has no resonance restriction.
    assert!(parse_args(args(&format!("charge --omega {e:?}"))).is_ok());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert!(matches!(parse_args(args("pole --colour red")), Err(ParseFailure::Usage(_))));
    assert!(matches!(parse_args(args("frobnicate")), Err(ParseFailure::Usage(_))));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# driven run\nalpha0 = 0.2\nomega=3 # trailing comment\n\nseed-perturbation = 0.5\n").unwrap();
    let cfg = parse_args(args(&format!("charge --config {} --omega 4", path.display()))).unwrap();
    assert_eq!(cfg.alpha0, 0.2);
    assert_eq!(cfg.omega, 4.0);
    assert_eq!(cfg.seed_perturbation, 0.5);

    std::fs::write(&path, "alpha0 = 0.2\nbogus = 1\n").unwrap();
    assert_eq!(config_error(&format!("charge --config {}", path.display())), ConfigError::UnknownKey("bogus".into()));
    assert!(matches!(parse_pairs("no equals sign"), Err(ConfigError::Syntax { line: 1, .. })));
    assert!(matches!(config_error("charge --config /nonexistent/run.conf"), ConfigError::Io { .. }));
}

#[test]
fn method_resolution() {
    assert_eq!(parse_args(args("charge --tmax 10")).unwrap().method, Method::Product);
    assert_eq!(parse_args(args("charge --tmax 50")).unwrap().method, Method::Cq);
    assert!(parse_args(args("charge --tmax 50 --method product")).is_err());
}

#[test]
fn pairs_round_trip_through_resolve() {
    let cfg = parse_args(args("scan --alpha0-grid 0.01,0.02 --omega-grid 2,3 --format json")).unwrap();
    let pairs = cfg.to_pairs();
    let again = ionization_cli::config::resolve(cfg.subcommand, &pairs).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn empty_table_is_header_only() {
    let t = Table::new(&["t", "re_q", "im_q", "abs_q"]);
    assert_eq!(to_csv(&t), "t,re_q,im_q,abs_q\n");
    let back = parse_json(&to_json(&t), &t.columns).unwrap();
    assert!(back.is_empty());
}

#[test]
fn csv_and_json_agree_after_round_trip() {
    let mut t = Table::new(&["x", "y"]);
    t.push(vec![0.1, -1.0 / 3.0]);
    t.push(vec![1e-300, 6.02214076e23]);
    t.push(vec![std::f64::consts::PI, -0.0]);
    let csv = to_csv(&t);
    assert!(!csv.contains('\r'));
    let from_csv = parse_csv(&csv).unwrap();
    let from_json = parse_json(&to_json(&t), &t.columns).unwrap();
    assert_eq!(from_csv, t);
    assert_eq!(from_json, t);
}

#[test]
fn non_finite_cells_are_reported() {
    let mut t = Table::new(&["a", "b"]);
    t.push(vec![1.0, 2.0]);
    t.push(vec![3.0, f64::NAN]);
    let cell = t.check_finite().unwrap_err();
    assert_eq!((cell.row, cell.column.as_str()), (1, "b"));
}

#[test]
fn digest_is_deterministic() {
    assert_eq!(digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pole.csv");
    let line = format!("pole --alpha0 0.05 --omega 2 --truncation 64 --output {}", out.display());
    let first = run(&parse_args(args(&line)).unwrap()).unwrap();
    let text = std::fs::read(&out).unwrap();
    let second = run(&parse_args(args(&line)).unwrap()).unwrap();
    assert_eq!(first.digest, second.digest);
    assert_eq!(first.digest, digest(&text));
    let table = parse_csv(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(table.column("winding").unwrap(), vec![1.0]);
    assert!((table.column("re_p0").unwrap()[0] + 0.038_535_832_982_176_6).abs() < 1e-10);
}

#[test]
fn charge_pipeline_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let cfg = parse_args(args(&format!("charge --alpha0 0.1 --tmax 1 --step 0.01 --output {}", out.display()))).unwrap();
    let m = run(&cfg).unwrap();
    assert_eq!(m.rows, 101);
    let t = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.columns, ["t", "re_q", "im_q", "abs_q"]);
    let manifest = dir.path().join("q.manifest.json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(v["outputs"][0]["digest"], m.digest);
    assert_eq!(v["config"]["subcommand"], "charge");
}

#[test]
fn scan_rows_sorted_and_missing_poles_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let cfg = parse_args(args(&format!(
        "scan --alpha0-grid 0.05,0,0.02 --omega-grid 3,2 --truncation 64 --output {}",
        out.display()
    )))
    .unwrap();
    run(&cfg).unwrap();
    let t = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.columns, ["alpha0", "omega", "re_p0", "im_p0", "winding", "agree", "found"]);
    let keys: Vec<(f64, f64)> = t.rows.iter().map(|r| (r[0], r[1])).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    let found = t.column("found").unwrap();
    assert_eq!(&found[..2], &[0.0, 0.0]);
    assert!(found[2..].iter().all(|&f| f == 1.0));
}

#[test]
fn run_error_exit_codes() {
    let resonance = RunError::Config(ConfigError::Resonance { omega: 1.0, n: 1 });
    assert_eq!(resonance.exit_code(), 4);
    assert_eq!(RunError::Config(ConfigError::UnknownKey("x".into())).exit_code(), 2);
    let numerical = RunError::Numerical(ionization::Error::NonConvergence { what: "x", residual: 1.0 });
    assert_eq!(numerical.exit_code(), 3);
    let json = numerical.to_json();
    assert_eq!(json["exit_code"], 3);
    assert!(json["message"].as_str().unwrap().contains("did not converge"));
}

#[test]
fn binary_exit_codes() {
    let status = |line: &str| bin().args(line.split_whitespace()).output().unwrap();
    assert_eq!(status("pole --omega 0").status.code(), Some(2));
    assert_eq!(status("pole --colour red").status.code(), Some(2));
    assert_eq!(status("--help").status.code(), Some(0));
    let e = ionization::model::binding_energy();
    let out = status(&format!("pole --omega {:?}", e / 2.0));
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 4);
    assert!(err["message"].as_str().unwrap().contains("2 * omega"));
}

#[test]
fn binary_rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let run1 = bin()
        .args(["survival", "--alpha0", "0.1", "--tmax", "1", "--step", "0.01", "--stride", "10", "--format", "json"])
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run1.status.success(), "{}", String::from_utf8_lossy(&run1.stderr));
    let first = std::fs::read(&out).unwrap();
    let manifest = dir.path().join("s.manifest.json");
    let run2 = bin().arg("survival").arg("--from-manifest").arg(&manifest).output().unwrap();
    assert!(run2.status.success(), "{}", String::from_utf8_lossy(&run2.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), first);
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let cols: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(cols, ["t", "re_theta", "im_theta", "abs_theta", "abs_z1", "abs_z"]);
}
