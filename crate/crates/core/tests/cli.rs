use std::path::Path;
use std::process::{Command, Output};

const BASE: [&str; 12] = [
    "--A", "1", "--k", "2", "--beta", "0.5", "--z", "1", "--t", "0.3", "--pi", "10",
];
const FIXTURE_M_STAR: f64 = 0.625_937_683_618_475_98;

fn taxopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxopt"))
        .args(args)
        .env_remove("TAXOPT_CONFIG")
        .output()
        .unwrap()
}

fn with_base<'a>(cmd: &'a str, overrides: &[(&'a str, &'a str)]) -> Vec<&'a str> {
    let mut args = vec![cmd];
    args.extend_from_slice(&BASE);
    for (flag, value) in overrides {
        match args.iter().position(|a| a == flag) {
            Some(i) => args[i + 1] = value,
            None => args.extend([*flag, *value]),
        }
    }
    args
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Column `name` of every data row of a CSV document.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

fn number(csv: &str, name: &str) -> f64 {
    column(csv, name)[0].parse().unwrap()
}

#[test]
fn solve_unit_penalty_case() {
    let out = taxopt(&with_base("solve", &[]));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(column(&stdout(&out), "m_star"), ["1.000000000000"]);
}

#[test]
fn solve_matches_oracle_fixture() {
    let out = taxopt(&with_base(
        "solve",
        &[("--beta", "1"), ("--precision", "15")],
    ));
    assert_eq!(out.status.code(), Some(0));
    let m = number(&stdout(&out), "m_star");
    assert!((m - FIXTURE_M_STAR).abs() <= 1e-12 * FIXTURE_M_STAR, "{m}");
}

#[test]
fn zero_tax_rate_is_degenerate() {
    let out = taxopt(&with_base("solve", &[("--t", "0")]));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(column(&stdout(&out), "kind"), ["DegenerateObjective"]);
}

#[test]
fn weak_penalty_has_no_interior_optimum() {
    let out = taxopt(&with_base("solve", &[("--beta", "0.25")]));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(column(&stdout(&out), "kind"), ["NoInteriorOptimum"]);
}

#[test]
fn statics_unit_penalty_case() {
    let out = taxopt(&with_base("statics", &[]));
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(number(&csv, "dm_dA"), -0.5);
    assert_eq!(number(&csv, "dm_dk").abs(), 0.0);
    // the removable 0/0 at B = 1 resolves to -e^{1/2}/2, confirmed by the FD column
    let db = number(&csv, "dm_dB");
    assert!((db + 0.5_f64.exp() / 2.0).abs() < 1e-11, "{db}");
    assert!((number(&csv, "fd_dm_dB") - db).abs() < 1e-8);
    assert!(number(&csv, "max_rel_disagreement") <= 1e-5);
}

#[test]
fn statics_near_singularity_refused() {
    let out = taxopt(&with_base("statics", &[("--beta", "1"), ("--z", "1e10")]));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(column(&stdout(&out), "kind"), ["StaticsUnstable"]);
}

#[test]
fn sweep_over_a_decreases() {
    let out = taxopt(&with_base("sweep", &[("--A", "0.5:2:3"), ("--beta", "1")]));
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(
        csv.lines().next().unwrap(),
        "A,k,beta,z,t,pi,B,status,m_star,W,objective,foc_residual,soc_margin,dm_dA,dm_dB,dm_dk"
    );
    let m: Vec<f64> = column(&csv, "m_star")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(m.len(), 3);
    assert!(m.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn empty_axis_is_config_error() {
    let out = taxopt(&with_base("sweep", &[("--A", "1:2:0")]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mixed_sweep_marks_infeasible_rows() {
    let out = taxopt(&with_base(
        "sweep",
        &[("--beta", "0.2:1:5"), ("--z", "1.5")],
    ));
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    let status = column(&csv, "status");
    assert_eq!(status, ["NoInteriorOptimum", "ok", "ok", "ok", "ok"]);
    assert_eq!(column(&csv, "m_star")[0], "");
    assert!(csv.lines().all(|l| l.split(',').count() == 16));
}

#[test]
fn curve_header_and_rows() {
    let out = taxopt(&with_base("curve", &[("--n", "5"), ("--m-max", "2")]));
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), "m,F,f,lambda,EU");
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(column(&csv, "m").last().unwrap(), "2.000000000000");
}

#[test]
fn curve_rejects_bad_sample_count() {
    assert_eq!(
        taxopt(&with_base("curve", &[("--n", "0")])).status.code(),
        Some(1)
    );
}

#[test]
fn verify_default_grid_and_forced_failure() {
    let ok = taxopt(&["verify"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(column(&stdout(&ok), "status").iter().all(|s| s == "pass"));
    let forced = taxopt(&["verify", "--tolerance", "1e-20"]);
    assert_eq!(forced.status.code(), Some(3));
}

fn write(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const CONFIG: &str = "A = 1\nk = 2\nbeta = 0.5\nz = 1\nt = 0.3\npi = 10\n";

#[test]
fn config_file_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), CONFIG);
    let from_flag = taxopt(&["solve", "--config", &path]);
    assert_eq!(from_flag.status.code(), Some(0));
    assert_eq!(column(&stdout(&from_flag), "m_star"), ["1.000000000000"]);

    let from_env = Command::new(env!("CARGO_BIN_EXE_taxopt"))
        .arg("solve")
        .env("TAXOPT_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, from_flag.stdout);

    // flags override file values
    let overridden = taxopt(&["solve", "--config", &path, "--beta", "1"]);
    assert_eq!(column(&stdout(&overridden), "B"), ["2.000000000000"]);
}

#[test]
fn config_unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), &format!("{CONFIG}betta = 2\n"));
    let out = taxopt(&["solve", "--config", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("betta"), "{err}");
}

#[test]
fn config_invalid_value_attributed_to_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "A = 1\nk = 2\nbeta = -0.5\nz = 1\nt = 0.3\npi = 10\n",
    );
    let out = taxopt(&["solve", "--config", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("beta") && err.contains("line 3"), "{err}");
}

#[test]
fn json_output_parses() {
    let out = taxopt(&with_base("solve", &[("--format", "json")]));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m_star"].as_f64(), Some(1.0));
    assert_eq!(v["shape_warning"], serde_json::Value::Bool(false));

    let sweep = taxopt(&with_base(
        "sweep",
        &[("--A", "0.5:2:3"), ("--format", "json")],
    ));
    let rows: serde_json::Value = serde_json::from_slice(&sweep.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);

    let err = taxopt(&with_base("solve", &[("--t", "0"), ("--format", "json")]));
    let rec: serde_json::Value = serde_json::from_slice(&err.stdout).unwrap();
    assert_eq!(rec["kind"], "DegenerateObjective");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("solution.csv");
    let out = taxopt(
        &[
            &with_base("solve", &[])[..],
            &["--out", target.to_str().unwrap()],
        ]
        .concat(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(target).unwrap();
    assert_eq!(written, stdout(&taxopt(&with_base("solve", &[]))));
}

#[test]
fn precision_flag_controls_digits() {
    let out = taxopt(&with_base("solve", &[("--precision", "3")]));
    assert_eq!(column(&stdout(&out), "m_star"), ["1.000"]);
}

#[test]
fn repeated_sweeps_identical() {
    let args = with_base(
        "sweep",
        &[
            ("--A", "0.5:2:7"),
            ("--k", "1.25:3:5"),
            ("--beta", "0.2:1:9"),
        ],
    );
    let first = taxopt(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, taxopt(&args).stdout);
    assert!(!stdout(&first).contains('\r'));
}
