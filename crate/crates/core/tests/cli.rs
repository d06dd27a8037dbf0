use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pareto-coalescent"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn help_and_version() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["rates", "xi-matrix", "finite-mc", "scaling-fit", "simulate", "forward", "gclt"] {
        assert!(out.contains(sub), "missing {sub}");
    }
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn kingman_table_entry() {
    let (code, out, _) = run(&["rates", "--alpha", "3", "--i-max", "5"]);
    assert_eq!(code, 0);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "i,j,value");
    assert!(lines.contains(&"3,2,3"));
    assert!(lines.contains(&"5,2,0"));
}

#[test]
fn invalid_beta_exits_two() {
    let (code, out, err) = run(&["rates", "--alpha", "1.5", "--beta", "1.6"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("beta < alpha required"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["rates", "--alpha", "abc"]).0, 2);
    assert_eq!(run(&["bogus"]).0, 2);
    assert_eq!(run(&["rates"]).0, 2);
    assert_eq!(run(&["xi-matrix", "--alpha", "0.5", "--i-max", "31"]).0, 2);
}

#[test]
fn provenance_header() {
    let (_, out, _) = run(&["xi-matrix", "--alpha", "0.5", "--i-max", "3", "--seed", "12"]);
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("# seed=12, params=command=xi-matrix;alpha=0.5;i_max=3, version="));
}

#[test]
fn gamma_c_n_column() {
    let (code, out, _) = run(&["finite-mc", "--theta", "1", "--N", "100", "--replicas", "50000", "--seed", "5"]);
    assert_eq!(code, 0);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "N,c_N,stderr,ess,warnings");
    let cols: Vec<f64> = lines[1].split(',').skip(1).take(2).map(|v| v.parse().unwrap()).collect();
    assert!((cols[0] - 0.02).abs() < 3.0 * cols[1], "{} ± {}", cols[0], cols[1]);
}

#[test]
fn kingman_pair_height() {
    let (code, out, _) = run(&["simulate", "--alpha", "3", "--n0", "2", "--replicas", "40000", "--seed", "5"]);
    assert_eq!(code, 0);
    let row = data_lines(&out).into_iter().find(|l| l.starts_with("kingman,2,height,")).unwrap();
    let cols: Vec<f64> = row.split(',').skip(3).take(2).map(|v| v.parse().unwrap()).collect();
    assert!((cols[0] - 1.0).abs() < 3.0 * cols[1], "{} ± {}", cols[0], cols[1]);
}

#[test]
fn repeated_runs_are_identical() {
    let args = ["finite-mc", "--alpha", "0.7", "--N-grid", "20,40", "--i-max", "3", "--replicas", "3000", "--seed", "77"];
    let (_, a, _) = run(&args);
    let (_, b, _) = run(&args);
    assert_eq!(a, b);
}

#[test]
fn out_file_and_json_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("table.csv");
    std::fs::write(
        &cfg,
        r#"{"command": "rates", "params": {"alpha": 1.5, "beta": 0.2}, "i_max": 4, "seed": 3}"#,
    )
    .unwrap();
    let (code, stdout, _) = run(&["rates", "--config", cfg.to_str().unwrap(), "--i-max", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# seed=3, params=command=rates;alpha=1.5;beta=0.2;i_max=3, version="));
    assert_eq!(data_lines(&text).len(), 1 + 1 + 2);
}

#[test]
fn forward_trajectory_and_speed() {
    let (code, out, _) = run(&["forward", "--N", "8", "--alpha", "1.5", "--generations", "4", "--seed", "2"]);
    assert_eq!(code, 0);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "k,log_global,log_holder_mean,log_fittest");
    assert_eq!(lines.len(), 6);
    let (code, _, err) = run(&["forward", "--N", "8", "--generations", "10", "--replicas", "5"]);
    assert_eq!(code, 2);
    assert!(err.contains("generations >= 100"));
}

#[test]
fn scaling_fit_reports_fit() {
    let (code, out, _) = run(&["scaling-fit", "--alpha", "3", "--N-grid", "20,40,80,160", "--replicas", "4000", "--seed", "1"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("# fit regime=kingman, predictor=ln N, slope=")));
    let (code, _, err) = run(&["scaling-fit", "--alpha", "3", "--N-grid", "20,40,80"]);
    assert_eq!(code, 2);
    assert!(err.contains("at least 4"));
}

#[test]
fn gclt_row() {
    let (code, out, _) = run(&["gclt", "--alpha", "0.5", "--N", "50", "--replicas", "1000"]);
    assert_eq!(code, 0);
    let lines = data_lines(&out);
    assert!(lines[0].starts_with("alpha,N,replicas,regime,a_n,b_n"));
    assert!(lines[1].starts_with("0.5,50,1000,stable_below_one,0,"));
}
