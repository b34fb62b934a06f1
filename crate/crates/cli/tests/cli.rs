//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrsde"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn dirac_config(out_dir: &Path, sigma_inf: f64, family: &str, param: &str, nfe: usize) -> String {
    format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": {sigma_inf}, "t_max": 1.0}},
  "oracle": {{"dirac_data": {{"x0": [0.7, -0.4]}}}},
  "sampler": {{"family": "{family}", "parameterization": "{param}", "order": 1,
               "nfe": {nfe}, "spacing": "uniform_lambda", "seed": 11}},
  "chains": 1,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    )
}

#[test]
fn sample_row_count_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &dirac_config(&out_dir, 1.0, "mr_sde", "data", 5));
    run_ok(&["--config", cfg.to_str().unwrap(), "sample"]);
    let csv = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "chain,step,t,lambda,x_0,x_1");
    assert_eq!(lines.len(), 1 + 6, "one header plus nfe+1 state rows");
    assert!(!csv.contains('\r'), "LF line endings only");
    run_ok(&["--config", cfg.to_str().unwrap(), "sample"]);
    let csv2 = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert_eq!(csv, csv2, "byte-identical rerun");
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &dirac_config(&out_dir, 1.0, "mr_sde", "data", 5));
    run_ok(&["--config", cfg.to_str().unwrap(), "sample"]);
    let a = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    run_ok(&["--config", cfg.to_str().unwrap(), "--seed", "99", "sample"]);
    let b = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"schedule": {"bogus": true}}"#);
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "sample"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = bin().args(["sample"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "missing --config");
}

#[test]
fn numerical_blowup_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"constant_noise": {{"c": [1e308, 1e308]}}}},
  "sampler": {{"family": "mr_sde", "parameterization": "noise", "order": 1,
               "nfe": 3, "spacing": "uniform_lambda", "seed": 1}},
  "chains": 1,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "sample"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("step"), "reports the failing step: {msg}");
}

#[test]
fn compare_baselines_schema_and_parity() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"dirac_data": {{"x0": [0.7, -0.4]}}}},
  "sampler": {{"family": "mr_sde", "parameterization": "noise", "order": 1,
               "nfe": 100, "spacing": "uniform_lambda", "seed": 3}},
  "chains": 300,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "--nfe", "100", "compare-baselines"]);
    let csv = std::fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,nfe,rmse,terminal_mean_err,terminal_var_err");
    assert_eq!(lines.len(), 1 + 6, "six methods at one NFE");
    let rmses: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let (lo, hi) = rmses
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    assert!(
        hi <= 2.0 * lo,
        "at NFE=100 all methods within 2x: min {lo}, max {hi}"
    );
}

#[test]
fn compare_baselines_low_nfe_separation() {
    // small sigma_inf exposes the posterior baseline's overscaled noise
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 0.05, "t_max": 1.0}},
  "oracle": {{"dirac_data": {{"x0": [0.7, -0.4]}}}},
  "sampler": {{"family": "mr_sde", "parameterization": "noise", "order": 1,
               "nfe": 5, "spacing": "uniform_lambda", "seed": 3}},
  "chains": 500,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "compare-baselines"]);
    let csv = std::fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let value = |method: &str| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(&format!("{method},")))
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let mr = value("mr_sde_data");
    let post = value("posterior");
    assert!(
        post >= 10.0 * mr,
        "expected >= 10x separation at NFE=5: mr {mr} vs posterior {post}"
    );
    let constant_noise_cfg = write_config(
        tmp.path(),
        &body.replace(
            r#""oracle": {"dirac_data": {"x0": [0.7, -0.4]}}"#,
            r#""oracle": {"constant_noise": {"c": [0.0, 0.0]}}"#,
        ),
    );
    let out = bin()
        .args(["--config", constant_noise_cfg.to_str().unwrap(), "compare-baselines"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "no analytic target for constant_noise");
}

#[test]
fn convergence_study_footer_and_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    // zero noise oracle: every grid is exact, order not applicable
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"constant_noise": {{"c": [0.0, 0.0]}}}},
  "sampler": {{"family": "mr_ode", "parameterization": "noise", "order": 1,
               "nfe": 10, "spacing": "uniform_lambda", "seed": 5}},
  "chains": 1,
  "nfe_list": [5, 10, 20],
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "convergence-study"]);
    let csv = std::fs::read_to_string(out_dir.join("order_study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "nfe,rmse_vs_reference");
    assert_eq!(lines.last().unwrap(), &"order,n/a");
    for l in &lines[1..lines.len() - 1] {
        let err: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(err < 1e-10, "exact solver run should have ~0 error, got {err}");
    }

    // second-order data solver on a Gaussian oracle shows quadratic decay
    let body2 = body
        .replace(
            r#""oracle": {"constant_noise": {"c": [0.0, 0.0]}}"#,
            r#""oracle": {"gaussian_data": {"m0": [0.6, -0.4], "s0": 0.5}}"#,
        )
        .replace(r#""parameterization": "noise", "order": 1"#, r#""parameterization": "data", "order": 2"#);
    let cfg2 = write_config(tmp.path(), &body2);
    run_ok(&["--config", cfg2.to_str().unwrap(), "--nfe", "10,20,40,80", "convergence-study"]);
    let csv = std::fs::read_to_string(out_dir.join("order_study.csv")).unwrap();
    let order: f64 = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(order >= 1.7, "order-2 solver slope {order}");
}

#[test]
fn radius_report_constant_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"constant_noise": {{"c": [0.3, -0.2]}}}},
  "sampler": {{"family": "mr_ode", "parameterization": "noise", "order": 1,
               "nfe": 5, "spacing": "uniform_lambda", "seed": 5}},
  "chains": 1,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "radius-report"]);
    let csv = std::fs::read_to_string(out_dir.join("radius.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,t,lambda,h,ratio");
    assert_eq!(lines.len(), 1 + 4, "ratios from the second step on");
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[4].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn trajectory_collinear_and_shared_basis() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    // zero-noise ODE run: states stay on the line through x_T and mu
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"constant_noise": {{"c": [0.0, 0.0, 0.0]}}}},
  "sampler": {{"family": "mr_ode", "parameterization": "noise", "order": 1,
               "nfe": 8, "spacing": "uniform_lambda", "seed": 5}},
  "chains": 1,
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "trajectory"]);
    let csv = std::fs::read_to_string(out_dir.join("trajectory_2d.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,step,pc1,pc2");
    assert_eq!(lines.len(), 1 + 9);
    for l in &lines[1..] {
        let pc2: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!(pc2.abs() < 1e-9, "collinear states project to pc2 = 0, got {pc2}");
    }

    // permuting the requested method order leaves all projections unchanged
    let with_methods = |methods: &str| {
        body.replace(
            r#""chains": 1,"#,
            &format!(r#""chains": 1, "methods": {methods},"#),
        )
    };
    let cfg_ab = write_config(tmp.path(), &with_methods(r#"["mr_ode_noise", "posterior"]"#));
    run_ok(&["--config", cfg_ab.to_str().unwrap(), "trajectory"]);
    let ab = std::fs::read_to_string(out_dir.join("trajectory_2d.csv")).unwrap();
    let cfg_ba = write_config(tmp.path(), &with_methods(r#"["posterior", "mr_ode_noise"]"#));
    run_ok(&["--config", cfg_ba.to_str().unwrap(), "trajectory"]);
    let ba = std::fs::read_to_string(out_dir.join("trajectory_2d.csv")).unwrap();
    let mut rows_ab: Vec<&str> = ab.lines().skip(1).collect();
    let mut rows_ba: Vec<&str> = ba.lines().skip(1).collect();
    rows_ab.sort_unstable();
    rows_ba.sort_unstable();
    assert_eq!(rows_ab, rows_ba);
}

#[test]
fn trajectory_path_length_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let body = format!(
        r#"{{
  "schedule": {{"family": {{"constant": {{"theta": 1.0}}}}, "sigma_inf": 1.0, "t_max": 1.0}},
  "oracle": {{"dirac_data": {{"x0": [0.7, -0.4, 0.2, -0.9]}}}},
  "sampler": {{"family": "mr_ode", "parameterization": "data", "order": 1,
               "nfe": 100, "spacing": "uniform_lambda", "seed": 5}},
  "chains": 1,
  "methods": ["mr_ode_data", "euler_maruyama"],
  "outputs": {{"dir": "{}"}}
}}"#,
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), &body);
    run_ok(&["--config", cfg.to_str().unwrap(), "trajectory"]);
    let csv = std::fs::read_to_string(out_dir.join("trajectory_2d.csv")).unwrap();
    let path_length = |method: &str| -> f64 {
        let pts: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{method},")))
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                (cols[2].parse().unwrap(), cols[3].parse().unwrap())
            })
            .collect();
        pts.windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    };
    let ode = path_length("mr_ode_data");
    let em = path_length("euler_maruyama");
    assert!(ode < em, "expected more direct ODE path: {ode} vs {em}");
}
