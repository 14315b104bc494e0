use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vi_sharp::oracle::CertificateFile;
use vi_sharp_cli::config::{LambdaSetting, TraceFormat};
use vi_sharp_cli::{RunConfig, Summary};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn vi_sharp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vi-sharp"))
        .args(args)
        .env("VI_SHARP_OUTPUT_DIR", out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, cfg.to_toml()).unwrap();
    p
}

/// fig1 with a short run, for tests that do not need the full budget.
fn short_fig1() -> RunConfig {
    let mut cfg = RunConfig::load(&configs().join("fig1.toml")).unwrap();
    cfg.solver.max_iters = 5000;
    cfg.solver.trace_every = 1;
    cfg.oracle.enabled = false;
    cfg
}

fn expect_config_error(cfg_text: &str, field: &str) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, cfg_text).unwrap();
    let o = vi_sharp(dir.path(), &["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "stderr: {}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "one-line diagnostic: {err}");
    assert!(err.contains(field), "`{field}` not named in: {err}");
}

fn fig1_text() -> String {
    fs::read_to_string(configs().join("fig1.toml")).unwrap()
}

#[test]
fn fig1_run_meets_eps_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1.toml");
    let o = vi_sharp(dir.path(), &["run", "--quiet", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(o.stdout.is_empty());
    let s = Summary::parse(&fs::read_to_string(dir.path().join("fig1-summary.toml")).unwrap()).unwrap();
    let r = &s.result;
    assert_eq!(r.certified_by, "distance-to-solution");
    assert!(r.certified_eps <= 0.05, "certified_eps = {}", r.certified_eps);
    assert!(r.target_met);
    assert!(!r.experimental && r.note.is_none());
    assert!((r.lambda - 2.0 * r.lambda_bound).abs() <= 1e-9 * r.lambda);
    let oracle = s.oracle.expect("oracle section");
    assert!(oracle.accepted);
    assert!(oracle.x_star[0].abs() < 1e-9);
    let trace = fs::read_to_string(dir.path().join("fig1-trace.csv")).unwrap();
    assert!(trace.starts_with("k,step,f_norm,zone,residual,merit,restarted,x_0\n"));
}

#[test]
fn identical_traces_for_identical_config_and_seed() {
    for format in [TraceFormat::Csv, TraceFormat::StructuredText] {
        let mut cfg = short_fig1();
        cfg.output.format = format;
        cfg.output.trace_path = Some("trace.out".into());
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut traces = Vec::new();
        for dir in [&a, &b] {
            let p = write_config(dir.path(), "cfg.toml", &cfg);
            let o = vi_sharp(dir.path(), &["run", "--quiet", "--seed", "3", p.to_str().unwrap()]);
            assert!(o.status.success(), "stderr: {}", stderr(&o));
            traces.push(fs::read(dir.path().join("trace.out")).unwrap());
        }
        assert!(!traces[0].is_empty());
        assert_eq!(traces[0], traces[1], "{format:?} traces differ");
    }
}

#[test]
fn structured_text_trace_parses() {
    let mut cfg = short_fig1();
    cfg.output.format = TraceFormat::StructuredText;
    cfg.output.trace_path = Some("fig1-trace.toml".into());
    cfg.solver.trace_every = 1000;
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "cfg.toml", &cfg);
    assert!(vi_sharp(dir.path(), &["run", "--quiet", p.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(dir.path().join("fig1-trace.toml")).unwrap();
    let t: toml::Table = toml::from_str(&text).unwrap();
    // k = 0, 1000, ..., 4000, the final iterate 4999, and every restart.
    let records = t["record"].as_array().unwrap();
    let sampled: Vec<i64> = records
        .iter()
        .filter(|r| !r["restarted"].as_bool().unwrap())
        .map(|r| r["k"].as_integer().unwrap())
        .filter(|k| k % 1000 == 0 || *k == 4999)
        .collect();
    assert_eq!(sampled, [0, 1000, 2000, 3000, 4000, 4999]);
    for r in records {
        let k = r["k"].as_integer().unwrap();
        assert!(k % 1000 == 0 || k == 4999 || r["restarted"].as_bool().unwrap());
    }
}

#[test]
fn summary_records_the_config_that_ran() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_fig1();
    let p = write_config(dir.path(), "cfg.toml", &cfg);
    let o = vi_sharp(
        dir.path(),
        &["run", "--quiet", "--seed", "11", "--max-iters", "1234", p.to_str().unwrap()],
    );
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("fig1-summary.toml")).unwrap();
    let summary = Summary::parse(&text).unwrap();
    let mut expected = cfg.clone();
    expected.solver.seed = 11;
    expected.solver.max_iters = 1234;
    assert_eq!(summary.config, expected);
    assert_eq!(summary.result.iters_run, 1234);
    assert_eq!(Summary::parse(&summary.to_toml()).unwrap(), summary);
    // The recorded config runs again as a config file of its own.
    let again = write_config(dir.path(), "again.toml", &summary.config);
    assert_eq!(RunConfig::load(&again).unwrap(), expected);
}

#[test]
fn example_configs_round_trip() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg, "{}", path.display());
    }
}

#[test]
fn initial_point_outside_rho_ball_is_a_config_error() {
    let text = fig1_text().replace("x0 = [2.0]", "x0 = [2.5]");
    expect_config_error(&text, "solver.x0");
    expect_config_error(&text, "rho_f B");
}

#[test]
fn zero_lambda_is_a_config_error() {
    expect_config_error(&fig1_text().replace("lambda = \"auto\"", "lambda = 0.0"), "solver.lambda");
}

#[test]
fn other_config_errors_name_the_field() {
    let text = fig1_text();
    expect_config_error(&text.replace("vi-sharp/1", "vi-sharp/0"), "schema");
    expect_config_error(&text.replace("seed = 7", "sead = 7"), "sead");
    expect_config_error(&text.replace("lambda = \"auto\"", "lambda = \"big\""), "lambda");
    expect_config_error(&text.replace("power = 1.0", "power = 0.4"), "solver.schedule.power");
    expect_config_error(&text.replace("epsilon = 0.05", "epsilon = -1.0"), "solver.epsilon");
    expect_config_error(&text.replace("name = \"fig1\"", "name = \"nope\""), "problem.name");
    expect_config_error(&text.replace("tolerance = 1e-10", "tolerance = 0.0"), "oracle.tolerance");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = vi_sharp(dir.path(), &["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overflowing_steps_exit_with_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_fig1();
    cfg.solver.lambda = LambdaSetting::Fixed(1e300);
    let p = write_config(dir.path(), "cfg.toml", &cfg);
    let o = vi_sharp(dir.path(), &["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
    // The records written before the failure were flushed.
    let trace = fs::read_to_string(dir.path().join("fig1-trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn output_paths_follow_the_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/out");
    let p = write_config(dir.path(), "cfg.toml", &short_fig1());
    let o = vi_sharp(&out, &["run", "--quiet", p.to_str().unwrap()]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(out.join("fig1-trace.csv").is_file());
    assert!(out.join("fig1-summary.toml").is_file());
    assert!(!dir.path().join("fig1-trace.csv").exists());
}

fn sweep_rows(dir: &Path, cfg: &RunConfig, param: &str, values: &str) -> Vec<Vec<String>> {
    let p = write_config(dir, "cfg.toml", cfg);
    let o = vi_sharp(dir, &["sweep", p.to_str().unwrap(), "--param", param, "--values", values]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let stem = cfg.summary_path();
    let stem = stem.file_stem().unwrap().to_string_lossy();
    let table = fs::read_to_string(dir.join(format!("{stem}-sweep-{param}.csv"))).unwrap();
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with(&table), "stdout repeats the table");
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "value,iters,restarts,certified_eps,best_residual,epsilon,lambda,target_met,experimental"
    );
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn geometric_ratio_sweep_is_flagged_experimental() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&configs().join("geometric.toml")).unwrap();
    cfg.solver.max_iters = 2000;
    let rows = sweep_rows(dir.path(), &cfg, "ratio", "0.9,0.99");
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[8] == "true"));
    assert_eq!(rows[0][0], "0.9");
    for i in 0..2 {
        assert!(dir.path().join(format!("qp-grad-trace-ratio-{i}.csv")).is_file());
    }
}

#[test]
fn epsilon_sweep_certifies_the_swept_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_fig1();
    cfg.solver.max_iters = 20_000;
    cfg.solver.trace_every = 100;
    let rows = sweep_rows(dir.path(), &cfg, "epsilon", "0.1,0.05,0.01");
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (value, certified): (f64, f64) = (r[0].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!(r[5].parse::<f64>().unwrap(), value);
        assert_eq!(r[7] == "true", certified <= value);
        assert_eq!(r[8], "false");
    }
    assert!(rows.iter().any(|r| r[7] == "true"));
}

#[test]
fn lambda_sweep_is_relative_to_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep_rows(dir.path(), &short_fig1(), "lambda", "0.5,1,2,10");
    let unit: Vec<f64> = rows
        .iter()
        .map(|r| r[6].parse::<f64>().unwrap() / r[0].parse::<f64>().unwrap())
        .collect();
    for u in &unit {
        assert!((u - unit[0]).abs() <= 1e-12 * unit[0]);
    }
    // Same threshold as the automatic choice, which is twice it.
    let auto = vi_sharp(dir.path(), &["run", "--quiet", dir.path().join("cfg.toml").to_str().unwrap()]);
    assert!(auto.status.success());
    let s = Summary::parse(&fs::read_to_string(dir.path().join("fig1-summary.toml")).unwrap()).unwrap();
    assert!((s.result.lambda_bound - unit[0]).abs() <= 1e-12 * unit[0]);
}

#[test]
fn sweep_parameter_must_fit_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "cfg.toml", &short_fig1());
    let o = vi_sharp(dir.path(), &["sweep", p.to_str().unwrap(), "--param", "ratio", "--values", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.schedule"));
    let o = vi_sharp(dir.path(), &["sweep", p.to_str().unwrap(), "--param", "power", "--values", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.schedule.power"));
}

#[test]
fn oracle_command_writes_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("affine-box.toml");
    let o = vi_sharp(dir.path(), &["oracle", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let file = CertificateFile::read(&dir.path().join("affine-inline-oracle.toml")).unwrap();
    assert_eq!(file.problem, "affine-inline");
    assert!(file.residual <= 1e-9);
    // x* on the face x_0 = 1: 2 + y - 4 <= 0 and -1 + y + 0.5 = 0.
    assert!((file.x_star[0] - 1.0).abs() < 1e-9 && (file.x_star[1] - 0.5).abs() < 1e-9);
    assert!(String::from_utf8(o.stdout).unwrap().contains("accepted  true"));
}
