use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msflow"))
        .args(args)
        .env_remove("MSFLOW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn key_values(path: &Path) -> HashMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn columns(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn strip_a1(width: f64, dp: f64, dm: f64) -> f64 {
    let k = PI / width;
    k.powi(3) * ((k * dp).tanh() + (k * dm).tanh())
}

#[test]
fn zero_preset_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let o = msflow(&[
        "simulate",
        "-o",
        out.to_str().unwrap(),
        "--set",
        "initial.preset=zero",
        "--t-final",
        "0.01",
        "--dt",
        "0.001",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for row in columns(&out.join("profiles.dat")) {
        assert!(row[1..].iter().all(|&h| h == 0.0));
    }
    let rows = columns(&out.join("trajectory.dat"));
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
    for file in ["manifest.txt", "final_state.dat", "steps.dat", "summary.txt"] {
        assert!(out.join(file).exists(), "{file}");
    }
}

#[test]
fn default_single_mode_run_recovers_decay_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = msflow(&["simulate", "-o", dir.path().to_str().unwrap(), "--set", "stepper.output_every=10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = key_values(&dir.path().join("summary.txt"));
    let rate: f64 = summary["fitted_rate"].parse().unwrap();
    let a1 = strip_a1(2.0, 1.0, 0.75);
    assert!((rate - a1).abs() / a1 <= 0.1, "rate {rate} vs {a1}");
    assert_eq!(summary["accepted_steps"], "1000");
    assert_eq!(columns(&dir.path().join("trajectory.dat")).len(), 101);
}

#[test]
fn zero_time_step_is_a_named_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = msflow(&["simulate", "-o", dir.path().to_str().unwrap(), "--dt", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stepper.dt"), "{err}");
    assert!(!dir.path().join("manifest.txt").exists());
}

#[test]
fn validation_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[geometry]\nwidth = -1.0\n[grid]\nnodes = 64\nnx = 32\n[symbol]\nomegas = [-1.0]\n").unwrap();
    let o = msflow(&["symbol", "-c", config.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for field in ["geometry.width", "grid.nx", "symbol.omegas[0]"] {
        assert!(err.contains(field), "{field} missing: {err}");
    }
}

#[test]
fn spectrum_reports_one_dimensional_kernel() {
    for (nodes, resolution) in [("64", "256"), ("8", "32")] {
        let dir = tempfile::tempdir().unwrap();
        let o = msflow(&[
            "spectrum",
            "-o",
            dir.path().to_str().unwrap(),
            "--set",
            &format!("spectrum.nodes={nodes}"),
            "--set",
            &format!("spectrum.resolution={resolution}"),
        ]);
        assert!(o.status.success(), "N={nodes}: {}", String::from_utf8_lossy(&o.stderr));
        let report = fs::read_to_string(dir.path().join("spectrum.txt")).unwrap();
        assert!(report.contains("kernel_dimension: 1\n"), "N={nodes}");
        assert!(report.contains("passed: true\n"));
    }
}

#[test]
fn unwritable_output_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let target = blocker.join("out");
    let o = msflow(&["spectrum", "-o", target.to_str().unwrap(), "--set", "spectrum.nodes=8", "--set", "spectrum.resolution=32"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot create output directory"));
}

#[test]
fn symbol_table_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let width = PI.to_string();
    let o = msflow(&[
        "symbol",
        "-o",
        dir.path().to_str().unwrap(),
        "--set",
        &format!("geometry.width={width}"),
        "--set",
        "symbol.omegas=[0.0, 0.5, 3.0]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = columns(&dir.path().join("symbol.dat"));
    assert_eq!(rows.len(), 33);
    assert!(rows[0][1..].iter().all(|&v| v == 0.0));
    // with W = π the wavenumber of mode 1 is 1
    assert!((rows[1][1] - 1.0).abs() < 1e-15);
    assert!((rows[1][4] - 2.0).abs() < 1e-14);
    for row in &rows[1..] {
        let k = row[1];
        assert!(row[2] <= row[3]);
        for (col, omega) in [(5, 0.5), (6, 3.0)] {
            let x = k / omega;
            let scaled = omega.powi(3) * 2.0 * x * x * (1.0 + x * x).sqrt();
            assert!((row[col] - scaled).abs() <= 1e-12 * scaled);
        }
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "[initial]\npreset = \"seeded-random\"\nseed = 11\namplitude = 0.04\n[stepper]\ndt = 0.002\nt_final = 0.05\nscheme = \"imex-bdf2\"\n",
    )
    .unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = msflow(&["simulate", "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for file in ["trajectory.dat", "profiles.dat", "final_state.dat", "steps.dat", "summary.txt"] {
        assert_eq!(fs::read(runs[0].join(file)).unwrap(), fs::read(runs[1].join(file)).unwrap(), "{file}");
    }
    let a = fs::read_to_string(runs[0].join("manifest.txt")).unwrap();
    let b = fs::read_to_string(runs[1].join("manifest.txt")).unwrap();
    let strip_dir = |m: &str| m.lines().filter(|l| !l.starts_with("output.dir=")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip_dir(&a), strip_dir(&b));
    assert!(a.contains("initial.seed=11\n"));
    assert!(a.contains("stepper.scheme=imex-bdf2\n"));
}

#[test]
fn environment_sets_output_directory_unless_flag_given() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    let run = |extra: &[&str]| {
        let mut args = vec!["symbol", "--set", "symbol.modes=2"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_msflow"))
            .args(&args)
            .env("MSFLOW_OUTPUT_DIR", &env_dir)
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("symbol.dat").exists());
    assert!(run(&["-o", flag_dir.to_str().unwrap()]).status.success());
    assert!(flag_dir.join("symbol.dat").exists());
    let manifest = key_values(&flag_dir.join("manifest.txt"));
    assert_eq!(manifest["output.dir"], flag_dir.to_str().unwrap());
}

#[test]
fn verify_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = msflow(&["verify", "-o", dir.path().to_str().unwrap()]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{table}");
    assert!(table.contains("failed=0"));
    assert!(table.lines().any(|l| l.starts_with("half-space limit") && l.contains("SKIP")));
}

#[test]
fn verify_runs_half_space_check_for_deep_container() {
    let dir = tempfile::tempdir().unwrap();
    let o = msflow(&[
        "verify",
        "-o",
        dir.path().to_str().unwrap(),
        "--set",
        "geometry.depth_plus=10",
        "--set",
        "geometry.depth_minus=10",
    ]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{table}");
    assert!(table.lines().any(|l| l.starts_with("half-space limit") && l.contains("PASS")), "{table}");
}

#[test]
fn corrupted_tolerance_factor_is_rejected() {
    for bad in ["0", "1.5", "-0.1", "nan"] {
        let dir = tempfile::tempdir().unwrap();
        let o = msflow(&["verify", "-o", dir.path().to_str().unwrap(), "--tolerance-factor", bad]);
        assert_eq!(o.status.code(), Some(2), "factor {bad}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("verify.tolerance_factor"));
    }
}
