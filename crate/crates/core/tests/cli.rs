//! End-to-end checks of the command-line interface: exit codes, output
//! files, and error reporting.

use std::path::PathBuf;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagflow"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lagflow-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn unknown_preset_exits_2_and_lists_names() {
    let out = binary().args(["preset", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ac-table1"), "{stderr}");
    assert!(stderr.contains("bcp-fourth"), "{stderr}");
}

#[test]
fn config_error_exits_2_naming_the_key() {
    let dir = tmpdir("badkey");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "model = allen-cahn\nnx = 16\nepz = 0.02\neps = 0.1\nscheme = cn\ndt = 1e-3\nt_end = 1e-2\nseed = 1\n",
    )
    .unwrap();
    let out = binary()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epz"));
}

#[test]
fn simulate_writes_outputs_and_exits_0() {
    let dir = tmpdir("sim");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "model = cahn-hilliard\nnx = 16\neps = 0.4\nscheme = bdf2\ndt = 1e-3\nt_end = 1e-2\n\
             seed = 5\nic.lo = -0.1\nic.hi = 0.1\nsnapshot.times = 0.01\noutput_dir = {}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    let out = binary()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("simulate:"), "{stdout}");
    assert!(dir.join("out/energy.csv").exists());
    assert!(dir.join("out/config_echo.cfg").exists());
    assert!(dir.join("out/phi_t0.010000.f64").exists());
    assert!(dir.join("out/phi_t0.010000.pgm").exists());
}

#[test]
fn override_flag_changes_the_run() {
    let dir = tmpdir("override");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "model = allen-cahn\nnx = 16\neps = 0.4\nscheme = be1\ndt = 1e-3\nt_end = 1e-2\n\
             seed = 5\nic.lo = -0.1\nic.hi = 0.1\noutput_dir = {}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    let out = binary()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "t_end=2e-3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("out/energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "2 steps + header: {csv}");
}

#[test]
fn nonconvergence_exits_3() {
    // Stabilized coupled run from rough data at a step size whose multiplier
    // equation loses its root; without the rescue this must abort with the
    // dedicated exit code.
    let dir = tmpdir("nonconv");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "model = coupled\nnx = 128\neps_u = 0.05\neps_v = 0.05\nsigma = 10\nalpha = -0.1\n\
             beta = 0.75\ngamma = 0\ns_u = 1\ns_v = 1\nscheme = bdf2\ndt = 8e-4\nt_end = 0.5\n\
             seed = 7704\nic.zero_mean = true\nrecord_every = 100\noutput_dir = {}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    let out = binary()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn adaptive_subcommand_requires_adaptive_block() {
    let dir = tmpdir("adapt");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "model = allen-cahn\nnx = 16\neps = 0.4\nscheme = cn\ndt = 1e-3\nt_end = 1e-2\nseed = 1\n",
    )
    .unwrap();
    let out = binary()
        .args(["adaptive", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_thread_env_exits_2() {
    let out = binary()
        .args(["preset", "nonsense"])
        .env("LAGFLOW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LAGFLOW_THREADS"));
}

#[test]
fn accuracy_preset_emits_table_csv() {
    // Shortened variant of the first accuracy preset: two coarse step sizes
    // on a small grid still exercise the whole table pipeline.
    let dir = tmpdir("acc");
    let out = binary()
        .args([
            "preset",
            "ac-table1",
            "--output-dir",
            dir.to_str().unwrap(),
            "--set",
            "nx=32",
            "--set",
            "dt_list=2e-3,1e-3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let merged = std::fs::read_to_string(dir.join("accuracy.csv")).unwrap();
    let mut lines = merged.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("bdf2_phi_linf") && header.contains("cn_phi_linf"), "{header}");
    assert_eq!(lines.count(), 2);
    assert!(dir.join("accuracy_bdf2.csv").exists());
    assert!(dir.join("accuracy_cn.csv").exists());
}
