use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modal_ofb::io::Table;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_modal-ofb"));
    c.env_remove("MODAL_OFB_OUT").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
[galerkin]
modes = 30

[controller]
n = 3
m = 40.0

[nonlinearity]
name = "a*sin(z)+b*z"
a = 5.0
b = 5.0
lipschitz = 10.0

[sensors]
vertical = [0.5]
sub_modes = 12

[integrator]
t_end = 0.2
samples = 21
dump_states = true
"#;

#[test]
fn spectrum_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["spectrum", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = Table::read_path(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(t.rows.len(), 100);
    let pi2 = std::f64::consts::PI.powi(2);
    assert_eq!(t.column("n").unwrap()[0], 1.0);
    assert!((t.column("lambda").unwrap()[0] - 2.0 * pi2).abs() < 1e-12);
    assert!((t.column("bly_bound").unwrap()[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert!((t.column("trace_norm_sq").unwrap()[0] - 2.0 * pi2).abs() < 1e-12);
    let lam = t.column("lambda").unwrap();
    assert!(lam.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = run(&["spectrum", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "[nonlinearity]\nlipschitz = 1.0",
        "[domain]\nwidth = 0.0",
        "[bogus]\nx = 1",
    ] {
        let cfg = write_config(dir.path(), body);
        let o = run(&["sensors", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{body}");
    }
}

#[test]
fn bad_arguments() {
    assert_eq!(code(&run(&["design", "--sweep", "9:3"])), 2);
    assert_eq!(code(&run(&["design", "--sweep", "x"])), 2);
    assert_eq!(code(&run(&["simulate", "--kind", "sideways"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn design_exit_reflects_certification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = write_config(dir.path(), "[controller]\nn = 1\nm = 0.6");
    let o = run(&["design", "--config", &ok, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("certified = true"));
    assert!(dir.path().join("gain.csv").exists());

    let bad = write_config(dir.path(), "[controller]\nn = 1\nm = 120.0");
    assert_eq!(code(&run(&["design", "--config", &bad, "--out", out])), 1);
    assert_eq!(
        code(&run(&["design", "--config", &bad, "--out", out, "--allow-uncertified"])),
        0
    );
}

#[test]
fn design_sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["design", "--sweep", "5:12", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = Table::read_path(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(t.column("n").unwrap(), (5..=12).map(|n| n as f64).collect::<Vec<_>>());
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope norm_k"));
}

#[test]
fn sensors_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sensors", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("minimal_lines = 3"), "{text}");
    assert!(text.contains("configured_satisfied = false"));
}

#[test]
fn out_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");
    let cfg_dir = dir.path().join("from_config");
    let cfg = write_config(dir.path(), &format!("[run]\nout = {:?}", cfg_dir.to_str().unwrap()));
    assert!(bin()
        .args(["spectrum", "--config", &cfg])
        .output()
        .unwrap()
        .status
        .success());
    assert!(cfg_dir.join("spectrum.csv").exists());
    let st = bin()
        .args(["spectrum", "--config", &cfg])
        .env("MODAL_OFB_OUT", &env_dir)
        .output()
        .unwrap()
        .status;
    assert!(st.success());
    assert!(env_dir.join("spectrum.csv").exists());
    let st = bin()
        .args(["spectrum", "--config", &cfg, "--out", flag_dir.to_str().unwrap()])
        .env("MODAL_OFB_OUT", &env_dir)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(flag_dir.join("spectrum.csv").exists());
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for run_dir in ["a", "b"] {
        let out = dir.path().join(run_dir);
        let o = run(&[
            "simulate",
            "--kind",
            "output",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(out.join("trajectory.csv")).unwrap());
        let dump = modal_ofb::io::read_state_dump(fs::File::open(out.join("states.bin")).unwrap()).unwrap();
        assert_eq!(dump.times.len(), 21);
        assert_eq!(dump.states[0].len(), 30);
        assert!(out.join("summary.txt").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let t = Table::read(csvs[0].as_slice()).unwrap();
    assert!(!t.is_truncated());
    assert_eq!(
        t.headers,
        vec!["t", "norm_p", "norm_eps", "norm_z", "u_1", "u_2", "u_3"]
    );
    let times = t.column("t").unwrap();
    assert_eq!(times.len(), 21);
    assert_eq!(*times.last().unwrap(), 0.2);
}

#[test]
fn runaway_open_loop_is_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[galerkin]\nmodes = 10\n[nonlinearity]\nname = \"a*z\"\na = 2000.0\nlipschitz = 2000.0\n[sensors]\nvertical = [0.5]\n[integrator]\nt_end = 2.0\nsamples = 11\n";
    let cfg = write_config(dir.path(), body);
    let o = run(&[
        "simulate",
        "--kind",
        "open",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    let t = Table::read_path(&dir.path().join("trajectory.csv")).unwrap();
    assert!(t.is_truncated());
    assert!(t.rows.len() < 11);
}
