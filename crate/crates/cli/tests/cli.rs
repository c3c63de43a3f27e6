use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "operator = \"heat\"
d = 1
kernel = \"riesz\"
beta = 0.5
coefficients = \"sin_diag\"
coeff_a = 0.25
n_points = 16
extent = 8.0
dt = 0.01
horizon = 0.05
output_times = [0.05]
seed = 4
";

fn spdelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdelab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config_hash(csv: &Path) -> String {
    let text = std::fs::read_to_string(csv).unwrap();
    let first = text.lines().next().unwrap();
    first.split_whitespace().find_map(|w| w.strip_prefix("config_hash=")).unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(spdelab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(spdelab(&["simulate"]).status.code(), Some(2));
    assert_eq!(spdelab(&["simulate", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(spdelab(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_values_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &BASE.replace("beta = 0.5", "beta = 1.5"));
    let out = dir.path().join("o");
    let o = spdelab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:4: beta"), "{}", stderr(&o));

    let cfg = write(dir.path(), "typo.toml", &format!("{BASE}horizn = 1.0\n"));
    let o = spdelab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("typo.toml:13:"), "{}", stderr(&o));

    let cfg = write(dir.path(), "dt.toml", &BASE.replace("dt = 0.01", "dt = 0.03"));
    let o = spdelab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("multiple of dt"), "{}", stderr(&o));
}

#[test]
fn set_overrides_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BASE);
    let run = |out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec!["simulate", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = spdelab(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--set", "coeff_a=0.1"]);
    let d = run("d", &["--set", "coefficients=tanh_diag"]);
    assert_eq!(config_hash(&a.join("trajectory.csv")), config_hash(&b.join("trajectory.csv")));
    assert_eq!(std::fs::read(a.join("trajectory.csv")).unwrap(), std::fs::read(b.join("trajectory.csv")).unwrap());
    assert_ne!(config_hash(&a.join("trajectory.csv")), config_hash(&c.join("trajectory.csv")));
    let cfg_json = std::fs::read_to_string(d.join("config.json")).unwrap();
    assert!(cfg_json.contains("tanh_diag"));

    let o = spdelab(&["simulate", "--config", &cfg, "--set", "beta=3", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--set beta"), "{}", stderr(&o));
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BASE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(spdelab(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(
        spdelab(&["simulate", "--config", &cfg, "--seed", "5", "--out", b.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let ta = std::fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let tb = std::fs::read_to_string(b.join("trajectory.csv")).unwrap();
    assert!(ta.starts_with("# config_hash=") && ta.contains("seed=4"));
    assert!(tb.contains("seed=5"));
    assert_ne!(ta.lines().nth(2), tb.lines().nth(2));
}

#[test]
fn subcommands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}samples = 600\nprobe = [0.0]\nnoise_lags = [0, 1, 2]\nhoelder_lags = [0.01, 0.02, 0.04]\nlocalize_n = [2, 3]\n"
    )
    .replace("horizon = 0.05", "horizon = 0.5")
    .replace("output_times = [0.05]", "output_times = [0.5]")
    .replace("n_points = 16", "n_points = 32")
    .replace("dt = 0.01", "dt = 0.015625");
    let cfg = write(dir.path(), "run.toml", &text);
    for (cmd, files) in [
        ("noise-test", &["covariance.csv"][..]),
        ("density", &["ensemble.csv", "density.csv", "positivity.json"][..]),
        ("localize", &["localization.csv", "localization.json"][..]),
        ("oracle", &["oracle.csv"][..]),
    ] {
        let out = dir.path().join(cmd);
        let o = spdelab(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        for f in files.iter().chain(&["config.json", "plot.py"]) {
            assert!(out.join(f).exists(), "{cmd} did not write {f}");
        }
    }
    // Three lags span less than the required decade and a half.
    let out = dir.path().join("h");
    let o = spdelab(&["hoelder", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hoelder_lags"), "{}", stderr(&o));
}
