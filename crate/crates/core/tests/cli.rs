use std::path::Path;
use std::process::{Command, Output};

fn mplhmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mplhmc")).args(args).env_remove("MPLHMC_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn verify_exit_codes() {
    let ok = mplhmc(&["verify", "order"]);
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("fitted slope") && text.contains("PASS"));

    let damped = mplhmc(&["verify", "global-order", "--alpha2", "-0.1", "--beta2", "-0.05"]);
    assert!(damped.status.success());

    let custom = mplhmc(&["verify", "reversibility", "--dt-ladder", "0.1,0.05,0.025"]);
    assert!(custom.status.success());
    assert_eq!(String::from_utf8(custom.stdout).unwrap().lines().filter(|l| l.starts_with("0.")).count(), 3);

    // The quadratic volume formula misses the dt⁴ term, so the band check fails.
    assert_eq!(mplhmc(&["verify", "volume"]).status.code(), Some(1));
    assert_eq!(mplhmc(&["verify", "nonsense"]).status.code(), Some(2));
}

#[test]
fn run_writes_csv_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "preset = \"table6-mini\"\n[target]\nname = \"banana2\"\n[method]\nnames = [\"standard\", \"damping\"]\n\
         [run]\nn_samples = 400\nburn_in = 100\n",
    );
    let out = dir.path().join("res.csv");
    let o = mplhmc(&["run", &cfg, "--seed", "5", "--threads", "2", "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].contains("seed=5"));
    assert!(lines[1].starts_with("Distribution,Method,Accept"));
    assert_eq!(lines.len(), 4);
    assert!(String::from_utf8(o.stdout).unwrap().contains("MPL_HMC_Damping"));

    let o = mplhmc(&["run", &cfg, "--set", "run.n_samples=10", "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("run.n_samples"));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[target]\nname = \"isotropic10\"\n[run]\nn_samples = 200\nburn_in = 0\n");
    let out = dir.path().join("r.csv").display().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_mplhmc"))
        .args(["run", &cfg, "--out", &out])
        .env("MPLHMC_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_mplhmc"))
        .args(["run", &cfg, "--out", &out])
        .env("MPLHMC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[target]\nname = \"banana2\"\n\n[run]\nsteps = 10\nn_samplez = 5\n");
    let o = mplhmc(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 6"));
    assert_eq!(mplhmc(&["run", "/definitely/missing.toml"]).status.code(), Some(2));
}

#[test]
fn aggressive_suite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "agg.toml",
        "[target]\nname = \"mixture3_sep8\"\n[method]\nname = \"aggressive\"\n[run]\nn_samples = 500\nburn_in = 100\n",
    );
    let out = dir.path().join("agg.csv");
    let o = mplhmc(&["aggressive", &cfg, "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap().get(0), Some("Config"));
    let configs: Vec<String> = r.records().map(|x| x.unwrap()[0].to_string()).collect();
    assert_eq!(configs, ["A", "B", "C"]);
}
