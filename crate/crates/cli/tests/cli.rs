use std::path::Path;
use std::process::{Command, Output};

use casimir_core::config::RunConfig;

fn casimir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casimir")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lossy_config(dir: &Path) -> String {
    let mut cfg = RunConfig::parked_single_cell(1e4, 100.0);
    cfg.numerics.t_max = Some(14.0 * cfg.t_sr());
    cfg.initial.n_photons = 10.0;
    let path = dir.join("lossy.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn timescales_of_the_reference_configuration() {
    let o = casimir(&["timescales"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("1/Gamma          = 1.797e-1 s"), "{text}");
    assert!(text.contains("T_SR             = 1.000e-4 s"), "{text}");
}

#[test]
fn casimir_saturation_value() {
    let o = casimir(&["casimir", "--q-epsilon", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("N_max     = 372"));
    assert_eq!(casimir(&["casimir"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(casimir(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(casimir(&["timescales", "--bogus"]).status.code(), Some(1));
    assert_eq!(casimir(&["timescales", "--override", "cavity.colour=1"]).status.code(), Some(1));
    assert_eq!(casimir(&["run", "--model", "hybrid"]).status.code(), Some(1));
    assert_eq!(casimir(&["--help"]).status.code(), Some(0));
}

#[test]
fn check_passes_on_defaults() {
    let o = casimir(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn default_dump_is_a_loadable_config() {
    let o = casimir(&["config", "--defaults"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(RunConfig::from_toml(&stdout(&o)).unwrap(), RunConfig::reference());
}

#[test]
fn detectability_csv() {
    let o = casimir(&["detectability", "--points", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,Q,power_W,region,benchmark"));
    assert_eq!(lines.count(), 9);
}

#[test]
fn run_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lossy_config(dir.path());
    let out = dir.path().join("run");
    let o = casimir(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["series.csv", "summary.csv", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("t,photons,inversion,bloch_length,coupling_profile,emitted_power_W\n"));
    let manifest = out.join("manifest.toml");
    let o = casimir(&["replay", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // tampering with an output is detected
    std::fs::write(out.join("summary.csv"), "key,value\n").unwrap();
    assert_eq!(casimir(&["replay", manifest.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn pair_prints_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lossy_config(dir.path());
    let o = casimir(&["pair", "--config", &cfg, "--model", "reduced", "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("n_cas_max,n_at,v_at_m_s,Q,T_at_K,peak_photons_sr,eta,rho_gnd_sr_percent,xi,t_delay_sr_s,"));
    assert!(text.lines().nth(1).unwrap().contains(",ok,"));
}

#[test]
fn reduced_model_outside_its_regime_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = casimir(&[
        "run",
        "--model",
        "reduced",
        "--override",
        "beam.motion=parked",
        "--override",
        "numerics.t_max=1e-3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Gamma*T_SR"));
}

#[test]
fn sweep_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(lossy_config(dir.path())).unwrap();
    let spec = format!(
        "model = \"reduced\"\nmaster_seed = 5\n\n[[axes]]\nparameter = \"initial.n_photons\"\nvalues = [0.0, 10.0, 100.0]\n\n{}",
        cfg.lines()
            .map(|l| match l.strip_prefix('[') { Some(rest) => format!("[base.{rest}"), None => l.to_string() })
            .collect::<Vec<_>>()
            .join("\n")
    );
    let path = dir.path().join("sweep.toml");
    std::fs::write(&path, spec).unwrap();
    let run = |workers: &str, out: &str| {
        let out = dir.path().join(out);
        let o = casimir(&["sweep", "--spec", path.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    let one = run("1", "w1");
    assert_eq!(String::from_utf8_lossy(&one).lines().count(), 4);
    assert_eq!(one, run("2", "w2"));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "[[axes]]\nparameter = \"beam.n_at\"\nvalues = []\n").unwrap();
    let out = dir.path().join("e");
    let o = casimir(&["sweep", "--spec", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 1);
}
