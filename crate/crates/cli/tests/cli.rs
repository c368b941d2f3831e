use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nash-spectra"));
    cmd.args(args).env_remove("NASH_SPECTRA_OUT");
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().expect("spawn CLI")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&cli(&["--help"], None)), 0);
    assert_eq!(code(&cli(&["table1", "--help"], None)), 0);
    assert_eq!(code(&cli(&[], None)), 1);
    assert_eq!(code(&cli(&["bogus"], None)), 1);
    assert_eq!(code(&cli(&["table1", "--no-such-flag"], None)), 1);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = Some(dir.path());
    let cases: [&[&str]; 8] = [
        &["table1", "--d", "5"],
        &["table1", "--variant", "sideways"],
        &["table1", "--sims", "0"],
        &["table2", "--eta", "-1"],
        &["table2", "--family", "complex"],
        &["fig"],
        &["fig", "--scenario", "table2"],
        &["classify", "--family", "complex", "--d", "5"],
    ];
    for args in cases {
        let o = cli(args, out);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&cli(&["classify"], out)), 1);
    assert_eq!(code(&cli(&["classify", "--family", "conv", "--n", "10,100"], out)), 1);
}

#[test]
fn table1_writes_json_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["table1", "--variant", "truth", "--n", "1e3", "--sims", "4", "--seed", "7"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("table1-truth.json"));
    assert_eq!(v["provenance"]["schema_version"], 1);
    assert_eq!(v["provenance"]["master_seed"], 7);
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["best_response_step_rule"], "1e-2*d/trace(S_beta)");
    let row = &v["difference"]["rows"][0];
    assert_eq!(row["n"], 1000);
    assert_eq!(row["kept"], 4);
    assert!(row["mean"].as_f64().unwrap() > 0.0);
    assert!(row["std"].as_f64().is_some());
    let csv = fs::read_to_string(dir.path().join("table1-truth.csv")).unwrap();
    assert!(csv.starts_with("n,mean,std,attempted,kept,excluded,exclusions\n1000,"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("from-config");
    fs::write(&cfg, format!("# small run\nn = 100\nsims = 3\nseed = 11\niters = 500\nout = {}\n", out.display()))
        .unwrap();
    let o = cli(&["table2", "--config", cfg.to_str().unwrap(), "--seed", "12"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("table2.json"));
    assert_eq!(v["config"]["master_seed"], 12);
    assert_eq!(v["config"]["sims"], 3);
    assert_eq!(v["config"]["gda"]["iters"], 500);
    assert_eq!(v["gda_error"]["rows"].as_array().unwrap().len(), 1);

    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(code(&cli(&["table2", "--config", cfg.to_str().unwrap()], Some(dir.path()))), 1);
    assert_eq!(code(&cli(&["table2", "--config", "/no/such/file"], Some(dir.path()))), 1);
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nash-spectra"))
        .args(["classify", "--family", "conv", "--seed", "2"])
        .env("NASH_SPECTRA_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v = json(&dir.path().join("classify-conv-n100-seed2.json"));
    assert_eq!(v["classification"], "nash-candidate");
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, v);
}

#[test]
fn classify_fourier_point_is_non_nash() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["classify", "--family", "complex", "--n", "10000", "--seed", "3"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["classification"], "non-nash");
    assert_eq!(v["provenance"]["n"], 10000);
    assert!(v["value"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn fig_writes_trajectories_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["fig", "--scenario", "fig2", "--n", "1000", "--iters", "1000", "--seed", "5"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let root = dir.path().join("fig2-conv-global");
    let m = json(&root.join("manifest.json"));
    let trajs = m["trajectories"].as_array().unwrap();
    assert_eq!(trajs.len(), 10);
    for t in trajs {
        let file = t["file"].as_str().unwrap();
        assert!(!Path::new(file).is_absolute());
        let csv = fs::read_to_string(root.join(file)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,V_n,eps_alpha,eps_beta,d_beta,m_beta,gen_error,status"));
        assert_eq!(lines.next().unwrap().split(',').next(), Some("0"));
    }
    assert_eq!(m["provenance"]["master_seed"], 5);
    assert!(!fs::read_to_string(root.join("manifest.json")).unwrap().contains(dir.path().to_str().unwrap()));
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["check"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(dir.path().join("check.json").exists());
}
