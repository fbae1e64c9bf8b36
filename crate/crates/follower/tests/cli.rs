use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_follower")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ou_baseline.toml");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("solution.json"));
    assert_eq!(j["case"], "A");
    assert_eq!(j["regime"], "ReflectAtBand");
    let b = j["b_star"].as_f64().unwrap();
    assert!((b - 0.91).abs() < 0.01, "{b}");
    assert_eq!(j["hjb"]["passed"], true);
    let csv = fs::read_to_string(dir.path().join("value.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn solve_case_b_and_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("case_b.toml");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0);
    let j = read_json(&dir.path().join("solution.json"));
    assert_eq!(j["case"], "B");
    assert!(j["b_star"].as_f64().unwrap() > j["x_bar"].as_f64().unwrap());

    let cfg = configs().join("case_c.toml");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0);
    let j = read_json(&dir.path().join("solution.json"));
    assert_eq!(j["case"], "C");
    assert_eq!(j["regime"], "NoAction");
    assert!(j["b_star"].is_null());
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("problem.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        "schema = 1\n[diffusion]\nmodel = \"ou\"\nmu = 0.1\ntheta = 1.0\nsigma = 0.0\n[reward]\nr = 0.05\nkappa = 1.0\neta = \"0.5\"\n",
        "schema = 1\n[diffusion]\nmodel = \"ou\"\nmu = 0.1\ntheta = 1.0\nsigma = 1.0\n[reward]\nr = 0.05\nkappa = 0.2\neta = \"0.5\"\n",
        "schema = 2\n",
        "schema = 1\n[diffusion]\nmodel = \"bm\"\nmu = 0.0\nsigma = 1.0\ncolour = 3\n[reward]\nr = 1\nkappa = 1\neta = \"1\"\n",
        "schema = 1\n[diffusion]\nmodel = \"bm\"\nmu = 0.0\nsigma = 1.0\n[reward]\nr = 1\nkappa = 1\neta = \"exp(-x\"\n",
        "not toml at all [",
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{body}\n{}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["solve", "--config", "/nonexistent/problem.toml"]);
    assert_eq!(code(&o), 2);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("ou_baseline.toml");
    let cfg = cfg.to_str().unwrap();

    let o = run(&["sweep", "--config", cfg, "--out", out, "--param", "kappa", "--values", "1,1.5,2,3,5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("b* nondecreasing in kappa: pass"));

    let o = run(&["sweep", "--config", cfg, "--out", out, "--param", "theta", "--values", "0.25,0.5,1,2"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    let b: Vec<f64> = rows.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    let expected = [1.61, 1.22, 0.91, 0.66];
    for (got, want) in b.iter().zip(expected) {
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }

    let o = run(&["sweep", "--config", cfg, "--out", out, "--param", "kappa", "--values="]);
    assert_eq!(code(&o), 2);
    let o = run(&["sweep", "--config", cfg, "--out", out, "--param", "mu", "--values", "1"]);
    assert_eq!(code(&o), 2);
    // one row below η₀: reported, and the run fails
    let o = run(&["sweep", "--config", cfg, "--out", out, "--param", "kappa", "--values", "0.2,1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(configs().join("case_b.toml")).unwrap();
    let body: String = body
        .lines()
        .map(|l| if l.starts_with("n_paths") { "n_paths = 4000" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let cfg = write_config(dir.path(), &body);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
            "--x",
            "0,1",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("simulation.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let j: Value = serde_json::from_slice(&outputs[0]).unwrap();
    for e in j["estimates"].as_array().unwrap() {
        assert!(e["z_score"].as_f64().unwrap().abs() < 4.0, "{e}");
    }
}
