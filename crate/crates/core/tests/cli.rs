use std::fs;
use std::path::Path;
use std::process::Command;

fn vcem(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vcem")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn optimize_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let (code, stdout, _) = vcem(&["optimize", "--graph", "line:4", "--out", path(&out)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("converged true"));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "iter,cost,grad_norm,eps_Rz,eps_Rx,eps_Rzx");
    let last: Vec<f64> = trace.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[1] + 4.0).abs() < 1e-6, "final cost {}", last[1]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["coherent"], 1);
    assert_eq!(manifest["seeds"]["incoherent"], 2);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["coherent_errors"].as_object().unwrap().len(), 11);
}

#[test]
fn replaying_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["--graph", "line:3", "--noise", "pauli:m=2,mag=0.01", "--seed-coh", "9", "--seed-inc", "4"];
    let mut first = vec!["optimize", "--out", path(&a)];
    first.extend(args);
    assert_eq!(vcem(&first).0, 0);
    let cfg = a.join("config.txt");
    assert_eq!(vcem(&["optimize", "--config", path(&cfg), "--out", path(&b)]).0, 0);
    for f in ["trace.csv", "manifest.json"] {
        let x = fs::read_to_string(a.join(f)).unwrap();
        let y = fs::read_to_string(b.join(f)).unwrap();
        assert_eq!(x.replace(path(&a), ""), y.replace(path(&b), ""), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "gamma = 0.3\nout = ignored\n").unwrap();
    let out = dir.path().join("t");
    assert_eq!(vcem(&["twirl-demo", "--config", path(&cfg), "--out", path(&out)]).0, 0);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("twirl.json")).unwrap()).unwrap();
    assert_eq!(r["gamma"], 0.3);
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = path(&out);
    assert_eq!(vcem(&["optimize", "--noise", "pauli:m=7,mag=0.1", "--out", o]).0, 2);
    assert_eq!(vcem(&["optimize", "--graph", "ring:5", "--out", o]).0, 2);
    assert_eq!(vcem(&["twirl-demo", "--config", "/nonexistent/file", "--out", o]).0, 2);
    assert_eq!(vcem(&["delta-scaling", "--eps-values", "0.01,0.02,0", "--out", o]).0, 2);
    assert_eq!(vcem(&["delta-scaling", "--graph", "grid:2x2", "--out", o]).0, 2);
    assert_eq!(vcem(&["ghz-landscape", "--variant", "bogus", "--out", o]).0, 2);
    assert_eq!(vcem(&["frobnicate"]).0, 2);
    let (code, _, err) = vcem(&["delta-scaling", "--n-values", "4-12", "--out", o]);
    assert_eq!(code, 3, "{err}");
    let (code, _, err) = vcem(&["optimize", "--graph", "line:13", "--noise", "depol:p=0.01", "--out", o]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn ghz_landscape_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    assert_eq!(vcem(&["ghz-landscape", "--out", path(&out)]).0, 0);
    for name in ["noiseless", "end_pauli", "per_moment_depol"] {
        let text = fs::read_to_string(out.join(format!("ghz_{name}.csv"))).unwrap();
        assert!(text.starts_with("theta,analytic,simulated,abs_diff\n"));
        assert_eq!(text.lines().count(), 102);
    }
    let text = fs::read_to_string(out.join("ghz_per_moment_pauli.csv")).unwrap();
    assert!(text.starts_with("theta,analytic,simulated,abs_diff,delta\n"));
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(cols[3] < 1e-12 && cols[4].abs() < 1e-12);
    }
}

#[test]
fn delta_scaling_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let (code, stdout, err) = vcem(&[
        "delta-scaling",
        "--graph",
        "line:4",
        "--eps-values",
        "0,0.001,0.01,0.1,0.2",
        "--n-values",
        "3-6",
        "--draws",
        "2",
        "--out",
        path(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("slope"));
    let text = fs::read_to_string(out.join("delta_eps.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,epsilon,delta,abs_delta,min_sample,max_sample");
    let zero: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!(zero[2].parse::<f64>().unwrap().abs() < 1e-12);
    let fits: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fits.json")).unwrap()).unwrap();
    assert_eq!(fits["eps_loglog"]["points"].as_array().unwrap().len(), 4);
    assert_eq!(fits["n_linear"]["points"].as_array().unwrap().len(), 4);
}
