//! End-to-end checks of the binary: exit codes, reproducibility, and
//! the documented file formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anisofield"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("anisofield_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_obs_csv(path: &Path, with_h: bool) {
    // deterministic pseudo-data over [0, 10]²
    let mut s = String::from(if with_h { "x,y,h,obs\n" } else { "x,y,obs\n" });
    let mut state = 88172645463325252u64;
    let mut unit = || {
        // xorshift, plenty for test data
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..15 {
        let x = 10.0 * unit();
        let y = 10.0 * unit();
        let h = 2.0 * unit() - 1.0;
        let obs = (x / 3.0).sin() + 0.3 * (y / 2.0).cos() + 0.1 * (unit() - 0.5);
        if with_h {
            s.push_str(&format!("{x},{y},{h},{obs}\n"));
        } else {
            s.push_str(&format!("{x},{y},{obs}\n"));
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn invalid_flags_exit_code_2() {
    let out = bin().args(["sample", "--method", "warp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exit_code_3_and_no_partial_outputs() {
    let dir = tmp_dir("coarse");
    let out_file = dir.join("field.csv");
    // grid far too coarse for κ = 1: spectral mass check must fail
    let out = bin()
        .args([
            "sample",
            "--method",
            "spectral",
            "--kappa",
            "1",
            "--grid-n",
            "16",
            "--box",
            "16",
            "--out",
        ])
        .arg(&out_file)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_file.exists(), "partial output left behind");
}

#[test]
fn sample_is_bit_reproducible() {
    let dir = tmp_dir("repro");
    let f1 = dir.join("a.csv");
    let f2 = dir.join("b.csv");
    for f in [&f1, &f2] {
        let out = bin()
            .args([
                "sample", "--method", "spectral", "--kappa", "1", "--grid-n", "128", "--box",
                "12", "--seed", "42", "--out",
            ])
            .arg(f)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&f1).unwrap(), fs::read(&f2).unwrap());
    let text = fs::read_to_string(&f1).unwrap();
    assert!(text.starts_with("x,y,value\n"));
}

#[test]
fn fem_sample_isotropic_covariance_radially_symmetric() {
    let dir = tmp_dir("iso");
    let cov = dir.join("cov.csv");
    let out = bin()
        .args([
            "sample", "--method", "spectral", "--kappa", "1", "--v1", "0", "--v2", "0",
            "--grid-n", "128", "--box", "12", "--seed", "1", "--out",
        ])
        .arg(dir.join("f.csv"))
        .arg("--covariance")
        .arg(&cov)
        .output()
        .unwrap();
    assert!(out.status.success());
    // parse the covariance grid and compare lag (h, 0) with (0, h)
    let text = fs::read_to_string(&cov).unwrap();
    let mut values = std::collections::HashMap::new();
    for line in text.lines().skip(1) {
        let p: Vec<&str> = line.split(',').collect();
        let x: f64 = p[0].parse().unwrap();
        let y: f64 = p[1].parse().unwrap();
        let v: f64 = p[2].parse().unwrap();
        values.insert((x.round() as i64 * 1000 + (x.fract() * 100.0).round() as i64, y.round() as i64 * 1000 + (y.fract() * 100.0).round() as i64), v);
    }
    let probe = |x: f64, y: f64| {
        values[&(x.round() as i64 * 1000 + (x.fract() * 100.0).round() as i64, y.round() as i64 * 1000 + (y.fract() * 100.0).round() as i64)]
    };
    for lag in [0.65625f64, 1.3125, 2.625] {
        let a = probe(lag, 0.0);
        let b = probe(0.0, lag);
        assert!((a - b).abs() < 1e-6, "lag {lag}: {a} vs {b}");
    }
}

#[test]
fn prior_emits_calibrated_hyperparameters() {
    let dir = tmp_dir("prior");
    let prefix = dir.join("p");
    let out = bin()
        .args([
            "prior", "--a0", "10", "--beta", "0.01", "--rho0", "1", "--alpha", "0.01",
            "--samples", "50", "--seed", "2", "--out-prefix",
        ])
        .arg(&prefix)
        .output()
        .unwrap();
    assert!(out.status.success());
    let hyper: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("p_hyper.json")).unwrap()).unwrap();
    let lv = hyper["pc"]["lambda_v"].as_f64().unwrap();
    let lt = hyper["pc"]["lambda_theta"].as_f64().unwrap();
    assert!((lv - 0.4374).abs() < 1e-3, "lambda_v = {lv}");
    assert!((lt - 0.5368).abs() < 1e-3, "lambda_theta = {lt}");
    let density = fs::read_to_string(dir.join("p_density.csv")).unwrap();
    assert!(density.starts_with("variable,x,density\n"));
    let samples = fs::read_to_string(dir.join("p_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 51);
}

#[test]
fn fit_then_score_round_trip() {
    let dir = tmp_dir("fit");
    let data = dir.join("obs.csv");
    write_obs_csv(&data, false);
    let prefix = dir.join("fit");
    let out = bin()
        .args(["fit", "--data"])
        .arg(&data)
        .args([
            "--prior",
            "pc",
            "--samples",
            "200",
            "--seed",
            "3",
            "--mesh-edge",
            "1.2",
            "--extension",
            "2.5",
            "--out-prefix",
        ])
        .arg(&prefix)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let posterior = dir.join("fit_posterior.csv");
    let text = fs::read_to_string(&posterior).unwrap();
    assert!(text.starts_with("log_kappa,v1,v2,log_sigma_u,log_sigma_eps,weight\n"));
    assert_eq!(text.lines().count(), 201);
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("fit_diagnostics.json")).unwrap())
            .unwrap();
    for key in ["pareto_k", "ess", "map", "ci"] {
        assert!(diag.get(key).is_some(), "diagnostics missing {key}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("fit_manifest.json")).unwrap()).unwrap();
    assert!(manifest["config_hash"].is_string());

    let out = bin()
        .args(["score", "--data"])
        .arg(&data)
        .arg("--posterior")
        .arg(&posterior)
        .args(["--mesh-edge", "1.2", "--extension", "2.5", "--out-prefix"])
        .arg(dir.join("sc"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let loo = fs::read_to_string(dir.join("sc_loo.csv")).unwrap();
    assert!(loo.starts_with("obs_id,loo_mean,loo_var,se,crps,dss\n"));
    assert_eq!(loo.lines().count(), 16);
    let scores: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("sc_scores.json")).unwrap()).unwrap();
    assert!(scores["rmse"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_with_covariate_column() {
    let dir = tmp_dir("fith");
    let data = dir.join("obs.csv");
    write_obs_csv(&data, true);
    let out = bin()
        .args(["fit", "--data"])
        .arg(&data)
        .args([
            "--samples",
            "150",
            "--seed",
            "5",
            "--mesh-edge",
            "1.4",
            "--extension",
            "2.0",
            "--out-prefix",
        ])
        .arg(dir.join("fit"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simstudy_emits_all_outputs_and_is_reproducible() {
    let dir = tmp_dir("study");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{
  "domain": {"x0": 0.0, "x1": 8.0, "y0": 0.0, "y1": 8.0},
  "mesh_edge": 1.1,
  "extension": 2.2,
  "num_obs": 10,
  "priors": ["pc", "uniform"],
  "generator": "pc",
  "replications": 2,
  "is_samples": 150,
  "master_seed": 11,
  "targets": {"a0": 10.0, "beta": 0.01, "rho0": 1.0, "alpha": 0.01},
  "sigma_u_quantile": {"value": 10.0, "prob": 0.01},
  "sigma_eps_quantile": {"value": 1.5, "prob": 0.01}
}"#,
    )
    .unwrap();
    for sub in ["a", "b"] {
        let out = bin()
            .args(["simstudy", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(dir.join(sub))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["records.csv", "sbc.csv", "scores.csv", "summary.json", "manifest.json"] {
        assert!(dir.join("a").join(f).exists(), "missing {f}");
    }
    // byte-identical data products across reruns of the same config
    for f in ["records.csv", "sbc.csv", "scores.csv", "summary.json"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }

    // the uniform prior cannot generate: config rejected with exit 2
    let bad = dir.join("bad.json");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"generator\": \"pc\"", "\"generator\": \"uniform\"");
    fs::write(&bad, text).unwrap();
    let out = bin()
        .args(["simstudy", "--config"])
        .arg(&bad)
        .arg("--out-dir")
        .arg(dir.join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
