use std::path::Path;
use std::process::{Command, Output};

use ssf_cli::emit::parse_csv;

fn ssf(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ssf"));
    cmd.args(args).env_remove("SSF_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("SSF_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const RANK_ONE: &str = r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]},
    "path": {"kind": "straight", "j": {"re": [[2.0]]}},
    "grid": {"lambda_min": -1.8, "lambda_max": 1.8, "count": 7}}"#;

#[test]
fn malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write_config(
        dir.path(),
        "neg.json",
        r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]}, "numerics": {"quad_tol": -1e-10}}"#,
    );
    let garbage = write_config(dir.path(), "garbage.json", "{ not json");
    for cfg in [neg.as_str(), garbage.as_str(), "/nonexistent/config.json"] {
        let o = ssf(&["ssf", "--config", cfg], None);
        assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(ssf(&["verify", "--suite", "torus"], None).status.code(), Some(2));
    assert_eq!(ssf(&["mu"], None).status.code(), Some(2));
}

#[test]
fn rank1_suite_exits_0() {
    let o = ssf(&["verify", "--suite", "rank1"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suite"], "rank1");
}

#[test]
fn zero_coupling_gives_zero_xi_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &RANK_ONE.replace(r#"{"kind": "straight", "j": {"re": [[2.0]]}}"#, r#"{"kind": "zero"}"#));
    let o = ssf(&["ssf", "--config", &cfg, "--out", "zero.csv"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("zero.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    for row in rows {
        for (h, v) in head.iter().zip(&row) {
            if h.starts_with("xi") {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h}");
            }
        }
    }
}

#[test]
fn csv_round_trip_and_svg_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r1.json", RANK_ONE);
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let svg = dir.path().join(format!("{tag}.svg"));
        let o = ssf(&["ssf", "--config", &cfg, "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read_to_string(csv).unwrap(), std::fs::read(svg).unwrap())
    };
    let (csv_a, svg_a) = run("a");
    let (csv_b, svg_b) = run("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(svg_a, svg_b);
    assert!(String::from_utf8(svg_a).unwrap().contains("<polyline"));

    let (head, rows) = parse_csv(&csv_a).unwrap();
    assert_eq!(head.len(), 8);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let want: Vec<f64> = (0..7).map(|i| -1.8 + 3.6 * i as f64 / 6.0).collect();
    for (a, b) in lambdas.iter().zip(&want) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    // rank-one v = 2: xi_ac = xi, no singular part
    for r in &rows {
        assert_eq!(r[4], "0");
        assert_eq!(r[6], "false");
    }
}

#[test]
fn scattering_and_resonance_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r1.json", RANK_ONE);
    let o = ssf(&["scattering", "--config", &cfg, "--lambda", "0"], None);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["det"][1].as_f64().unwrap() + 1.0).abs() < 1e-10);
    assert!(doc["residuals"]["birman_krein_ac"].as_f64().unwrap() < 1e-8);

    let o = ssf(&["scattering", "--config", &cfg, "--lambda", "-0.5", "--y", "0.1"], None);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["residuals"]["birman_krein"].as_f64().unwrap() < 1e-9);
    assert_eq!(ssf(&["scattering", "--config", &cfg, "--lambda", "0", "--svg", "x.svg"], Some(dir.path())).status.code(), Some(2));

    let v3 = write_config(dir.path(), "v3.json", &RANK_ONE.replace("2.0", "3.0"));
    let o = ssf(&["resonance", "--config", &v3, "--lambda", "2.5", "--out", "groups.csv"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, groups) = parse_csv(&std::fs::read_to_string(dir.path().join("groups.csv")).unwrap()).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0][3], "1");
    assert!(dir.path().join("groups.trajectory.csv").exists());

    let o = ssf(&["mu", "--config", &v3, "--lambda", "2.5"], None);
    let (_, rows) = parse_csv(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert!(rows.len() >= 8);
    assert!(rows.iter().all(|r| r[4] == "-1" && r[5] == "-1"));
}
