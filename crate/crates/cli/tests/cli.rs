use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn lpdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpdim")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_of(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn validate_accepts_bundled_models() {
    for m in ["periodic4.json", "treeing.json", "mixed.json", "split.json"] {
        let o = lpdim(&["validate", data(m).to_str().unwrap()]);
        assert!(o.status.success(), "{m}: {}", stderr(&o));
    }
}

#[test]
fn validate_names_the_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    std::fs::write(&w, r#"{"weights":[0.3,0.6],"blocks":[[0],[1]]}"#).unwrap();
    let o = lpdim(&["validate", w.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("weights"), "{}", stderr(&o));

    let g = dir.path().join("g.json");
    std::fs::write(
        &g,
        r#"{"weights":["1/2","1/2"],"blocks":[[0,1]],"generators":[{"pairs":[[0,1]]},{"pairs":[[0,1],[1,1]]}]}"#,
    )
    .unwrap();
    let o = lpdim(&["validate", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("generators[1]"), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("[model]"));
}

#[test]
fn dim_on_periodic_example_brackets_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("configs/dim_periodic4.json");
    let o = lpdim(&["dim", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["seed"], 1);
    let r = &report["result"];
    let (lo, up) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(lo <= 0.5 && 0.5 <= up, "[{lo}, {up}]");
    assert_eq!(r["exact"]["exact_dimension"], "1/2");
    let csv = std::fs::read_to_string(dir.path().join("per_scale.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# lpdim per_scale v1"));
    assert!(lines.next().unwrap().starts_with("d,epsilon,F_size,m,delta,deps_over_d,alpha_hat,kappa_lower"));
    assert_eq!(lines.count(), 6);
    assert!(!csv.contains("time"));
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = data("configs/dim_periodic4.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, threads) in [(&a, "1"), (&b, "3")] {
        let o = lpdim(&["dim", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["per_scale.csv", "report.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    // a different seed changes the samples
    let c = tempfile::tempdir().unwrap();
    lpdim(&["dim", cfg.to_str().unwrap(), "--out", c.path().to_str().unwrap(), "--seed", "99"]);
    assert_ne!(std::fs::read(a.path().join("per_scale.csv")).unwrap(), std::fs::read(c.path().join("per_scale.csv")).unwrap());
}

#[test]
fn c1_on_treeing_brackets_cost() {
    let o = lpdim(&["c1", data("configs/c1_treeing.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &json_of(&o)["result"];
    assert_eq!(r["exact"]["c1_exact"], "2/3");
    assert_eq!(r["exact"]["cost"], "2/3");
    let (lo, up) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(lo <= 2.0 / 3.0 && 2.0 / 3.0 <= up + 1e-12);
}

#[test]
fn graphing_cost_prints_exact_rational() {
    let o = lpdim(&["graphing", "cost", data("treeing.json").to_str().unwrap()]);
    assert!(o.status.success());
    let r = &json_of(&o)["result"];
    assert_eq!(r["cost"], "2/3");
    let o = lpdim(&["graphing", "cost", data("mixed.json").to_str().unwrap()]);
    let r = &json_of(&o)["result"];
    assert_eq!(r["cost"], "5/8");
    assert_eq!(r["c1_exact"], "11/24");
}

#[test]
fn transfer_check_holds() {
    let o = lpdim(&["graphing", "transfer-check", data("mixed.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json_of(&o)["result"]["holds"], true);
}

#[test]
fn coh_subcommands() {
    let o = lpdim(&["coh", "hodge", data("k4.json").to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &json_of(&o)["result"];
    assert_eq!(r["cycle_space_dim"], 3);
    assert!(r["orthogonality"].as_f64().unwrap() < 1e-12);

    let o = lpdim(&["coh", "margin", data("star.json").to_str().unwrap(), "--grounded", "0"]);
    assert!((json_of(&o)["result"]["margin"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = lpdim(&["coh", "neumann", data("k4.json").to_str().unwrap(), "--grounded", "0,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json_of(&o)["result"]["iterations"].as_u64().unwrap() > 0);

    // nothing grounded in a component: tagged error, nonzero exit
    let o = lpdim(&["coh", "neumann", data("k4.json").to_str().unwrap(), "--grounded", "9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with('['));
}

#[test]
fn quality_reports_defects() {
    let o = lpdim(&["quality", data("periodic4.json").to_str().unwrap(), data("periodic4_sofic_d40.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let q = &json_of(&o)["result"]["quality"];
    assert!(q["mult_defect"].as_f64().unwrap() < 1e-12);
    let o = lpdim(&["quality", data("periodic4.json").to_str().unwrap(), data("periodic4_sofic_d40_noisy.json").to_str().unwrap()]);
    assert!(json_of(&o)["result"]["quality"]["mult_defect"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let base = serde_json::json!({
        "task": "dim",
        "model": data("periodic4.json"),
        "representation": {"kind": "finite_orbit", "k": 2},
        "scales": [40],
        "grid": {"F": [["g0"]], "m": [1], "delta": [0.1], "epsilon": []},
        "samples": 10,
        "seed": 1
    });
    let p = dir.path().join("c.json");
    std::fs::write(&p, base.to_string()).unwrap();
    let o = lpdim(&["dim", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid.epsilon"), "{}", stderr(&o));

    let mut missing = base.clone();
    missing["model"] = serde_json::json!("nowhere.json");
    std::fs::write(&p, missing.to_string()).unwrap();
    let o = lpdim(&["dim", p.to_str().unwrap()]);
    assert!(stderr(&o).contains("`model`"), "{}", stderr(&o));

    let mut odd = base.clone();
    odd["grid"]["epsilon"] = serde_json::json!([0.1]);
    odd["scales"] = serde_json::json!([41]);
    std::fs::write(&p, odd.to_string()).unwrap();
    let o = lpdim(&["dim", p.to_str().unwrap()]);
    assert!(stderr(&o).contains("scales[0]"), "{}", stderr(&o));
}
