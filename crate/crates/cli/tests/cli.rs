use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn alignflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignflow"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ORACLE_64: &str = "[scenario]\nbuilder = \"oracle\"\nn = 64\n[analysis.limit]\npairs = 200\n";

#[test]
fn no_arguments_print_usage_and_exit_2() {
    let o = alignflow(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn empty_config_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "\n");
    let o = alignflow(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[scenario]\nbuilder = \"oracle\"\n[integrator]\nmethod = \"rk4\"\nstep_size = 0.1\n",
    );
    let o = alignflow(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("integrator") && e.contains("step_size"), "{e}");
}

#[test]
fn unknown_case_is_rejected() {
    let o = alignflow(&["reproduce", "no-such-case"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn module_errors_surface_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[scenario]\nbuilder = \"cantor\"\ngamma = 0.4\nn = 256\n");
    let o = alignflow(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma must lie in (0, 1/3), got 0.4"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_stamped_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ORACLE_64);
    let out = dir.path().join("run");
    let o = alignflow(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let m = read_json(&out.join("manifest.json"));
    let hash = m["hash"].as_str().unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["config"]["scenario"]["builder"], "oracle");
    assert_eq!(m["config"]["scenario"]["n"], 64);
    // Defaults are echoed in full.
    assert_eq!(m["config"]["integrator"]["tol_align"], 1e-8);
    let d = read_json(&out.join("diagnostics.json"));
    assert_eq!(d["manifest_hash"], hash);
    assert!(d["diagnostics"]["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# manifest_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "t,label,alpha1,alpha2,x,v,dx1,dv1");
    assert!(stdout(&o).contains("all checks passed"));
}

#[test]
fn limit_artifacts_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ORACLE_64);
    let runs: Vec<_> = ["1", "3"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}"));
            let o = alignflow(&["limit", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", w]);
            assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
            out
        })
        .collect();
    for name in ["manifest.json", "trajectory.csv", "diagnostics.json", "limit_report.json", "density.csv"] {
        let a = std::fs::read(runs[0].join(name)).unwrap();
        let b = std::fs::read(runs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between worker counts");
    }
}

#[test]
fn seed_flag_reaches_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ORACLE_64);
    let out = dir.path().join("s");
    let o = alignflow(&["limit", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "17"]);
    assert_eq!(o.status.code(), Some(0));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 17);
    assert_eq!(m["config"]["analysis"]["limit"]["seed"], 17);
}

#[test]
fn json_config_matches_toml() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = write(dir.path(), "c.toml", ORACLE_64);
    let json_cfg = write(
        dir.path(),
        "c.json",
        r#"{"scenario": {"builder": "oracle", "n": 64}, "analysis": {"limit": {"pairs": 200}}}"#,
    );
    let hashes: Vec<Value> = [toml_cfg, json_cfg]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let out = dir.path().join(format!("o{k}"));
            let o = alignflow(&["simulate", "--config", c, "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0));
            read_json(&out.join("manifest.json"))["hash"].clone()
        })
        .collect();
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn dimension_reports_the_cantor_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[scenario]\nbuilder = \"cantor\"\nn = 2048\n[analysis]\ndepth = 5\n[analysis.limit]\npairs = 200\n\
         [integrator]\ntol_align = 1e-12\n",
    );
    let out = dir.path().join("d");
    let o = alignflow(&["dimension", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let d = read_json(&out.join("dimension.json"));
    let est = &d["dimension"]["box_counting"];
    let predicted = est["predicted"].as_f64().unwrap();
    assert!((predicted - 2f64.ln() / -(0.09f64).ln()).abs() < 1e-12);
    assert!((est["slope"].as_f64().unwrap() - predicted).abs() < 0.08);
    assert_eq!(d["dimension"]["frostman"]["passed"], true);
    let ll = std::fs::read_to_string(out.join("loglog.csv")).unwrap();
    assert!(ll.lines().nth(1).unwrap() == "estimate,ln_x,ln_y");
    assert_eq!(ll.lines().filter(|l| l.starts_with("box,")).count(), est["radii"].as_array().unwrap().len());
}

#[test]
fn planar_limit_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[scenario]\nbuilder = \"disk\"\nn = 24\n[integrator]\nmethod = \"rk45\"\n[analysis.limit]\npairs = 100\n",
    );
    let out = dir.path().join("p");
    let o = alignflow(&["limit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.lines().nth(1).unwrap().starts_with("curve,a2,lo,hi,position,weight"));
    assert!(curves.lines().count() > 3);
}

#[test]
fn stability_pair_passes_on_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{ORACLE_64}[stability.second]\nbuilder = \"oracle\"\nn = 64\nperturbation = 1e-3\n"),
    );
    let out = dir.path().join("st");
    let o = alignflow(&["stability", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let s = read_json(&out.join("stability.json"));
    assert!(s["stability"]["delta"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(out.join("stability.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("t,x_gap,v_gap,w1"));
}

#[test]
fn stability_accepts_an_expression_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[scenario]\nbuilder = \"generic\"\nn = 64\n[stability]\nperturbation = { eps = 1e-3, psi = \"cos(3 * x)\" }\n",
    );
    let out = dir.path().join("st");
    let o = alignflow(&["stability", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("[PASS] position gap"), "{}", stdout(&o));
}

#[test]
fn stability_without_a_pair_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ORACLE_64);
    let o = alignflow(&["stability", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stability"));
}

#[test]
fn reproduce_oracle_prints_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = alignflow(&["reproduce", "oracle", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("[PASS]  1 oracle: max |Xbar - (a + u0)|"), "{}", stdout(&o));
    let r = read_json(&dir.path().join("reproduce.json"));
    assert_eq!(r["cases"][0]["passed"], true);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        match alignflow_cli::config::load(&path) {
            Ok(alignflow_cli::config::Loaded::Config(_)) => n += 1,
            other => panic!("{}: {other:?}", path.display()),
        }
    }
    assert!(n >= 5);
}
