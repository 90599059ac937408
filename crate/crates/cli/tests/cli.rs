use std::path::Path;
use std::process::{Command, Output};

const FLAT: &str = r#"{
  "schema_version": 1,
  "seed": 3,
  "constants": {"c": 0.5, "kappa": 1.0},
  "scenarios": [{
    "id": "flat",
    "manifold": {"kind": "flat_torus", "side_lengths_length": [3, 3], "resolution": [48, 48]},
    "solver": {"output_times_time": [0, 0.05, 0.1, 0.3], "t_min_time": 0.05, "dt_time": 0.01},
    "checks": ["max_principle", "envelope", "lower_j", "li_yau", "sobolev"]
  }]
}"#;

fn liyau(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liyau"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn flat_verify_exits_zero_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    let out = liyau(&["verify", "--config", &cfg, "--out", "run", "--deterministic"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["failures"], 0);
    assert_eq!(report["reports"][0]["constants"]["source"], "config");
    let table = std::fs::read_to_string(dir.path().join("run/table.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("scenario,check,x,y,t,lhs,rhs,margin,violated"));
    assert!(table.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn critical_exponent_is_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &FLAT.replace(r#""id": "flat","#, r#""id": "flat", "params": {"p": 1.0},"#));
    let out = liyau(&["verify", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scenarios[0].params.p"), "{err}");
    assert!(!dir.path().join("run/report.json").exists());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    for out in ["a", "b"] {
        let o = liyau(&["verify", "--config", &cfg, "--out", out, "--seed", "11", "--deterministic"], dir.path());
        assert!(o.status.success());
    }
    for file in ["table.csv", "report.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn corrupted_negative_control_does_not_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT
        .replace(r#""id": "flat","#, r#""id": "flat", "negative_control": true, "corrupt_solution": true,"#)
        .replace(r#"["max_principle", "envelope", "lower_j", "li_yau", "sobolev"]"#, r#"["li_yau"]"#);
    let cfg = write_config(dir.path(), &text);
    let out = liyau(&["verify", "--config", &cfg, "--out", "run"], dir.path());
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("run/table.csv")).unwrap();
    assert!(table.lines().any(|l| l.ends_with(",true")));

    let cfg = write_config(dir.path(), &text.replace(r#""negative_control": true, "#, ""));
    let out = liyau(&["verify", "--config", &cfg, "--out", "run2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn build_previews_and_study_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    let out = liyau(&["build", "--config", &cfg, "--out", "b"], dir.path());
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("b/report.json")).unwrap();
    assert!(report.contains("\"num_vertices\": 2304"));

    let study = dir.path().join("study.json");
    std::fs::write(&study, r#"{"levels": [16, 32]}"#).unwrap();
    let out = liyau(&["study", "--config", study.to_str().unwrap(), "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
