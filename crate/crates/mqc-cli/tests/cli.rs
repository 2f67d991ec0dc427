use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mqc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqc")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn compile_qv4_fused_has_nine_mq_layers() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&mqc(dir.path(), &["compile", "--qv", "4", "--seed", "1", "--mode", "fused", "--format", "json", "--out", "c.qvc"]));
    assert_eq!(r["mq_layers"], 9);
    assert_eq!(r["mode"], "fused");
    assert!(dir.path().join("c.qvc").exists());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.qvc.report.json")).unwrap()).unwrap();
    assert_eq!(report["mq_layers"], 9);
    let ratio = r["ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio < 1.5);
}

#[test]
fn compile_toffoli() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&mqc(dir.path(), &["compile", "--toffoli", "--format", "json"]));
    assert_eq!(r["mq_layers"], 3);
    assert_eq!(r["couplings"], 7);
    let text = stdout(&mqc(dir.path(), &["compile", "--toffoli"]));
    assert!(text.contains("mq_layers: 3") && text.contains("couplings: 7"));
}

#[test]
fn verify_source_against_compilations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for mode in ["naive3L", "fused", "fused+optimized"] {
        let o = mqc(d, &["compile", "--qv", "4", "--seed", "3", "--mode", mode, "--out", "c.qvc", "--emit-source", "s.qvc"]);
        assert!(o.status.success());
        let v = json(&mqc(d, &["verify", "s.qvc", "c.qvc", "--format", "json"]));
        assert!(v["phase_distance"].as_f64().unwrap() < 1e-7, "{mode}: {v}");
        assert_eq!(v["equivalent"], true);
    }
    let v = json(&mqc(d, &["verify", "c.qvc", "c.qvc", "--format", "json"]));
    assert_eq!(v["phase_distance"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mqc(d, &["compile", "--qv", "4", "--seed", "2", "--mode", "fused", "--out", "c.qvc", "--emit-source", "s.qvc"])
        .status
        .success());
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(d.join("c.qvc")).unwrap()).unwrap();
    let layer = doc["layers"].as_array_mut().unwrap().iter_mut().find(|l| l["kind"] == "mq").expect("an mq layer");
    let theta = layer["couplings"][0][2].as_f64().unwrap();
    layer["couplings"][0][2] = Value::from(theta + 0.3);
    fs::write(d.join("bad.qvc"), serde_json::to_string(&doc).unwrap()).unwrap();
    let o = mqc(d, &["verify", "s.qvc", "bad.qvc"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("phase_distance"));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.qvc"), "{\"version\": 1, \"kind\": \"circuit\", \"n_qubits\": \"four\"}").unwrap();
    let o = mqc(d, &["compile", "bad.qvc"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1") && err.contains("n_qubits"), "{err}");
    assert_eq!(mqc(d, &["compile", "missing.qvc"]).status.code(), Some(2));
    assert_eq!(mqc(d, &["compile", "--qv", "4", "--mode", "bogus"]).status.code(), Some(2));
    assert_eq!(mqc(d, &["simulate", "--qv", "20"]).status.code(), Some(2));
}

#[test]
fn non_unitary_block_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mqc(d, &["compile", "--qv", "2", "--seed", "0", "--mode", "fused", "--emit-source", "s.qvc"]).status.success());
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(d.join("s.qvc")).unwrap()).unwrap();
    doc["layers"][0]["blocks"][0]["u"][0][0] = serde_json::json!([2.0, 0.0]);
    fs::write(d.join("s.qvc"), serde_json::to_string(&doc).unwrap()).unwrap();
    let o = mqc(d, &["compile", "s.qvc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not unitary"));
}

#[test]
fn compile_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a.qvc", "b.qvc"] {
        assert!(mqc(d, &["compile", "--qv", "5", "--seed", "9", "--out", out, "--jobs", "2"]).status.success());
    }
    assert_eq!(fs::read(d.join("a.qvc")).unwrap(), fs::read(d.join("b.qvc")).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.json"), r#"{"mode": "naive3L", "seed": 4, "qv": 4, "format": "json"}"#).unwrap();
    let r = json(&mqc(d, &["--config", "run.json", "compile"]));
    assert_eq!(r["mq_layers"], 12);
    let r = json(&mqc(d, &["--config", "run.json", "compile", "--mode", "fused"]));
    assert_eq!(r["mq_layers"], 9);
    fs::write(d.join("typo.json"), r#"{"moda": "fused"}"#).unwrap();
    assert_eq!(mqc(d, &["--config", "typo.json", "compile", "--qv", "4"]).status.code(), Some(2));
}

#[test]
fn report_summarizes_documents() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mqc(d, &["compile", "--qv", "4", "--seed", "1", "--mode", "fused", "--out", "c.qvc", "--emit-source", "s.qvc"])
        .status
        .success());
    let c = json(&mqc(d, &["report", "c.qvc", "--format", "json"]));
    assert_eq!(c["kind"], "compiled");
    assert_eq!(c["mq_layers"], 9);
    let s = json(&mqc(d, &["report", "s.qvc", "--format", "json"]));
    assert_eq!(s["kind"], "circuit");
    assert_eq!(s["blocks"], 8);
    assert!(s["cartan_baseline_nuc"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "simulate",
        "--qv",
        "4",
        "--mode",
        "fused",
        "--noise",
        "depol",
        "--p-tq",
        "0.01",
        "--circuits",
        "30",
        "--shots",
        "200",
        "--format",
        "json",
    ];
    let a = mqc(d, &args);
    let b = mqc(d, &args);
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["n_circuits"], 30);
    assert_eq!(r["per_circuit_hop"].as_array().unwrap().len(), 30);
    let h = r["mean_hop"].as_f64().unwrap();
    assert!(h > 0.5 && h < 1.0);
}

fn scan_rows(text: &str) -> Vec<(usize, String, f64, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn qv_scan_mq_not_worse_than_tq() {
    let dir = tempfile::tempdir().unwrap();
    let o = mqc(
        dir.path(),
        &[
            "qv-scan",
            "--qv",
            "4,6",
            "--modes",
            "fused+optimized,tq",
            "--noise",
            "dephase",
            "--circuits",
            "100",
            "--shots",
            "300",
            "--p-max",
            "0.1",
            "--delta-p",
            "0.002",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("N,compile_mode,noise,p_threshold,delta_p,shots"));
    let rows = scan_rows(&text);
    assert_eq!(rows.len(), 4);
    for n in [4, 6] {
        let mq = rows.iter().find(|r| r.0 == n && r.1.starts_with("mq")).unwrap();
        let tq = rows.iter().find(|r| r.0 == n && r.1.starts_with("tq")).unwrap();
        assert!(mq.2 > 0.0 && tq.2 > 0.0);
        assert!(mq.2 >= tq.2 - mq.3, "N={n}: mq {} tq {}", mq.2, tq.2);
    }
}

#[test]
fn qv_scan_fit_has_positive_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&mqc(
        dir.path(),
        &[
            "qv-scan",
            "--qv",
            "4,6,8",
            "--modes",
            "fused",
            "--noise",
            "depol",
            "--circuits",
            "100",
            "--shots",
            "300",
            "--p-max",
            "0.1",
            "--delta-p",
            "0.002",
            "--fit",
            "--format",
            "json",
        ],
    ));
    assert_eq!(r["rows"].as_array().unwrap().len(), 3);
    let fit = &r["fits"][0];
    assert!(fit["s"].as_f64().unwrap() > 0.0, "{fit}");
    assert!(fit["eps_eff"].as_f64().unwrap() > 0.0);
}
