use mbop::cli::{emit_plot_data, parse_scenario, run_scenario, Cell, Report};
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mbop-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn mbop(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mbop")).args(args).env_remove("MBOP_TOLERANCES").output().unwrap()
}

fn run_file(name: &str, out: &Path) -> (i32, Report) {
    let scen = scenarios().join(name);
    let o = mbop(&["run", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let path = String::from_utf8(o.stdout).unwrap().trim().to_string();
    let r: Report = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    (o.status.code().unwrap(), r)
}

#[test]
fn hilbert_minimal_scenario() {
    let out = scratch("hilbert");
    let (code, r) = run_file("hilbert.json", &out);
    assert_eq!(code, 0);
    let h = &r.series["h"].rows;
    assert_eq!(h.len(), 4);
    let Cell::Complex(h0) = h[0][1] else { panic!() };
    let Cell::Complex(h1) = h[1][1] else { panic!() };
    assert!((h0[0] - 1.0).abs() < 1e-14 && (h1[0] - 1.0 / 12.0).abs() < 1e-14);
}

#[test]
fn geronimus_route_table() {
    let out = scratch("routes");
    let (code, r) = run_file("geronimus_routes.json", &out);
    assert_eq!(code, 0);
    let names: Vec<&str> = r.steps[1].residuals.iter().map(|x| x.name.as_str()).collect();
    assert!(names.contains(&"spectral_vs_direct") && names.contains(&"nonspectral_vs_direct"));
    assert_eq!(r.series["step1_spectral"].rows.len(), 6);
}

#[test]
fn reports_are_byte_identical() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    run_file("geronimus_uvarov.json", &a);
    run_file("geronimus_uvarov.json", &b);
    let ra = std::fs::read(a.join("geronimus_uvarov.report.json")).unwrap();
    let rb = std::fs::read(b.join("geronimus_uvarov.report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn malformed_json_is_a_usage_error_without_output() {
    let out = scratch("bad");
    let f = std::env::temp_dir().join(format!("mbop-bad-{}.json", std::process::id()));
    std::fs::write(&f, "{ \"name\": \"x\", ").unwrap();
    let o = mbop(&["run", f.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!out.exists());
    std::fs::write(&f, r#"{"name":"x","kernel":{"kind":"hilbert"},"n":3,"steps":[],"extra":1}"#).unwrap();
    assert_eq!(mbop(&["run", f.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
    // time flows on a Hankel kernel are rejected before anything runs
    std::fs::write(&f, r#"{"name":"x","kernel":{"kind":"hilbert"},"n":3,"steps":[{"toda":{"checks":["toda"]}}]}"#).unwrap();
    assert_eq!(mbop(&["run", f.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_one() {
    let out = scratch("fail");
    let f = std::env::temp_dir().join(format!("mbop-fail-{}.json", std::process::id()));
    let s = r#"{"name":"degenerate","n":2,"steps":[{"factorize":{}}],
        "kernel":{"kind":"diagonal","p":1,"xs":[[0,0]],"weights":[[[[1,0]]]]}}"#;
    std::fs::write(&f, s).unwrap();
    let o = mbop(&["run", f.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
    // an impossible tolerance turns a clean run into a failure
    let scen = scenarios().join("hilbert.json");
    let o = Command::new(env!("CARGO_BIN_EXE_mbop"))
        .args(["run", scen.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("MBOP_TOLERANCES", r#"{"fac": 1e-30}"#)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides() {
    let out = scratch("seed");
    let scen = scenarios().join("geronimus_routes.json");
    let o = mbop(&["run", scen.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Report = serde_json::from_str(&std::fs::read_to_string(out.join("geronimus_routes.report.json")).unwrap()).unwrap();
    assert_eq!(r.seed, 99);
}

#[test]
fn plot_series() {
    let out = scratch("plot");
    let (_, r) = run_file("toda.json", &out);
    let csv = emit_plot_data(&r, &["step0_richardson_toda_eta_a".into()]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(csv.starts_with("h,residual\n"));
    assert!(emit_plot_data(&r, &[]).is_err());
    assert!(emit_plot_data(&r, &["nope".into()]).is_err());
    let report = out.join("toda.report.json");
    let o = mbop(&["plot", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = mbop(&["plot", report.to_str().unwrap(), "--series", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mbop(&["plot", report.to_str().unwrap(), "--series", "step1_richardson_nckp"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
    assert!(r.pass);
}

#[test]
fn library_entry_matches_scenarios() {
    let s = parse_scenario(&std::fs::read_to_string(scenarios().join("hilbert.json")).unwrap()).unwrap();
    let r = run_scenario(&s, 0).unwrap();
    assert_eq!(r.series["h_norm"].rows.len(), s.n);
    assert!(parse_scenario("[]").is_err());
}
