use std::process::Command;

const MEM: &str = r#"{"gadget":{"kind":"memory","scheme":"simultaneous","state":"0","rounds":1},
 "noise":{"model":"scem","p":[5e-4,1e-3,2e-3]},"shots":2000,"min_failures":0,"seed":4,"target_pl":1e-6}"#;

fn qecx(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qecx")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "mem.json", MEM);
    let (code, out, _) = qecx(&["validate", &cfg]);
    assert_eq!(code, 0);
    assert!(out.contains("paths ok"));
    let (code, out, _) = qecx(&["dump-gadget", &cfg]);
    assert_eq!(code, 0);
    assert!(pframe::ProtocolTree::from_json(&out).is_ok());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", &MEM.replace("[5e-4,1e-3,2e-3]", "[]"));
    assert_eq!(qecx(&["run", &bad]).0, 2);
    assert_eq!(qecx(&["run", "/nonexistent.json"]).0, 2);
    let cfg = write(&dir, "mem.json", MEM);
    assert_eq!(qecx(&["run", &cfg, "--format", "xml"]).0, 2);
    assert_eq!(qecx(&["export-dem", &cfg]).0, 2, "branching trees have no fixed-path model");
}

#[test]
fn run_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "mem.json", MEM);
    let out = dir.path().join("r.csv");
    let (code, _, err) = qecx(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    let (code, fit, _) = qecx(&["fit", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(fit.starts_with("slope "), "{fit}");
    let (code, json, _) = qecx(&["run", &cfg, "--format", "json", "--shots", "100", "--seed", "8"]);
    assert_eq!(code, 0);
    let r = qecx::parse_results(json.as_bytes(), qecx::Format::Json).unwrap();
    assert_eq!((r.seed, r.points[0].shots), (8, 100));
}

#[test]
fn footprint_and_dem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "mem.json", MEM);
    let (code, out, _) = qecx(&["footprint", &cfg, "--shots", "500"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
    let prep = write(&dir, "prep.json", &MEM.replace(r#""kind":"memory","scheme":"simultaneous","state":"0","rounds":1"#, r#""kind":"prep_stabilizer","state":"0""#));
    let (code, dem, err) = qecx(&["export-dem", &prep]);
    if code == 0 {
        assert!(dem.starts_with("# dem v1"));
    } else {
        assert_eq!(code, 2, "{err}");
    }
}
