use std::process::Command;

use serde_json::Value;

fn qmx(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qmx")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn body(path: &std::path::Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing").expect("timing section present");
    v
}

#[test]
fn gauntlet_so3_passes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let (code, stdout, _) = qmx(&["gauntlet", "--series", "so", "--n", "3", "--s", "3/2", "--json", json.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let v = body(&json);
    assert_eq!(v["bundles"][0]["certified"], Value::Bool(true));
    assert_eq!(v["bundles"][0]["classification"], "O(3)");
    assert_eq!(v["config"]["s"][0], "3/2");
    assert_eq!(v["summary"]["fail"], 0);
    let ids: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    for want in ["YBE", "charR", "rank-K", "traceD"] {
        assert!(ids.contains(&want), "missing {want}");
    }
}

#[test]
fn corrupted_r_fails_with_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let (code, stdout, _) =
        qmx(&["gauntlet", "--series", "so", "--n", "3", "--s", "3/2", "--corrupt-r", "--json", json.to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL"));
    let v = body(&json);
    let failed: Vec<&str> = v["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["status"] == "fail")
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"charR"), "{failed:?}");
    assert_eq!(v["bundles"][0]["certified"], Value::Bool(false));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        vec!["gauntlet", "--s", ""],
        vec!["gauntlet", "--s", "1"],
        vec!["gauntlet", "--series", "gl"],
        vec!["gauntlet", "--series", "so", "--n", "5"],
        vec!["gauntlet", "--series", "so", "--n", "6", "--allow-so5"],
        vec!["verify", "everything"],
        vec!["gauntlet", "--bogus"],
        vec!["gauntlet", "--config", "/nonexistent/qmx.conf"],
    ] {
        let (code, _, stderr) = qmx(&args);
        assert_eq!(code, 2, "{args:?}: {stderr}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("qmx.conf");
    std::fs::write(&conf, "# broken s, fixed on the command line\nseries = so\nn = 3\ns = 1\n").unwrap();
    let c = conf.to_str().unwrap();
    assert_eq!(qmx(&["gauntlet", "--config", c]).0, 2);
    let (code, stdout, _) = qmx(&["gauntlet", "--config", c, "--s", "3/2"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("so3 s=3/2: certified"));
}

#[test]
fn spectral_reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["verify", "spectral", "--type", "sp", "--k", "2", "--samples", "100", "--seed", "7", "--s", "3/2"];
    for p in [&a, &b] {
        let mut full = args.to_vec();
        full.extend(["--json", p.to_str().unwrap()]);
        assert_eq!(qmx(&full).0, 0);
    }
    let (va, vb) = (body(&a), body(&b));
    assert_eq!(serde_json::to_string(&va).unwrap(), serde_json::to_string(&vb).unwrap());
    let transcripts = va["spectral"][0]["transcripts"].as_array().unwrap();
    assert_eq!(transcripts.len(), 100);
    assert!(transcripts.iter().all(|t| t["passed"] == Value::Bool(true)));
}

#[test]
fn classify_reports_types() {
    let (code, stdout, _) = qmx(&["classify", "--series", "sp", "--k", "2", "--s", "5/2"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("sp4 s=5/2: certified as Sp(2)"), "{stdout}");
}
