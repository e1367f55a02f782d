use std::process::Command;

use serde_json::Value;

fn sscf(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sscf"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn json_report_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("j.json");
    std::fs::write(&m, "[[0,1,0],[0,0,1],[0,0,0]]").unwrap();
    let (code, stdout, _) = sscf(&["characteristics", m.to_str().unwrap(), "--json", "-"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["results"]["index"], 3);
    assert_eq!(v["args"]["grid"], 65);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let (code, _, _) = sscf(&["generate", "--ells", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _, _) = sscf(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = sscf(&["--help"]);
    assert_eq!(code, 0);
    let m = dir.path().join("i.json");
    std::fs::write(&m, "[[1,0],[0,1]]").unwrap();
    let (code, stdout, _) = sscf(&["characteristics", m.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn spy_prints_panels_and_report_separately() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("j.json");
    std::fs::write(&m, "[[0,1],[0,0]]").unwrap();
    let (code, stdout, stderr) = sscf(&["spy", m.to_str().unwrap(), "--powers", "2"]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "N^1 (1 nonzeros)\n.#\n..\n\nN^2 (0 nonzeros)\n..\n..\n\n"
    );
    assert!(stderr.contains("spy: PASS"));
}
