use std::process::Command;

use vvicert_core::report::Report;

fn vvicert(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vvicert"))
        .args(args)
        .env_remove("VVICERT_SEED")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn report(args: &[&str]) -> (i32, Report) {
    let (code, out, err) = vvicert(args);
    let report = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}\n{err}"));
    (code, report)
}

#[test]
fn svvi_on_kinked_cubic_exits_0() {
    let (code, r) = report(&[
        "check",
        "vvi",
        "--variant",
        "svvi",
        "--problem",
        "example5",
        "--at",
        "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(r.payload["verdict"]["status"], "CertifiedUpToSampling");
    assert_eq!(r.seed, 42);
    assert_eq!(r.version, "vvicert/1");
}

#[test]
fn refutation_exits_1() {
    let (code, r) = report(&[
        "check",
        "vvi",
        "--variant",
        "svvi",
        "--problem",
        "example23",
        "--at",
        "0.5",
    ]);
    assert_eq!(code, 1, "{}", r.to_json());
    assert_eq!(r.payload["verdict"]["status"], "Refuted");
}

#[test]
fn audit_on_fixture_exits_0() {
    let (code, r) = report(&[
        "audit",
        "--rules",
        "all",
        "--problem",
        "example5",
        "--at",
        "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(r.payload["counts"]["violation"], 0);
    assert_eq!(r.payload["rows"].as_array().unwrap().len(), 7);
}

#[test]
fn usage_and_load_errors_exit_2() {
    assert_eq!(vvicert(&["check"]).0, 2);
    assert_eq!(
        vvicert(&[
            "check",
            "invex",
            "--class",
            "convex",
            "--problem",
            "example5"
        ])
        .0,
        2
    );
    assert_eq!(
        vvicert(&["jacobian", "--problem", "example5", "--at", "3"]).0,
        2
    );
    assert_eq!(
        vvicert(&[
            "check",
            "efficiency",
            "--problem",
            "example5",
            "--at",
            "0",
            "--e",
            "-1,1"
        ])
        .0,
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"version\": \"vvicert/1\",\n  \"n\": 1,, }").unwrap();
    let (code, _, err) = vvicert(&["jacobian", "--problem", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn inconsistent_pieces_are_rejected() {
    let text = r#"{
  "version": "vvicert/1", "n": 1, "m": 1, "domain": [[-1, 1]],
  "cone": { "kind": "orthant", "dim": 1 },
  "function": { "pieces": [
    { "region": "x1 <= 0.5", "components": ["x1"] },
    { "region": "x1 >= 0", "components": ["x1 + 1"] }
  ] },
  "kernel": { "kind": "difference" }, "e": [0.5]
}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overlap.json");
    std::fs::write(&path, text).unwrap();
    let (code, _, err) = vvicert(&[
        "jacobian",
        "--problem",
        path.to_str().unwrap(),
        "--at",
        "0.2",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("pieces (0, 1) disagree"), "{err}");
}

#[test]
fn report_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 5] = [
        &["jacobian", "--problem", "example5", "--at", "0"],
        &[
            "check",
            "efficiency",
            "--problem",
            "example5",
            "--samples",
            "2000",
            "--seed",
            "9",
        ],
        &[
            "check",
            "invex",
            "--class",
            "quasi2",
            "--problem",
            "example23",
            "--samples",
            "2000",
        ],
        &["audit", "--random", "3", "--samples", "500", "--seed", "5"],
        &["gen", "--seed", "12"],
    ];
    for args in commands {
        let path = dir.path().join("report.json");
        let mut with_out: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_string();
        with_out.extend(["--out", &p]);
        let (code, _, err) = vvicert(&with_out);
        assert!(code == 0 || code == 1, "{args:?}: {err}");
        let first: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let replay = first.replay_args();
        let replay: Vec<&str> = replay.iter().map(String::as_str).collect();
        let (code2, _, _) = vvicert(&replay);
        let second: Report =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(code, code2);
        assert_eq!(first.payload_text(), second.payload_text(), "{args:?}");
        assert_eq!(first.problem_hash, second.problem_hash);
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_vvicert"))
        .args(["gen"])
        .env("VVICERT_SEED", "77")
        .output()
        .unwrap();
    let r: Report = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.seed, 77);
    let (_, explicit) = report(&["gen", "--seed", "77"]);
    assert_eq!(r.payload_text(), explicit.payload_text());
}

#[test]
fn generated_problems_load_back() {
    let (code, r) = report(&[
        "gen", "--seed", "4", "--n", "2", "--m", "2", "--pieces", "3",
    ]);
    assert_eq!(code, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&r.payload["problem"]).unwrap(),
    )
    .unwrap();
    let (code, j) = report(&["jacobian", "--problem", path.to_str().unwrap(), "--strict"]);
    assert_eq!(code, 0);
    assert!(!j.payload["vertices"].as_array().unwrap().is_empty());
}
