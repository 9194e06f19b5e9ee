use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use loopinv_cli::verify::{load_invariants, load_target, solver, verify_batch, VerifyOptions};
use loopinv_core::engine::InvariantState;
use loopinv_core::lang::parse_expr;
use proptest::prelude::*;
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn l1() -> PathBuf {
    root().join("levels/isqrt.json")
}

fn loopinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn verify(program: &Path, invariants: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "verify",
        "--program",
        program.to_str().unwrap(),
        "--invariants",
        invariants.to_str().unwrap(),
    ];
    args.extend(extra);
    loopinv(&args)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn narrative_solves_level_one() {
    let inv = root().join("crates/core/tests/fixtures/solutions/isqrt.inv");
    let out = verify(&l1(), &inv, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("solved: yes"), "{text}");
    assert!(text.contains("promoted sqr = (cnt + 1)^2"), "{text}");
    assert_eq!(text.matches("removed").count(), 3, "{text}");
}

#[test]
fn initiation_failure_is_unsolved() {
    let dir = tempfile::tempdir().unwrap();
    let inv = write(dir.path(), "one.inv", "cnt >= 1\n");
    let out = verify(&l1(), &inv, &["--json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["proposals"].as_array().unwrap().len(), 1);
    assert_eq!(report["proposals"][0]["kind"], "non-inv");
    assert_eq!(report["solved"], false);
    assert_eq!(report["inductive"], serde_json::json!([]));
}

#[test]
fn empty_list_is_unsolved() {
    let dir = tempfile::tempdir().unwrap();
    let inv = write(dir.path(), "empty.inv", "# nothing yet\n\n");
    let out = verify(&l1(), &inv, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("solved: no"));
}

#[test]
fn bare_source_and_unroll_override() {
    let dir = tempfile::tempdir().unwrap();
    let level: Value = serde_json::from_str(&std::fs::read_to_string(l1()).unwrap()).unwrap();
    let sip = write(dir.path(), "isqrt.sip", level["source"].as_str().unwrap());
    let inv = write(dir.path(), "a.inv", "cnt <= 2\n");
    let out = verify(&sip, &inv, &["--json"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["proposals"][0]["kind"], "non-inv");
    // Two unrollings cannot refute it.
    let out = verify(&sip, &inv, &["--json", "--unroll", "2"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["proposals"][0]["kind"], "potential");
}

#[test]
fn annotation_is_proposed_first() {
    let dir = tempfile::tempdir().unwrap();
    let inv = write(dir.path(), "c.inv", "k >= 0\nk + d = n\n");
    let out = verify(&root().join("levels/countdown.json"), &inv, &["--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["proposals"][0]["expr"], "k >= 0");
    assert!(report["proposals"][1]["rejected"]
        .as_str()
        .unwrap()
        .contains("already"));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.inv", "cnt >= 0\nodd >=\n");
    let out = verify(&l1(), &bad, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.inv:2:"), "{err}");

    let ill = write(dir.path(), "ill.inv", "cnt\n");
    assert_eq!(verify(&l1(), &ill, &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.sip");
    assert_eq!(verify(&missing, &ill, &[]).status.code(), Some(2));
    let inv = write(dir.path(), "ok.inv", "cnt >= 0\n");
    assert_eq!(
        verify(&l1(), &inv, &["--unroll", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        verify(&l1(), &inv, &["--timeout", "0"]).status.code(),
        Some(2)
    );
    let broken = write(dir.path(), "broken.sip", "fn f(x: Integer): Integer { }");
    assert_eq!(verify(&broken, &inv, &[]).status.code(), Some(2));
}

#[test]
fn invariant_files_parse_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let target = load_target(&l1()).unwrap();
    let inv = write(
        dir.path(),
        "x.inv",
        "# header\nodd >= 1 # trailing\n\nsqr >= odd\n",
    );
    let list = load_invariants(&inv, &target.program).unwrap();
    assert_eq!(list.len(), 2);
}

const POOL: [&str; 9] = [
    "odd >= 1",
    "cnt >= 0",
    "odd % 2 = 1",
    "sqr = (cnt+1)^2",
    "sqr >= odd",
    "odd = cnt*2+1",
    "cnt^2 <= n",
    "cnt >= 1",
    "sqr >= 1",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn state_threading_is_exact(
        picks in proptest::collection::vec(0..POOL.len(), 0..7),
        split in 0usize..7,
    ) {
        let target = load_target(&l1()).unwrap();
        let opts = VerifyOptions::default();
        let solver = solver(&opts).unwrap();
        let exprs: Vec<_> = picks
            .iter()
            .map(|i| parse_expr(POOL[*i], &target.program.env).unwrap())
            .collect();
        let split = split.min(exprs.len());

        let mut whole = InvariantState::new();
        let all = verify_batch(&target, &exprs, &opts, &solver, &mut whole);
        let mut parts = InvariantState::new();
        let first = verify_batch(&target, &exprs[..split], &opts, &solver, &mut parts);
        let second = verify_batch(&target, &exprs[split..], &opts, &solver, &mut parts);

        prop_assert_eq!(&whole, &parts);
        prop_assert_eq!(all.solved, second.solved);
        let joined: Vec<_> = first.proposals.into_iter().chain(second.proposals).collect();
        prop_assert_eq!(all.proposals, joined);
    }
}
