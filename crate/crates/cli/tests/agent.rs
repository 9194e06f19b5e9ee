use std::path::PathBuf;
use std::process::Command;

use loopinv_cli::agent::{agent_play, enumerate, filter, AgentConfig, Api, Templates};
use loopinv_core::interp::eval_bool;
use loopinv_core::lang::parse_expr;
use loopinv_core::level::Level;
use loopinv_service::{load_app, serve, ServiceConfig};
use tokio::runtime::Runtime;

fn levels_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../levels")
}

/// An in-process service; it stops when the runtime is dropped.
fn service() -> (String, Runtime) {
    let rt = Runtime::new().unwrap();
    let app = load_app(ServiceConfig {
        levels_dir: levels_dir(),
        ..ServiceConfig::default()
    })
    .unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(async move { serve(listener, app).await.unwrap() });
    (url, rt)
}

#[test]
fn discovers_the_closed_form_on_level_one() {
    let (url, _rt) = service();
    let report = agent_play(&Api::new(&url, 3), "isqrt", &AgentConfig::default()).unwrap();
    let odd = report
        .submissions
        .iter()
        .find(|s| s.expr == "odd = cnt * 2 + 1")
        .expect("closed form submitted");
    assert_eq!(odd.outcome, "inductive");
    assert!(report.submissions.len() <= 200);
    assert!(report.score > 0);

    // Nothing submitted is falsified by the agent's own traces.
    let level = Level::load(&levels_dir().join("isqrt.json")).unwrap();
    assert!(!report.traces.is_empty());
    for s in &report.submissions {
        let e = parse_expr(&s.expr, &level.program.env).unwrap();
        for row in report.traces.iter().flat_map(|t| t.loop_rows()) {
            assert_eq!(eval_bool(&e, row), Ok(true), "{} on {row}", s.expr);
        }
    }
}

#[test]
fn empty_templates_submit_nothing() {
    let (url, _rt) = service();
    let cfg = AgentConfig {
        templates: Templates::none(),
        ..AgentConfig::default()
    };
    let report = agent_play(&Api::new(&url, 3), "isqrt", &cfg).unwrap();
    assert!(report.submissions.is_empty());
    assert!(!report.solved);
}

#[test]
fn trivial_guarantee_needs_no_proposals() {
    let (url, _rt) = service();
    let report = agent_play(&Api::new(&url, 3), "idle", &AgentConfig::default()).unwrap();
    assert!(report.solved);
    assert!(report.submissions.is_empty());
}

#[test]
fn budget_is_respected() {
    let (url, _rt) = service();
    let cfg = AgentConfig {
        budget: 3,
        ..AgentConfig::default()
    };
    let report = agent_play(&Api::new(&url, 3), "isqrt", &cfg).unwrap();
    assert_eq!(report.submissions.len(), 3);
}

#[test]
fn enumeration_and_filtering() {
    let level = Level::load(&levels_dir().join("isqrt.json")).unwrap();
    let p = &level.program;
    let all = enumerate(p, &Templates::all());
    let sizes: Vec<usize> = all.iter().map(|e| e.size()).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert!(all.contains(&parse_expr("odd = cnt*2+1", &p.env).unwrap()));
    assert!(enumerate(p, &Templates::none()).is_empty());

    let trace =
        loopinv_core::interp::exec_trace(p, &level.starter_inputs, &Default::default()).unwrap();
    let kept = filter(all, &[trace]);
    let shown: Vec<String> = kept.iter().map(|e| e.to_string()).collect();
    assert!(shown.contains(&"odd = cnt * 2 + 1".to_string()));
    // Only the tightest constant bound per variable survives.
    assert!(shown.contains(&"cnt >= 0".to_string()));
    assert!(!shown.contains(&"cnt >= -1".to_string()));
    assert!(!shown.contains(&"cnt <= 4".to_string()));
}

#[test]
fn unreachable_service_is_an_error() {
    let err = agent_play(
        &Api::new("http://127.0.0.1:9", 1),
        "isqrt",
        &AgentConfig::default(),
    );
    assert!(err.is_err());
}

#[test]
fn agent_command_line() {
    let (url, _rt) = service();
    let out = Command::new(env!("CARGO_BIN_EXE_loopinv"))
        .args(["agent", "--url", &url, "--level", "idle", "--json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["solved"], true);
    let out = Command::new(env!("CARGO_BIN_EXE_loopinv"))
        .args([
            "agent", "--url", &url, "--level", "isqrt", "--budget", "2", "--seed", "4",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 submitted"));
    let out = Command::new(env!("CARGO_BIN_EXE_loopinv"))
        .args(["agent", "--url", &url, "--level", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
