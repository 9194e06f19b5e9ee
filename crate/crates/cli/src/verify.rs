//! Batch verification: feed an invariant list through the engine without
//! the service.

use std::path::Path;
use std::time::Duration;

use loopinv_core::engine::{Characterization, Engine, EngineConfig, InvariantState};
use loopinv_core::lang::{load_program, parse_expr_list, Expr, Program};
use loopinv_core::level::Level;
use loopinv_core::solver::{Solver, SolverConfig};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Overrides the level's unroll bound.
    pub unroll: Option<usize>,
    pub timeout: Duration,
    pub prover_command: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            unroll: None,
            timeout: Duration::from_secs(10),
            prover_command: SolverConfig::default().command,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProposalReport {
    pub expr: Expr,
    /// `None` when the engine rejected the expression before analysis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Characterization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
    pub promoted: Vec<Expr>,
    pub removed: Vec<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub proposals: Vec<ProposalReport>,
    pub inductive: Vec<Expr>,
    pub potential: Vec<Expr>,
    pub solved: bool,
}

/// A program to verify against, with its unroll bound if it came from a
/// level file.
pub struct Target {
    pub program: Program,
    pub unroll: Option<usize>,
}

/// Reads a level JSON file or a bare SIP source file.
pub fn load_target(path: &Path) -> Result<Target, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let level = Level::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(Target {
            program: level.program,
            unroll: level.unroll_bound,
        });
    }
    let program = load_program(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Target {
        program,
        unroll: None,
    })
}

pub fn load_invariants(path: &Path, p: &Program) -> Result<Vec<Expr>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_expr_list(&text, &p.env).map_err(|(line, e)| format!("{}:{line}: {e}", path.display()))
}

pub fn solver(opts: &VerifyOptions) -> Result<Solver, String> {
    Solver::new(SolverConfig {
        command: opts.prover_command.clone(),
        timeout: opts.timeout,
        ..SolverConfig::default()
    })
    .map_err(|e| e.to_string())
}

/// Proposes `exprs` in order starting from `state`, which is updated in
/// place.
pub fn verify_batch(
    target: &Target,
    exprs: &[Expr],
    opts: &VerifyOptions,
    solver: &Solver,
    state: &mut InvariantState,
) -> Report {
    let cfg = EngineConfig {
        unroll: opts
            .unroll
            .or(target.unroll)
            .unwrap_or(EngineConfig::default().unroll),
        ..EngineConfig::default()
    };
    let mut eng = Engine::new(&target.program, solver, cfg);
    let proposals = exprs
        .iter()
        .map(|e| match eng.propose_and_report(state, e) {
            Ok(fb) => ProposalReport {
                expr: e.clone(),
                kind: Some(fb.kind),
                rejected: None,
                promoted: fb.promoted_invariants,
                removed: fb.removed_invariants,
                diagnostic: fb.diagnostic,
            },
            Err(err) => ProposalReport {
                expr: e.clone(),
                kind: None,
                rejected: Some(err.to_string()),
                promoted: Vec::new(),
                removed: Vec::new(),
                diagnostic: None,
            },
        })
        .collect();
    Report {
        proposals,
        inductive: state.inductive.clone(),
        potential: state.potential.clone(),
        solved: eng.check_solved(state).solved,
    }
}

pub fn render(report: &Report) -> String {
    let mut out = String::new();
    let width = report
        .proposals
        .iter()
        .map(|p| p.expr.to_string().len())
        .max()
        .unwrap_or(0);
    for p in &report.proposals {
        let outcome = match (&p.kind, &p.rejected) {
            (Some(k), _) => serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            (None, Some(why)) => format!("rejected: {why}"),
            (None, None) => String::new(),
        };
        out += &format!("{:width$}  {outcome}\n", p.expr.to_string());
        for e in &p.promoted {
            out += &format!("{:width$}    promoted {e}\n", "");
        }
        for e in &p.removed {
            out += &format!("{:width$}    removed {e}\n", "");
        }
        if let Some(d) = &p.diagnostic {
            out += &format!("{:width$}    note: {d}\n", "");
        }
    }
    let list = |v: &[Expr]| {
        v.iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    out += &format!("inductive: [{}]\n", list(&report.inductive));
    out += &format!("potential: [{}]\n", list(&report.potential));
    out += &format!("solved: {}\n", if report.solved { "yes" } else { "no" });
    out
}
