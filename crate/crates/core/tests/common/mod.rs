#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use loopinv_core::engine::{EngineConfig, InvariantState};
use loopinv_core::lang::{parse_expr, parse_expr_list, Expr, Program};
use loopinv_core::level::Level;
use loopinv_core::solver::{Solver, SolverConfig};

pub fn levels_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../levels")
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn level(id: &str) -> Level {
    Level::load(&levels_dir().join(format!("{id}.json"))).expect("fixture level loads")
}

pub fn all_levels() -> Vec<Level> {
    Level::load_dir(&levels_dir()).expect("fixture levels load")
}

pub fn solution(level: &Level) -> Vec<Expr> {
    let path = fixtures_dir().join(format!("solutions/{}.inv", level.id));
    let text = std::fs::read_to_string(path).expect("solution file");
    parse_expr_list(&text, &level.program.env).expect("solution parses")
}

pub fn solver() -> Solver {
    Solver::new(SolverConfig {
        timeout: Duration::from_secs(10),
        ..SolverConfig::default()
    })
    .expect("solver config")
}

pub fn expr(p: &Program, src: &str) -> Expr {
    parse_expr(src, &p.env).unwrap_or_else(|e| panic!("`{src}`: {e}"))
}

pub fn exprs(p: &Program, srcs: &[&str]) -> Vec<Expr> {
    srcs.iter().map(|s| expr(p, s)).collect()
}

pub fn state_of(p: &Program, inductive: &[&str], potential: &[&str]) -> InvariantState {
    InvariantState {
        inductive: exprs(p, inductive),
        potential: exprs(p, potential),
    }
}

pub fn engine_config(level: &Level) -> EngineConfig {
    level.engine_config(&EngineConfig::default())
}
