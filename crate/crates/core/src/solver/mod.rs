//! Discharging goals: an external SMT prover over SMT-LIB v2 text, with a
//! random-testing fallback when the prover cannot decide.
//!
//! Every counterexample is replayed through the interpreter before it is
//! reported, so a `Counterexample` verdict always denotes a concrete run
//! that violates an obligation of the goal.

mod process;
mod sexp;

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::interp::{
    run_statements, Choices, ExecConfig, FinderResult, ModelFinder, Outcome, Violation,
};
use crate::lang::{BinOp, Expr, Stmt, Type, TypeEnv};
use crate::value::{State, Value};
use crate::vcgen::{symexec_to_vc, Formula, Goal, STEP_PREFIX};

use process::{run_prover, Pool, RawReply};
use sexp::{parse_all, read_model, ModelValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownReason {
    Timeout,
    IncompleteTheory,
    Resource,
    /// The prover answered `sat` but a model value was not an exact number.
    UnreadableModel,
    /// A prover model did not reproduce concretely.
    ReplayMismatch,
    /// The prover could not be reached; see the engine's diagnostics.
    Transport,
}

/// A concrete witness that a goal can fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Start state over the program's variables.
    pub model: State,
    /// State at the violated obligation; for loop goals, the loop-head state.
    pub at_violation: State,
    pub violation: Violation,
    /// `cassign` choices made during the replay, in execution order.
    pub cassign_log: Vec<(usize, State)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SolverVerdict {
    Proved,
    Counterexample(Counterexample),
    Unknown { reason: UnknownReason },
}

impl SolverVerdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, SolverVerdict::Proved)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            SolverVerdict::Counterexample(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("prover transport error: {0}")]
    Transport(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Program and arguments; the script is written to its stdin.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Random start states tried when the prover cannot decide.
    pub fuzz_samples: usize,
    pub seed: u64,
    /// Maximum concurrent prover processes.
    pub pool_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".into(), "-in".into()],
            timeout: Duration::from_secs(10),
            fuzz_samples: 2_000,
            seed: 0,
            pool_size: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.timeout.is_zero() {
            return Err(SolverError::Config("timeout must be positive".into()));
        }
        if self.command.is_empty() {
            return Err(SolverError::Config("prover command is empty".into()));
        }
        Ok(())
    }
}

/// Anything that can decide goals. The engine only talks to this trait.
pub trait Checker: Send + Sync {
    fn check(&self, goal: &Goal) -> Result<SolverVerdict, SolverError>;
}

/// Stable identity of a goal: SHA-256 of its timeout-free SMT-LIB rendering.
pub fn goal_key(goal: &Goal) -> String {
    formula_key(&symexec_to_vc(goal))
}

fn formula_key(f: &Formula) -> String {
    let digest = Sha256::digest(f.to_smtlib(0).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn program_vars(env: &TypeEnv) -> impl Iterator<Item = &str> {
    env.keys()
        .map(String::as_str)
        .filter(|k| !k.starts_with(STEP_PREFIX))
}

/// Executes the goal from `initial` and packages a violation, if any.
fn replay(
    goal: &Goal,
    initial: &State,
    choices: Choices,
    cfg: &ExecConfig,
) -> Option<Counterexample> {
    let run = run_statements(goal.env(), goal.statements(), initial, choices, cfg, None);
    match run.outcome {
        Outcome::Violated { violation, state } => Some(Counterexample {
            model: initial.project(program_vars(goal.env())),
            at_violation: state.project(program_vars(goal.env())),
            violation,
            cassign_log: run.cassign_log,
        }),
        _ => None,
    }
}

/// Samples start states and runs the goal concretely; returns the first
/// run that violates an obligation.
pub fn fuzz_counterexample(goal: &Goal, cfg: &SolverConfig) -> Option<Counterexample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.fuzz_samples {
        let initial = State::sample(goal.env(), &mut rng);
        let exec = ExecConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            cassign_samples: 100,
            ..ExecConfig::default()
        };
        if let Some(c) = replay(goal, &initial, Choices::Search, &exec) {
            return Some(c);
        }
    }
    None
}

enum ProverAnswer {
    Unsat,
    Sat(HashMap<String, Option<ModelValue>>),
    Unknown(UnknownReason),
}

fn interpret(reply: &str) -> Result<ProverAnswer, String> {
    let items = parse_all(reply)?;
    let head = items
        .first()
        .and_then(|s| s.atom())
        .ok_or_else(|| format!("unexpected prover reply: {reply:?}"))?;
    match head {
        "unsat" => Ok(ProverAnswer::Unsat),
        "sat" => {
            let model = items
                .iter()
                .skip(1)
                .find(|s| matches!(s, sexp::Sexp::List(l) if l.first().and_then(|x| x.atom()) != Some(":reason-unknown") && l.first().and_then(|x| x.atom()) != Some("error")))
                .ok_or("prover answered sat without a model")?;
            Ok(ProverAnswer::Sat(read_model(model)?))
        }
        "unknown" | "timeout" => {
            let reason = items.iter().find_map(|s| match s {
                sexp::Sexp::List(l)
                    if l.first().and_then(|x| x.atom()) == Some(":reason-unknown") =>
                {
                    match l.get(1) {
                        Some(sexp::Sexp::Str(r)) | Some(sexp::Sexp::Atom(r)) => Some(r.clone()),
                        _ => None,
                    }
                }
                _ => None,
            });
            let reason = match reason.as_deref() {
                Some(r) if r.contains("timeout") || r.contains("canceled") => {
                    UnknownReason::Timeout
                }
                Some(r) if r.contains("memory") || r.contains("resource") || r.contains("max.") => {
                    UnknownReason::Resource
                }
                _ if head == "timeout" => UnknownReason::Timeout,
                _ => UnknownReason::IncompleteTheory,
            };
            Ok(ProverAnswer::Unknown(reason))
        }
        other => Err(format!("unexpected prover reply `{other}`")),
    }
}

fn model_value(v: &ModelValue, ty: Type) -> Option<Value> {
    let raw = match v {
        ModelValue::Bool(b) => Value::Bool(*b),
        ModelValue::Num(r) if r.is_integer() => Value::Int(r.to_integer()),
        ModelValue::Num(r) => Value::Rat(r.clone()),
    };
    raw.conform(ty).ok()
}

/// Reads the start state and per-site `cassign` values out of a model.
fn read_back(
    f: &Formula,
    model: &HashMap<String, Option<ModelValue>>,
) -> Option<(State, HashMap<usize, State>)> {
    let lookup = |var: &str, sym: &str| -> Option<Value> {
        let ty = f.env[var];
        match model.get(sym) {
            // absent: unconstrained, any value will do
            None => Some(Value::default_for(ty)),
            Some(None) => None,
            Some(Some(v)) => model_value(v, ty),
        }
    };
    let mut initial = State::new();
    for (var, sym) in &f.initial {
        initial.set(var.clone(), lookup(var, sym)?);
    }
    let mut sites = HashMap::new();
    for (site, vars) in &f.sites {
        let mut st = State::new();
        for (var, sym) in vars {
            st.set(var.clone(), lookup(var, sym)?);
        }
        sites.insert(*site, st);
    }
    Some((initial, sites))
}

/// SMT-backed checker with a verdict cache and a bounded process pool.
pub struct Solver {
    cfg: SolverConfig,
    pool: Pool,
    cache: Mutex<HashMap<String, SolverVerdict>>,
    queries: std::sync::atomic::AtomicUsize,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Solver, SolverError> {
        cfg.validate()?;
        Ok(Solver {
            pool: Pool::new(cfg.pool_size),
            cfg,
            cache: Mutex::new(HashMap::new()),
            queries: Default::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Number of prover processes started so far.
    pub fn prover_runs(&self) -> usize {
        self.queries.load(std::sync::atomic::Ordering::Relaxed)
    }

    /// Pre-loads a decided verdict, e.g. from a recorded session log.
    pub fn seed_cache(&self, key: String, verdict: SolverVerdict) {
        if !matches!(verdict, SolverVerdict::Unknown { .. }) {
            self.cache.lock().expect("cache lock").insert(key, verdict);
        }
    }

    fn ask_prover(&self, script: &str) -> Result<RawReply, String> {
        let _permit = self.pool.acquire();
        self.queries
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let wall = self.cfg.timeout + Duration::from_secs(2);
        run_prover(&self.cfg.command, script, wall)
    }

    /// Generates the goal's verification condition and decides it.
    ///
    /// `Proved` is returned only on an `unsat` answer. A `sat` answer
    /// becomes a counterexample only after its model replays concretely.
    /// Undecided queries fall back to random testing before reporting
    /// `Unknown`.
    pub fn gen_chk_vcs(&self, goal: &Goal) -> Result<SolverVerdict, SolverError> {
        let formula = symexec_to_vc(goal);
        let key = formula_key(&formula);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let started = Instant::now();
        let script = formula.to_smtlib(self.cfg.timeout.as_millis().max(1) as u64);

        let mut attempt = 0;
        let reply = loop {
            attempt += 1;
            let r = self.ask_prover(&script).and_then(|raw| match raw {
                RawReply::Output(out) => interpret(&out),
                RawReply::Killed => Ok(ProverAnswer::Unknown(UnknownReason::Timeout)),
            });
            match r {
                Ok(a) => break a,
                Err(e) if attempt >= 2 => return Err(SolverError::Transport(e)),
                Err(e) => tracing::warn!(error = %e, "prover failed, retrying once"),
            }
        };

        let verdict = match reply {
            ProverAnswer::Unsat => SolverVerdict::Proved,
            ProverAnswer::Sat(model) => match read_back(&formula, &model) {
                None => self.fallback(goal, UnknownReason::UnreadableModel),
                Some((initial, sites)) => {
                    let exec = ExecConfig {
                        seed: self.cfg.seed,
                        ..ExecConfig::default()
                    };
                    match replay(goal, &initial, Choices::Sites(sites), &exec) {
                        Some(c) => SolverVerdict::Counterexample(c),
                        None => {
                            tracing::warn!(goal = %goal, "prover model did not replay");
                            self.fallback(goal, UnknownReason::ReplayMismatch)
                        }
                    }
                }
            },
            ProverAnswer::Unknown(reason) => self.fallback(goal, reason),
        };
        tracing::debug!(
            key = %&key[..12],
            verdict = verdict_tag(&verdict),
            elapsed_ms = started.elapsed().as_millis() as u64,
            "goal checked"
        );
        if !matches!(verdict, SolverVerdict::Unknown { .. }) {
            self.cache
                .lock()
                .expect("cache lock")
                .insert(key, verdict.clone());
        }
        Ok(verdict)
    }

    fn fallback(&self, goal: &Goal, reason: UnknownReason) -> SolverVerdict {
        match fuzz_counterexample(goal, &self.cfg) {
            Some(c) => SolverVerdict::Counterexample(c),
            None => SolverVerdict::Unknown { reason },
        }
    }
}

pub fn verdict_tag(v: &SolverVerdict) -> &'static str {
    match v {
        SolverVerdict::Proved => "proved",
        SolverVerdict::Counterexample(_) => "counterexample",
        SolverVerdict::Unknown { .. } => "unknown",
    }
}

impl Checker for Solver {
    fn check(&self, goal: &Goal) -> Result<SolverVerdict, SolverError> {
        self.gen_chk_vcs(goal)
    }
}

impl ModelFinder for Solver {
    /// Asks for a state where `phi` holds by refuting `assert(!phi)` with
    /// every non-target variable pinned to its value in `st`.
    fn find(&self, env: &TypeEnv, vars: &[String], phi: &Expr, st: &State) -> FinderResult {
        let pins: Vec<Expr> = st
            .iter()
            .filter(|(n, _)| !vars.contains(n) && env.contains_key(*n))
            .map(|(n, v)| Expr::binary(BinOp::Eq, Expr::Var(n.clone()), v.to_expr()))
            .collect();
        let mut stmts = Vec::new();
        if !pins.is_empty() {
            stmts.push(Stmt::Assume(Expr::conjunction(&pins)));
        }
        stmts.push(Stmt::Assert(Expr::negate(phi.clone())));
        let Ok(goal) = Goal::new(env.clone(), stmts) else {
            return FinderResult::Unknown;
        };
        match self.gen_chk_vcs(&goal) {
            Ok(SolverVerdict::Proved) => FinderResult::Unsat,
            Ok(SolverVerdict::Counterexample(c)) => {
                FinderResult::Model(c.model.project(vars.iter().map(String::as_str)))
            }
            _ => FinderResult::Unknown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interprets_replies() {
        assert!(matches!(
            interpret("unsat\n(:reason-unknown \"\")\n(error \"x\")"),
            Ok(ProverAnswer::Unsat)
        ));
        assert!(matches!(
            interpret("unknown\n(:reason-unknown \"timeout\")\n(error \"no model\")\n"),
            Ok(ProverAnswer::Unknown(UnknownReason::Timeout))
        ));
        assert!(matches!(
            interpret("unknown\n(:reason-unknown \"(incomplete (theory arithmetic))\")\n"),
            Ok(ProverAnswer::Unknown(UnknownReason::IncompleteTheory))
        ));
        match interpret("sat\n(:reason-unknown \"\")\n((define-fun |x#0| () Int 3))\n") {
            Ok(ProverAnswer::Sat(m)) => {
                assert_eq!(
                    m["x#0"],
                    Some(ModelValue::Num(num_rational::BigRational::from_integer(
                        3.into()
                    )))
                )
            }
            _ => panic!(),
        }
        assert!(interpret("").is_err());
        assert!(interpret("segfault").is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig {
            timeout: Duration::ZERO,
            ..SolverConfig::default()
        };
        assert!(Solver::new(cfg).is_err());
    }
}
