//! The invariant analysis engine: characterizes proposed loop invariants,
//! maintains the inductive and potential sets, promotes potential
//! invariants and produces counterexample feedback.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{
    eval_bool, exec_trace_partial, run_statements, Choices, ExecConfig, Outcome, Trace, Violation,
};
use crate::lang::{BinOp, Expr, Program};
use crate::solver::{goal_key, Checker, Counterexample, SolverVerdict, UnknownReason};
use crate::value::State;
use crate::vcgen::{
    build_consecution, build_exit_check, build_implication, build_loop_unrolled, build_upto_loop,
    Goal, DEFAULT_UNROLL, STEP_PREFIX,
};

/// The engine's knowledge about one level: inductive invariants (`I`) and
/// potential invariants (`P`), both in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InvariantState {
    pub inductive: Vec<Expr>,
    pub potential: Vec<Expr>,
}

impl InvariantState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, e: &Expr) -> bool {
        self.inductive.contains(e) || self.potential.contains(e)
    }

    /// `I` followed by `P`.
    pub fn all(&self) -> Vec<Expr> {
        self.inductive
            .iter()
            .chain(&self.potential)
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Characterization {
    TypeTautology,
    Displaced,
    DisplacedPot,
    NonInv,
    Inductive,
    Potential,
    Unknown,
}

impl Characterization {
    /// Whether this outcome changed the invariant state.
    pub fn is_accepted(self) -> bool {
        matches!(
            self,
            Characterization::Inductive | Characterization::Potential
        )
    }
}

/// A loop-head state satisfying the known invariants and the test, and the
/// state one body execution later.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePair {
    pub before: State,
    pub after: State,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Feedback {
    pub kind: Characterization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_out_state: Option<State>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_pair: Option<StatePair>,
    pub solved: bool,
    pub removed_invariants: Vec<Expr>,
    pub promoted_invariants: Vec<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Feedback {
    fn of(kind: Characterization) -> Feedback {
        Feedback {
            kind,
            rule_out_state: None,
            trace: None,
            state_pair: None,
            solved: false,
            removed_invariants: Vec::new(),
            promoted_invariants: Vec::new(),
            diagnostic: None,
        }
    }
}

/// What a solver query was asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Tautology,
    Displaced,
    DisplacedPot,
    Initiation,
    Unrolled,
    Consecution,
    RemDisplaced,
    Solved,
    Feedback,
    WhyNot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EngineEvent {
    Query {
        purpose: Purpose,
        key: String,
        verdict: SolverVerdict,
    },
    Characterized {
        expr: String,
        kind: Characterization,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Iterations explored by the bounded invariance check.
    pub unroll: usize,
    /// Largest potential-invariant subset tried by the displaced-pot check.
    pub max_displaced_pot_subset: usize,
    /// Settings for trace generation and counterexample replay.
    pub exec: ExecConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            unroll: DEFAULT_UNROLL,
            max_displaced_pot_subset: 2,
            exec: ExecConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProposeError {
    #[error("`{0}` has already been proposed")]
    Duplicate(String),
    #[error("`{0}` mentions no program variable")]
    Trivial(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WhyNotError {
    #[error("`{0}` is not a potential invariant")]
    NotPotential(String),
    #[error("`{0}` is preserved by the loop body; it can be promoted")]
    Promotable(String),
    #[error("could not decide whether `{expr}` is preserved: {reason}")]
    Unknown { expr: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PromoteOutcome {
    pub promoted: Vec<Expr>,
    pub removed: Vec<Expr>,
}

/// Result of the exit check over the inductive invariants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedCheck {
    pub solved: bool,
    /// Loop-exit state satisfying `I` and the negated test from which the
    /// guarantee fails.
    pub counterexample: Option<State>,
}

/// One engine instance works on one program; the invariant state is passed
/// in so callers decide where it lives. Every solver query and
/// characterization is appended to the event log.
pub struct Engine<'a> {
    program: &'a Program,
    checker: &'a dyn Checker,
    cfg: EngineConfig,
    events: Vec<EngineEvent>,
    diagnostics: Vec<String>,
}

impl<'a> Engine<'a> {
    pub fn new(program: &'a Program, checker: &'a dyn Checker, cfg: EngineConfig) -> Self {
        Engine {
            program,
            checker,
            cfg,
            events: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn program(&self) -> &Program {
        self.program
    }

    pub fn events(&self) -> &[EngineEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<EngineEvent> {
        std::mem::take(&mut self.events)
    }

    fn check(&mut self, purpose: Purpose, goal: &Goal) -> SolverVerdict {
        let verdict = match self.checker.check(goal) {
            Ok(v) => v,
            Err(e) => {
                tracing::error!(error = %e, "solver unavailable");
                self.diagnostics.push(e.to_string());
                SolverVerdict::Unknown {
                    reason: UnknownReason::Transport,
                }
            }
        };
        self.events.push(EngineEvent::Query {
            purpose,
            key: goal_key(goal),
            verdict: verdict.clone(),
        });
        verdict
    }

    fn take_diagnostic(&mut self) -> Option<String> {
        if self.diagnostics.is_empty() {
            None
        } else {
            Some(std::mem::take(&mut self.diagnostics).join("; "))
        }
    }

    /// Characterizes `e` against `s`, updating `s` only when `e` is
    /// inductive or potential.
    pub fn propose_loop_inv(
        &mut self,
        s: &mut InvariantState,
        e: &Expr,
    ) -> Result<Feedback, ProposeError> {
        if s.contains(e) {
            return Err(ProposeError::Duplicate(e.to_string()));
        }
        if e.variables().is_empty() {
            return Err(ProposeError::Trivial(e.to_string()));
        }
        let mut fb = self.characterize(s, e);
        if let Some(d) = self.take_diagnostic() {
            fb.diagnostic = Some(match fb.diagnostic {
                Some(own) => format!("{own}: {d}"),
                None => d,
            });
        }
        tracing::info!(expr = %e, kind = ?fb.kind, "proposal characterized");
        self.events.push(EngineEvent::Characterized {
            expr: e.to_string(),
            kind: fb.kind,
        });
        Ok(fb)
    }

    fn characterize(&mut self, s: &mut InvariantState, e: &Expr) -> Feedback {
        let p = self.program;
        use Characterization::*;

        let taut = self.check(Purpose::Tautology, &build_implication(p, &[], e));
        if taut.is_proved() {
            return Feedback::of(TypeTautology);
        }
        let displaced = self.check(Purpose::Displaced, &build_implication(p, &s.inductive, e));
        if displaced.is_proved() {
            return Feedback::of(Displaced);
        }
        if self.displaced_pot_check(s, e, self.cfg.max_displaced_pot_subset) {
            return Feedback::of(DisplacedPot);
        }

        match self.check(Purpose::Initiation, &build_upto_loop(p, e)) {
            SolverVerdict::Counterexample(c) => return self.non_inv(e, &c),
            SolverVerdict::Unknown { reason } => {
                let mut fb = Feedback::of(Unknown);
                fb.diagnostic = Some(format!("initiation check undecided ({reason:?})"));
                return fb;
            }
            SolverVerdict::Proved => {}
        }
        match self.check(
            Purpose::Unrolled,
            &build_loop_unrolled(p, e, self.cfg.unroll),
        ) {
            SolverVerdict::Counterexample(c) => return self.non_inv(e, &c),
            SolverVerdict::Unknown { reason } => {
                tracing::debug!(expr = %e, ?reason, "bounded invariance check undecided");
            }
            SolverVerdict::Proved => {}
        }

        s.potential.push(e.clone());
        let outcome = self.promote(s);
        let mut fb = Feedback::of(if outcome.promoted.contains(e) {
            Inductive
        } else {
            Potential
        });
        fb.promoted_invariants = outcome.promoted.into_iter().filter(|x| x != e).collect();
        fb.removed_invariants = outcome.removed;
        fb
    }

    /// Turns an initiation or bounded-loop counterexample into a trace from
    /// the model's inputs, checking that some loop-head row falsifies `e`.
    fn non_inv(&mut self, e: &Expr, c: &Counterexample) -> Feedback {
        let p = self.program;
        let inputs = c.model.project(p.param_names());
        let queue: VecDeque<State> = c
            .cassign_log
            .iter()
            .filter(|(_, st)| !st.iter().all(|(n, _)| n.starts_with(STEP_PREFIX)))
            .map(|(_, st)| st.clone())
            .collect();
        match exec_trace_partial(p, &inputs, &self.cfg.exec, Choices::Queue(queue), None) {
            Ok((trace, _)) if trace.loop_rows().any(|r| eval_bool(e, r) != Ok(true)) => {
                let mut fb = Feedback::of(Characterization::NonInv);
                fb.trace = Some(trace);
                fb
            }
            _ => {
                tracing::warn!(expr = %e, model = %c.model, "counterexample did not reproduce as a trace");
                let mut fb = Feedback::of(Characterization::Unknown);
                fb.diagnostic =
                    Some("counterexample found but it did not reproduce as a program trace".into());
                fb
            }
        }
    }

    /// Whether `e` is equivalent, assuming `I`, to the conjunction of some
    /// non-empty subset of `P` with at most `max_subset` members.
    pub fn displaced_pot_check(&mut self, s: &InvariantState, e: &Expr, max_subset: usize) -> bool {
        let n = s.potential.len();
        for size in 1..=max_subset.min(n) {
            for subset in combinations(n, size) {
                let parts: Vec<&Expr> = subset.iter().map(|&i| &s.potential[i]).collect();
                let equiv = Expr::binary(BinOp::Eq, Expr::conjunction(parts), e.clone());
                let goal = build_implication(self.program, &s.inductive, &equiv);
                if self.check(Purpose::DisplacedPot, &goal).is_proved() {
                    return true;
                }
            }
        }
        false
    }

    /// Greatest-fixpoint promotion: the largest `X ⊆ P` such that every
    /// member is preserved by the body assuming `I`, `X` and the test.
    /// Undecided checks count as failures.
    pub fn promote(&mut self, s: &mut InvariantState) -> PromoteOutcome {
        let mut x = s.potential.clone();
        loop {
            let mut done = true;
            let mut i = 0;
            while i < x.len() {
                let hyps: Vec<Expr> = s.inductive.iter().chain(&x).cloned().collect();
                let goal = build_consecution(self.program, &hyps, &x[i]);
                if self.check(Purpose::Consecution, &goal).is_proved() {
                    i += 1;
                } else {
                    x.remove(i);
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if x.is_empty() {
            return PromoteOutcome::default();
        }
        s.inductive.extend(x.iter().cloned());
        let removed = self.rem_displaced(s);
        s.potential.retain(|q| !x.contains(q));
        PromoteOutcome {
            promoted: x,
            removed,
        }
    }

    /// Oldest-first greedy removal of inductive invariants implied by the
    /// others; repeats until a full pass removes nothing.
    pub fn rem_displaced(&mut self, s: &mut InvariantState) -> Vec<Expr> {
        let mut removed = Vec::new();
        loop {
            let mut changed = false;
            let mut i = 0;
            while i < s.inductive.len() {
                let rest: Vec<Expr> = s
                    .inductive
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, e)| e.clone())
                    .collect();
                let goal = build_implication(self.program, &rest, &s.inductive[i]);
                if self.check(Purpose::RemDisplaced, &goal).is_proved() {
                    removed.push(s.inductive.remove(i));
                    changed = true;
                } else {
                    i += 1;
                }
            }
            if !changed {
                return removed;
            }
        }
    }

    /// The exit check over `I`.
    pub fn check_solved(&mut self, s: &InvariantState) -> SolvedCheck {
        let goal = build_exit_check(self.program, &s.inductive);
        match self.check(Purpose::Solved, &goal) {
            SolverVerdict::Proved => SolvedCheck {
                solved: true,
                counterexample: None,
            },
            SolverVerdict::Counterexample(c) => SolvedCheck {
                solved: false,
                counterexample: self.exit_state(&c, &s.inductive),
            },
            SolverVerdict::Unknown { .. } => SolvedCheck {
                solved: false,
                counterexample: None,
            },
        }
    }

    /// Keeps an exit-check model only if it satisfies `assumed` and the
    /// negated test when evaluated concretely.
    fn exit_state(&mut self, c: &Counterexample, assumed: &[Expr]) -> Option<State> {
        let st = &c.model;
        let ok = assumed.iter().all(|a| eval_bool(a, st) == Ok(true))
            && eval_bool(&self.program.test, st) == Ok(false);
        if ok {
            Some(st.clone())
        } else {
            tracing::warn!(state = %st, "exit counterexample failed re-evaluation");
            None
        }
    }

    /// A state to rule out: satisfies `I ∪ P` and the negated test but the
    /// code after the loop fails the guarantee. Falls back to the solved
    /// check's counterexample.
    pub fn gen_feedback(&mut self, s: &InvariantState, solved: &SolvedCheck) -> Feedback {
        let mut fb = Feedback::of(Characterization::Unknown);
        let all = s.all();
        let goal = build_exit_check(self.program, &all);
        let state = match self.check(Purpose::Feedback, &goal) {
            SolverVerdict::Counterexample(c) => self.exit_state(&c, &all),
            _ => None,
        };
        fb.rule_out_state = state.or_else(|| solved.counterexample.clone());
        if fb.rule_out_state.is_none() {
            fb.diagnostic = Some(
                self.take_diagnostic()
                    .unwrap_or_else(|| "sorry, no useful feedback state could be found".into()),
            );
        }
        fb
    }

    /// Proposal followed, when the state changed, by the solved check and
    /// rule-out feedback.
    pub fn propose_and_report(
        &mut self,
        s: &mut InvariantState,
        e: &Expr,
    ) -> Result<Feedback, ProposeError> {
        let mut fb = self.propose_loop_inv(s, e)?;
        if fb.kind.is_accepted() {
            let solved = self.check_solved(s);
            fb.solved = solved.solved;
            if !solved.solved {
                let extra = self.gen_feedback(s, &solved);
                fb.rule_out_state = extra.rule_out_state;
                if fb.diagnostic.is_none() {
                    fb.diagnostic = extra.diagnostic;
                }
            }
        }
        Ok(fb)
    }

    /// Proposes the loop annotation `while [e]`, if present, as the first
    /// candidate of a fresh level.
    pub fn seed_annotation(&mut self, s: &mut InvariantState) -> Option<Feedback> {
        let a = self.program.annotation.clone()?;
        self.propose_loop_inv(s, &a).ok()
    }

    /// A loop-head state satisfying `I ∪ P` and the test after which one
    /// execution of the body breaks `q`.
    pub fn why_not_inductive(
        &mut self,
        s: &InvariantState,
        q: &Expr,
    ) -> Result<StatePair, WhyNotError> {
        if !s.potential.contains(q) {
            return Err(WhyNotError::NotPotential(q.to_string()));
        }
        let p = self.program;
        let hyps = s.all();
        let c = match self.check(Purpose::WhyNot, &build_consecution(p, &hyps, q)) {
            SolverVerdict::Proved => return Err(WhyNotError::Promotable(q.to_string())),
            SolverVerdict::Unknown { reason } => {
                return Err(WhyNotError::Unknown {
                    expr: q.to_string(),
                    reason: self
                        .take_diagnostic()
                        .unwrap_or_else(|| format!("{reason:?}")),
                })
            }
            SolverVerdict::Counterexample(c) => c,
        };
        let unknown = |why: &str| WhyNotError::Unknown {
            expr: q.to_string(),
            reason: why.to_string(),
        };
        let before = c.model.project(p.env.keys().map(String::as_str));
        let holds = hyps
            .iter()
            .chain(std::iter::once(&p.test))
            .all(|h| eval_bool(h, &before) == Ok(true));
        if !holds {
            return Err(unknown(
                "counterexample does not satisfy the known invariants",
            ));
        }
        let sites: HashMap<usize, State> = c.cassign_log.iter().cloned().collect();
        let run = run_statements(
            &p.env,
            &p.body,
            &before,
            Choices::Sites(sites),
            &self.cfg.exec,
            None,
        );
        let (after, violation) = match run.outcome {
            Outcome::Completed(after) => {
                if eval_bool(q, &after) == Ok(true) {
                    return Err(unknown("counterexample did not replay"));
                }
                (after, Violation::Assertion(q.to_string()))
            }
            Outcome::Violated { violation, state } => (state, violation),
            _ => return Err(unknown("counterexample did not replay")),
        };
        Ok(StatePair {
            before,
            after,
            violation,
        })
    }
}

/// All `k`-element index subsets of `0..n`, in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}
