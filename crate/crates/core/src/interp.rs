//! Concrete execution: expression evaluation, program traces, replay of
//! straight-line goals, and `cassign` resolution.

use std::collections::{HashMap, VecDeque};

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{BinOp, Expr, Program, Stmt, Type, TypeEnv, UnOp};
use crate::value::{State, Value, ValueError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("modulus {modulus} is not positive in `{expr}`")]
    NonPositiveModulus { expr: String, modulus: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-typed operands in `{0}`")]
    IllTyped(String),
}

/// Evaluates `e` exactly in `st`. `&` and `|` short-circuit.
pub fn eval_expr(e: &Expr, st: &State) -> Result<Value, EvalError> {
    let ill = || EvalError::IllTyped(e.to_string());
    match e {
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Int(v) => Ok(Value::Int(v.clone())),
        Expr::Rat(v) => Ok(Value::Rat(v.clone())),
        Expr::Var(n) => st
            .get(n)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(n.clone())),
        Expr::Unary(UnOp::Not, inner) => {
            let b = eval_expr(inner, st)?.as_bool().ok_or_else(ill)?;
            Ok(Value::Bool(!b))
        }
        Expr::Unary(UnOp::Neg, inner) => match eval_expr(inner, st)? {
            Value::Int(v) => Ok(Value::Int(-v)),
            Value::Rat(v) => Ok(Value::Rat(-v)),
            Value::Bool(_) => Err(ill()),
        },
        Expr::Binary(BinOp::And, l, r) => {
            if !eval_expr(l, st)?.as_bool().ok_or_else(ill)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(eval_expr(r, st)?.as_bool().ok_or_else(ill)?))
        }
        Expr::Binary(BinOp::Or, l, r) => {
            if eval_expr(l, st)?.as_bool().ok_or_else(ill)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(eval_expr(r, st)?.as_bool().ok_or_else(ill)?))
        }
        Expr::Binary(op, l, r) => {
            let a = eval_expr(l, st)?;
            let b = eval_expr(r, st)?;
            apply_binary(*op, a, b, e)
        }
    }
}

fn apply_binary(op: BinOp, a: Value, b: Value, e: &Expr) -> Result<Value, EvalError> {
    let ill = || EvalError::IllTyped(e.to_string());
    match op {
        BinOp::Eq | BinOp::Ne => {
            let equal = match (&a, &b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                _ => a.numeric_cmp(&b).ok_or_else(ill)?.is_eq(),
            };
            Ok(Value::Bool(equal == (op == BinOp::Eq)))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = a.numeric_cmp(&b).ok_or_else(ill)?;
            Ok(Value::Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinOp::Mod => {
            let (Value::Int(x), Value::Int(m)) = (&a, &b) else {
                return Err(ill());
            };
            if !m.is_positive() {
                return Err(EvalError::NonPositiveModulus {
                    expr: e.to_string(),
                    modulus: m.to_string(),
                });
            }
            Ok(Value::Int(x.mod_floor(m)))
        }
        BinOp::Div => {
            let x = a.to_rational().ok_or_else(ill)?;
            let y = b.to_rational().ok_or_else(ill)?;
            if y.is_zero() {
                return Err(EvalError::DivisionByZero(e.to_string()));
            }
            Ok(Value::Rat(x / y))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => Ok(Value::Int(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                _ => x * y,
            })),
            (a, b) => {
                let x: BigRational = a.to_rational().ok_or_else(ill)?;
                let y: BigRational = b.to_rational().ok_or_else(ill)?;
                Ok(Value::Rat(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    _ => x * y,
                }))
            }
        },
        BinOp::And | BinOp::Or => unreachable!("handled with short-circuiting"),
    }
}

pub fn eval_bool(e: &Expr, st: &State) -> Result<bool, EvalError> {
    eval_expr(e, st)?
        .as_bool()
        .ok_or_else(|| EvalError::IllTyped(e.to_string()))
}

/// Result of asking an external decision procedure for a `cassign` witness.
#[derive(Debug, Clone, PartialEq)]
pub enum FinderResult {
    Model(State),
    Unsat,
    Unknown,
}

/// Finds values for `vars` making `phi` true, other variables fixed by `st`.
pub trait ModelFinder: Send + Sync {
    fn find(&self, env: &TypeEnv, vars: &[String], phi: &Expr, st: &State) -> FinderResult;
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CassignError {
    #[error("constraint is unsatisfiable")]
    Unsatisfiable,
    #[error("no satisfying assignment found (search exhausted)")]
    Exhausted,
    #[error("scripted assignment does not satisfy the constraint")]
    ScriptRejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub max_iterations: usize,
    pub seed: u64,
    /// Random attempts per `cassign` before consulting the model finder.
    pub cassign_samples: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_iterations: 10_000,
            seed: 0,
            cassign_samples: 1_000,
        }
    }
}

/// Where `cassign` statements take their values from.
#[derive(Debug, Clone, Default)]
pub enum Choices {
    /// Seeded random search, then the model finder.
    #[default]
    Search,
    /// Values per static `cassign` site (pre-order numbering).
    Sites(HashMap<usize, State>),
    /// Values in dynamic execution order; search once exhausted.
    Queue(VecDeque<State>),
}

/// Resolves `cassign(vars, phi)` in `st`: random sampling first, then the
/// model finder if one is available.
pub fn solve_cassign(
    vars: &[String],
    phi: &Expr,
    st: &State,
    env: &TypeEnv,
    rng: &mut ChaCha8Rng,
    samples: usize,
    finder: Option<&dyn ModelFinder>,
) -> Result<State, CassignError> {
    for _ in 0..samples {
        let mut cand = st.clone();
        for v in vars {
            cand.set(v.clone(), Value::sample(env[v.as_str()], rng));
        }
        if eval_bool(phi, &cand) == Ok(true) {
            return Ok(cand);
        }
    }
    let Some(finder) = finder else {
        return Err(CassignError::Exhausted);
    };
    match finder.find(env, vars, phi, st) {
        FinderResult::Model(m) => {
            let mut cand = st.clone();
            for v in vars {
                let val = m
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Value::default_for(env[v.as_str()]));
                cand.set(v.clone(), val);
            }
            if eval_bool(phi, &cand) == Ok(true) {
                Ok(cand)
            } else {
                Err(CassignError::Exhausted)
            }
        }
        FinderResult::Unsat => Err(CassignError::Unsatisfiable),
        FinderResult::Unknown => Err(CassignError::Exhausted),
    }
}

/// Why a run stopped at an obligation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Assertion(String),
    Eval(String),
    NegativeNatural(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed(State),
    Violated {
        violation: Violation,
        state: State,
    },
    /// An `assume` was false.
    Infeasible(State),
    Cassign(CassignError),
}

/// A straight-line run with its dynamic `cassign` log.
#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: Outcome,
    /// `(site, assigned variables)` in execution order.
    pub cassign_log: Vec<(usize, State)>,
    pub output: Vec<String>,
}

/// One loop-head arrival, or the final state (`iteration == None`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: Option<usize>,
    pub values: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub inputs: State,
    pub rows: Vec<TraceRow>,
    pub output: Vec<String>,
}

impl Trace {
    pub fn loop_rows(&self) -> impl Iterator<Item = &State> {
        self.rows
            .iter()
            .filter(|r| r.iteration.is_some())
            .map(|r| &r.values)
    }

    pub fn exit_state(&self) -> Option<&State> {
        self.rows
            .iter()
            .find(|r| r.iteration.is_none())
            .map(|r| &r.values)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("bad inputs: {0}")]
    Inputs(#[from] ValueError),
    #[error("inputs do not satisfy the precondition")]
    PreconditionViolated,
    #[error("assumption failed; run is infeasible at {0}")]
    Infeasible(State),
    #[error("assertion `{assertion}` failed at {state}")]
    AssertionFailed { assertion: String, state: State },
    #[error("{error} at {state}")]
    Eval { error: String, state: State },
    #[error("negative value assigned to Natural variable `{var}` at {state}")]
    NegativeNatural { var: String, state: State },
    #[error("cassign failed: {0}")]
    Cassign(CassignError),
    #[error("iteration cap of {cap} reached")]
    IterationCap { cap: usize, partial: Box<Trace> },
}

enum Stop {
    Violated(Violation, State),
    Infeasible(State),
    Cassign(CassignError),
}

struct Machine<'a> {
    env: &'a TypeEnv,
    cfg: &'a ExecConfig,
    finder: Option<&'a dyn ModelFinder>,
    rng: ChaCha8Rng,
    choices: Choices,
    site: usize,
    log: Vec<(usize, State)>,
    output: Vec<String>,
}

impl<'a> Machine<'a> {
    fn new(
        env: &'a TypeEnv,
        cfg: &'a ExecConfig,
        finder: Option<&'a dyn ModelFinder>,
        choices: Choices,
    ) -> Self {
        Machine {
            env,
            cfg,
            finder,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            choices,
            site: 0,
            log: Vec::new(),
            output: Vec::new(),
        }
    }

    fn eval(&self, e: &Expr, st: &State) -> Result<Value, Stop> {
        eval_expr(e, st).map_err(|err| Stop::Violated(Violation::Eval(err.to_string()), st.clone()))
    }

    fn truth(&self, e: &Expr, st: &State) -> Result<bool, Stop> {
        match self.eval(e, st)? {
            Value::Bool(b) => Ok(b),
            _ => Err(Stop::Violated(
                Violation::Eval(EvalError::IllTyped(e.to_string()).to_string()),
                st.clone(),
            )),
        }
    }

    fn block(&mut self, stmts: &[Stmt], st: &mut State) -> Result<(), Stop> {
        stmts.iter().try_for_each(|s| self.stmt(s, st))
    }

    fn stmt(&mut self, s: &Stmt, st: &mut State) -> Result<(), Stop> {
        match s {
            Stmt::VarDecl(..) => Ok(()),
            Stmt::Assign(n, e) => {
                let v = self.eval(e, st)?;
                let ty = self.env.get(n).copied().unwrap_or(Type::Rational);
                match v.conform(ty) {
                    Ok(v) => {
                        st.set(n.clone(), v);
                        Ok(())
                    }
                    Err(_) => Err(Stop::Violated(
                        Violation::NegativeNatural(n.clone()),
                        st.clone(),
                    )),
                }
            }
            Stmt::If(c, then, els) => {
                let start = self.site;
                let then_sites: usize = then.iter().map(Stmt::cassign_sites).sum();
                let else_sites: usize = els.iter().map(Stmt::cassign_sites).sum();
                if self.truth(c, st)? {
                    self.block(then, st)?;
                } else {
                    self.site = start + then_sites;
                    self.block(els, st)?;
                }
                self.site = start + then_sites + else_sites;
                Ok(())
            }
            Stmt::While { .. } => unreachable!("loops are driven by exec_trace"),
            Stmt::Print(args) => {
                let parts = args
                    .iter()
                    .map(|a| self.eval(a, st).map(|v| v.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                self.output.push(parts.join(" "));
                Ok(())
            }
            Stmt::Assume(e) => {
                if self.truth(e, st)? {
                    Ok(())
                } else {
                    Err(Stop::Infeasible(st.clone()))
                }
            }
            Stmt::Assert(e) | Stmt::Claim(e) => {
                if self.truth(e, st)? {
                    Ok(())
                } else {
                    Err(Stop::Violated(
                        Violation::Assertion(e.to_string()),
                        st.clone(),
                    ))
                }
            }
            Stmt::CAssign(vars, phi) => {
                let site = self.site;
                self.site += 1;
                let scripted = match &mut self.choices {
                    Choices::Search => None,
                    Choices::Sites(m) => m.get(&site).cloned(),
                    Choices::Queue(q) => q.pop_front(),
                };
                let next = match scripted {
                    Some(values) => {
                        let mut cand = st.clone();
                        for v in vars {
                            let ty = self.env[v.as_str()];
                            let val = values
                                .get(v)
                                .cloned()
                                .unwrap_or_else(|| Value::default_for(ty));
                            let val = val
                                .conform(ty)
                                .map_err(|_| Stop::Cassign(CassignError::ScriptRejected))?;
                            cand.set(v.clone(), val);
                        }
                        if !self.truth(phi, &cand)? {
                            return Err(Stop::Cassign(CassignError::ScriptRejected));
                        }
                        cand
                    }
                    None => solve_cassign(
                        vars,
                        phi,
                        st,
                        self.env,
                        &mut self.rng,
                        self.cfg.cassign_samples,
                        self.finder,
                    )
                    .map_err(Stop::Cassign)?,
                };
                self.log
                    .push((site, next.project(vars.iter().map(String::as_str))));
                *st = next;
                Ok(())
            }
        }
    }
}

/// Runs loop-free statements from `initial`.
pub fn run_statements(
    env: &TypeEnv,
    stmts: &[Stmt],
    initial: &State,
    choices: Choices,
    cfg: &ExecConfig,
    finder: Option<&dyn ModelFinder>,
) -> Run {
    let mut m = Machine::new(env, cfg, finder, choices);
    let mut st = initial.clone();
    let outcome = match m.block(stmts, &mut st) {
        Ok(()) => Outcome::Completed(st),
        Err(Stop::Violated(violation, state)) => Outcome::Violated { violation, state },
        Err(Stop::Infeasible(s)) => Outcome::Infeasible(s),
        Err(Stop::Cassign(e)) => Outcome::Cassign(e),
    };
    Run {
        outcome,
        cassign_log: m.log,
        output: m.output,
    }
}

/// Executes the loop body once from `st`.
pub fn exec_body(p: &Program, st: &State, cfg: &ExecConfig) -> Run {
    run_statements(&p.env, &p.body, st, Choices::Search, cfg, None)
}

/// Builds the initial state from parameter inputs; every other variable
/// starts at its type default.
pub fn initial_state(p: &Program, inputs: &State) -> Result<State, ValueError> {
    let params: TypeEnv = p.params.iter().cloned().collect();
    let inputs = inputs.conform(&params)?;
    let mut st = State::defaults(&p.env);
    for (n, v) in inputs.iter() {
        st.set(n.clone(), v.clone());
    }
    Ok(st)
}

/// Executes `p` on `inputs`, recording the state at every arrival at the
/// loop head and the final state.
pub fn exec_trace(p: &Program, inputs: &State, cfg: &ExecConfig) -> Result<Trace, ExecError> {
    exec_trace_with(p, inputs, cfg, Choices::Search, None)
}

pub fn exec_trace_with(
    p: &Program,
    inputs: &State,
    cfg: &ExecConfig,
    choices: Choices,
    finder: Option<&dyn ModelFinder>,
) -> Result<Trace, ExecError> {
    match exec_trace_partial(p, inputs, cfg, choices, finder)? {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`exec_trace_with`], but keeps the rows recorded before a run-time
/// failure. The outer error covers bad inputs and a violated precondition.
pub fn exec_trace_partial(
    p: &Program,
    inputs: &State,
    cfg: &ExecConfig,
    choices: Choices,
    finder: Option<&dyn ModelFinder>,
) -> Result<(Trace, Option<ExecError>), ExecError> {
    let mut st = initial_state(p, inputs)?;
    let input_state = st.project(p.param_names());
    if let Some(pre) = &p.pre {
        let holds = eval_bool(pre, &st).map_err(|e| ExecError::Eval {
            error: e.to_string(),
            state: st.clone(),
        })?;
        if !holds {
            return Err(ExecError::PreconditionViolated);
        }
    }
    let mut m = Machine::new(&p.env, cfg, finder, choices);
    let mut trace = Trace {
        inputs: input_state,
        rows: Vec::new(),
        output: Vec::new(),
    };

    let prelude_sites: usize = p.prelude.iter().map(Stmt::cassign_sites).sum();
    let body_sites: usize = p.body.iter().map(Stmt::cassign_sites).sum();

    let result = (|| -> Result<(), Stop> {
        m.block(&p.prelude, &mut st)?;
        let mut iteration = 0;
        loop {
            trace.rows.push(TraceRow {
                iteration: Some(iteration),
                values: st.clone(),
            });
            if !m.truth(&p.test, &st)? {
                break;
            }
            if iteration == cfg.max_iterations {
                return Ok(());
            }
            m.site = prelude_sites;
            m.block(&p.body, &mut st)?;
            iteration += 1;
        }
        m.site = prelude_sites + body_sites;
        m.block(&p.epilogue, &mut st)?;
        trace.rows.push(TraceRow {
            iteration: None,
            values: st.clone(),
        });
        Ok(())
    })();
    trace.output = std::mem::take(&mut m.output);

    let failure = match result {
        Ok(()) if trace.exit_state().is_some() => None,
        Ok(()) => Some(ExecError::IterationCap {
            cap: cfg.max_iterations,
            partial: Box::new(trace.clone()),
        }),
        Err(Stop::Infeasible(s)) => Some(ExecError::Infeasible(s)),
        Err(Stop::Cassign(e)) => Some(ExecError::Cassign(e)),
        Err(Stop::Violated(v, state)) => Some(match v {
            Violation::Assertion(assertion) => ExecError::AssertionFailed { assertion, state },
            Violation::Eval(error) => ExecError::Eval { error, state },
            Violation::NegativeNatural(var) => ExecError::NegativeNatural { var, state },
        }),
    };
    Ok((trace, failure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{load_program, parse_any_expr, parse_expr};
    use num_bigint::BigInt;

    pub(crate) const ISQRT: &str = "
fn isqrt(n: Natural): Integer {
    post(cnt^2 <= n & n < (cnt+1)^2);
    var cnt: Integer;
    var odd: Integer;
    var sqr: Integer;
    cnt := 0;
    odd := 1;
    sqr := 1;
    while (sqr <= n) {
        cnt := cnt + 1;
        odd := odd + 2;
        sqr := sqr + odd;
    }
}";

    fn ints(pairs: &[(&str, i64)]) -> State {
        pairs
            .iter()
            .map(|(n, v)| (n.to_string(), Value::Int(BigInt::from(*v))))
            .collect()
    }

    fn row_triples(t: &Trace) -> Vec<(i64, i64, i64)> {
        t.loop_rows()
            .map(|s| {
                let g = |n: &str| i64::try_from(s.get(n).unwrap().as_int().unwrap()).unwrap();
                (g("cnt"), g("odd"), g("sqr"))
            })
            .collect()
    }

    #[test]
    fn eval_examples() {
        let st = ints(&[("odd", 13)]);
        assert_eq!(
            eval_expr(&parse_any_expr("odd % 2 = 1").unwrap(), &st),
            Ok(Value::Bool(true))
        );
        let st = ints(&[("x", 0), ("y", -5)]);
        assert_eq!(
            eval_expr(&parse_any_expr("y - x <= y").unwrap(), &st),
            Ok(Value::Bool(true))
        );
        assert!(matches!(
            eval_expr(&parse_any_expr("1/0 = 1").unwrap(), &st),
            Err(EvalError::DivisionByZero(_))
        ));
        assert!(matches!(
            eval_expr(&parse_any_expr("y % x = 1").unwrap(), &st),
            Err(EvalError::NonPositiveModulus { .. })
        ));
        assert_eq!(
            eval_expr(&parse_any_expr("y % 3").unwrap(), &st),
            Ok(Value::Int(1.into()))
        );
        assert_eq!(
            eval_expr(&parse_any_expr("1/3 + 1/6 = 0.5").unwrap(), &st),
            Ok(Value::Bool(true))
        );
        // short-circuit guards the division
        assert_eq!(
            eval_expr(&parse_any_expr("x != 0 & 1/x > 0").unwrap(), &st),
            Ok(Value::Bool(false))
        );
    }

    #[test]
    fn int_sqrt_traces() {
        let p = load_program(ISQRT).unwrap();
        let cfg = ExecConfig::default();
        let t = exec_trace(&p, &ints(&[("n", 46)]), &cfg).unwrap();
        assert_eq!(
            row_triples(&t),
            vec![
                (0, 1, 1),
                (1, 3, 4),
                (2, 5, 9),
                (3, 7, 16),
                (4, 9, 25),
                (5, 11, 36),
                (6, 13, 49)
            ]
        );
        let exit = t.exit_state().unwrap();
        assert_eq!(eval_expr(&p.post, exit), Ok(Value::Bool(true)));

        let t = exec_trace(&p, &ints(&[("n", 3)]), &cfg).unwrap();
        assert_eq!(row_triples(&t), vec![(0, 1, 1), (1, 3, 4)]);
        assert_eq!(
            t.exit_state().unwrap().get("cnt"),
            Some(&Value::Int(1.into()))
        );

        let t = exec_trace(&p, &ints(&[("n", 0)]), &cfg).unwrap();
        assert_eq!(row_triples(&t), vec![(0, 1, 1)]);
        assert_eq!(
            eval_expr(&p.post, t.exit_state().unwrap()),
            Ok(Value::Bool(true))
        );
    }

    #[test]
    fn rows_are_related_by_the_body() {
        let p = load_program(ISQRT).unwrap();
        let cfg = ExecConfig::default();
        let t = exec_trace(&p, &ints(&[("n", 200)]), &cfg).unwrap();
        let rows: Vec<&State> = t.loop_rows().collect();
        for w in rows.windows(2) {
            assert_eq!(eval_expr(&p.test, w[0]), Ok(Value::Bool(true)));
            match exec_body(&p, w[0], &cfg).outcome {
                Outcome::Completed(next) => assert_eq!(&next, w[1]),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(
            eval_expr(&p.test, rows.last().unwrap()),
            Ok(Value::Bool(false))
        );
    }

    #[test]
    fn input_validation() {
        let p = load_program(ISQRT).unwrap();
        let cfg = ExecConfig::default();
        assert!(matches!(
            exec_trace(&p, &ints(&[("n", -1)]), &cfg),
            Err(ExecError::Inputs(ValueError::Negative { .. }))
        ));
        assert!(matches!(
            exec_trace(&p, &State::new(), &cfg),
            Err(ExecError::Inputs(ValueError::Missing(_)))
        ));
        assert!(matches!(
            exec_trace(&p, &ints(&[("n", 1), ("m", 2)]), &cfg),
            Err(ExecError::Inputs(ValueError::Unknown(_)))
        ));
    }

    #[test]
    fn run_time_errors() {
        let cfg = ExecConfig {
            max_iterations: 50,
            ..ExecConfig::default()
        };
        let spin =
            load_program("fn f(x: Integer): Integer { while (true) { x := x + 1; } }").unwrap();
        match exec_trace(&spin, &ints(&[("x", 0)]), &cfg) {
            Err(ExecError::IterationCap { cap, partial }) => {
                assert_eq!(cap, 50);
                assert_eq!(partial.loop_rows().count(), 51);
            }
            other => panic!("{other:?}"),
        }
        let pre =
            load_program("fn f(x: Integer): Integer { pre(x > 0); while (x > 0) { x := x - 1; } }")
                .unwrap();
        assert_eq!(
            exec_trace(&pre, &ints(&[("x", 0)]), &cfg),
            Err(ExecError::PreconditionViolated)
        );
        let assume = load_program(
            "fn f(x: Integer): Integer { assume(x > 5); while (x > 0) { x := x - 1; } }",
        )
        .unwrap();
        assert!(matches!(
            exec_trace(&assume, &ints(&[("x", 1)]), &cfg),
            Err(ExecError::Infeasible(_))
        ));
        let claim = load_program(
            "fn f(x: Integer): Integer { while (x > 0) { x := x - 1; } claim(x = 1); }",
        )
        .unwrap();
        assert!(matches!(
            exec_trace(&claim, &ints(&[("x", 3)]), &cfg),
            Err(ExecError::AssertionFailed { .. })
        ));
        let nat =
            load_program("fn f(x: Natural): Integer { while (x < 3) { x := x - 1; } }").unwrap();
        assert!(matches!(
            exec_trace(&nat, &ints(&[("x", 0)]), &cfg),
            Err(ExecError::NegativeNatural { .. })
        ));
    }

    #[test]
    fn print_output_is_recorded() {
        let p = load_program(
            "fn f(x: Integer): Integer { while (x > 0) { print(x, x / 2); x := x - 1; } }",
        )
        .unwrap();
        let t = exec_trace(&p, &ints(&[("x", 2)]), &ExecConfig::default()).unwrap();
        assert_eq!(t.output, vec!["2 1", "1 1/2"]);
    }

    fn env_of(pairs: &[(&str, Type)]) -> TypeEnv {
        pairs.iter().map(|(n, t)| (n.to_string(), *t)).collect()
    }

    #[test]
    fn cassign_examples() {
        let env = env_of(&[("x", Type::Integer), ("y", Type::Integer)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = State::defaults(&env);

        let phi = parse_expr("x > 3 & x < 5", &env).unwrap();
        let out = solve_cassign(&["x".into()], &phi, &st, &env, &mut rng, 5_000, None).unwrap();
        assert_eq!(out.get("x"), Some(&Value::Int(4.into())));

        let f = parse_expr("false", &env).unwrap();
        assert_eq!(
            solve_cassign(&["x".into()], &f, &st, &env, &mut rng, 100, None),
            Err(CassignError::Exhausted)
        );

        let phi = parse_expr("x + y = 10 & x >= y & y >= 0", &env).unwrap();
        let out = solve_cassign(
            &["x".into(), "y".into()],
            &phi,
            &st,
            &env,
            &mut rng,
            100_000,
            None,
        )
        .unwrap();
        assert_eq!(eval_expr(&phi, &out), Ok(Value::Bool(true)));
    }

    struct Oracle(FinderResult);

    impl ModelFinder for Oracle {
        fn find(&self, _: &TypeEnv, _: &[String], _: &Expr, _: &State) -> FinderResult {
            self.0.clone()
        }
    }

    #[test]
    fn cassign_defers_to_finder() {
        let env = env_of(&[("x", Type::Integer)]);
        let st = State::defaults(&env);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = parse_expr("x = 123456", &env).unwrap();
        let model: State = [("x".to_string(), Value::Int(123456.into()))]
            .into_iter()
            .collect();
        let finder = Oracle(FinderResult::Model(model));
        let out =
            solve_cassign(&["x".into()], &phi, &st, &env, &mut rng, 10, Some(&finder)).unwrap();
        assert_eq!(out.get("x"), Some(&Value::Int(123456.into())));
        assert_eq!(
            solve_cassign(
                &["x".into()],
                &phi,
                &st,
                &env,
                &mut rng,
                10,
                Some(&Oracle(FinderResult::Unsat))
            ),
            Err(CassignError::Unsatisfiable)
        );
    }

    #[test]
    fn cassign_is_deterministic_under_seed() {
        let p = load_program(
            "fn f(n: Natural): Integer { var x: Integer; while (n > 0) { cassign([x], x > 0 & x < 50); n := n - 1; } }",
        )
        .unwrap();
        let cfg = ExecConfig::default();
        let a = exec_trace(&p, &ints(&[("n", 5)]), &cfg).unwrap();
        let b = exec_trace(&p, &ints(&[("n", 5)]), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scripted_sites_follow_preorder() {
        let env = env_of(&[
            ("b", Type::Boolean),
            ("x", Type::Integer),
            ("y", Type::Integer),
        ]);
        let stmts = vec![
            Stmt::If(
                Expr::var("b"),
                vec![Stmt::CAssign(vec!["x".into()], Expr::Bool(true))],
                vec![Stmt::CAssign(vec!["x".into()], Expr::Bool(true))],
            ),
            Stmt::CAssign(vec!["y".into()], Expr::Bool(true)),
        ];
        let site = |v: i64, name: &str| -> State {
            [(name.to_string(), Value::Int(v.into()))]
                .into_iter()
                .collect()
        };
        let sites: HashMap<usize, State> =
            [(0, site(10, "x")), (1, site(20, "x")), (2, site(30, "y"))].into();
        let mut init = State::defaults(&env);
        init.set("b", Value::Bool(false));
        let run = run_statements(
            &env,
            &stmts,
            &init,
            Choices::Sites(sites),
            &ExecConfig::default(),
            None,
        );
        let Outcome::Completed(end) = run.outcome else {
            panic!()
        };
        assert_eq!(end.get("x"), Some(&Value::Int(20.into())));
        assert_eq!(end.get("y"), Some(&Value::Int(30.into())));
        assert_eq!(
            run.cassign_log.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            vec![1, 2]
        );
    }
}
