//! Checkable goals and their translation to quantifier-free formulas.
//!
//! A [`Goal`] is a loop-free statement sequence ending in its one distinguished
//! `assert`. [`symexec_to_vc`] runs it forward symbolically, one SSA version
//! per assignment, and produces a [`Formula`] that is satisfiable exactly when
//! some type-conforming start state violates an obligation: the final
//! assertion, an intermediate `assert`/`claim`, a division by zero, a
//! non-positive modulus, or a negative value stored into a Natural.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::lang::{BinOp, Expr, Program, Stmt, Type, TypeEnv, UnOp};
use crate::smt::{symbol, Sort, Term};

/// Default number of loop unrollings for the bounded invariance check.
pub const DEFAULT_UNROLL: usize = 5;

/// Prefix of the fresh Boolean gating each unrolled iteration. Not a valid
/// identifier in the surface syntax, so it cannot clash with user names.
pub const STEP_PREFIX: &str = "step#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoalError {
    #[error("goal must end with an assert statement")]
    NoFinalAssert,
    #[error("goal contains a while loop")]
    ContainsLoop,
    #[error("goal mentions undeclared variable `{0}`")]
    Undeclared(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    env: TypeEnv,
    stmts: Vec<Stmt>,
}

impl Goal {
    pub fn new(env: TypeEnv, stmts: Vec<Stmt>) -> Result<Goal, GoalError> {
        if !matches!(stmts.last(), Some(Stmt::Assert(_))) {
            return Err(GoalError::NoFinalAssert);
        }
        if stmts.iter().any(Stmt::contains_loop) {
            return Err(GoalError::ContainsLoop);
        }
        let mut names = Vec::new();
        for s in &stmts {
            collect_names(s, &mut names);
        }
        if let Some(v) = names.into_iter().find(|v| !env.contains_key(v)) {
            return Err(GoalError::Undeclared(v));
        }
        Ok(Goal { env, stmts })
    }

    pub fn env(&self) -> &TypeEnv {
        &self.env
    }

    pub fn statements(&self) -> &[Stmt] {
        &self.stmts
    }

    pub fn assertion(&self) -> &Expr {
        match self.stmts.last() {
            Some(Stmt::Assert(e)) => e,
            _ => unreachable!("checked in Goal::new"),
        }
    }

    /// Whether the goal embeds unrolled loop iterations.
    pub fn has_steps(&self) -> bool {
        self.env.keys().any(|k| k.starts_with(STEP_PREFIX))
    }
}

impl std::fmt::Display for Goal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.stmts {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn collect_names(s: &Stmt, out: &mut Vec<String>) {
    let mut expr = |e: &Expr| out.extend(e.variables());
    match s {
        Stmt::VarDecl(..) => {}
        Stmt::Assign(n, e) => {
            expr(e);
            out.push(n.clone());
        }
        Stmt::If(c, t, e) => {
            expr(c);
            for s in t.iter().chain(e) {
                collect_names(s, out);
            }
        }
        Stmt::While { test, body, .. } => {
            expr(test);
            for s in body {
                collect_names(s, out);
            }
        }
        Stmt::Print(args) => args.iter().for_each(expr),
        Stmt::Assume(e) | Stmt::Assert(e) | Stmt::Claim(e) => expr(e),
        Stmt::CAssign(vars, e) => {
            expr(e);
            out.extend(vars.iter().cloned());
        }
    }
}

fn without_decls(stmts: &[Stmt]) -> impl Iterator<Item = Stmt> + '_ {
    stmts
        .iter()
        .filter(|s| !matches!(s, Stmt::VarDecl(..)))
        .cloned()
}

fn prelude_stmts(p: &Program) -> Vec<Stmt> {
    let mut out = Vec::new();
    if let Some(pre) = &p.pre {
        out.push(Stmt::Assume(pre.clone()));
    }
    out.extend(without_decls(&p.prelude));
    out
}

fn goal(env: TypeEnv, stmts: Vec<Stmt>) -> Goal {
    Goal::new(env, stmts).expect("builders produce well-formed goals")
}

/// `assume(hyps); assert(e)`. With no hypotheses this is the type-tautology
/// check; with the inductive set it is the displacement check.
pub fn build_implication(p: &Program, hyps: &[Expr], e: &Expr) -> Goal {
    let mut stmts = Vec::new();
    if !hyps.is_empty() {
        stmts.push(Stmt::Assume(Expr::conjunction(hyps)));
    }
    stmts.push(Stmt::Assert(e.clone()));
    goal(p.env.clone(), stmts)
}

/// Initiation: everything before the loop (declarations dropped, `pre`
/// assumed), then `assert(e)`.
pub fn build_upto_loop(p: &Program, e: &Expr) -> Goal {
    let mut stmts = prelude_stmts(p);
    stmts.push(Stmt::Assert(e.clone()));
    goal(p.env.clone(), stmts)
}

/// Bounded invariance: the prelude followed by `k` iterations, each gated by
/// a fresh unconstrained Boolean so execution may stop early, then
/// `assert(e)`.
pub fn build_loop_unrolled(p: &Program, e: &Expr, k: usize) -> Goal {
    let mut env = p.env.clone();
    let mut stmts = prelude_stmts(p);
    for i in 1..=k {
        let step = format!("{STEP_PREFIX}{i}");
        env.insert(step.clone(), Type::Boolean);
        stmts.push(Stmt::CAssign(vec![step.clone()], Expr::Bool(true)));
        stmts.push(Stmt::If(
            Expr::and(Expr::Var(step), p.test.clone()),
            p.body.clone(),
            Vec::new(),
        ));
    }
    stmts.push(Stmt::Assert(e.clone()));
    goal(env, stmts)
}

/// Consecution: `assume(hyps & test); body; assert(x)`.
pub fn build_consecution(p: &Program, hyps: &[Expr], x: &Expr) -> Goal {
    let mut assumed: Vec<Expr> = hyps.to_vec();
    assumed.push(p.test.clone());
    let mut stmts = vec![Stmt::Assume(Expr::conjunction(&assumed))];
    stmts.extend(p.body.iter().cloned());
    stmts.push(Stmt::Assert(x.clone()));
    goal(p.env.clone(), stmts)
}

/// Exit check: `assume(assumed & !test); epilogue; assert(post)`.
pub fn build_exit_check(p: &Program, assumed: &[Expr]) -> Goal {
    let mut hyps: Vec<Expr> = assumed.to_vec();
    hyps.push(Expr::negate(p.test.clone()));
    let mut stmts = vec![Stmt::Assume(Expr::conjunction(&hyps))];
    stmts.extend(without_decls(&p.epilogue));
    stmts.push(Stmt::Assert(p.post.clone()));
    goal(p.env.clone(), stmts)
}

/// The translated goal, with enough bookkeeping to read a model back.
#[derive(Debug, Clone)]
pub struct Formula {
    pub decls: Vec<(String, Sort)>,
    /// Definitions and type assumptions; always jointly satisfiable.
    pub constraints: Vec<Term>,
    /// Disjunction of guarded, negated obligations.
    pub violation: Term,
    /// Program variable to the symbol of its initial version.
    pub initial: Vec<(String, String)>,
    /// `cassign` site to the symbols of the versions it introduces.
    pub sites: Vec<(usize, Vec<(String, String)>)>,
    pub env: TypeEnv,
}

impl Formula {
    /// SMT-LIB v2 script: declarations, assertions, `check-sat`, `get-model`.
    pub fn to_smtlib(&self, timeout_ms: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(set-option :produce-models true)");
        let _ = writeln!(s, "(set-option :timeout {timeout_ms})");
        for (n, sort) in &self.decls {
            let _ = writeln!(s, "(declare-const {} {sort})", symbol(n));
        }
        for c in &self.constraints {
            let _ = writeln!(s, "(assert {c})");
        }
        let _ = writeln!(s, "(assert {})", self.violation);
        s.push_str("(check-sat)\n(get-info :reason-unknown)\n(get-model)\n(exit)\n");
        s
    }
}

pub fn sort_of(t: Type) -> Sort {
    match t {
        Type::Boolean => Sort::Bool,
        Type::Natural | Type::Integer => Sort::Int,
        Type::Rational => Sort::Real,
    }
}

struct SymExec<'a> {
    env: &'a TypeEnv,
    next_version: HashMap<String, usize>,
    current: HashMap<String, Term>,
    decls: Vec<(String, Sort)>,
    constraints: Vec<Term>,
    assumed: Vec<Term>,
    obligations: Vec<Term>,
    site: usize,
    sites: Vec<(usize, Vec<(String, String)>)>,
}

impl<'a> SymExec<'a> {
    fn new(env: &'a TypeEnv) -> Self {
        let mut s = SymExec {
            env,
            next_version: HashMap::new(),
            current: HashMap::new(),
            decls: Vec::new(),
            constraints: Vec::new(),
            assumed: Vec::new(),
            obligations: Vec::new(),
            site: 0,
            sites: Vec::new(),
        };
        for (n, t) in env {
            let sym = s.fresh(n);
            if *t == Type::Natural {
                s.constraints
                    .push(Term::app(">=", vec![Term::Const(sym), Term::Int(0.into())]));
            }
        }
        s
    }

    /// Declares the next version of `var` and makes it current.
    fn fresh(&mut self, var: &str) -> String {
        let k = self.next_version.entry(var.to_string()).or_insert(0);
        let sym = format!("{var}#{k}");
        *k += 1;
        self.decls.push((sym.clone(), sort_of(self.env[var])));
        self.current
            .insert(var.to_string(), Term::Const(sym.clone()));
        sym
    }

    fn oblige(&mut self, guard: &Term, failure: Term) {
        let mut parts = self.assumed.clone();
        parts.push(guard.clone());
        parts.push(failure);
        self.obligations.push(Term::and(parts));
    }

    fn to_real(t: Term, ty: Type) -> Term {
        if ty == Type::Rational {
            return t;
        }
        match t {
            Term::Int(v) => Term::Real(num_rational::BigRational::from_integer(v)),
            t => Term::app("to_real", vec![t]),
        }
    }

    fn numeric_pair(l: (Term, Type), r: (Term, Type)) -> (Term, Term, Type) {
        if l.1 == Type::Rational || r.1 == Type::Rational {
            (
                Self::to_real(l.0, l.1),
                Self::to_real(r.0, r.1),
                Type::Rational,
            )
        } else {
            (l.0, r.0, Type::Integer)
        }
    }

    fn term(&mut self, e: &Expr, guard: &Term) -> (Term, Type) {
        match e {
            Expr::Bool(b) => (Term::Bool(*b), Type::Boolean),
            Expr::Int(v) => (Term::Int(v.clone()), Type::Integer),
            Expr::Rat(v) => (Term::Real(v.clone()), Type::Rational),
            Expr::Var(n) => (self.current[n].clone(), self.env[n.as_str()]),
            Expr::Unary(UnOp::Not, inner) => {
                let (t, _) = self.term(inner, guard);
                (Term::negate(t), Type::Boolean)
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let (t, ty) = self.term(inner, guard);
                let ty = if ty == Type::Rational {
                    Type::Rational
                } else {
                    Type::Integer
                };
                (Term::app("-", vec![t]), ty)
            }
            Expr::Binary(BinOp::And, l, r) => {
                let (a, _) = self.term(l, guard);
                let inner = Term::and([guard.clone(), a.clone()]);
                let (b, _) = self.term(r, &inner);
                (Term::and([a, b]), Type::Boolean)
            }
            Expr::Binary(BinOp::Or, l, r) => {
                let (a, _) = self.term(l, guard);
                let inner = Term::and([guard.clone(), Term::negate(a.clone())]);
                let (b, _) = self.term(r, &inner);
                (Term::or([a, b]), Type::Boolean)
            }
            Expr::Binary(op, l, r) => {
                let lt = self.term(l, guard);
                let rt = self.term(r, guard);
                match op {
                    BinOp::Eq | BinOp::Ne => {
                        let eq = if lt.1 == Type::Boolean {
                            Term::eq(lt.0, rt.0)
                        } else {
                            let (a, b, _) = Self::numeric_pair(lt, rt);
                            Term::eq(a, b)
                        };
                        let t = if *op == BinOp::Eq {
                            eq
                        } else {
                            Term::negate(eq)
                        };
                        (t, Type::Boolean)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let (a, b, _) = Self::numeric_pair(lt, rt);
                        (Term::app(op.symbol(), vec![a, b]), Type::Boolean)
                    }
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        let (a, b, ty) = Self::numeric_pair(lt, rt);
                        (Term::app(op.symbol(), vec![a, b]), ty)
                    }
                    BinOp::Div => {
                        let a = Self::to_real(lt.0, lt.1);
                        let b = Self::to_real(rt.0, rt.1);
                        self.oblige(
                            guard,
                            Term::eq(b.clone(), Term::Real(num_traits::Zero::zero())),
                        );
                        (Term::app("/", vec![a, b]), Type::Rational)
                    }
                    BinOp::Mod => {
                        self.oblige(
                            guard,
                            Term::app("<=", vec![rt.0.clone(), Term::Int(0.into())]),
                        );
                        (Term::app("mod", vec![lt.0, rt.0]), Type::Integer)
                    }
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        }
    }

    fn assign(&mut self, var: &str, value: (Term, Type), path: &Term) {
        let target = self.env[var];
        let value_term = if target == Type::Rational {
            Self::to_real(value.0, value.1)
        } else {
            value.0
        };
        if target == Type::Natural {
            self.oblige(
                path,
                Term::app("<", vec![value_term.clone(), Term::Int(0.into())]),
            );
        }
        let sym = self.fresh(var);
        self.constraints
            .push(Term::eq(Term::Const(sym), value_term));
    }

    fn block(&mut self, stmts: &[Stmt], path: &Term) {
        for s in stmts {
            self.stmt(s, path);
        }
    }

    fn stmt(&mut self, s: &Stmt, path: &Term) {
        match s {
            Stmt::VarDecl(..) => {}
            Stmt::Assign(n, e) => {
                let v = self.term(e, path);
                self.assign(n, v, path);
            }
            Stmt::If(c, then, els) => {
                let (ct, _) = self.term(c, path);
                let before = self.current.clone();
                let start = self.site;
                self.block(then, &Term::and([path.clone(), ct.clone()]));
                let after_then = std::mem::replace(&mut self.current, before);
                self.site = start + then.iter().map(Stmt::cassign_sites).sum::<usize>();
                self.block(els, &Term::and([path.clone(), Term::negate(ct.clone())]));
                let mut changed: Vec<String> = after_then
                    .keys()
                    .filter(|k| after_then[*k] != self.current[*k])
                    .cloned()
                    .collect();
                changed.sort();
                // Join point: one fresh version per variable the branches disagree on.
                for var in changed {
                    let e = self.current[&var].clone();
                    let t = after_then[&var].clone();
                    let sym = self.fresh(&var);
                    self.constraints
                        .push(Term::eq(Term::Const(sym), Term::ite(ct.clone(), t, e)));
                }
            }
            Stmt::While { .. } => unreachable!("rejected by Goal::new"),
            Stmt::Print(args) => {
                for a in args {
                    self.term(a, path);
                }
            }
            Stmt::Assume(e) => {
                let (t, _) = self.term(e, path);
                self.assumed.push(Term::implies(path.clone(), t));
            }
            Stmt::Assert(e) | Stmt::Claim(e) => {
                let (t, _) = self.term(e, path);
                self.oblige(path, Term::negate(t));
            }
            Stmt::CAssign(vars, phi) => {
                let site = self.site;
                self.site += 1;
                let mut introduced = Vec::new();
                let mut nat = Vec::new();
                for v in vars {
                    let sym = self.fresh(v);
                    if self.env[v.as_str()] == Type::Natural {
                        nat.push(Term::app(
                            ">=",
                            vec![Term::Const(sym.clone()), Term::Int(0.into())],
                        ));
                    }
                    introduced.push((v.clone(), sym));
                }
                self.sites.push((site, introduced));
                let (t, _) = self.term(phi, path);
                nat.push(t);
                self.assumed
                    .push(Term::implies(path.clone(), Term::and(nat)));
            }
        }
    }
}

/// Forward symbolic execution of a goal into a formula whose models are
/// violating start states.
pub fn symexec_to_vc(g: &Goal) -> Formula {
    let mut s = SymExec::new(&g.env);
    let initial = g
        .env
        .keys()
        .map(|n| (n.clone(), format!("{n}#0")))
        .collect();
    s.block(&g.stmts, &Term::Bool(true));
    Formula {
        decls: s.decls,
        constraints: s.constraints,
        violation: Term::or(s.obligations),
        initial,
        sites: s.sites,
        env: g.env.clone(),
    }
}
