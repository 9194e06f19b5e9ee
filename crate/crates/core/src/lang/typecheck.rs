use std::fmt;

use super::ast::{BinOp, Expr, Program, Stmt, Type, TypeEnv, UnOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub message: String,
}

impl TypeError {
    fn new(message: impl Into<String>) -> Self {
        TypeError {
            message: message.into(),
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Infers the type of `e` under `env`.
pub fn type_of(e: &Expr, env: &TypeEnv) -> Result<Type, TypeError> {
    match e {
        Expr::Bool(_) => Ok(Type::Boolean),
        Expr::Int(_) => Ok(Type::Integer),
        Expr::Rat(_) => Ok(Type::Rational),
        Expr::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| TypeError::new(format!("unknown variable `{v}`"))),
        Expr::Unary(UnOp::Not, inner) => match type_of(inner, env)? {
            Type::Boolean => Ok(Type::Boolean),
            t => Err(TypeError::new(format!(
                "`!` applied to {t} operand in `{e}`"
            ))),
        },
        Expr::Unary(UnOp::Neg, inner) => match type_of(inner, env)? {
            Type::Rational => Ok(Type::Rational),
            t if t.is_integral() => Ok(Type::Integer),
            t => Err(TypeError::new(format!(
                "`-` applied to {t} operand in `{e}`"
            ))),
        },
        Expr::Binary(op, l, r) => {
            let lt = type_of(l, env)?;
            let rt = type_of(r, env)?;
            let numeric = |what: &str| -> Result<(), TypeError> {
                if lt.is_numeric() && rt.is_numeric() {
                    Ok(())
                } else {
                    Err(TypeError::new(format!(
                        "{what} `{}` needs numeric operands, found {lt} and {rt} in `{e}`",
                        op.symbol()
                    )))
                }
            };
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => {
                    numeric("arithmetic")?;
                    Ok(if lt == Type::Rational || rt == Type::Rational {
                        Type::Rational
                    } else {
                        Type::Integer
                    })
                }
                BinOp::Div => {
                    numeric("division")?;
                    Ok(Type::Rational)
                }
                BinOp::Mod => {
                    if lt.is_integral() && rt.is_integral() {
                        Ok(Type::Integer)
                    } else {
                        Err(TypeError::new(format!(
                            "`%` needs integer operands, found {lt} and {rt} in `{e}`"
                        )))
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    numeric("comparison")?;
                    Ok(Type::Boolean)
                }
                BinOp::Eq | BinOp::Ne => {
                    if (lt == Type::Boolean) == (rt == Type::Boolean) {
                        Ok(Type::Boolean)
                    } else {
                        Err(TypeError::new(format!(
                            "cannot compare {lt} with {rt} in `{e}`"
                        )))
                    }
                }
                BinOp::And | BinOp::Or => {
                    if lt == Type::Boolean && rt == Type::Boolean {
                        Ok(Type::Boolean)
                    } else {
                        Err(TypeError::new(format!(
                            "`{}` needs Boolean operands, found {lt} and {rt} in `{e}`",
                            op.symbol()
                        )))
                    }
                }
            }
        }
    }
}

/// Checks that `e` is a well-typed Boolean expression.
pub fn check_bool(e: &Expr, env: &TypeEnv, what: &str) -> Result<(), TypeError> {
    match type_of(e, env)? {
        Type::Boolean => Ok(()),
        t => Err(TypeError::new(format!("{what} `{e}` is {t}, not Boolean"))),
    }
}

struct Checker<'a> {
    full: &'a TypeEnv,
    scope: TypeEnv,
    errors: Vec<TypeError>,
}

impl Checker<'_> {
    fn report(&mut self, r: Result<(), TypeError>) {
        if let Err(e) = r {
            self.errors.push(e);
        }
    }

    fn bool_expr(&mut self, e: &Expr, what: &str) {
        let r = check_bool(e, &self.scope, what);
        self.report(r);
    }

    fn target(&mut self, name: &str) -> Option<Type> {
        let t = self.scope.get(name).copied();
        if t.is_none() {
            self.errors.push(TypeError::new(format!(
                "assignment to undeclared variable `{name}`"
            )));
        }
        t
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::VarDecl(n, t) => {
                if self.scope.contains_key(n) {
                    self.errors
                        .push(TypeError::new(format!("`{n}` is declared more than once")));
                } else if self.full.get(n) != Some(t) {
                    self.errors.push(TypeError::new(format!(
                        "`{n}` is declared with conflicting types"
                    )));
                } else {
                    self.scope.insert(n.clone(), *t);
                }
            }
            Stmt::Assign(n, e) => {
                let target = self.target(n);
                match (target, type_of(e, &self.scope)) {
                    (_, Err(err)) => self.errors.push(err),
                    (Some(t), Ok(et)) if !t.accepts(et) => self.errors.push(TypeError::new(
                        format!("cannot assign {et} expression `{e}` to {t} variable `{n}`"),
                    )),
                    _ => {}
                }
            }
            Stmt::If(c, t, e) => {
                self.bool_expr(c, "condition");
                self.stmts(t);
                self.stmts(e);
            }
            Stmt::While {
                annotation,
                test,
                body,
            } => {
                if let Some(a) = annotation {
                    self.bool_expr(a, "loop annotation");
                }
                self.bool_expr(test, "loop test");
                self.stmts(body);
            }
            Stmt::Print(args) => {
                for a in args {
                    let r = type_of(a, &self.scope).map(|_| ());
                    self.report(r);
                }
            }
            Stmt::Assume(e) => self.bool_expr(e, "assumption"),
            Stmt::Assert(e) => self.bool_expr(e, "assertion"),
            Stmt::Claim(e) => self.bool_expr(e, "claim"),
            Stmt::CAssign(vars, phi) => {
                for v in vars {
                    self.target(v);
                }
                self.bool_expr(phi, "cassign constraint");
            }
        }
    }
}

/// Type-checks a parsed program. Variables must be declared before use in
/// statement order; `pre` may mention parameters only, `post` any variable.
pub fn typecheck(p: &Program) -> Result<TypeEnv, Vec<TypeError>> {
    let mut c = Checker {
        full: &p.env,
        scope: TypeEnv::new(),
        errors: Vec::new(),
    };
    for (n, t) in &p.params {
        if c.scope.insert(n.clone(), *t).is_some() {
            c.errors
                .push(TypeError::new(format!("parameter `{n}` appears twice")));
        }
    }
    if let Some(pre) = &p.pre {
        c.bool_expr(pre, "precondition");
    }
    c.stmts(&p.prelude);
    c.stmt(&Stmt::While {
        annotation: p.annotation.clone(),
        test: p.test.clone(),
        body: p.body.clone(),
    });
    c.stmts(&p.epilogue);
    let post = check_bool(&p.post, &p.env, "guarantee");
    c.report(post);

    if c.errors.is_empty() {
        Ok(p.env.clone())
    } else {
        Err(c.errors)
    }
}
