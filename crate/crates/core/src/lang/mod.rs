//! SIP: concrete syntax, abstract syntax and type checking.

mod ast;
mod lexer;
mod parser;
mod pretty;
mod typecheck;

use thiserror::Error;

pub use ast::{BinOp, Expr, Program, Stmt, Type, TypeEnv, UnOp};
pub use parser::{expand_power, MAX_EXPONENT};
pub use pretty::pretty_print;
pub use typecheck::{check_bool, type_of, typecheck, TypeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{line}:{col}: {message}")]
    At {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("program has no while loop")]
    NoLoop,
    #[error("program has more than one while loop")]
    MultipleLoops,
    #[error("the while loop must be a top-level statement of the function body")]
    NestedLoop,
    #[error("source defines more than one function")]
    MultipleFunctions,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at {0}")]
    Syntax(SyntaxError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("type error: {0}")]
    Type(TypeError),
    #[error("expression `{0}` is not Boolean")]
    NotBoolean(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("type errors: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Type(Vec<TypeError>),
}

/// Parses a single-function, single-loop program. The result is not yet
/// type-checked; see [`typecheck`] and [`load_program`].
pub fn parse_program(source: &str) -> Result<Program, SyntaxError> {
    parser::Parser::new(source)?.program()
}

/// Parses and type-checks a program.
pub fn load_program(source: &str) -> Result<Program, LoadError> {
    let p = parse_program(source)?;
    typecheck(&p).map_err(LoadError::Type)?;
    Ok(p)
}

/// Parses a candidate expression and checks that it is Boolean over `env`.
pub fn parse_expr(source: &str, env: &TypeEnv) -> Result<Expr, ExprError> {
    let e = parse_any_expr(source).map_err(ExprError::Syntax)?;
    if let Some(v) = e.variables().into_iter().find(|v| !env.contains_key(v)) {
        return Err(ExprError::UnknownVariable(v));
    }
    match type_of(&e, env).map_err(ExprError::Type)? {
        Type::Boolean => Ok(e),
        _ => Err(ExprError::NotBoolean(e.to_string())),
    }
}

/// Parses an invariant list: one expression per line; blank lines and
/// `#` comments are skipped. Errors carry the 1-based line number.
pub fn parse_expr_list(text: &str, env: &TypeEnv) -> Result<Vec<Expr>, (usize, ExprError)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty())
        .map(|(n, line)| parse_expr(line, env).map_err(|e| (n, e)))
        .collect()
}

/// Parses an expression of any type without checking it.
pub fn parse_any_expr(source: &str) -> Result<Expr, SyntaxError> {
    let mut p = parser::Parser::new(source)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISQRT: &str = "
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

    fn env(pairs: &[(&str, Type)]) -> TypeEnv {
        pairs.iter().map(|(n, t)| (n.to_string(), *t)).collect()
    }

    #[test]
    fn int_sqrt_structure() {
        let p = load_program(ISQRT).unwrap();
        assert_eq!(p.test, parse_any_expr("sqr <= n").unwrap());
        assert_eq!(
            p.post,
            parse_any_expr("cnt*cnt <= n & n < (cnt+1)*(cnt+1)").unwrap()
        );
        assert_eq!(p.prelude.len(), 6);
        assert_eq!(p.body.len(), 3);
        assert!(p.epilogue.is_empty());
        assert_eq!(
            typecheck(&p).unwrap(),
            env(&[
                ("n", Type::Natural),
                ("cnt", Type::Integer),
                ("odd", Type::Integer),
                ("sqr", Type::Integer)
            ])
        );
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            parse_program("fn f(): Integer { post(true); }"),
            Err(SyntaxError::NoLoop)
        );
        let two = "fn f(x: Integer): Integer { while (x > 0) { x := x - 1; } while (x < 0) { x := x + 1; } }";
        assert_eq!(parse_program(two), Err(SyntaxError::MultipleLoops));
        let nested =
            "fn f(x: Integer): Integer { while (x > 0) { while (x > 1) { x := x - 1; } } }";
        assert_eq!(parse_program(nested), Err(SyntaxError::MultipleLoops));
        let inside_if =
            "fn f(x: Integer): Integer { if (x > 0) { while (x > 1) { x := x - 1; } } else {} }";
        assert_eq!(parse_program(inside_if), Err(SyntaxError::NestedLoop));
        let fns = "fn f(x: Integer): Integer { while (x > 0) { x := x - 1; } } fn g(): Integer { }";
        assert_eq!(parse_program(fns), Err(SyntaxError::MultipleFunctions));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("fn f(x: Integer): Integer {\n  x := ;\n}").unwrap_err();
        assert!(
            matches!(
                err,
                SyntaxError::At {
                    line: 2,
                    col: 8,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn annotation_is_captured() {
        let p =
            parse_program("fn f(x: Natural): Integer { while [x >= 0] (x > 0) { x := x - 1; } }")
                .unwrap();
        assert_eq!(p.annotation, Some(parse_any_expr("x >= 0").unwrap()));
    }

    #[test]
    fn candidate_expressions() {
        let p = load_program(ISQRT).unwrap();
        let e = parse_expr("odd % 2 = 1", &p.env).unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Eq,
                Expr::binary(BinOp::Mod, Expr::var("odd"), Expr::int(2)),
                Expr::int(1)
            )
        );
        let sq = parse_expr("sqr = (cnt+1)^2", &p.env).unwrap();
        let cp1 = Expr::binary(BinOp::Add, Expr::var("cnt"), Expr::int(1));
        assert_eq!(
            sq,
            Expr::binary(
                BinOp::Eq,
                Expr::var("sqr"),
                Expr::binary(BinOp::Mul, cp1.clone(), cp1)
            )
        );
        assert!(matches!(
            parse_expr("cnt + 1", &p.env),
            Err(ExprError::NotBoolean(_))
        ));
        assert!(matches!(
            parse_expr("zzz > 1", &p.env),
            Err(ExprError::UnknownVariable(v)) if v == "zzz"
        ));
        assert!(matches!(
            parse_expr("(cnt > 1) + 1 > 0", &p.env),
            Err(ExprError::Type(_))
        ));
        assert!(matches!(
            parse_expr("cnt > ", &p.env),
            Err(ExprError::Syntax(_))
        ));
        assert!(matches!(
            parse_expr("1 < cnt < 3", &p.env),
            Err(ExprError::Syntax(_))
        ));
    }

    #[test]
    fn power_rules() {
        assert_eq!(parse_any_expr("x^0").unwrap(), Expr::int(1));
        assert_eq!(parse_any_expr("x^1").unwrap(), Expr::var("x"));
        assert!(parse_any_expr("x^y").is_err());
        assert!(parse_any_expr("x^-1").is_err());
        assert!(parse_any_expr("x^1000").is_err());
        // unary binds tighter than `^`
        assert_eq!(
            parse_any_expr("-x^2").unwrap(),
            parse_any_expr("(-x)*(-x)").unwrap()
        );
    }

    #[test]
    fn type_rules() {
        let bad =
            "fn f(x: Integer): Integer { var y: Integer; y := 1/2; while (x > 0) { x := x - 1; } }";
        let errs = typecheck(&parse_program(bad).unwrap()).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("cannot assign Rational"));

        let test = "fn f(cnt: Integer): Integer { while (cnt) { cnt := cnt - 1; } }";
        let errs = typecheck(&parse_program(test).unwrap()).unwrap_err();
        assert!(errs[0].message.contains("loop test"));

        let undeclared =
            "fn f(x: Integer): Integer { y := x; var y: Integer; while (x > 0) { x := x - 1; } }";
        assert!(typecheck(&parse_program(undeclared).unwrap()).is_err());

        let ok = "fn f(x: Integer): Rational { var r: Rational; r := x / 2; while (x > 0) { x := x - 1; } }";
        assert!(load_program(ok).is_ok());

        let nat = "fn f(x: Natural): Integer { var y: Natural; y := x - 1; while (x > 0) { x := x - 1; } }";
        assert!(
            load_program(nat).is_ok(),
            "integral into Natural is a run-time check"
        );
    }

    #[test]
    fn pretty_print_round_trip() {
        let p = load_program(ISQRT).unwrap();
        let text = pretty_print(&p);
        assert_eq!(parse_program(&text).unwrap(), p);
        assert!(text.contains("(cnt + 1)^2"), "{text}");
    }

    #[test]
    fn expression_display() {
        for (src, shown) in [
            ("odd = cnt*2+1", "odd = cnt * 2 + 1"),
            ("sqr = (cnt+1)^2", "sqr = (cnt + 1)^2"),
            ("!(a & b) | c", "!(a & b) | c"),
            ("x - (y - z)", "x - (y - z)"),
            ("-5 * x", "-5 * x"),
            ("-(5)", "-(5)"),
            ("0.25 + x", "0.25 + x"),
            ("(a = b) = c", "(a = b) = c"),
        ] {
            let e = parse_any_expr(src).unwrap();
            assert_eq!(e.to_string(), shown);
            assert_eq!(parse_any_expr(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn expression_lists() {
        let p = load_program(ISQRT).unwrap();
        let text = "# isqrt\ncnt >= 0\n\n  odd = cnt*2+1  # closed form\n";
        let list = parse_expr_list(text, &p.env).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[1], parse_expr("odd = cnt*2+1", &p.env).unwrap());
        let err = parse_expr_list("cnt >= 0\n\nbogus > 1\n", &p.env).unwrap_err();
        assert_eq!(err.0, 3);
        assert!(matches!(err.1, ExprError::UnknownVariable(_)));
    }
}
