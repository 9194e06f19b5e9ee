//! Quantifier-free SMT-LIB v2 terms.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Bool => "Bool",
            Sort::Int => "Int",
            Sort::Real => "Real",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Bool(bool),
    Int(BigInt),
    Real(BigRational),
    Const(String),
    App(&'static str, Vec<Term>),
}

impl Term {
    pub fn app(op: &'static str, args: Vec<Term>) -> Term {
        Term::App(op, args)
    }

    pub fn negate(t: Term) -> Term {
        match t {
            Term::Bool(b) => Term::Bool(!b),
            t => Term::App("not", vec![t]),
        }
    }

    /// Flattening conjunction with unit/zero simplification.
    pub fn and(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(true) => {}
                Term::Bool(false) => return Term::Bool(false),
                Term::App("and", inner) => out.extend(inner),
                t => out.push(t),
            }
        }
        match out.len() {
            0 => Term::Bool(true),
            1 => out.pop().expect("one element"),
            _ => Term::App("and", out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(false) => {}
                Term::Bool(true) => return Term::Bool(true),
                Term::App("or", inner) => out.extend(inner),
                t => out.push(t),
            }
        }
        match out.len() {
            0 => Term::Bool(false),
            1 => out.pop().expect("one element"),
            _ => Term::App("or", out),
        }
    }

    pub fn implies(lhs: Term, rhs: Term) -> Term {
        match lhs {
            Term::Bool(true) => rhs,
            Term::Bool(false) => Term::Bool(true),
            lhs => Term::App("=>", vec![lhs, rhs]),
        }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Term {
        Term::App("=", vec![lhs, rhs])
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Term {
        match c {
            Term::Bool(true) => t,
            Term::Bool(false) => e,
            c => Term::App("ite", vec![c, t, e]),
        }
    }
}

/// Quoted SMT-LIB symbol; program names never contain `|` or `\`.
pub fn symbol(name: &str) -> String {
    format!("|{name}|")
}

fn write_int(f: &mut fmt::Formatter<'_>, v: &BigInt) -> fmt::Result {
    if v.is_negative() {
        write!(f, "(- {})", -v)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Bool(b) => write!(f, "{b}"),
            Term::Int(v) => write_int(f, v),
            Term::Real(r) => {
                let (n, d) = (r.numer(), r.denom());
                let body = if r.is_integer() {
                    format!("{}.0", n.abs())
                } else {
                    format!("(/ {}.0 {}.0)", n.abs(), d)
                };
                if r.is_negative() {
                    write!(f, "(- {body})")
                } else {
                    f.write_str(&body)
                }
            }
            Term::Const(n) => f.write_str(&symbol(n)),
            Term::App(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering() {
        let t = Term::and([
            Term::Bool(true),
            Term::app(
                ">=",
                vec![Term::Const("n#0".into()), Term::Int((-3).into())],
            ),
            Term::eq(
                Term::Const("r#1".into()),
                Term::Real(BigRational::new((-1).into(), 3.into())),
            ),
        ]);
        assert_eq!(
            t.to_string(),
            "(and (>= |n#0| (- 3)) (= |r#1| (- (/ 1.0 3.0))))"
        );
        assert_eq!(Term::or([Term::Bool(false)]).to_string(), "false");
        assert_eq!(
            Term::Real(BigRational::from_integer(2.into())).to_string(),
            "2.0"
        );
    }
}
