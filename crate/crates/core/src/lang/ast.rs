//! Abstract syntax for SIP programs and candidate expressions.

use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Variable types. `Natural` is an integer constrained to be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Boolean,
    Natural,
    Integer,
    Rational,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        !matches!(self, Type::Boolean)
    }

    /// Natural and Integer values are whole numbers.
    pub fn is_integral(self) -> bool {
        matches!(self, Type::Natural | Type::Integer)
    }

    /// Whether a value of type `from` may be stored in a variable of this type.
    ///
    /// Integral values may flow into Natural variables; the non-negativity is
    /// a run-time obligation, not a static one.
    pub fn accepts(self, from: Type) -> bool {
        match self {
            Type::Boolean => from == Type::Boolean,
            Type::Natural | Type::Integer => from.is_integral(),
            Type::Rational => from.is_numeric(),
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Type::Boolean => "Boolean",
            Type::Natural => "Natural",
            Type::Integer => "Integer",
            Type::Rational => "Rational",
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Variable name to type, in declaration order (parameters first).
pub type TypeEnv = IndexMap<String, Type>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

/// Boolean or numeric expression. `^` has no node of its own: it is expanded
/// into repeated multiplication by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Bool(bool),
    Int(BigInt),
    Rat(BigRational),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Expressions travel as their concrete syntax.
impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::And, lhs, rhs)
    }

    /// Left-nested conjunction; `true` when empty.
    pub fn conjunction<'a>(parts: impl IntoIterator<Item = &'a Expr>) -> Expr {
        parts
            .into_iter()
            .cloned()
            .reduce(Expr::and)
            .unwrap_or(Expr::Bool(true))
    }

    /// Names of all variables referenced, in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Bool(_) | Expr::Int(_) | Expr::Rat(_) => {}
        }
    }

    /// Number of nodes; used to order candidate expressions by size.
    pub fn size(&self) -> usize {
        match self {
            Expr::Unary(_, e) => 1 + e.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    VarDecl(String, Type),
    Assign(String, Expr),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    While {
        annotation: Option<Expr>,
        test: Expr,
        body: Vec<Stmt>,
    },
    Print(Vec<Expr>),
    Assume(Expr),
    Assert(Expr),
    /// Checked exactly like `Assert`.
    Claim(Expr),
    CAssign(Vec<String>, Expr),
}

impl Stmt {
    pub fn contains_loop(&self) -> bool {
        match self {
            Stmt::While { .. } => true,
            Stmt::If(_, t, e) => t.iter().chain(e).any(Stmt::contains_loop),
            _ => false,
        }
    }

    /// Number of `cassign` statements syntactically inside this statement.
    pub fn cassign_sites(&self) -> usize {
        match self {
            Stmt::CAssign(..) => 1,
            Stmt::If(_, t, e) => t.iter().chain(e).map(Stmt::cassign_sites).sum(),
            Stmt::While { body, .. } => body.iter().map(Stmt::cassign_sites).sum(),
            _ => 0,
        }
    }
}

/// A single-function, single-loop SIP program, split around its loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub ret: Type,
    pub pre: Option<Expr>,
    /// The guarantee. Defaults to `true` when the source has no `post`.
    pub post: Expr,
    /// Statements before the loop, declarations included.
    pub prelude: Vec<Stmt>,
    /// Optional `while [e]` annotation.
    pub annotation: Option<Expr>,
    pub test: Expr,
    pub body: Vec<Stmt>,
    /// Statements after the loop.
    pub epilogue: Vec<Stmt>,
    pub env: TypeEnv,
}

impl Program {
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|(n, _)| n == name)
    }
}
