//! Recursive-descent parser for the C-like SIP surface syntax.
//!
//! Precedence, loosest to tightest: `|`, `&`, comparisons (non-associative),
//! `+ -`, `* / %`, `^`, unary `- !`, atoms.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use super::ast::{BinOp, Expr, Program, Stmt, Type, TypeEnv, UnOp};
use super::lexer::{tokenize, Spanned, Tok};
use super::SyntaxError;

/// Exponents above this are rejected rather than expanded.
pub const MAX_EXPONENT: u32 = 32;

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let s = &self.toks[self.pos];
        SyntaxError::At {
            line: s.line,
            col: s.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn ty(&mut self) -> Result<Type, SyntaxError> {
        let t = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "Boolean" => Type::Boolean,
                "Natural" => Type::Natural,
                "Integer" => Type::Integer,
                "Rational" => Type::Rational,
                _ => return Err(self.error(format!("unknown type `{s}`"))),
            },
            other => return Err(self.error(format!("expected type, found {}", other.describe()))),
        };
        self.bump();
        Ok(t)
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn expect_eof(&mut self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.peek().describe())))
        }
    }

    pub(crate) fn program(&mut self) -> Result<Program, SyntaxError> {
        self.expect_keyword("fn")?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let p = self.ident()?;
                self.expect(Tok::Colon)?;
                params.push((p, self.ty()?));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Colon)?;
        let ret = self.ty()?;
        self.expect(Tok::LBrace)?;

        let mut pre = None;
        if self.is_keyword("pre") {
            self.bump();
            pre = Some(self.paren_expr()?);
            self.expect(Tok::Semi)?;
        }
        let mut post = None;
        if self.is_keyword("post") {
            self.bump();
            post = Some(self.paren_expr()?);
            self.expect(Tok::Semi)?;
        }
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if self.at_eof() {
                return Err(self.error("unterminated function body"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        if self.is_keyword("fn") {
            return Err(SyntaxError::MultipleFunctions);
        }
        self.expect_eof()?;

        let loops: usize = stmts.iter().map(count_loops).sum();
        if loops == 0 {
            return Err(SyntaxError::NoLoop);
        }
        if loops > 1 {
            return Err(SyntaxError::MultipleLoops);
        }
        let at = stmts
            .iter()
            .position(|s| matches!(s, Stmt::While { .. }))
            .ok_or(SyntaxError::NestedLoop)?;
        let epilogue = stmts.split_off(at + 1);
        let Some(Stmt::While {
            annotation,
            test,
            body,
        }) = stmts.pop()
        else {
            unreachable!("position points at the loop")
        };

        let mut env = TypeEnv::new();
        for (p, t) in &params {
            env.entry(p.clone()).or_insert(*t);
        }
        for s in stmts.iter().chain(&body).chain(&epilogue) {
            collect_decls(s, &mut env);
        }

        Ok(Program {
            name,
            params,
            ret,
            pre,
            post: post.unwrap_or(Expr::Bool(true)),
            prelude: stmts,
            annotation,
            test,
            body,
            epilogue,
            env,
        })
    }

    fn paren_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.expect(Tok::LParen)?;
        let e = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(e)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if self.at_eof() {
                return Err(self.error("unterminated block"));
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            other => {
                return Err(self.error(format!("expected statement, found {}", other.describe())))
            }
        };
        let stmt = match kw.as_str() {
            "var" => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let t = self.ty()?;
                self.expect(Tok::Semi)?;
                Stmt::VarDecl(name, t)
            }
            "if" => {
                self.bump();
                let cond = self.paren_expr()?;
                let then = self.block()?;
                let els = if self.is_keyword("else") {
                    self.bump();
                    if self.is_keyword("if") {
                        vec![self.stmt()?]
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                Stmt::If(cond, then, els)
            }
            "while" => {
                self.bump();
                let annotation = if *self.peek() == Tok::LBracket {
                    self.bump();
                    let e = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    Some(e)
                } else {
                    None
                };
                let test = self.paren_expr()?;
                let body = self.block()?;
                Stmt::While {
                    annotation,
                    test,
                    body,
                }
            }
            "print" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    args.push(self.expr()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Stmt::Print(args)
            }
            "assume" | "assert" | "claim" => {
                self.bump();
                let e = self.paren_expr()?;
                self.expect(Tok::Semi)?;
                match kw.as_str() {
                    "assume" => Stmt::Assume(e),
                    "assert" => Stmt::Assert(e),
                    _ => Stmt::Claim(e),
                }
            }
            "cassign" => {
                self.bump();
                self.expect(Tok::LParen)?;
                self.expect(Tok::LBracket)?;
                let mut vars = vec![self.ident()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    vars.push(self.ident()?);
                }
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Comma)?;
                let phi = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Stmt::CAssign(vars, phi)
            }
            "fn" => return Err(SyntaxError::MultipleFunctions),
            _ => {
                let name = self.ident()?;
                self.expect(Tok::Walrus)?;
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Stmt::Assign(name, e)
            }
        };
        Ok(stmt)
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.conj()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.conj()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.comparison()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn comparison_op(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.additive()?;
        let Some(op) = self.comparison_op() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.additive()?;
        if self.comparison_op().is_some() {
            return Err(self.error("comparison operators do not associate; add parentheses"));
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let mut base = self.unary()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let k = match self.peek() {
                Tok::Int(k) => k.to_u32().filter(|k| *k <= MAX_EXPONENT),
                _ => return Err(self.error("exponent must be a non-negative integer literal")),
            };
            let Some(k) = k else {
                return Err(self.error(format!("exponent larger than {MAX_EXPONENT}")));
            };
            self.bump();
            base = expand_power(base, k);
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.bump();
                        Ok(Expr::Int(-v))
                    }
                    Tok::Decimal(v) => {
                        self.bump();
                        Ok(Expr::Rat(-v))
                    }
                    _ => Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?))),
                }
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Decimal(v) => {
                self.bump();
                Ok(Expr::Rat(v))
            }
            Tok::LParen => self.paren_expr(),
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(_) => {
                if *self.peek_at(1) == Tok::LParen {
                    return Err(self.error("function calls are not supported"));
                }
                Ok(Expr::Var(self.ident()?))
            }
            other => Err(self.error(format!("expected expression, found {}", other.describe()))),
        }
    }
}

/// `base^k` as a left-nested product; `base^0` is `1`.
pub fn expand_power(base: Expr, k: u32) -> Expr {
    match k {
        0 => Expr::Int(BigInt::one()),
        _ => (1..k).fold(base.clone(), |acc, _| {
            Expr::binary(BinOp::Mul, acc, base.clone())
        }),
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(
        word,
        "fn" | "pre"
            | "post"
            | "var"
            | "if"
            | "else"
            | "while"
            | "print"
            | "assume"
            | "assert"
            | "claim"
            | "cassign"
            | "true"
            | "false"
            | "Boolean"
            | "Natural"
            | "Integer"
            | "Rational"
    )
}

fn count_loops(s: &Stmt) -> usize {
    match s {
        Stmt::While { body, .. } => 1 + body.iter().map(count_loops).sum::<usize>(),
        Stmt::If(_, t, e) => t.iter().chain(e).map(count_loops).sum(),
        _ => 0,
    }
}

fn collect_decls(s: &Stmt, env: &mut TypeEnv) {
    match s {
        Stmt::VarDecl(n, t) => {
            env.entry(n.clone()).or_insert(*t);
        }
        Stmt::If(_, a, b) => a.iter().chain(b).for_each(|s| collect_decls(s, env)),
        Stmt::While { body, .. } => body.iter().for_each(|s| collect_decls(s, env)),
        _ => {}
    }
}
