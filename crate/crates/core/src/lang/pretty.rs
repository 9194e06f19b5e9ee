//! Printing back to concrete syntax. `parse(print(x)) == x` for every program
//! and expression the parser produces.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ast::{BinOp, Expr, Program, Stmt, UnOp};

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const ADD: u8 = 4;
const MUL: u8 = 5;
const POW: u8 = 6;
const UNARY: u8 = 7;
const ATOM: u8 = 8;

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => OR,
        BinOp::And => AND,
        BinOp::Add | BinOp::Sub => ADD,
        BinOp::Mul | BinOp::Div | BinOp::Mod => MUL,
        _ => CMP,
    }
}

/// Recognizes the left-nested products produced by `^` expansion.
fn power_form(e: &Expr) -> Option<(&Expr, u32)> {
    let Expr::Binary(BinOp::Mul, l, r) = e else {
        return None;
    };
    if l == r {
        return Some((l, 2));
    }
    match power_form(l) {
        Some((b, k)) if **r == *b => Some((b, k + 1)),
        _ => None,
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Int(v) if v.is_negative() => UNARY,
        Expr::Rat(v) if v.is_negative() => UNARY,
        Expr::Rat(v) if !terminates(v) => ATOM,
        Expr::Bool(_) | Expr::Int(_) | Expr::Rat(_) | Expr::Var(_) => ATOM,
        Expr::Unary(..) => UNARY,
        Expr::Binary(op, ..) => {
            if power_form(e).is_some() {
                POW
            } else {
                binop_prec(*op)
            }
        }
    }
}

fn terminates(v: &BigRational) -> bool {
    let mut d = v.denom().clone();
    for p in [2u32, 5] {
        let p = BigInt::from(p);
        while (&d % &p).is_zero() {
            d /= &p;
        }
    }
    d.is_one()
}

fn write_rational(out: &mut String, v: &BigRational) {
    if v.is_integer() {
        let _ = write!(out, "{}.0", v.numer());
        return;
    }
    if !terminates(v) {
        // No literal syntax; prints as a division.
        let _ = write!(out, "({}/{})", v.numer(), v.denom());
        return;
    }
    if v.is_negative() {
        out.push('-');
    }
    let a = v.abs();
    let whole = a.numer().div_floor(a.denom());
    let mut frac = a - BigRational::from_integer(whole.clone());
    let _ = write!(out, "{whole}.");
    while !frac.is_zero() {
        frac *= BigRational::from_integer(BigInt::from(10));
        let digit = frac.to_integer();
        let _ = write!(out, "{digit}");
        frac -= BigRational::from_integer(digit);
    }
}

fn write_child(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

pub(crate) fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Rat(v) => write_rational(out, v),
        Expr::Var(v) => out.push_str(v),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            // `-(5)` keeps the negation node distinct from the literal `-5`.
            let literal = matches!(**inner, Expr::Int(_) | Expr::Rat(_));
            if literal || prec(inner) < UNARY {
                out.push('(');
                write_expr(out, inner);
                out.push(')');
            } else {
                write_expr(out, inner);
            }
        }
        Expr::Binary(op, l, r) => {
            if let Some((base, k)) = power_form(e) {
                write_child(out, base, UNARY);
                let _ = write!(out, "^{k}");
                return;
            }
            let p = binop_prec(*op);
            if p == CMP {
                write_child(out, l, CMP + 1);
            } else {
                write_child(out, l, p);
            }
            let _ = write!(out, " {} ", op.symbol());
            write_child(out, r, p + 1);
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

pub(crate) fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::VarDecl(n, t) => {
            let _ = writeln!(out, "var {n}: {t};");
        }
        Stmt::Assign(n, e) => {
            let _ = writeln!(out, "{n} := {e};");
        }
        Stmt::If(c, t, e) => {
            let _ = write!(out, "if ({c}) ");
            write_block(out, t, depth);
            out.push_str(" else ");
            write_block(out, e, depth);
            out.push('\n');
        }
        Stmt::While {
            annotation,
            test,
            body,
        } => {
            out.push_str("while ");
            if let Some(a) = annotation {
                let _ = write!(out, "[{a}] ");
            }
            let _ = write!(out, "({test}) ");
            write_block(out, body, depth);
            out.push('\n');
        }
        Stmt::Print(args) => {
            let args: Vec<String> = args.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "print({});", args.join(", "));
        }
        Stmt::Assume(e) => {
            let _ = writeln!(out, "assume({e});");
        }
        Stmt::Assert(e) => {
            let _ = writeln!(out, "assert({e});");
        }
        Stmt::Claim(e) => {
            let _ = writeln!(out, "claim({e});");
        }
        Stmt::CAssign(vars, e) => {
            let _ = writeln!(out, "cassign([{}], {e});", vars.join(", "));
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_stmt(&mut s, self, 0);
        f.write_str(s.trim_end())
    }
}

/// Renders a program in the concrete syntax accepted by `parse_program`.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    let params: Vec<String> = p.params.iter().map(|(n, t)| format!("{n}: {t}")).collect();
    let _ = writeln!(out, "fn {}({}): {} {{", p.name, params.join(", "), p.ret);
    if let Some(pre) = &p.pre {
        let _ = writeln!(out, "    pre({pre});");
    }
    let _ = writeln!(out, "    post({});", p.post);
    for s in &p.prelude {
        write_stmt(&mut out, s, 1);
    }
    write_stmt(
        &mut out,
        &Stmt::While {
            annotation: p.annotation.clone(),
            test: p.test.clone(),
            body: p.body.clone(),
        },
        1,
    );
    for s in &p.epilogue {
        write_stmt(&mut out, s, 1);
    }
    out.push_str("}\n");
    out
}
