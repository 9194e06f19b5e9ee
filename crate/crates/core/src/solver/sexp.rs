//! Minimal S-expression reader for prover responses.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }
}

pub fn parse_all(text: &str) -> Result<Vec<Sexp>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() {
        if chars[*pos].is_whitespace() {
            *pos += 1;
        } else if chars[*pos] == ';' {
            while *pos < chars.len() && chars[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(chars: &[char], pos: &mut usize) -> Result<Sexp, String> {
    skip_ws(chars, pos);
    match chars.get(*pos) {
        None => Err("unexpected end of prover output".into()),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(chars, pos);
                match chars.get(*pos) {
                    None => return Err("unbalanced parenthesis in prover output".into()),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_one(chars, pos)?),
                }
            }
        }
        Some(')') => Err("unexpected `)` in prover output".into()),
        Some('"') => {
            *pos += 1;
            let mut s = String::new();
            while *pos < chars.len() {
                if chars[*pos] == '"' {
                    // SMT-LIB escapes a quote by doubling it.
                    if chars.get(*pos + 1) == Some(&'"') {
                        s.push('"');
                        *pos += 2;
                        continue;
                    }
                    *pos += 1;
                    return Ok(Sexp::Str(s));
                }
                s.push(chars[*pos]);
                *pos += 1;
            }
            Err("unterminated string in prover output".into())
        }
        Some('|') => {
            *pos += 1;
            let start = *pos;
            while *pos < chars.len() && chars[*pos] != '|' {
                *pos += 1;
            }
            if *pos >= chars.len() {
                return Err("unterminated quoted symbol".into());
            }
            let s: String = chars[start..*pos].iter().collect();
            *pos += 1;
            Ok(Sexp::Atom(s))
        }
        Some(_) => {
            let start = *pos;
            while *pos < chars.len()
                && !chars[*pos].is_whitespace()
                && !matches!(chars[*pos], '(' | ')' | '"' | ';')
            {
                *pos += 1;
            }
            Ok(Sexp::Atom(chars[start..*pos].iter().collect()))
        }
    }
}

/// A model value read back exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Bool(bool),
    Num(BigRational),
}

fn numeral(a: &str) -> Option<BigRational> {
    if let Some((w, f)) = a.split_once('.') {
        if w.is_empty() || !w.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        if !f.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let mut den = BigInt::one();
        for _ in 0..f.len() {
            den *= 10;
        }
        let num: BigInt = format!("{w}{f}").parse().ok()?;
        Some(BigRational::new(num, den))
    } else if !a.is_empty() && a.chars().all(|c| c.is_ascii_digit()) {
        Some(BigRational::from_integer(a.parse().ok()?))
    } else {
        None
    }
}

/// Reads `true`, numerals, decimals, `(- v)` and `(/ a b)`. Anything else
/// (algebraic numbers, uninterpreted values) is rejected.
pub fn read_value(s: &Sexp) -> Option<ModelValue> {
    match s {
        Sexp::Atom(a) if a == "true" => Some(ModelValue::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(ModelValue::Bool(false)),
        Sexp::Atom(a) => numeral(a).map(ModelValue::Num),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => match read_value(x)? {
                ModelValue::Num(v) => Some(ModelValue::Num(-v)),
                ModelValue::Bool(_) => None,
            },
            [Sexp::Atom(op), a, b] if op == "/" => match (read_value(a)?, read_value(b)?) {
                (ModelValue::Num(a), ModelValue::Num(b)) if !b.is_zero() => {
                    Some(ModelValue::Num(a / b))
                }
                _ => None,
            },
            _ => None,
        },
        Sexp::Str(_) => None,
    }
}

/// Extracts `(define-fun name () Sort value)` entries. Values that cannot be
/// read exactly map to `None`.
pub fn read_model(s: &Sexp) -> Result<HashMap<String, Option<ModelValue>>, String> {
    let Sexp::List(items) = s else {
        return Err("model is not a list".into());
    };
    let mut out = HashMap::new();
    let items = match items.first() {
        // older z3 releases wrap the model as `(model ...)`
        Some(Sexp::Atom(a)) if a == "model" => &items[1..],
        _ => &items[..],
    };
    for item in items {
        let Sexp::List(parts) = item else {
            return Err("malformed model entry".into());
        };
        match parts.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _sort, value]
                if kw == "define-fun" =>
            {
                if args.is_empty() {
                    out.insert(name.clone(), read_value(value));
                }
            }
            _ => return Err("malformed model entry".into()),
        }
    }
    Ok(out)
}
