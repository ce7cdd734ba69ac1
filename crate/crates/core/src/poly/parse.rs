//! Text format for polynomial and signed-power systems.
//!
//! ```text
//! system := stmt*
//! stmt   := ident "=" expr ";"
//! expr   := term (("+" | "-") term)*
//! term   := unary ("*" unary)*
//! unary  := ("-" | "+") unary | power
//! power  := atom ("^" int)?  |  "abs(" var ")" ("^" rational)?
//! atom   := number | var | "(" expr ")" | "sign(" var ")"
//! ```
//!
//! Variables are `x1 .. xn`; statements `f1 .. fn` give the vector field and
//! `g1 .. gm` the domain constraints `g_i >= 0`. `#` starts a line comment.

use num_rational::Ratio;

use super::polynomial::{PolyVectorField, Polynomial, SemialgebraicSet};
use super::signed_power::{Rational, SignedPowerExpr};
use super::PolyError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn err(offset: usize, msg: impl Into<String>) -> PolyError {
    PolyError::Parse {
        offset,
        message: msg.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, PolyError> {
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text = &src[start..i];
            let tok = if text.bytes().all(|b| b.is_ascii_digit()) {
                match text.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => Tok::Num(text.parse().map_err(|_| err(start, "bad number"))?),
                }
            } else {
                Tok::Num(
                    text.parse()
                        .map_err(|_| err(start, format!("bad number `{text}`")))?,
                )
            };
            out.push(Token { tok, offset: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                offset: start,
            });
        } else if "+-*^()/;=".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                offset: i,
            });
            i += 1;
        } else {
            return Err(err(i, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    end: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.offset).unwrap_or(self.end)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), PolyError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(err(self.offset(), format!("expected `{c}`")))
        }
    }

    fn var_index(&self, name: &str, offset: usize) -> Result<Option<usize>, PolyError> {
        let Some(rest) = name.strip_prefix('x') else {
            return Ok(None);
        };
        let Ok(k) = rest.parse::<usize>() else {
            return Ok(None);
        };
        if k == 0 || k > self.nvars {
            return Err(err(
                offset,
                format!("variable `{name}` out of range x1..x{}", self.nvars),
            ));
        }
        Ok(Some(k - 1))
    }

    fn expect_var(&mut self) -> Result<usize, PolyError> {
        let off = self.offset();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                self.var_index(&name, off)?
                    .ok_or_else(|| err(off, format!("expected a variable, found `{name}`")))
            }
            _ => Err(err(off, "expected a variable")),
        }
    }

    fn expr(&mut self) -> Result<SignedPowerExpr, PolyError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat_sym('-') {
                acc = acc.add(&self.term()?.scale(-1.0));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<SignedPowerExpr, PolyError> {
        let mut acc = self.unary()?;
        while self.eat_sym('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<SignedPowerExpr, PolyError> {
        if self.eat_sym('-') {
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        self.power()
    }

    fn int_exponent(&mut self) -> Result<u32, PolyError> {
        let off = self.offset();
        let paren = self.eat_sym('(');
        let v = match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                v
            }
            Some(Tok::Sym('-')) => {
                return Err(err(off, "negative exponent on a plain variable or group"))
            }
            _ => return Err(err(off, "expected a non-negative integer exponent")),
        };
        if self.peek() == Some(&Tok::Sym('/')) {
            return Err(err(off, "fractional exponent is only allowed on abs(..)"));
        }
        if paren {
            self.expect_sym(')')?;
        }
        u32::try_from(v).map_err(|_| err(off, "exponent too large"))
    }

    fn rational_exponent(&mut self) -> Result<Rational, PolyError> {
        let off = self.offset();
        let paren = self.eat_sym('(');
        let neg = paren && self.eat_sym('-');
        let num = match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                v
            }
            _ => return Err(err(off, "expected a rational exponent")),
        };
        let den = if self.eat_sym('/') {
            match self.peek().cloned() {
                Some(Tok::Int(v)) if v > 0 => {
                    self.pos += 1;
                    v
                }
                _ => return Err(err(self.offset(), "expected a positive denominator")),
            }
        } else {
            1
        };
        if paren {
            self.expect_sym(')')?;
        }
        let r = Ratio::new(num, den);
        Ok(if neg { -r } else { r })
    }

    fn power(&mut self) -> Result<SignedPowerExpr, PolyError> {
        let off = self.offset();
        let n = self.nvars;
        let base = match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                SignedPowerExpr::constant(n, v)
            }
            Some(Tok::Int(v)) => {
                self.pos += 1;
                SignedPowerExpr::constant(n, v as f64)
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                e
            }
            Some(Tok::Ident(name)) if name == "abs" => {
                self.pos += 1;
                self.expect_sym('(')?;
                let v = self.expect_var()?;
                self.expect_sym(')')?;
                let a = if self.eat_sym('^') {
                    self.rational_exponent()?
                } else {
                    Rational::from_integer(1)
                };
                return Ok(SignedPowerExpr::factor(n, v, 0, a));
            }
            Some(Tok::Ident(name)) if name == "sign" => {
                self.pos += 1;
                self.expect_sym('(')?;
                let v = self.expect_var()?;
                self.expect_sym(')')?;
                SignedPowerExpr::factor(n, v, 1, Rational::from_integer(0))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match self.var_index(&name, off)? {
                    Some(v) => SignedPowerExpr::var(n, v),
                    None => return Err(err(off, format!("unknown identifier `{name}`"))),
                }
            }
            Some(t) => return Err(err(off, format!("unexpected token {t:?}"))),
            None => return Err(err(off, "unexpected end of input")),
        };
        if self.eat_sym('^') {
            let k = self.int_exponent()?;
            Ok(base.pow(k))
        } else {
            Ok(base)
        }
    }
}

/// Parses one expression in `nvars` variables.
pub fn parse_expr(src: &str, nvars: usize) -> Result<SignedPowerExpr, PolyError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
        nvars,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(err(p.offset(), "trailing input"));
    }
    Ok(e)
}

/// Parses a polynomial; signed-power factors must cancel to monomials.
pub fn parse_polynomial(src: &str, nvars: usize) -> Result<Polynomial, PolyError> {
    parse_expr(src, nvars)?.to_polynomial(&SignedPowerExpr::constant(nvars, 1.0))
}

/// A parsed system: field components and domain constraints.
#[derive(Clone, Debug)]
pub struct ParsedSystem {
    pub field: Vec<SignedPowerExpr>,
    pub constraints: Vec<SignedPowerExpr>,
}

impl ParsedSystem {
    pub fn nvars(&self) -> usize {
        self.field.len()
    }

    /// The field as polynomials, failing when any component has a genuine
    /// signed-power term.
    pub fn poly_field(&self) -> Result<PolyVectorField, PolyError> {
        let one = SignedPowerExpr::constant(self.nvars(), 1.0);
        let comps = self
            .field
            .iter()
            .map(|f| f.to_polynomial(&one))
            .collect::<Result<Vec<_>, _>>()?;
        PolyVectorField::new(comps)
    }

    pub fn domain(&self) -> Result<SemialgebraicSet, PolyError> {
        let one = SignedPowerExpr::constant(self.nvars(), 1.0);
        let gs = self
            .constraints
            .iter()
            .map(|g| g.to_polynomial(&one))
            .collect::<Result<Vec<_>, _>>()?;
        SemialgebraicSet::new(self.nvars(), gs)
    }
}

fn stmt_index(name: &str, prefix: char) -> Option<usize> {
    name.strip_prefix(prefix)?.parse::<usize>().ok().filter(|&k| k > 0)
}

/// Parses `f1 = ..; f2 = ..; g1 = ..;`. The dimension is the number of `f`
/// statements; both families must be numbered contiguously from 1.
pub fn parse_system(src: &str) -> Result<ParsedSystem, PolyError> {
    let toks = lex(src)?;
    // Statement heads first, so the dimension is known before parsing bodies.
    let mut heads = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let name = match &toks[i].tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(err(toks[i].offset, "expected a statement name")),
        };
        if toks.get(i + 1).map(|t| &t.tok) != Some(&Tok::Sym('=')) {
            return Err(err(
                toks.get(i + 1).map(|t| t.offset).unwrap_or(src.len()),
                "expected `=`",
            ));
        }
        let body = i + 2;
        let mut j = body;
        while j < toks.len() && toks[j].tok != Tok::Sym(';') {
            j += 1;
        }
        if j == toks.len() {
            return Err(err(src.len(), "missing `;`"));
        }
        heads.push((name, toks[i].offset, body, j));
        i = j + 1;
    }
    let nf = heads.iter().filter(|h| stmt_index(&h.0, 'f').is_some()).count();
    let ng = heads.iter().filter(|h| stmt_index(&h.0, 'g').is_some()).count();
    if nf == 0 {
        return Err(err(0, "system has no field components f1.."));
    }
    let mut field: Vec<Option<SignedPowerExpr>> = vec![None; nf];
    let mut cons: Vec<Option<SignedPowerExpr>> = vec![None; ng];
    for (name, off, body, end) in heads {
        let (slot, k) = if let Some(k) = stmt_index(&name, 'f') {
            (&mut field, k)
        } else if let Some(k) = stmt_index(&name, 'g') {
            (&mut cons, k)
        } else {
            return Err(err(off, format!("unknown statement `{name}`")));
        };
        if k > slot.len() {
            return Err(err(off, format!("`{name}` is not numbered contiguously")));
        }
        if slot[k - 1].is_some() {
            return Err(err(off, format!("duplicate statement `{name}`")));
        }
        let mut p = Parser {
            toks: &toks[..end],
            pos: body,
            end: toks[end].offset,
            nvars: nf,
        };
        let e = p.expr()?;
        if p.pos != end {
            return Err(err(p.offset(), "trailing input in statement"));
        }
        slot[k - 1] = Some(e);
    }
    Ok(ParsedSystem {
        field: field.into_iter().map(Option::unwrap).collect(),
        constraints: cons.into_iter().map(Option::unwrap).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_parses_to_expected_terms() {
        let sys = parse_system(
            "f1 = 8*(x2 - x1); f2 = x1*(0.5 - x3) - x2; f3 = x1*x2 - 4*x3;",
        )
        .unwrap();
        let f = sys.poly_field().unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.degree(), 2);
        let v = f.eval(&[1.0, 2.0, 3.0]);
        assert_eq!(v, vec![8.0, 1.0 * (0.5 - 3.0) - 2.0, 2.0 - 12.0]);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_polynomial("x1 + x3", 2) {
            Err(PolyError::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_polynomial("x1^-1", 1),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            parse_polynomial("x1^1/2", 1),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            parse_polynomial("y + 1", 1),
            Err(PolyError::Parse { .. })
        ));
    }

    #[test]
    fn abs_accepts_bare_and_parenthesized_rationals() {
        let a = parse_expr("abs(x1)^1/3", 1).unwrap();
        let b = parse_expr("abs(x1)^(1/3)", 1).unwrap();
        assert_eq!(a, b);
        assert!((a.eval(&[-27.0]) - 3.0).abs() < 1e-12);
    }
}
