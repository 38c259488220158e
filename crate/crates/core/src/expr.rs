//! A small expression language for smooth periodic inputs.
//!
//! An expression is a sum of terms, each a constant times a product of
//! sinusoids of affine arguments:
//!
//! ```text
//! expr    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := number | 'pi' | '-' factor | ('sin'|'cos') '(' affine ')' | '(' expr ')'
//! affine  := ['+'|'-'] aterm (('+'|'-') aterm)*
//! aterm   := atom ('*' atom)*          (at most one variable per aterm)
//! atom    := ['-'] (number | 'pi' | variable)
//! variable:= 'x' | 'y' | 'z' | 'x1'..'x9' | 't' | 't1'..'t9'
//! ```
//!
//! `x, y, z` are the first three torus coordinates and `t` (= `t1`) the
//! first fiber coordinate. Derivatives are exact because the family is
//! closed under differentiation.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    Space(usize),
    Fiber(usize),
}

/// `sin(Σ_v c_v·v + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinusoid {
    freqs: Vec<(Var, f64)>,
    phase: f64,
}

impl Sinusoid {
    fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        let arg: f64 = self
            .freqs
            .iter()
            .map(|&(v, c)| {
                c * match v {
                    Var::Space(i) => x.get(i).copied().unwrap_or(0.0),
                    Var::Fiber(i) => t.get(i).copied().unwrap_or(0.0),
                }
            })
            .sum();
        (arg + self.phase).sin()
    }

    fn freq(&self, var: Var) -> f64 {
        self.freqs
            .iter()
            .filter(|(v, _)| *v == var)
            .map(|(_, c)| c)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    coeff: f64,
    factors: Vec<Sinusoid>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input at token {} in `{src}`",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![Term {
                coeff: c,
                factors: vec![],
            }],
        }
    }

    pub fn zero() -> Self {
        Self { terms: vec![] }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: c * t.coeff,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn sum(&self, other: &Expr) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn product(&self, other: &Expr) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    factors,
                });
            }
        }
        Self { terms }
    }

    /// Value at torus coordinates `x` and fiber coordinates `t`.
    pub fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coeff * term.factors.iter().map(|f| f.eval(x, t)).product::<f64>())
            .sum()
    }

    /// Value at `(x, t)` with a single time coordinate.
    pub fn eval_xt(&self, x: &[f64], t: f64) -> f64 {
        self.eval(x, &[t])
    }

    /// Exact partial derivative.
    pub fn derivative(&self, var: Var) -> Self {
        let mut terms = Vec::new();
        for term in &self.terms {
            for (i, f) in term.factors.iter().enumerate() {
                let c = f.freq(var);
                if c == 0.0 {
                    continue;
                }
                let mut factors = term.factors.clone();
                factors[i].phase += FRAC_PI_2;
                terms.push(Term {
                    coeff: term.coeff * c,
                    factors,
                });
            }
        }
        Self { terms }
    }

    pub fn d_space(&self, axis: usize) -> Self {
        self.derivative(Var::Space(axis))
    }

    pub fn d_time(&self) -> Self {
        self.derivative(Var::Fiber(0))
    }

    /// Highest space index + 1 and fiber index + 1 used.
    pub fn arity(&self) -> (usize, usize) {
        let mut s = 0;
        let mut f = 0;
        for term in &self.terms {
            for factor in &term.factors {
                for (v, _) in &factor.freqs {
                    match *v {
                        Var::Space(i) => s = s.max(i + 1),
                        Var::Fiber(i) => f = f.max(i + 1),
                    }
                }
            }
        }
        (s, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(fm, "0");
        }
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(fm, " + ")?;
            }
            write!(fm, "{:e}", term.coeff)?;
            for f in &term.factors {
                write!(fm, "*sin(")?;
                for (v, c) in &f.freqs {
                    let name = match v {
                        Var::Space(i) => format!("x{}", i + 1),
                        Var::Fiber(i) => format!("t{}", i + 1),
                    };
                    write!(fm, "{c:e}*{name} + ")?;
                }
                write!(fm, "{:e})", f.phase)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' | '·' => {
                out.push(Tok::Star);
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

fn variable(name: &str) -> Option<Var> {
    match name {
        "x" => Some(Var::Space(0)),
        "y" => Some(Var::Space(1)),
        "z" => Some(Var::Space(2)),
        "t" => Some(Var::Fiber(0)),
        _ => {
            let (head, tail) = name.split_at(1);
            let idx: usize = tail.parse().ok()?;
            if !(1..=9).contains(&idx) {
                return None;
            }
            match head {
                "x" => Some(Var::Space(idx - 1)),
                "t" => Some(Var::Fiber(idx - 1)),
                _ => None,
            }
        }
    }
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse(format!("expected {tok:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Plus) => self.pos += 1,
            Some(Tok::Minus) => {
                self.pos += 1;
                sign = -1.0
            }
            _ => {}
        }
        let mut acc = self.term()?.scaled(sign);
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.sum(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.sum(&self.term()?.scaled(-1.0));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            acc = acc.product(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::constant(v)),
            Some(Tok::Minus) => Ok(self.factor()?.scaled(-1.0)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "pi" => Ok(Expr::constant(std::f64::consts::PI)),
                "sin" | "cos" => {
                    self.expect(Tok::LParen)?;
                    let (freqs, mut phase) = self.affine()?;
                    self.expect(Tok::RParen)?;
                    if name == "cos" {
                        phase += FRAC_PI_2;
                    }
                    Ok(Expr {
                        terms: vec![Term {
                            coeff: 1.0,
                            factors: vec![Sinusoid { freqs, phase }],
                        }],
                    })
                }
                other => Err(Error::Parse(format!(
                    "`{other}` is not allowed outside sin/cos (only sums of c·sin(..)·cos(..) products)"
                ))),
            },
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }

    fn affine(&mut self) -> Result<(Vec<(Var, f64)>, f64)> {
        let mut freqs: Vec<(Var, f64)> = Vec::new();
        let mut phase = 0.0;
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Plus) => self.pos += 1,
            Some(Tok::Minus) => {
                self.pos += 1;
                sign = -1.0
            }
            _ => {}
        }
        loop {
            let (var, c) = self.aterm()?;
            match var {
                Some(v) => freqs.push((v, sign * c)),
                None => phase += sign * c,
            }
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    sign = 1.0
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    sign = -1.0
                }
                _ => return Ok((freqs, phase)),
            }
        }
    }

    fn aterm(&mut self) -> Result<(Option<Var>, f64)> {
        let mut coeff = 1.0;
        let mut var = None;
        loop {
            match self.next() {
                Some(Tok::Minus) => {
                    coeff = -coeff;
                    continue;
                }
                Some(Tok::Num(v)) => coeff *= v,
                Some(Tok::Ident(name)) if name == "pi" => coeff *= std::f64::consts::PI,
                Some(Tok::Ident(name)) => {
                    let v = variable(&name)
                        .ok_or_else(|| Error::Parse(format!("unknown variable `{name}`")))?;
                    if var.replace(v).is_some() {
                        return Err(Error::Parse("argument must be affine".into()));
                    }
                }
                other => return Err(Error::Parse(format!("unexpected token {other:?}"))),
            }
            if let Some(Tok::Star) = self.peek() {
                self.pos += 1;
            } else {
                return Ok((var, coeff));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("1e-3*sin(x)*sin(t)").unwrap();
        let v = e.eval_xt(&[0.7], 0.4);
        assert!((v - 1e-3 * 0.7f64.sin() * 0.4f64.sin()).abs() < 1e-18);
        let e = Expr::parse("0.3*sin(x)*cos(t) - 0.1 + cos(2*x + y - 0.5)").unwrap();
        let (x, y, t): (f64, f64, f64) = (0.3, 1.1, 0.9);
        let exact = 0.3 * x.sin() * t.cos() - 0.1 + (2.0 * x + y - 0.5).cos();
        assert!((e.eval(&[x, y], &[t]) - exact).abs() < 1e-15);
        assert_eq!(e.arity(), (2, 1));
    }

    #[test]
    fn parenthesized_sums_distribute() {
        let e = Expr::parse("(1 + 0.2*sin(x))*cos(t)").unwrap();
        let exact = (1.0 + 0.2 * 0.5f64.sin()) * 0.25f64.cos();
        assert!((e.eval_xt(&[0.5], 0.25) - exact).abs() < 1e-15);
    }

    #[test]
    fn derivatives_are_exact() {
        let e = Expr::parse("0.2*sin(x)*sin(t) + cos(3*x2 - t)").unwrap();
        let (x, y, t): (f64, f64, f64) = (0.4, 1.3, 0.8);
        let dt = e.d_time().eval(&[x, y], &[t]);
        let exact = 0.2 * x.sin() * t.cos() + (3.0 * y - t).sin();
        assert!((dt - exact).abs() < 1e-14);
        let dyy = e.d_space(1).d_space(1).eval(&[x, y], &[t]);
        assert!((dyy + 9.0 * (3.0 * y - t).cos()).abs() < 1e-13);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("exp(x)").is_err());
        assert!(Expr::parse("sin(x*y)").is_err());
        assert!(Expr::parse("sin(q)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("sin(x))").is_err());
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("0.3*sin(x)*cos(t) - 0.1").unwrap();
        let back = Expr::parse(&e.to_string()).unwrap();
        for &(x, t) in &[(0.1, 0.2), (2.0, 0.7)] {
            assert!((e.eval_xt(&[x], t) - back.eval_xt(&[x], t)).abs() < 1e-14);
        }
    }
}
