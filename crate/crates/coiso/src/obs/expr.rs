//! Arithmetic expression language: lexer, recursive-descent parser,
//! printer and compiler to [`ScalarField`].
//!
//! Precedence from tightest: `^` (left-associative), unary `-`, `* /`, `+ -`.
//! So `-2^2` is `-(2^2)`. The right operand of `^` may itself carry a
//! unary minus (`2^-1`).
//!
//! Identifiers are `[A-Za-z_][A-Za-z0-9_]*`. When a non-builtin identifier
//! is followed directly by `(`, the balanced parenthesized text becomes part
//! of the name, so lattice accessors like `a(1,0,0,0,k=1)` are single
//! variables. A trailing `()` is dropped: `J1()` and `J1` are the same.

use std::fmt;
use std::sync::Arc;

use super::Registry;
use crate::geomcore::Chart;
use crate::{Error, Result, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
            Op::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
            Op::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [Builtin::Sin, Builtin::Cos, Builtin::Exp, Builtin::Sqrt, Builtin::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == s)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Builtin::Sin => x.sin(),
            Builtin::Cos => x.cos(),
            Builtin::Exp => x.exp(),
            Builtin::Sqrt => x.sqrt(),
            Builtin::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Builtin, Box<Expr>),
}

/// Fully parenthesized output; `parse(&e.to_string()) == e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(s) => f.write_str(s),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(b, e) => write!(f, "{}({e})", b.name()),
        }
    }
}

impl Expr {
    /// Evaluates with `lookup` resolving variables.
    pub fn eval_with(&self, lookup: &mut impl FnMut(&str) -> Result<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(s) => lookup(s)?,
            Expr::Neg(e) => -e.eval_with(lookup)?,
            Expr::Bin(op, a, b) => op.apply(a.eval_with(lookup)?, b.eval_with(lookup)?),
            Expr::Call(b, e) => b.apply(e.eval_with(lookup)?),
        })
    }

    /// Constant folding for variable-free expressions.
    pub fn eval_const(&self) -> Result<f64> {
        self.eval_with(&mut |s: &str| Err(Error::UnknownIdentifier(s.to_string())))
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(s) => {
                if !out.contains(&s.as_str()) {
                    out.push(s);
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(Op),
    LParen,
    RParen,
    End,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                let op = match c {
                    b'+' => Op::Add,
                    b'-' => Op::Sub,
                    b'*' => Op::Mul,
                    b'/' => Op::Div,
                    _ => Op::Pow,
                };
                out.push((Tok::Op(op), start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                        j += 1;
                    }
                    if j < b.len() && b[j].is_ascii_digit() {
                        while j < b.len() && b[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !v.is_finite() {
                    return Err(syntax(start, format!("number `{text}` overflows")));
                }
                out.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                let mut name = word.to_string();
                if Builtin::from_name(word).is_none() && i < b.len() && b[i] == b'(' {
                    let mut depth = 0usize;
                    let mut j = i;
                    loop {
                        match b.get(j) {
                            None => return Err(syntax(i, "unclosed `(` in accessor name")),
                            Some(b'(') => depth += 1,
                            Some(b')') => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            Some(_) => {}
                        }
                        j += 1;
                    }
                    let suffix = &src[i..=j];
                    if suffix != "()" {
                        name.push_str(suffix);
                    }
                    i = j + 1;
                }
                out.push((Tok::Ident(name), start));
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ (Op::Add | Op::Sub)) = *self.peek() {
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ (Op::Mul | Op::Div)) = *self.peek() {
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op(Op::Sub) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut lhs = self.atom()?;
        while *self.peek() == Tok::Op(Op::Pow) {
            self.bump();
            lhs = Expr::Bin(Op::Pow, Box::new(lhs), Box::new(self.exponent()?));
        }
        Ok(lhs)
    }

    fn exponent(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op(Op::Sub) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.exponent()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) => match Builtin::from_name(&name) {
                Some(b) => {
                    if self.bump() != Tok::LParen {
                        return Err(syntax(at, format!("builtin `{name}` takes one parenthesized argument")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(b, Box::new(arg)))
                }
                None => Ok(Expr::Var(name)),
            },
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::End => Err(syntax(at, "unexpected end of input")),
            t => Err(syntax(at, format!("unexpected token {t:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let at = self.offset();
        match self.bump() {
            Tok::RParen => Ok(()),
            Tok::End => Err(syntax(at, "expected `)` before end of input")),
            _ => Err(syntax(at, "expected `)`")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), "trailing input"));
    }
    Ok(e)
}

enum Slot {
    Coord(usize),
    Field(ScalarField),
}

/// Resolves every variable against chart coordinates and `registry`,
/// yielding a closed evaluator. Gradients are left to the backend.
pub fn compile(ast: &Expr, chart: &Arc<Chart>, registry: &Registry) -> Result<ScalarField> {
    let names: Vec<String> = ast.variables().into_iter().map(str::to_string).collect();
    let mut slots = Vec::with_capacity(names.len());
    for name in &names {
        let coord = chart.index_of(name);
        let field = registry.get(name);
        slots.push(match (coord, field) {
            (Some(_), Some(_)) => {
                return Err(Error::Invalid(format!("`{name}` is both a coordinate and a registered observable")))
            }
            (Some(i), None) => Slot::Coord(i),
            (None, Some(f)) => {
                f.chart().ensure_same(chart, "observable vs expression chart")?;
                Slot::Field(f.clone())
            }
            (None, None) => return Err(Error::UnknownIdentifier(name.clone())),
        });
    }
    let ast = ast.clone();
    let text = ast.to_string();
    Ok(ScalarField::try_new(chart.clone(), move |x| {
        let v = ast.eval_with(&mut |s: &str| {
            let k = names.iter().position(|n| n == s).expect("resolved at compile time");
            match &slots[k] {
                Slot::Coord(i) => Ok(x[*i]),
                Slot::Field(f) => f.eval(x),
            }
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("expression {text}")))
        }
    }))
}
