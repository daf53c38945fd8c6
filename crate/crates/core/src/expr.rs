//! Scalar expressions `f(x, y, z, u)` for pointwise nonlinearities.
//!
//! The grammar is small and fixed:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-"? power
//! power  := atom ("^" unary)?          (right-associative)
//! atom   := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"
//! VAR    := x | y | z | u
//! FUNC   := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! so `-u^2` is `-(u^2)` and `2^-u` is `2^(-u)`. Derivatives are taken with
//! respect to `u` only and are returned with literal subtrees folded.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A variable of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Z,
    U,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::U => "u",
        }
    }

    /// The spatial coordinate variable for axis `axis` (0, 1, 2).
    pub fn coordinate(axis: usize) -> Option<Var> {
        match axis {
            0 => Some(Var::X),
            1 => Some(Var::Y),
            2 => Some(Var::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree. Immutable once built; cheap to share behind `&`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values for the four variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Binding {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

impl Binding {
    /// Binds spatial coordinates (missing axes are 0) and `u`.
    pub fn at(coords: [f64; 3], u: f64) -> Self {
        Binding { x: coords[0], y: coords[1], z: coords[2], u }
    }

    fn get(&self, var: Var) -> f64 {
        match var {
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
            Var::U => self.u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive argument {0}")]
    LogNonPositive(f64),
    #[error("sqrt of negative argument {0}")]
    SqrtNegative(f64),
    #[error("fractional power {exponent} of negative base {base}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("non-finite intermediate result")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("`{0}` is not differentiable in u")]
    NotDifferentiable(&'static str),
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr::Num(value)
    }

    pub fn var(var: Var) -> Expr {
        Expr::Var(var)
    }

    /// True when `var` occurs anywhere in the tree.
    pub fn contains(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.contains(var),
            Expr::Binary(_, a, b) => a.contains(var) || b.contains(var),
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.walk(visit),
            Expr::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
        }
    }

    pub fn evaluate(&self, binding: &Binding) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Num(c) => *c,
            Expr::Var(v) => binding.get(*v),
            Expr::Neg(a) => -a.evaluate(binding)?,
            Expr::Binary(op, a, b) => {
                let l = a.evaluate(binding)?;
                let r = b.evaluate(binding)?;
                apply_binary(*op, l, r)?
            }
            Expr::Call(func, a) => apply_func(*func, a.evaluate(binding)?)?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Symbolic partial derivative with respect to `u`.
    pub fn differentiate_u(&self) -> Result<Expr, DiffError> {
        if !self.contains(Var::U) {
            return Ok(Expr::Num(0.0));
        }
        Ok(match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == Var::U { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate_u()?),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                let da = a.differentiate_u()?;
                let db = b.differentiate_u()?;
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a.clone(), db)),
                    BinOp::Div => {
                        if b.contains(Var::U) {
                            div(sub(mul(da, b.clone()), mul(a.clone(), db)), pow(b.clone(), Expr::Num(2.0)))
                        } else {
                            div(da, b.clone())
                        }
                    }
                    BinOp::Pow => {
                        if !b.contains(Var::U) {
                            let lowered = sub(b.clone(), Expr::Num(1.0));
                            mul(mul(b.clone(), pow(a.clone(), lowered)), da)
                        } else if !a.contains(Var::U) {
                            mul(mul(self.clone(), call(Func::Log, a.clone())), db)
                        } else {
                            // d(a^b) = a^b (b' ln a + b a' / a)
                            mul(
                                self.clone(),
                                add(mul(db, call(Func::Log, a.clone())), div(mul(b.clone(), da), a.clone())),
                            )
                        }
                    }
                }
            }
            Expr::Call(func, a) => {
                let inner = a.as_ref().clone();
                let da = a.differentiate_u()?;
                match func {
                    Func::Sin => mul(call(Func::Cos, inner), da),
                    Func::Cos => mul(neg(call(Func::Sin, inner)), da),
                    Func::Exp => mul(call(Func::Exp, inner), da),
                    Func::Log => div(da, inner),
                    Func::Sqrt => div(da, mul(Expr::Num(2.0), call(Func::Sqrt, inner))),
                    Func::Abs => return Err(DiffError::NotDifferentiable("abs")),
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(c) if c.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn apply_binary(op: BinOp, l: f64, r: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => l + r,
        BinOp::Sub => l - r,
        BinOp::Mul => l * r,
        BinOp::Div => {
            if r == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            l / r
        }
        BinOp::Pow => power(l, r)?,
    })
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(EvalError::NegativeBase { base, exponent });
    }
    Ok(base.powf(exponent))
}

fn apply_func(func: Func, a: f64) -> Result<f64, EvalError> {
    Ok(match func {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(EvalError::LogNonPositive(a));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(EvalError::SqrtNegative(a));
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
    })
}

// Folding constructors used by the differentiator.

fn literal(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(c) => Some(*c),
        _ => None,
    }
}

fn fold(op: BinOp, a: Expr, b: Expr) -> Expr {
    if let (Some(l), Some(r)) = (literal(&a), literal(&b)) {
        if let Ok(v) = apply_binary(op, l, r) {
            if v.is_finite() {
                return Expr::Num(v);
            }
        }
    }
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (literal(&a), literal(&b)) {
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => fold(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (literal(&a), literal(&b)) {
        (_, Some(0.0)) => a,
        (Some(0.0), None) => neg(b),
        _ => fold(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (literal(&a), literal(&b)) {
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => fold(BinOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (literal(&a), literal(&b)) {
        (_, Some(1.0)) => a,
        (Some(0.0), _) => Expr::Num(0.0),
        _ => fold(BinOp::Div, a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match literal(&b) {
        Some(1.0) => a,
        Some(0.0) => Expr::Num(1.0),
        _ => fold(BinOp::Pow, a, b),
    }
}

fn call(func: Func, a: Expr) -> Expr {
    if let Some(c) = literal(&a) {
        if let Ok(v) = apply_func(func, c) {
            if v.is_finite() {
                return Expr::Num(v);
            }
        }
    }
    Expr::Call(func, Box::new(a))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(BinOp::Pow, a, b) => {
                write_child(f, a, a.precedence() < 5)?;
                f.write_str("^")?;
                write_child(f, b, b.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let own = self.precedence();
                write_child(f, a, a.precedence() < own)?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, b, b.precedence() <= own)
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Parses `text` under the fixed grammar.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, at: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        (Tok::End, _) => Ok(expr),
        (tok, pos) => Err(ParseError::Syntax { pos, msg: format!("unexpected {}", tok.describe()) }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lexeme = &text[start..i];
                let value: f64 = lexeme
                    .parse()
                    .map_err(|_| ParseError::Syntax { pos: start, msg: format!("malformed number `{lexeme}`") })?;
                if !value.is_finite() {
                    return Err(ParseError::Syntax { pos: start, msg: format!("number `{lexeme}` out of range") });
                }
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax { pos: i, msg: format!("unexpected character `{ch}`") });
            }
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> (Tok, usize) {
        self.tokens[self.at].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.peek();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let (tok, pos) = self.bump();
        if tok == want {
            Ok(())
        } else {
            Err(ParseError::Syntax { pos, msg: format!("expected {}, found {}", want.describe(), tok.describe()) })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().0 == Tok::Op('-') {
            self.bump();
            Ok(Expr::Neg(Box::new(self.power()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let var = match name.as_str() {
                    "x" => Some(Var::X),
                    "y" => Some(Var::Y),
                    "z" => Some(Var::Z),
                    "u" => Some(Var::U),
                    _ => None,
                };
                if let Some(var) = var {
                    return Ok(Expr::Var(var));
                }
                let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier { pos, name: name.clone() })?;
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            other => Err(ParseError::Syntax {
                pos,
                msg: format!("expected a number, variable, function or `(`, found {}", other.describe()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn num(v: f64) -> Box<Expr> {
        Box::new(Expr::Num(v))
    }

    fn var(v: Var) -> Box<Expr> {
        Box::new(Expr::Var(v))
    }

    #[test]
    fn parses_example_nonlinearity_as_product() {
        let e = p("(1 - 1/(x^2+y^2+z^2)) * (10*u - 1)");
        let Expr::Binary(BinOp::Mul, left, right) = &e else {
            panic!("expected a product at the top, got {e:?}");
        };
        assert!(matches!(left.as_ref(), Expr::Binary(BinOp::Sub, ..)));
        assert!(matches!(right.as_ref(), Expr::Binary(BinOp::Sub, ..)));
        assert_eq!(e.variables(), [Var::X, Var::Y, Var::Z, Var::U].into_iter().collect());
    }

    #[test]
    fn single_variable() {
        assert_eq!(p("u"), Expr::Var(Var::U));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn sum_of_call_and_power() {
        // Hand trace: expr -> term(sin(...)) "+" term(power(u ^ 2)).
        let expected = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Call(Func::Sin, Box::new(Expr::Binary(BinOp::Mul, num(3.14), var(Var::X))))),
            Box::new(Expr::Binary(BinOp::Pow, var(Var::U), num(2.0))),
        );
        assert_eq!(p("sin(3.14*x) + u^2"), expected);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("-u^2"), Expr::Neg(Box::new(Expr::Binary(BinOp::Pow, var(Var::U), num(2.0)))));
        assert_eq!(
            p("2^3^2"),
            Expr::Binary(BinOp::Pow, num(2.0), Box::new(Expr::Binary(BinOp::Pow, num(3.0), num(2.0))))
        );
        assert_eq!(
            p("1 - 2 - 3"),
            Expr::Binary(BinOp::Sub, Box::new(Expr::Binary(BinOp::Sub, num(1.0), num(2.0))), num(3.0))
        );
        assert_eq!(p("2^-1").evaluate(&Binding::default()).unwrap(), 0.5);
        assert_eq!(p("2*-3").evaluate(&Binding::default()).unwrap(), -6.0);
        assert_eq!(p("1.5e2 + .5").evaluate(&Binding::default()).unwrap(), 150.5);
    }

    #[test]
    fn rejects_unknown_identifiers_and_bad_syntax() {
        assert_eq!(parse("2*w"), Err(ParseError::UnknownIdentifier { pos: 2, name: "w".into() }));
        assert!(matches!(parse("tan(u)"), Err(ParseError::UnknownIdentifier { pos: 0, .. })));
        assert!(matches!(parse("(u + 1"), Err(ParseError::Syntax { pos: 6, .. })));
        assert!(matches!(parse("u +"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("sin u"), Err(ParseError::Syntax { pos: 4, .. })));
        assert!(matches!(parse("u $ 2"), Err(ParseError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("--u"), Err(ParseError::Syntax { pos: 1, .. })));
        assert!(matches!(parse(""), Err(ParseError::Syntax { pos: 0, .. })));
    }

    #[test]
    fn evaluates() {
        let b = Binding { u: 5.0, ..Default::default() };
        assert_eq!(p("u").evaluate(&b).unwrap(), 5.0);
        let b = Binding { x: 1.0, u: 2.0, ..Default::default() };
        assert_eq!(p("2*u + x").evaluate(&b).unwrap(), 5.0);
        let b = Binding { x: 1.0, y: 1.0, z: 1.0, u: 0.0 };
        let v = p("(1 - 1/(x^2+y^2+z^2))*(10*u - 1)").evaluate(&b).unwrap();
        assert!((v - (-2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let b = Binding::default();
        assert_eq!(p("1/u").evaluate(&b), Err(EvalError::DivisionByZero));
        assert_eq!(p("log(u)").evaluate(&b), Err(EvalError::LogNonPositive(0.0)));
        assert_eq!(p("sqrt(u - 1)").evaluate(&b), Err(EvalError::SqrtNegative(-1.0)));
        assert!(matches!(p("(u-2)^0.5").evaluate(&b), Err(EvalError::NegativeBase { .. })));
        assert_eq!(p("u^-1").evaluate(&b), Err(EvalError::DivisionByZero));
        assert_eq!(p("exp(1000)").evaluate(&b), Err(EvalError::NonFinite));
        // Integer exponents of negative bases are fine.
        assert_eq!(p("(u-2)^3").evaluate(&b).unwrap(), -8.0);
        assert_eq!(p("abs(u-2)").evaluate(&b).unwrap(), 2.0);
    }

    #[test]
    fn derivative_of_affine_is_constant() {
        assert_eq!(p("10*u - 1").differentiate_u().unwrap(), Expr::Num(10.0));
    }

    #[test]
    fn derivative_of_example_nonlinearity() {
        let d = p("(1 - 1/(x^2+y^2+z^2))*(10*u-1)").differentiate_u().unwrap();
        assert_eq!(d, p("(1 - 1/(x^2+y^2+z^2))*10"));
        assert_eq!(d.to_string(), "(1 - 1 / (x^2 + y^2 + z^2)) * 10");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = p("sin(u)^2");
        let d = e.differentiate_u().unwrap();
        let u: f64 = 0.3;
        let exact = 2.0 * u.sin() * u.cos();
        let got = d.evaluate(&Binding { u, ..Default::default() }).unwrap();
        assert!((got - exact).abs() <= 1e-15 * exact.abs());
        let step = 1e-6;
        let fd = (e.evaluate(&Binding { u: u + step, ..Default::default() }).unwrap()
            - e.evaluate(&Binding { u: u - step, ..Default::default() }).unwrap())
            / (2.0 * step);
        assert!(((got - fd) / got).abs() < 1e-8, "fd {fd} vs {got}");
    }

    #[test]
    fn general_power_rule() {
        let e = p("u^u");
        let d = e.differentiate_u().unwrap();
        let u: f64 = 1.7;
        let exact = u.powf(u) * (u.ln() + 1.0);
        let got = d.evaluate(&Binding { u, ..Default::default() }).unwrap();
        assert!((got - exact).abs() < 1e-12 * exact);
        let d = p("2^u").differentiate_u().unwrap();
        let got = d.evaluate(&Binding { u, ..Default::default() }).unwrap();
        assert!((got - 2f64.powf(u) * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn abs_is_not_differentiable_in_u() {
        assert_eq!(p("abs(u) + 1").differentiate_u(), Err(DiffError::NotDifferentiable("abs")));
        // abs of a u-free subtree has zero derivative.
        assert_eq!(p("abs(x) * u").differentiate_u().unwrap(), p("abs(x)"));
    }

    #[test]
    fn printing_parenthesizes_where_needed() {
        for s in ["-(-u)", "(-u)^2", "2^(1 + u)", "1 - (2 - u)", "u / (x * y)", "sin(u)^-2", "-u^2"] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
    }
}
