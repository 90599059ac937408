//! Scalar expressions in one variable `r`, used for warping functions.
//!
//! Supports `+ - * / ^`, unary minus, numeric literals, `pi`, and the
//! functions `sin cos tan exp ln log sqrt sinh cosh tanh`. Derivatives are
//! taken symbolically so curvature can be evaluated without finite
//! differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
        }
    }
}

/// Expression tree. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Call(Func, Arc<Expr>),
}

use Expr::*;

fn c(v: f64) -> Expr {
    Const(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x + y),
        (Const(x), _) if *x == 0.0 => b,
        (_, Const(y)) if *y == 0.0 => a,
        _ => Add(Arc::new(a), Arc::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x - y),
        (_, Const(y)) if *y == 0.0 => a,
        (Const(x), _) if *x == 0.0 => neg(b),
        _ => Sub(Arc::new(a), Arc::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x * y),
        (Const(x), _) | (_, Const(x)) if *x == 0.0 => Const(0.0),
        (Const(x), _) if *x == 1.0 => b,
        (_, Const(y)) if *y == 1.0 => a,
        _ => Mul(Arc::new(a), Arc::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Const(x), _) if *x == 0.0 => Const(0.0),
        (_, Const(y)) if *y == 1.0 => a,
        _ => Div(Arc::new(a), Arc::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Const(x) => Const(-x),
        Neg(inner) => (*inner).clone(),
        _ => Neg(Arc::new(a)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Const(y)) if *y == 1.0 => a,
        (_, Const(y)) if *y == 0.0 => Const(1.0),
        _ => Pow(Arc::new(a), Arc::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Call(f, Arc::new(a))
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { src, tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Const(v) => *v,
            Var => r,
            Add(a, b) => a.eval(r) + b.eval(r),
            Sub(a, b) => a.eval(r) - b.eval(r),
            Mul(a, b) => a.eval(r) * b.eval(r),
            Div(a, b) => a.eval(r) / b.eval(r),
            Pow(a, b) => {
                let base = a.eval(r);
                match **b {
                    Const(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(r)),
                }
            }
            Neg(a) => -a.eval(r),
            Call(f, a) => f.apply(a.eval(r)),
        }
    }

    /// Symbolic derivative with respect to `r`.
    pub fn derivative(&self) -> Expr {
        match self {
            Const(_) => c(0.0),
            Var => c(1.0),
            Add(a, b) => add(a.derivative(), b.derivative()),
            Sub(a, b) => sub(a.derivative(), b.derivative()),
            Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                pow((**b).clone(), c(2.0)),
            ),
            Pow(a, b) => {
                let (u, v) = ((**a).clone(), (**b).clone());
                if let Const(e) = v {
                    mul(mul(c(e), pow(u.clone(), c(e - 1.0))), u.derivative())
                } else {
                    // d(u^v) = u^v (v' ln u + v u'/u)
                    mul(
                        self.clone(),
                        add(
                            mul(v.derivative(), call(Func::Ln, u.clone())),
                            div(mul(v, u.derivative()), u),
                        ),
                    )
                }
            }
            Neg(a) => neg(a.derivative()),
            Call(f, a) => {
                let u = (**a).clone();
                let du = u.derivative();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => div(c(1.0), pow(call(Func::Cos, u), c(2.0))),
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => div(c(1.0), u),
                    Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
                    Func::Sinh => call(Func::Cosh, u),
                    Func::Cosh => call(Func::Sinh, u),
                    Func::Tanh => sub(c(1.0), pow(call(Func::Tanh, u), c(2.0))),
                };
                mul(outer, du)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(v) => write!(f, "{v}"),
            Var => write!(f, "r"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Neg(a) => write!(f, "(-{a})"),
            Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Expression {
                expr: src.to_string(),
                reason: format!("bad number `{text}`"),
            })?;
            out.push(Token::Num(v));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            out.push(Token::Op(ch));
            i += 1;
        } else {
            return Err(Error::Expression {
                expr: src.to_string(),
                reason: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> Error {
        Error::Expression {
            expr: self.src.to_string(),
            reason: format!("{reason} at token {}", self.pos),
        }
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Add(Arc::new(lhs), Arc::new(rhs))
            } else {
                Sub(Arc::new(lhs), Arc::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Mul(Arc::new(lhs), Arc::new(rhs))
            } else {
                Div(Arc::new(lhs), Arc::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Neg(Arc::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // `^` is right-associative and binds tighter than unary minus on its left.
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Pow(Arc::new(base), Arc::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.tokens.get(self.pos).cloned();
        match tok {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Const(v))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "r" => Ok(Var),
                    "pi" => Ok(Const(std::f64::consts::PI)),
                    _ => {
                        let func = Func::from_name(&name)
                            .ok_or_else(|| self.err(&format!("unknown identifier `{name}`")))?;
                        self.expect('(')?;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        Ok(Call(func, Arc::new(arg)))
                    }
                }
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(self.err("expected a value")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("2 + 3 * r ^ 2 ^ 1 - -1").unwrap();
        assert_relative_eq!(e.eval(2.0), 2.0 + 12.0 + 1.0);
        let e = Expr::parse("-r^2").unwrap();
        assert_relative_eq!(e.eval(3.0), -9.0);
        let e = Expr::parse("1e-2 * r / 4").unwrap();
        assert_relative_eq!(e.eval(8.0), 0.02);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("r +").is_err());
        assert!(Expr::parse("foo(r)").is_err());
        assert!(Expr::parse("r $ 2").is_err());
        assert!(Expr::parse("(r").is_err());
    }

    #[test]
    fn derivatives_of_elementary_functions() {
        let cases: &[(&str, fn(f64) -> f64)] = &[
            ("sinh(r)", |r| r.cosh()),
            ("sin(2*r)", |r| 2.0 * (2.0 * r).cos()),
            ("exp(-(r-1)^2/0.01)", |r| {
                -2.0 * (r - 1.0) / 0.01 * (-(r - 1.0).powi(2) / 0.01).exp()
            }),
            ("sqrt(r) * ln(r)", |r| 0.5 / r.sqrt() * r.ln() + r.sqrt() / r),
            ("r^r", |r| r.powf(r) * (r.ln() + 1.0)),
            ("tanh(r)/cosh(r)", |r| {
                ((1.0 - r.tanh().powi(2)) * r.cosh() - r.tanh() * r.sinh()) / r.cosh().powi(2)
            }),
        ];
        for (src, exact) in cases {
            let d = Expr::parse(src).unwrap().derivative();
            for &r in &[0.3, 0.9, 1.7] {
                assert_relative_eq!(d.eval(r), exact(r), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn second_derivative_of_polynomial() {
        let e = Expr::parse("r^3 - 2*r").unwrap();
        let d2 = e.derivative().derivative();
        assert_relative_eq!(d2.eval(1.5), 9.0);
    }
}
