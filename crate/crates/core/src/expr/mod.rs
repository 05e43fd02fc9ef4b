//! Surface expressions in `u`, `v` and the family parameter `lambda`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' '-'? integer)?
//! base   := number | u | v | lambda | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | ln | sqrt | atan
//! ```
//!
//! Numbers accept an optional fraction and exponent (`1.5e-3`). A minus sign
//! directly in front of a bare number literal folds into the literal.

mod jet;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jet::{Jet, Var, MAX_ORDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Atan,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    U,
    V,
    Lambda,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Number of non-leaf nodes.
    pub fn operator_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::U | Expr::V | Expr::Lambda => 0,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.operator_count(),
            Expr::Bin(_, a, b) => 1 + a.operator_count() + b.operator_count(),
        }
    }

    pub fn uses_lambda(&self) -> bool {
        match self {
            Expr::Lambda => true,
            Expr::Num(_) | Expr::U | Expr::V => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.uses_lambda(),
            Expr::Bin(_, a, b) => a.uses_lambda() || b.uses_lambda(),
        }
    }

    /// Jet of the expression at `(u, v)` truncated at `order`.
    pub fn jet(&self, u: f64, v: f64, lambda: f64, order: usize) -> Result<Jet, ExprError> {
        Ok(match self {
            Expr::Num(x) => Jet::constant(order, *x),
            Expr::U => Jet::variable(order, u, Var::U),
            Expr::V => Jet::variable(order, v, Var::V),
            Expr::Lambda => Jet::constant(order, lambda),
            Expr::Neg(a) => -a.jet(u, v, lambda, order)?,
            Expr::Bin(op, a, b) => {
                let a = a.jet(u, v, lambda, order)?;
                let b = b.jet(u, v, lambda, order)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.div(&b)?,
                }
            }
            Expr::Pow(a, n) => a.jet(u, v, lambda, order)?.powi(*n)?,
            Expr::Call(f, a) => {
                let a = a.jet(u, v, lambda, order)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln()?,
                    Func::Sqrt => a.sqrt()?,
                    Func::Atan => a.atan(),
                }
            }
        })
    }

    /// Plain value at a point.
    pub fn eval(&self, u: f64, v: f64, lambda: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::U => u,
            Expr::V => v,
            Expr::Lambda => lambda,
            Expr::Neg(a) => -a.eval(u, v, lambda)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(u, v, lambda)?;
                let b = b.eval(u, v, lambda)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain("division by zero".into()));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, n) => {
                let a = a.eval(u, v, lambda)?;
                if *n < 0 && a == 0.0 {
                    return Err(ExprError::Domain("negative power of zero".into()));
                }
                a.powi(*n)
            }
            Expr::Call(f, a) => {
                let a = a.eval(u, v, lambda)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln if a > 0.0 => a.ln(),
                    Func::Sqrt if a >= 0.0 => a.sqrt(),
                    Func::Atan => a.atan(),
                    Func::Ln | Func::Sqrt => {
                        return Err(ExprError::Domain(format!("{}({a})", f.name())))
                    }
                }
            }
        })
    }

    fn is_leaf(&self) -> bool {
        match self {
            Expr::Num(x) => *x >= 0.0 || x.is_nan(),
            Expr::U | Expr::V | Expr::Lambda => true,
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::U => f.write_str("u"),
            Expr::V => f.write_str("v"),
            Expr::Lambda => f.write_str("lambda"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, n) if a.is_leaf() => write!(f, "{a}^{n}"),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            self.skip_ws();
            let start = self.pos;
            let inner = self.factor()?;
            // `-3` is the literal -3, `-(3)` stays a negation
            if let Expr::Num(x) = inner {
                if self.src.as_bytes()[start].is_ascii_digit() || self.src.as_bytes()[start] == b'.' {
                    return Ok(Expr::Num(-x));
                }
            }
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            let neg = self.peek() == Some(b'-');
            if neg {
                self.pos += 1;
            }
            let digits_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == digits_start {
                self.pos = start;
                return Err(self.err("expected integer exponent"));
            }
            if matches!(self.peek(), Some(b'.') | Some(b'e') | Some(b'E')) {
                return Err(self.err("exponent must be an integer"));
            }
            let n: i32 = self.src[digits_start..self.pos].parse().map_err(|_| {
                ExprError::Syntax { offset: start, message: "exponent out of range".into() }
            })?;
            return Ok(Expr::Pow(Box::new(base), if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                match name {
                    "u" => Ok(Expr::U),
                    "v" => Ok(Expr::V),
                    "lambda" => Ok(Expr::Lambda),
                    _ => match Func::from_name(name) {
                        Some(func) => {
                            if !self.eat(b'(') {
                                return Err(self.err("expected `(` after function name"));
                            }
                            let arg = self.expr()?;
                            if !self.eat(b')') {
                                return Err(self.err("expected `)`"));
                            }
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        None => Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start }),
                    },
                }
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(b'0'..=b'9')) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.err("malformed exponent"));
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax { offset: start, message: "malformed number".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = Expr::parse("1 + 2 * u ^ 2").unwrap();
        assert_eq!(e.eval(3.0, 0.0, 0.0).unwrap(), 19.0);
        let e = Expr::parse("-u^2").unwrap();
        assert_eq!(e.eval(3.0, 0.0, 0.0).unwrap(), -9.0);
        let e = Expr::parse("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0).unwrap(), 1.0);
        let e = Expr::parse("u - v - 1").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn negative_literal_folds() {
        assert_eq!(Expr::parse("-3").unwrap(), Expr::Num(-3.0));
        assert_eq!(Expr::parse("-(3)").unwrap(), Expr::Neg(Box::new(Expr::Num(3.0))));
        assert_eq!(Expr::parse("1.5e-3").unwrap(), Expr::Num(1.5e-3));
    }

    #[test]
    fn syntax_offsets() {
        match Expr::parse("u +* v") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("u^2.5"), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("(u"), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse(""), Err(ExprError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn unknown_names() {
        match Expr::parse("u + w") {
            Err(ExprError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "w");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("log(u)"), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn display_roundtrips() {
        for s in ["u^2/2 + v^2/2", "-3 + -(2)", "sqrt(1 - u^2 - v^2/1.69)", "(u+v)^-2*lambda", "(-3)^3", "1e-20*atan(u)"] {
            let e = Expr::parse(s).unwrap();
            assert_eq!(Expr::parse(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }

    #[test]
    fn lambda_binds_at_evaluation() {
        let e = Expr::parse("lambda*u*v").unwrap();
        assert!(e.uses_lambda());
        let j = e.jet(0.0, 0.0, 0.25, 2).unwrap();
        assert_eq!(j.partial(1, 1), 0.25);
    }

    #[test]
    fn jet_domain_errors() {
        let e = Expr::parse("1/u").unwrap();
        assert!(matches!(e.jet(0.0, 0.0, 0.0, 3), Err(ExprError::Domain(_))));
        let e = Expr::parse("sqrt(u)").unwrap();
        assert!(matches!(e.jet(0.0, 0.0, 0.0, 2), Err(ExprError::Domain(_))));
        assert!(e.jet(1.0, 0.0, 0.0, 2).is_ok());
    }
}
