//! A small smooth-expression language.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := primary ('^' factor)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2` is
//! `-(x^2)` and `2^3^2` is `2^9`. The exponent of `^` must be a constant
//! expression. Built-in constants are `pi` and `e`; functions are `sin`, `cos`,
//! `tan`, `exp`, `log` and `sqrt`. Non-smooth primitives (`abs`, `min`, ...) are
//! deliberately absent.

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, JetError, Univariate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        self.univariate().name()
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn univariate(self) -> Univariate {
        match self {
            Func::Sin => Univariate::Sin,
            Func::Cos => Univariate::Cos,
            Func::Tan => Univariate::Tan,
            Func::Exp => Univariate::Exp,
            Func::Log => Univariate::Log,
            Func::Sqrt => Univariate::Sqrt,
        }
    }

    fn eval(self, x: f64) -> Result<f64, JetError> {
        let bad = || JetError::Domain {
            func: self.name(),
            value: x,
        };
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Tan if x.cos().abs() > 1e-12 => Ok(x.tan()),
            Func::Exp => Ok(x.exp()),
            Func::Log if x > 0.0 => Ok(x.ln()),
            Func::Sqrt if x > 0.0 => Ok(x.sqrt()),
            _ => Err(bad()),
        }
    }
}

/// Expression syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(String),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {}", .expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("`{name}` takes 1 argument, got {got} (offset {offset})")]
    Arity {
        name: String,
        got: usize,
        offset: usize,
    },
    #[error("exponent at offset {offset} depends on a variable")]
    VariableExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::Arity { offset, .. }
            | ParseError::VariableExponent { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("expected {expected} coordinates, got {got}")]
    PointLength { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn fail<T>(&mut self, expected: &[&'static str]) -> Result<T, ParseError> {
        self.skip_ws();
        Err(ParseError::Syntax {
            offset: self.pos,
            expected: expected.to_vec(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let start = {
            self.skip_ws();
            self.pos
        };
        let exponent = self.factor()?;
        if exponent.has_vars() {
            return Err(ParseError::VariableExponent { offset: start });
        }
        Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        const EXPECTED: &[&str] = &["number", "identifier", "'('", "'-'"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.fail(&["')'", "operator"]);
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => self.fail(EXPECTED),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return self.fail(&["number"]);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` or `2ex`: not an exponent, leave for the caller
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        Ok(Expr::Number(text.parse().expect("validated float literal")))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string();
        if self.eat(b'(') {
            let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                name: name.clone(),
                offset: start,
            })?;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return self.fail(&["')'", "','", "operator"]);
            }
            if args.len() != 1 {
                return Err(ParseError::Arity {
                    name,
                    got: args.len(),
                    offset: start,
                });
            }
            return Ok(Expr::Call(func, args));
        }
        Ok(match name.as_str() {
            "pi" => Expr::Const(Constant::Pi),
            "e" => Expr::Const(Constant::E),
            _ => Expr::Var(name),
        })
    }
}

/// Parses an expression string.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized canonical form; `parse` inverts it exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Canonical text of an expression.
pub fn format(expr: &Expr) -> String {
    expr.to_string()
}

impl Expr {
    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Number(_) | Expr::Const(_) => false,
            Expr::Neg(e) => e.has_vars(),
            Expr::Binary(_, a, b) => a.has_vars() || b.has_vars(),
            Expr::Call(_, args) => args.iter().any(Expr::has_vars),
        }
    }

    /// Resolves variable names against a coordinate list.
    pub fn bind(&self, coords: &[String]) -> Result<Bound, EvalError> {
        let node = self.compile(coords)?;
        Ok(Bound {
            node,
            dim: coords.len(),
        })
    }

    fn compile(&self, coords: &[String]) -> Result<Node, EvalError> {
        Ok(match self {
            Expr::Number(v) => Node::Num(*v),
            Expr::Const(c) => Node::Num(c.value()),
            Expr::Var(name) => Node::Var(
                coords
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            ),
            Expr::Neg(e) => Node::Neg(Box::new(e.compile(coords)?)),
            Expr::Binary(BinOp::Pow, a, b) => {
                let exponent = b.compile(&[])?.eval(&[])?;
                let base = Box::new(a.compile(coords)?);
                if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
                    Node::PowInt(base, exponent as i32)
                } else {
                    Node::PowReal(base, exponent)
                }
            }
            Expr::Binary(op, a, b) => Node::Bin(
                *op,
                Box::new(a.compile(coords)?),
                Box::new(b.compile(coords)?),
            ),
            Expr::Call(func, args) => Node::Call(*func, Box::new(args[0].compile(coords)?)),
        })
    }
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    PowInt(Box<Node>, i32),
    PowReal(Box<Node>, f64),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, p: &[f64]) -> Result<f64, JetError> {
        Ok(match self {
            Node::Num(v) => *v,
            Node::Var(i) => p[*i],
            Node::Neg(e) => -e.eval(p)?,
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(p)?, b.eval(p)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.abs() <= 1e-300 {
                            return Err(JetError::DivisionByZero(b));
                        }
                        a / b
                    }
                    BinOp::Pow => unreachable!("pow is compiled to PowInt/PowReal"),
                }
            }
            Node::PowInt(a, n) => {
                let a = a.eval(p)?;
                if *n < 0 && a.abs() <= 1e-300 {
                    return Err(JetError::DivisionByZero(a));
                }
                a.powi(*n)
            }
            Node::PowReal(a, c) => {
                let a = a.eval(p)?;
                if a <= 0.0 {
                    return Err(JetError::Domain {
                        func: "pow",
                        value: a,
                    });
                }
                a.powf(*c)
            }
            Node::Call(f, a) => f.eval(a.eval(p)?)?,
        })
    }

    fn eval_jet(&self, vars: &[Jet], dim: usize, order: usize) -> Result<Jet, JetError> {
        Ok(match self {
            Node::Num(v) => Jet::constant(*v, dim, order)?,
            Node::Var(i) => vars[*i].clone(),
            Node::Neg(e) => -&e.eval_jet(vars, dim, order)?,
            Node::Bin(op, a, b) => {
                let a = a.eval_jet(vars, dim, order)?;
                let b = b.eval_jet(vars, dim, order)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.try_div(&b)?,
                    BinOp::Pow => unreachable!("pow is compiled to PowInt/PowReal"),
                }
            }
            Node::PowInt(a, n) => a.eval_jet(vars, dim, order)?.powi(*n)?,
            Node::PowReal(a, c) => a.eval_jet(vars, dim, order)?.apply(Univariate::Pow(*c))?,
            Node::Call(f, a) => a.eval_jet(vars, dim, order)?.apply(f.univariate())?,
        })
    }
}

/// An expression whose variables are resolved to coordinate slots.
#[derive(Debug, Clone)]
pub struct Bound {
    node: Node,
    dim: usize,
}

impl Bound {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_len(&self, p: &[f64]) -> Result<(), EvalError> {
        if p.len() != self.dim {
            return Err(EvalError::PointLength {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        self.check_len(p)?;
        let v = self.node.eval(p)?;
        if !v.is_finite() {
            return Err(JetError::NonFinite.into());
        }
        Ok(v)
    }

    /// Jet of the expression at `p`, seeding every coordinate as a variable.
    pub fn eval_jet(&self, p: &[f64], order: usize) -> Result<Jet, EvalError> {
        self.check_len(p)?;
        let vars = p
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(i, v, self.dim, order))
            .collect::<Result<Vec<_>, _>>()?;
        let j = self.node.eval_jet(&vars, self.dim, order)?;
        if !j.is_finite() {
            return Err(JetError::NonFinite.into());
        }
        Ok(j)
    }
}

/// Binds `expr` to `coords` and evaluates its jet at `point`.
pub fn eval_jet(
    expr: &Expr,
    coords: &[String],
    point: &[f64],
    order: usize,
) -> Result<Jet, EvalError> {
    expr.bind(coords)?.eval_jet(point, order)
}
