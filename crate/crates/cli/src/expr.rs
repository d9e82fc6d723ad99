//! A small arithmetic language for nonlinearities in config files.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names are the variables `x`, `t`, `u` and the constants `pi`, `e`;
//! functions are `sin`, `cos` and `exp`. `^` is right-associative and binds
//! tighter than unary minus, so `-u^2` is `-(u^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            Self::Syntax { offset, .. } | Self::UnknownIdentifier { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    U,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::U => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    /// Only produced by differentiation of `a^b` with `b` depending on the variable.
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64, u: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::U) => u,
            Expr::Neg(a) => -a.eval(t, x, u),
            Expr::Add(a, b) => a.eval(t, x, u) + b.eval(t, x, u),
            Expr::Sub(a, b) => a.eval(t, x, u) - b.eval(t, x, u),
            Expr::Mul(a, b) => a.eval(t, x, u) * b.eval(t, x, u),
            Expr::Div(a, b) => a.eval(t, x, u) / b.eval(t, x, u),
            Expr::Pow(a, b) => {
                let base = a.eval(t, x, u);
                match **b {
                    // integer powers keep negative bases real
                    Expr::Num(n) if n.fract() == 0.0 && n.abs() <= f64::from(i32::MAX) => base.powi(n as i32),
                    _ => base.powf(b.eval(t, x, u)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(t, x, u);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                }
            }
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Variables that occur in the expression, in the order `t, x, u`.
    pub fn variables(&self) -> Vec<Var> {
        [Var::T, Var::X, Var::U].into_iter().filter(|&v| self.depends_on(v)).collect()
    }

    /// Folds constants and drops neutral elements (`a + 0`, `a * 1`, `a ^ 1`, ...).
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        let num = |e: &Expr| match e {
            Num(c) => Some(*c),
            _ => None,
        };
        match self {
            Num(_) | Var(_) => self.clone(),
            Neg(a) => match a.simplify() {
                Num(c) => Num(-c),
                Neg(b) => *b,
                a => Neg(bx(a)),
            },
            Call(f, a) => {
                let a = a.simplify();
                let e = Call(*f, bx(a));
                if e.variables().is_empty() {
                    Num(e.eval(0.0, 0.0, 0.0))
                } else {
                    e
                }
            }
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                let e = match self {
                    Add(..) => Add(bx(a.clone()), bx(b.clone())),
                    Sub(..) => Sub(bx(a.clone()), bx(b.clone())),
                    Mul(..) => Mul(bx(a.clone()), bx(b.clone())),
                    Div(..) => Div(bx(a.clone()), bx(b.clone())),
                    _ => Pow(bx(a.clone()), bx(b.clone())),
                };
                if let (Some(_), Some(_)) = (num(&a), num(&b)) {
                    return Num(e.eval(0.0, 0.0, 0.0));
                }
                match (&e, num(&a), num(&b)) {
                    (Add(..), Some(0.0), _) => b,
                    (Add(..) | Sub(..), _, Some(0.0)) => a,
                    (Sub(..), Some(0.0), _) => Neg(bx(b)).simplify(),
                    (Mul(..), Some(0.0), _) | (Mul(..), _, Some(0.0)) => Num(0.0),
                    (Mul(..), Some(1.0), _) => b,
                    (Mul(..) | Div(..) | Pow(..), _, Some(1.0)) => a,
                    (Pow(..), _, Some(0.0)) => Num(1.0),
                    (Div(..), _, Some(d)) => match a {
                        Mul(c, rest) if num(&c).is_some() => Mul(bx(Num(num(&c).unwrap_or(1.0) / d)), rest).simplify(),
                        _ => e,
                    },
                    _ => e,
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to `v`, simplified.
    pub fn derivative(&self, v: Var) -> Expr {
        self.derivative_raw(v).simplify()
    }

    fn derivative_raw(&self, v: Var) -> Expr {
        use Expr::*;
        if !self.depends_on(v) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => Neg(bx(a.derivative_raw(v))),
            Add(a, b) => Add(bx(a.derivative_raw(v)), bx(b.derivative_raw(v))),
            Sub(a, b) => Sub(bx(a.derivative_raw(v)), bx(b.derivative_raw(v))),
            Mul(a, b) if !a.depends_on(v) => Mul(a.clone(), bx(b.derivative_raw(v))),
            Mul(a, b) if !b.depends_on(v) => Mul(bx(a.derivative_raw(v)), b.clone()),
            Div(a, b) if !b.depends_on(v) => Div(bx(a.derivative_raw(v)), b.clone()),
            Mul(a, b) => Add(
                bx(Mul(bx(a.derivative_raw(v)), b.clone())),
                bx(Mul(a.clone(), bx(b.derivative_raw(v)))),
            ),
            Div(a, b) => Div(
                bx(Sub(
                    bx(Mul(bx(a.derivative_raw(v)), b.clone())),
                    bx(Mul(a.clone(), bx(b.derivative_raw(v)))),
                )),
                bx(Pow(b.clone(), bx(Num(2.0)))),
            ),
            Pow(a, b) if !b.depends_on(v) => {
                let lowered = match **b {
                    Num(n) => Num(n - 1.0),
                    _ => Sub(b.clone(), bx(Num(1.0))),
                };
                Mul(bx(Mul(b.clone(), bx(Pow(a.clone(), bx(lowered))))), bx(a.derivative_raw(v)))
            }
            // d(a^b) = a^b (b' ln a + b a' / a)
            Pow(a, b) => Mul(
                bx(self.clone()),
                bx(Add(
                    bx(Mul(bx(b.derivative_raw(v)), bx(Call(Func::Ln, a.clone())))),
                    bx(Div(bx(Mul(b.clone(), bx(a.derivative_raw(v)))), a.clone())),
                )),
            ),
            Call(f, a) => {
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(bx(Call(Func::Sin, a.clone()))),
                    Func::Exp => self.clone(),
                    Func::Ln => Div(bx(Num(1.0)), a.clone()),
                };
                Mul(bx(outer), bx(a.derivative_raw(v)))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(start) else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            // exponent part, only if followed by digits
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((start, Tok::Num(value)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Tok::Ident(self.src[start..end].to_string())));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((start, Tok::Op(c as char)));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (at, tok) = lexer.next()?;
        Ok(Self { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (at, tok) = self.lexer.next()?;
        self.at = at;
        self.tok = tok;
        Ok(())
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match &self.tok {
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        };
        ParseError::Syntax {
            offset: self.at,
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ ('+' | '-')) = self.tok {
            self.bump()?;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(bx(lhs), bx(rhs))
            } else {
                Expr::Sub(bx(lhs), bx(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = self.tok {
            self.bump()?;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(bx(lhs), bx(rhs))
            } else {
                Expr::Div(bx(lhs), bx(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Expr::Neg(bx(self.unary()?)));
        }
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            return Ok(Expr::Pow(bx(base), bx(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(n) => {
                self.bump()?;
                Ok(Expr::Num(n))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.close()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                self.bump()?;
                if let Some(f) = func {
                    if self.tok != Tok::Op('(') {
                        return Err(self.unexpected(&format!("`(` after `{name}`")));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    self.close()?;
                    return Ok(Expr::Call(f, bx(arg)));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "u" => Ok(Expr::Var(Var::U)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(ParseError::UnknownIdentifier { offset: at, name }),
                }
            }
            _ => Err(self.unexpected("a number, name or `(`")),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::Op(')') {
            return Err(self.unexpected("`)`"));
        }
        self.bump()
    }
}

/// Parses a complete expression; trailing input is an error.
pub fn parse_expression(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}
