//! Minimal expression grammar for catalog vector fields.
//!
//! Identifiers `x`, `y`, `z`; literals; `+ - * /`; functions `log`, `abs`,
//! `sgn`, `sin`, `exp`, `sqrt`; top-level component tuples `(e1, e2, ...)`.
//! Evaluation is total: a product with a zero factor is zero regardless of
//! the other factor, and any remaining non-finite result collapses to zero
//! (so `y*log(abs(y))` evaluates to 0 at y = 0).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Log,
    Abs,
    Sgn,
    Sin,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            "sin" => Func::Sin,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(&self, v: f64) -> f64 {
        match self {
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
            Func::Sgn => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Func::Sin => v.sin(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
enum Ast {
    Num(f64),
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

impl Ast {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Ast::Num(v) => *v,
            Ast::Var(i) => vars.get(*i).copied().unwrap_or(0.0),
            Ast::Neg(e) => -e.eval(vars),
            Ast::Add(a, b) => a.eval(vars) + b.eval(vars),
            Ast::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Ast::Mul(a, b) => {
                // Zero short-circuit keeps 0 * log(0) = 0.
                let x = a.eval(vars);
                if x == 0.0 {
                    return 0.0;
                }
                let y = b.eval(vars);
                if y == 0.0 {
                    return 0.0;
                }
                x * y
            }
            Ast::Div(a, b) => a.eval(vars) / b.eval(vars),
            Ast::Call(f, e) => f.apply(e.eval(vars)),
        }
    }

    fn max_var(&self) -> usize {
        match self {
            Ast::Num(_) => 0,
            Ast::Var(i) => i + 1,
            Ast::Neg(e) | Ast::Call(_, e) => e.max_var(),
            Ast::Add(a, b) | Ast::Sub(a, b) | Ast::Mul(a, b) | Ast::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }
}

/// Parsed field expression with one AST per component.
#[derive(Debug, Clone)]
pub struct FieldExpr {
    components: Vec<Ast>,
    dim_in: usize,
    source: String,
}

impl FieldExpr {
    /// Number of output components.
    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    /// Number of input coordinates referenced (max over x, y, z usage).
    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in self.components.iter().zip(out.iter_mut()) {
            let v = c.eval(x);
            *o = if v.is_finite() { v } else { 0.0 };
        }
    }

    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        let v = self.components[0].eval(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Ast::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.eat(b'-') {
            Ok(Ast::Neg(Box::new(self.unary()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
            None => self.err("expected expression"),
        }
    }

    fn number(&mut self) -> Result<Ast> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse() {
            Ok(v) => Ok(Ast::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number literal `{text}`"))
            }
        }
    }

    fn ident(&mut self) -> Result<Ast> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        match name.as_str() {
            "x" => Ok(Ast::Var(0)),
            "y" => Ok(Ast::Var(1)),
            "z" => Ok(Ast::Var(2)),
            _ => {
                if let Some(f) = Func::from_name(&name) {
                    if !self.eat(b'(') {
                        return self.err(format!("function `{name}` needs `(`"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return self.err("expected `)`");
                    }
                    Ok(Ast::Call(f, Box::new(arg)))
                } else {
                    self.pos = start;
                    self.err(format!("unknown identifier `{name}`"))
                }
            }
        }
    }
}

/// Parse a field expression: either a single expression or a tuple
/// `(e1, e2, ...)` of components.
pub fn parse_field_expr(text: &str) -> Result<FieldExpr> {
    if text.trim().is_empty() {
        return Err(Error::Parse { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let mut components = Vec::new();
    // A top-level parenthesis followed by commas is a tuple.
    let is_tuple = {
        let save = p.pos;
        let tuple = if p.eat(b'(') {
            // Scan for a comma at depth 1.
            let mut depth = 1;
            let mut found = false;
            let mut i = p.pos;
            while i < p.src.len() && depth > 0 {
                match p.src[i] {
                    b'(' => depth += 1,
                    b')' => depth -= 1,
                    b',' if depth == 1 => found = true,
                    _ => {}
                }
                i += 1;
            }
            found
        } else {
            false
        };
        p.pos = save;
        tuple
    };
    if is_tuple {
        p.eat(b'(');
        loop {
            components.push(p.expr()?);
            if p.eat(b',') {
                continue;
            }
            if p.eat(b')') {
                break;
            }
            return p.err("expected `,` or `)`");
        }
    } else {
        components.push(p.expr()?);
    }
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    let dim_in = components.iter().map(Ast::max_var).max().unwrap_or(0);
    Ok(FieldExpr { components, dim_in, source: text.to_string() })
}
