//! A small expression language for potentials and generating functions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' rational)?
//! atom   := number | ident | '(' expr ')' | func '(' expr ')' | '-' atom
//! ident  := x<digits> | p<digits> | [a-z][a-z0-9_]*
//! func   := exp | log | sqrt | sin | cos
//! ```
//!
//! Exponents are constant rationals only, and there is deliberately no `abs`
//! or other non-smooth intrinsic: evaluation is third-order jet propagation
//! and every admitted function must be C^3 on its domain.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::scalar::Scalar;

/// Variable reference as written in source: `x3`, `p1`, or a bare name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Var {
    /// `x<i>`, 1-based ambient index.
    X(usize),
    /// `p<j>`, 1-based ambient index.
    P(usize),
    /// Free symbol, bound externally.
    Named(String),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{i}"),
            Var::P(j) => write!(f, "p{j}"),
            Var::Named(s) => write!(f, "{s}"),
        }
    }
}

/// Constant rational exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }
    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

/// Parsed expression AST.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Rational),
    Call(Func, Box<Expression>),
}

/// Maps variable references to chart coordinate slots.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    slots: HashMap<Var, usize>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: Var, slot: usize) {
        self.slots.insert(var, slot);
    }

    pub fn slot(&self, var: &Var) -> Option<usize> {
        self.slots.get(var).copied()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src: src.as_bytes(), pos: 0 }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(&format!("`{}`", c as char))),
        }
    }

    fn err(&self, expected: &str) -> Error {
        Error::Syntax { offset: self.pos, expected: expected.to_string() }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let r = self.rational()?;
            Ok(Expression::Pow(Box::new(base), r))
        } else {
            Ok(base)
        }
    }

    fn rational(&mut self) -> Result<Rational> {
        let parens = if self.peek() == Some(b'(') {
            self.pos += 1;
            true
        } else {
            false
        };
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let num = self.integer()?;
        // `x^3/2` is (x^3)/2; a fractional exponent must be parenthesized
        let den = if parens && self.peek() == Some(b'/') {
            self.pos += 1;
            self.integer()?
        } else {
            1
        };
        if den == 0 {
            return Err(self.err("nonzero denominator"));
        }
        if parens {
            self.expect(b')')?;
        }
        Ok(Rational { num: if neg { -num } else { num }, den })
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer"))
    }

    fn atom(&mut self) -> Result<Expression> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                let e = self.atom()?;
                // fold literal negation so pretty-printing round-trips
                Ok(match e {
                    Expression::Num(v) => Expression::Num(-v),
                    other => Expression::Neg(Box::new(other)),
                })
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_lowercase() => self.ident(),
            _ => Err(self.err("number, identifier, `(` or `-`")),
        }
    }

    fn number(&mut self) -> Result<Expression> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let dstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == dstart {
                self.pos = mark; // `e` was an identifier start, not an exponent
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expression::Num).map_err(|_| self.err("number"))
    }

    fn ident(&mut self) -> Result<Expression> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_lowercase()
                || self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        if self.peek() == Some(b'(') {
            let func = match name.as_str() {
                "exp" => Func::Exp,
                "log" => Func::Log,
                "sqrt" => Func::Sqrt,
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                _ => return Err(Error::UnknownFunction { name, offset: start }),
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expression::Call(func, Box::new(arg)));
        }
        Ok(Expression::Var(classify_var(&name)))
    }
}

fn classify_var(name: &str) -> Var {
    let (head, rest) = name.split_at(1);
    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(i) = rest.parse::<usize>() {
            if i >= 1 {
                match head {
                    "x" => return Var::X(i),
                    "p" => return Var::P(i),
                    _ => {}
                }
            }
        }
    }
    Var::Named(name.to_string())
}

/// Parse expression source into an AST.
pub fn parse(src: &str) -> Result<Expression> {
    if src.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, expected: "nonempty expression".into() });
    }
    let mut p = Parser::new(src);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("end of input"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// pretty printing

fn prec(e: &Expression) -> u8 {
    match e {
        Expression::Add(..) | Expression::Sub(..) => 1,
        Expression::Mul(..) | Expression::Div(..) => 2,
        Expression::Neg(..) => 3,
        Expression::Pow(..) => 4,
        Expression::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn fmt_prec(e: &Expression, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < min {
        write!(f, "(")?;
    }
    match e {
        Expression::Num(v) => write!(f, "{v}")?,
        Expression::Var(v) => write!(f, "{v}")?,
        Expression::Neg(a) => {
            write!(f, "-")?;
            fmt_prec(a, 4, f)?;
        }
        Expression::Add(a, b) => {
            fmt_prec(a, 1, f)?;
            write!(f, " + ")?;
            fmt_prec(b, 2, f)?;
        }
        Expression::Sub(a, b) => {
            fmt_prec(a, 1, f)?;
            write!(f, " - ")?;
            fmt_prec(b, 2, f)?;
        }
        Expression::Mul(a, b) => {
            fmt_prec(a, 2, f)?;
            write!(f, "*")?;
            fmt_prec(b, 3, f)?;
        }
        Expression::Div(a, b) => {
            fmt_prec(a, 2, f)?;
            write!(f, "/")?;
            fmt_prec(b, 3, f)?;
        }
        Expression::Pow(a, r) => {
            fmt_prec(a, 5, f)?;
            if r.den == 1 && r.num >= 0 {
                write!(f, "^{}", r.num)?;
            } else if r.den == 1 {
                write!(f, "^({})", r.num)?;
            } else {
                write!(f, "^({}/{})", r.num, r.den)?;
            }
        }
        Expression::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            fmt_prec(a, 1, f)?;
            write!(f, ")")?;
        }
    }
    if p < min {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

// ---------------------------------------------------------------------------
// evaluation

impl Expression {
    /// All variables referenced by the expression.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expression::Num(_) => {}
            Expression::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Call(_, a) => {
                a.collect_vars(out)
            }
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Check every variable resolves under `bind` to a slot `< n`.
    pub fn check_bound(&self, bind: &Bindings, n: usize) -> Result<()> {
        for v in self.variables() {
            match bind.slot(&v) {
                Some(s) if s < n => {}
                _ => return Err(Error::UnknownVariable { name: v.to_string() }),
            }
        }
        Ok(())
    }

    /// Substitute variables by expressions (used for composing potentials with
    /// affine coordinate changes).
    pub fn substitute(&self, map: &HashMap<Var, Expression>) -> Expression {
        match self {
            Expression::Num(v) => Expression::Num(*v),
            Expression::Var(v) => map.get(v).cloned().unwrap_or_else(|| Expression::Var(v.clone())),
            Expression::Neg(a) => Expression::Neg(Box::new(a.substitute(map))),
            Expression::Add(a, b) => {
                Expression::Add(Box::new(a.substitute(map)), Box::new(b.substitute(map)))
            }
            Expression::Sub(a, b) => {
                Expression::Sub(Box::new(a.substitute(map)), Box::new(b.substitute(map)))
            }
            Expression::Mul(a, b) => {
                Expression::Mul(Box::new(a.substitute(map)), Box::new(b.substitute(map)))
            }
            Expression::Div(a, b) => {
                Expression::Div(Box::new(a.substitute(map)), Box::new(b.substitute(map)))
            }
            Expression::Pow(a, r) => Expression::Pow(Box::new(a.substitute(map)), *r),
            Expression::Call(func, a) => Expression::Call(*func, Box::new(a.substitute(map))),
        }
    }

    /// Value-only evaluation.
    pub fn eval_value<F: Scalar>(&self, bind: &Bindings, u: &[F]) -> Result<F> {
        Ok(match self {
            Expression::Num(v) => F::from_f64_lossy(*v),
            Expression::Var(v) => {
                let slot = bind
                    .slot(v)
                    .ok_or_else(|| Error::UnknownVariable { name: v.to_string() })?;
                u[slot]
            }
            Expression::Neg(a) => -a.eval_value(bind, u)?,
            Expression::Add(a, b) => a.eval_value(bind, u)? + b.eval_value(bind, u)?,
            Expression::Sub(a, b) => a.eval_value(bind, u)? - b.eval_value(bind, u)?,
            Expression::Mul(a, b) => a.eval_value(bind, u)? * b.eval_value(bind, u)?,
            Expression::Div(a, b) => {
                let d = b.eval_value(bind, u)?;
                if d == F::zero() {
                    return Err(self.domain_err("division by zero"));
                }
                a.eval_value(bind, u)? / d
            }
            Expression::Pow(a, r) => {
                let base = a.eval_value(bind, u)?;
                if r.den == 1 {
                    if r.num < 0 && base == F::zero() {
                        return Err(self.domain_err("zero base with negative exponent"));
                    }
                    base.powi(r.num as i32)
                } else {
                    if base <= F::zero() {
                        return Err(self.domain_err("fractional power of non-positive base"));
                    }
                    base.powf(F::from_f64_lossy(r.as_f64()))
                }
            }
            Expression::Call(func, a) => {
                let v = a.eval_value(bind, u)?;
                match func {
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= F::zero() {
                            return Err(self.domain_err("log of non-positive argument"));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v <= F::zero() {
                            return Err(self.domain_err("sqrt of non-positive argument"));
                        }
                        v.sqrt()
                    }
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
        })
    }

    fn domain_err(&self, reason: &str) -> Error {
        Error::Domain { subexpr: self.to_string(), reason: reason.to_string() }
    }

    /// Forward-mode third-order jet at `u`. Exact (up to rounding) for
    /// polynomial expressions.
    pub fn eval_jet3<F: Scalar>(&self, bind: &Bindings, u: &[F]) -> Result<Jet3<F>> {
        let n = u.len();
        Ok(match self {
            Expression::Num(v) => Jet3::constant(n, F::from_f64_lossy(*v)),
            Expression::Var(v) => {
                let slot = bind
                    .slot(v)
                    .ok_or_else(|| Error::UnknownVariable { name: v.to_string() })?;
                Jet3::variable(n, slot, u[slot])
            }
            Expression::Neg(a) => a.eval_jet3(bind, u)?.neg(),
            Expression::Add(a, b) => a.eval_jet3(bind, u)?.add(&b.eval_jet3(bind, u)?),
            Expression::Sub(a, b) => a.eval_jet3(bind, u)?.sub(&b.eval_jet3(bind, u)?),
            Expression::Mul(a, b) => a.eval_jet3(bind, u)?.mul(&b.eval_jet3(bind, u)?),
            Expression::Div(a, b) => {
                let d = b.eval_jet3(bind, u)?;
                if d.v == F::zero() {
                    return Err(self.domain_err("division by zero"));
                }
                a.eval_jet3(bind, u)?.mul(&d.recip())
            }
            Expression::Pow(a, r) => {
                let base = a.eval_jet3(bind, u)?;
                if r.den == 1 {
                    if r.num < 0 && base.v == F::zero() {
                        return Err(self.domain_err("zero base with negative exponent"));
                    }
                    base.powi(r.num)
                } else {
                    if base.v <= F::zero() {
                        return Err(self.domain_err("fractional power of non-positive base"));
                    }
                    base.powf(F::from_f64_lossy(r.as_f64()))
                }
            }
            Expression::Call(func, a) => {
                let arg = a.eval_jet3(bind, u)?;
                match func {
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if arg.v <= F::zero() {
                            return Err(self.domain_err("log of non-positive argument"));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if arg.v <= F::zero() {
                            return Err(self.domain_err("sqrt of non-positive argument"));
                        }
                        arg.sqrt()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                }
            }
        })
    }
}

// ---------------------------------------------------------------------------
// finite-difference oracle (test support)

/// Central finite-difference jet from value-only evaluation.
///
/// Gradient entries use one level of Richardson refinement; second and third
/// derivatives use plain central stencils. Intended for cross-checking
/// [`Expression::eval_jet3`], not for production use.
pub fn eval_jet3_fd_oracle<F: Scalar>(
    e: &Expression,
    bind: &Bindings,
    u: &[F],
    step: F,
) -> Result<Jet3<F>> {
    let n = u.len();
    let f = |pt: &[F]| e.eval_value(bind, pt);
    let at = |shifts: &[(usize, F)]| -> Result<F> {
        let mut pt = u.to_vec();
        for &(i, d) in shifts {
            pt[i] = pt[i] + d;
        }
        f(&pt)
    };
    let two = F::from_f64_lossy(2.0);
    let three = F::from_f64_lossy(3.0);
    let four = F::from_f64_lossy(4.0);

    let v = f(u)?;

    let grad_at = |i: usize, h: F| -> Result<F> {
        Ok((at(&[(i, h)])? - at(&[(i, -h)])?) / (two * h))
    };
    let mut grad = vec![F::zero(); n];
    for i in 0..n {
        let d1 = grad_at(i, step)?;
        let d2 = grad_at(i, step / two)?;
        grad[i] = (four * d2 - d1) / three;
    }

    let hess_entry = |i: usize, j: usize, base: &[(usize, F)]| -> Result<F> {
        let with = |extra: &[(usize, F)]| -> Result<F> {
            let mut shifts = base.to_vec();
            shifts.extend_from_slice(extra);
            at(&shifts)
        };
        if i == j {
            Ok((with(&[(i, step)])? - two * with(&[])? + with(&[(i, -step)])?) / (step * step))
        } else {
            Ok((with(&[(i, step), (j, step)])? - with(&[(i, step), (j, -step)])?
                - with(&[(i, -step), (j, step)])?
                + with(&[(i, -step), (j, -step)])?)
                / (four * step * step))
        }
    };

    let mut hess = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = hess_entry(i, j, &[])?;
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }

    let mut third = vec![vec![vec![F::zero(); n]; n]; n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let plus = hess_entry(i, j, &[(k, step)])?;
                let minus = hess_entry(i, j, &[(k, -step)])?;
                let t = (plus - minus) / (two * step);
                for (a, b, c) in
                    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
                {
                    third[a][b][c] = t;
                }
            }
        }
    }

    Ok(Jet3::from_derivatives(n, v, &grad, |i, j| hess[i][j], |i, j, k| third[i][j][k]))
}
