//! Potentials written in a small arithmetic language, evaluated with exact
//! first and second derivatives by forward-mode differentiation.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | "pi" | xK | func "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)` and `2^-1` is `0.5`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported dimension (variables `x1` … `x16`).
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Value and first two derivatives at `u`.
    fn eval3(self, u: f64) -> Result<(f64, f64, f64)> {
        Ok(match self {
            Func::Exp => {
                let e = u.exp();
                (e, e, e)
            }
            Func::Log => {
                if u <= 0.0 {
                    return Err(Error::Domain { func: "log", arg: u });
                }
                (u.ln(), 1.0 / u, -1.0 / (u * u))
            }
            Func::Sin => {
                let (s, c) = u.sin_cos();
                (s, c, -s)
            }
            Func::Cos => {
                let (s, c) = u.sin_cos();
                (c, -s, -c)
            }
            Func::Sqrt => {
                if u < 0.0 {
                    return Err(Error::Domain { func: "sqrt", arg: u });
                }
                let r = u.sqrt();
                (r, 0.5 / r, -0.25 / (r * u))
            }
        })
    }

    fn eval(self, u: f64) -> Result<f64> {
        match self {
            Func::Exp => Ok(u.exp()),
            Func::Log if u <= 0.0 => Err(Error::Domain { func: "log", arg: u }),
            Func::Log => Ok(u.ln()),
            Func::Sin => Ok(u.sin()),
            Func::Cos => Ok(u.cos()),
            Func::Sqrt if u < 0.0 => Err(Error::Domain { func: "sqrt", arg: u }),
            Func::Sqrt => Ok(u.sqrt()),
        }
    }
}

/// Abstract syntax tree. Variables are zero-based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a literal integer exponent, evaluated by repeated multiplication.
    IntPow(Box<Expr>, i32),
    /// Power with a general exponent, evaluated as `exp(w log u)`.
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Largest variable index referenced plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::IntPow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    /// Plain value; `x` must cover every referenced variable.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.value(x)?,
            Expr::Add(a, b) => a.value(x)? + b.value(x)?,
            Expr::Sub(a, b) => a.value(x)? - b.value(x)?,
            Expr::Mul(a, b) => a.value(x)? * b.value(x)?,
            Expr::Div(a, b) => a.value(x)? / b.value(x)?,
            Expr::IntPow(a, k) => a.value(x)?.powi(*k),
            Expr::Pow(a, b) => {
                let u = a.value(x)?;
                if u <= 0.0 {
                    return Err(Error::Domain { func: "pow", arg: u });
                }
                (b.value(x)? * u.ln()).exp()
            }
            Expr::Call(f, a) => f.eval(a.value(x)?)?,
        })
    }

    fn jet(&self, x: &[f64], n: usize) -> Result<Jet2> {
        Ok(match self {
            Expr::Num(v) => Jet2::constant(*v, n),
            Expr::Pi => Jet2::constant(std::f64::consts::PI, n),
            Expr::Var(i) => Jet2::variable(x[*i], *i, n),
            Expr::Neg(a) => a.jet(x, n)?.scale(-1.0),
            Expr::Add(a, b) => a.jet(x, n)?.add(&b.jet(x, n)?, 1.0),
            Expr::Sub(a, b) => a.jet(x, n)?.add(&b.jet(x, n)?, -1.0),
            Expr::Mul(a, b) => a.jet(x, n)?.mul(&b.jet(x, n)?),
            Expr::Div(a, b) => {
                let d = b.jet(x, n)?;
                let u = d.value;
                a.jet(x, n)?.mul(&d.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u)))
            }
            Expr::IntPow(a, k) => {
                let j = a.jet(x, n)?;
                match *k {
                    0 => Jet2::constant(1.0, n),
                    1 => j,
                    k => {
                        let u = j.value;
                        let kf = f64::from(k);
                        j.chain(u.powi(k), kf * u.powi(k - 1), kf * (kf - 1.0) * u.powi(k - 2))
                    }
                }
            }
            Expr::Pow(a, b) => {
                let base = a.jet(x, n)?;
                if base.value <= 0.0 {
                    return Err(Error::Domain { func: "pow", arg: base.value });
                }
                let u = base.value;
                let log_u = base.chain(u.ln(), 1.0 / u, -1.0 / (u * u));
                let w = b.jet(x, n)?.mul(&log_u);
                let e = w.value.exp();
                w.chain(e, e, e)
            }
            Expr::Call(f, a) => {
                let j = a.jet(x, n)?;
                let (f0, f1, f2) = f.eval3(j.value)?;
                j.chain(f0, f1, f2)
            }
        })
    }
}

fn fmt_num(v: f64) -> String {
    // `{:?}` round-trips f64 and always carries a digit the tokenizer accepts.
    format!("{v:?}")
}

impl fmt::Display for Expr {
    /// Fully parenthesized form that re-parses to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{}", fmt_num(*v)),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::IntPow(a, k) if *k < 0 => write!(f, "({a} ^ (-{}))", k.unsigned_abs()),
            Expr::IntPow(a, k) => write!(f, "({a} ^ {k})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Value, gradient and packed upper-triangular Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major upper triangle: entry (i, j) with i ≤ j at `tri_index(n, i, j)`.
    pub hessian_upper: Vec<f64>,
}

/// Position of entry (i, j), i ≤ j, in a packed upper triangle of order n.
#[inline]
pub fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl Jet2 {
    pub fn constant(v: f64, n: usize) -> Self {
        Jet2 { value: v, gradient: vec![0.0; n], hessian_upper: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut j = Self::constant(v, n);
        j.gradient[i] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.hessian_upper[tri_index(self.dim(), a, b)]
    }

    /// Full symmetric Hessian; lower and upper halves are bitwise equal.
    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.hess(i, j))
    }

    pub fn laplacian(&self) -> f64 {
        (0..self.dim()).map(|i| self.hess(i, i)).sum()
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }

    fn scale(mut self, c: f64) -> Self {
        self.value *= c;
        self.gradient.iter_mut().for_each(|g| *g *= c);
        self.hessian_upper.iter_mut().for_each(|h| *h *= c);
        self
    }

    /// `self + c * other`.
    pub(crate) fn add(mut self, other: &Jet2, c: f64) -> Self {
        self.value += c * other.value;
        self.gradient.iter_mut().zip(&other.gradient).for_each(|(a, b)| *a += c * b);
        self.hessian_upper.iter_mut().zip(&other.hessian_upper).for_each(|(a, b)| *a += c * b);
        self
    }

    fn mul(&self, other: &Jet2) -> Self {
        let n = self.dim();
        let (a, b) = (self.value, other.value);
        let gradient = (0..n).map(|i| a * other.gradient[i] + b * self.gradient[i]).collect();
        let mut hessian_upper = Vec::with_capacity(self.hessian_upper.len());
        for i in 0..n {
            for j in i..n {
                let k = tri_index(n, i, j);
                hessian_upper.push(
                    a * other.hessian_upper[k]
                        + b * self.hessian_upper[k]
                        + self.gradient[i] * other.gradient[j]
                        + self.gradient[j] * other.gradient[i],
                );
            }
        }
        Jet2 { value: a * b, gradient, hessian_upper }
    }

    /// Compose with a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let gradient = self.gradient.iter().map(|g| f1 * g).collect();
        let mut hessian_upper = Vec::with_capacity(self.hessian_upper.len());
        for i in 0..n {
            for j in i..n {
                let k = tri_index(n, i, j);
                hessian_upper.push(f1 * self.hessian_upper[k] + f2 * self.gradient[i] * self.gradient[j]);
            }
        }
        Jet2 { value: f0, gradient, hessian_upper }
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|g| g.is_finite())
            && self.hessian_upper.iter().all(|h| h.is_finite())
    }
}

/// A parsed potential H : ℝⁿ → ℝ.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub expr: Expr,
    pub dim: usize,
    pub name: String,
}

impl Potential {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let v = self.expr.value(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(v)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet2> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let j = self.expr.jet(x, self.dim)?;
        if !j.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(j)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Parse `source` as a potential over ℝ^dim.
pub fn parse_potential(source: &str, dim: usize) -> Result<Potential> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::DimensionMismatch { expected: MAX_DIM, found: dim });
    }
    let expr = Parser::new(source)?.parse_all()?;
    let arity = expr.arity();
    if arity > dim {
        return Err(Error::DimensionMismatch { expected: dim, found: arity });
    }
    Ok(Potential { expr, dim, name: source.trim().to_string() })
}

/// Evaluate value, gradient and Hessian of `p` at `x`.
pub fn eval_jet2(p: &Potential, x: &[f64]) -> Result<Jet2> {
    p.jet(x)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    i = k;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    return Err(Error::Syntax { position: k, expected: vec!["exponent digits".into()] });
                }
            }
            let v: f64 = src[start..i]
                .parse()
                .map_err(|_| Error::Syntax { position: start, expected: vec!["number".into()] })?;
            if !v.is_finite() {
                return Err(Error::Syntax { position: start, expected: vec!["finite number".into()] });
            }
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^()".contains(&c) {
            out.push((Tok::Op(c as char), i));
            i += 1;
        } else {
            return Err(Error::Syntax {
                position: i,
                expected: vec!["number".into(), "identifier".into(), "operator".into()],
            });
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
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> usize {
        self.toks[self.pos].1
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax { position: self.here(), expected: expected.iter().map(|s| s.to_string()).collect() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Op(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_all(&mut self) -> Result<Expr> {
        let e = self.expr()?;
        if *self.peek() != Tok::End {
            return self.fail(&["operator", "end of input"]);
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exp = self.unary()?;
        Ok(match integer_literal(&exp) {
            Some(k) => Expr::IntPow(Box::new(base), k),
            None => Expr::Pow(Box::new(base), Box::new(exp)),
        })
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.fail(&["`)`"]);
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if !self.eat('(') {
                        return self.fail(&["`(`"]);
                    }
                    let e = self.expr()?;
                    if !self.eat(')') {
                        return self.fail(&["`)`"]);
                    }
                    return Ok(Expr::Call(func, Box::new(e)));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                match variable_index(&name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::UnknownIdentifier { name, position: at }),
                }
            }
            t => Err(Error::Syntax {
                position: at,
                expected: vec![
                    "number".into(),
                    "identifier".into(),
                    "`(`".into(),
                    format!("`-` (found {})", describe(&t)),
                ],
            }),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    (1..=MAX_DIM).contains(&k).then(|| k - 1)
}

/// Integer value of a variable-free exponent such as `3`, `-2` or `3^2`.
fn integer_literal(e: &Expr) -> Option<i32> {
    if e.arity() > 0 {
        return None;
    }
    let v = e.value(&[]).ok()?;
    (v.fract() == 0.0 && v.abs() <= 64.0).then_some(v as i32)
}
