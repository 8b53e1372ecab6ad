//! Exact symbolic scalar fields over chart coordinates.
//!
//! A [`ScalarExpr`] is an immutable expression tree (shared via `Arc`, so
//! large fields form a DAG rather than a tree) over a fixed chart dimension.
//! The node set is deliberately small: constants, coordinates, sums,
//! products, quotients, integer powers and the unary functions
//! `sin`, `cos`, `exp`, `sqrt`. Everything downstream (tensor fields,
//! connection coefficients) is an array of these.
//!
//! Differentiation is exact and closed over the node set; the only
//! simplification performed is constant folding plus 0/1 absorption, so
//! correctness is established by evaluation, not by normal forms.

use std::fmt;
use std::sync::Arc;

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Add(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Quot(ScalarExpr, ScalarExpr),
    /// Integer power of the base expression. Negative exponents are allowed
    /// and error at evaluation when the base vanishes.
    PowI(ScalarExpr, i32),
    Sin(ScalarExpr),
    Cos(ScalarExpr),
    Exp(ScalarExpr),
    Sqrt(ScalarExpr),
}

/// An exact symbolic function of chart coordinates.
///
/// Values are immutable after construction and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    node: Arc<Node>,
    dim: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: sqrt of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("point has dimension {got}, chart has dimension {expected}")]
    PointDimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownIdentifier,
    ArityMismatch,
}

#[derive(Debug, Error)]
#[error("{message} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ScalarExpr {
    fn wrap(node: Node, dim: usize) -> Self {
        ScalarExpr {
            node: Arc::new(node),
            dim,
        }
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Self::wrap(Node::Const(value), dim)
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(1.0, dim)
    }

    /// The coordinate function `x^index`.
    pub fn coord(index: usize, dim: usize) -> Self {
        assert!(index < dim, "coordinate index {index} out of range for dim {dim}");
        Self::wrap(Node::Coord(index), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.node, Node::Const(c) if c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(*self.node, Node::Const(c) if c == 1.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, other.dim, "chart dimension mismatch");
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            return Self::constant(a + b, self.dim);
        }
        Self::wrap(Node::Add(self.clone(), other.clone()), self.dim)
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        if Arc::ptr_eq(&self.node, &other.node) {
            return Self::zero(self.dim);
        }
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ScalarExpr {
        Self::constant(-1.0, self.dim).mul(self)
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, other.dim, "chart dimension mismatch");
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.dim);
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            return Self::constant(a * b, self.dim);
        }
        Self::wrap(Node::Mul(self.clone(), other.clone()), self.dim)
    }

    pub fn scale(&self, factor: f64) -> ScalarExpr {
        Self::constant(factor, self.dim).mul(self)
    }

    pub fn div(&self, other: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, other.dim, "chart dimension mismatch");
        if self.is_zero() {
            return Self::zero(self.dim);
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            if b != 0.0 {
                return Self::constant(a / b, self.dim);
            }
        }
        Self::wrap(Node::Quot(self.clone(), other.clone()), self.dim)
    }

    pub fn powi(&self, exponent: i32) -> ScalarExpr {
        match exponent {
            0 => return Self::one(self.dim),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(a) = self.as_constant() {
            let v = a.powi(exponent);
            if v.is_finite() {
                return Self::constant(v, self.dim);
            }
        }
        Self::wrap(Node::PowI(self.clone(), exponent), self.dim)
    }

    pub fn sin(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(a) => Self::constant(a.sin(), self.dim),
            None => Self::wrap(Node::Sin(self.clone()), self.dim),
        }
    }

    pub fn cos(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(a) => Self::constant(a.cos(), self.dim),
            None => Self::wrap(Node::Cos(self.clone()), self.dim),
        }
    }

    pub fn exp(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(a) if a.exp().is_finite() => Self::constant(a.exp(), self.dim),
            _ => Self::wrap(Node::Exp(self.clone()), self.dim),
        }
    }

    pub fn sqrt(&self) -> ScalarExpr {
        match self.as_constant() {
            // Negative constants keep the node so the error surfaces at
            // evaluation, not at construction.
            Some(a) if a >= 0.0 => Self::constant(a.sqrt(), self.dim),
            _ => Self::wrap(Node::Sqrt(self.clone()), self.dim),
        }
    }

    /// Evaluates the expression at a chart point.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        Evaluator::new(point, self.dim)?.eval(self)
    }

    /// Exact partial derivative with respect to coordinate `coord`.
    pub fn differentiate(&self, coord: usize) -> ScalarExpr {
        assert!(coord < self.dim, "coordinate {coord} out of range for dim {}", self.dim);
        DiffCache::new().derive(self, coord)
    }

    /// Renders with caller-supplied coordinate names.
    pub fn to_string_with(&self, names: &[&str]) -> String {
        let mut out = String::new();
        self.render(&mut out, names, 0);
        out
    }

    // prec: 0 sum, 1 product, 2 power/atom
    fn render(&self, out: &mut String, names: &[&str], prec: u8) {
        let coord_name = |i: usize| -> String {
            names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("x{i}"))
        };
        match &*self.node {
            Node::Const(c) => {
                if *c < 0.0 && prec > 0 {
                    out.push_str(&format!("({c})"));
                } else {
                    out.push_str(&format!("{c}"));
                }
            }
            Node::Coord(i) => out.push_str(&coord_name(*i)),
            Node::Add(a, b) => {
                let parens = prec > 0;
                if parens {
                    out.push('(');
                }
                a.render(out, names, 0);
                out.push_str(" + ");
                b.render(out, names, 0);
                if parens {
                    out.push(')');
                }
            }
            Node::Mul(a, b) => {
                let parens = prec > 1;
                if parens {
                    out.push('(');
                }
                a.render(out, names, 1);
                out.push('*');
                b.render(out, names, 2);
                if parens {
                    out.push(')');
                }
            }
            Node::Quot(a, b) => {
                let parens = prec > 1;
                if parens {
                    out.push('(');
                }
                a.render(out, names, 1);
                out.push('/');
                b.render(out, names, 2);
                if parens {
                    out.push(')');
                }
            }
            Node::PowI(a, k) => {
                let parens = prec > 2;
                if parens {
                    out.push('(');
                }
                a.render(out, names, 3);
                out.push_str(&format!("^{k}"));
                if parens {
                    out.push(')');
                }
            }
            Node::Sin(a) => render_call(out, "sin", a, names),
            Node::Cos(a) => render_call(out, "cos", a, names),
            Node::Exp(a) => render_call(out, "exp", a, names),
            Node::Sqrt(a) => render_call(out, "sqrt", a, names),
        }
    }
}

fn render_call(out: &mut String, name: &str, arg: &ScalarExpr, names: &[&str]) {
    out.push_str(name);
    out.push('(');
    arg.render(out, names, 0);
    out.push(')');
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with(&[]))
    }
}

/// Memoizing evaluator for one chart point.
///
/// Shared sub-DAGs (e.g. a determinant appearing in every component of a
/// symbolic matrix inverse) are evaluated once per point. The cache keeps a
/// strong reference to every node it has seen so node addresses stay stable
/// for its lifetime.
pub struct Evaluator<'p> {
    point: &'p [f64],
    cache: HashMap<usize, f64>,
    keep_alive: Vec<Arc<Node>>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p [f64], dim: usize) -> Result<Self, EvalError> {
        if point.len() != dim {
            return Err(EvalError::PointDimension {
                expected: dim,
                got: point.len(),
            });
        }
        Ok(Evaluator {
            point,
            cache: HashMap::new(),
            keep_alive: Vec::new(),
        })
    }

    pub fn eval(&mut self, expr: &ScalarExpr) -> Result<f64, EvalError> {
        debug_assert_eq!(expr.dim, self.point.len());
        let key = Arc::as_ptr(&expr.node) as usize;
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let value = match &*expr.node {
            Node::Const(c) => *c,
            Node::Coord(i) => self.point[*i],
            Node::Add(a, b) => self.eval(a)? + self.eval(b)?,
            Node::Mul(a, b) => self.eval(a)? * self.eval(b)?,
            Node::Quot(a, b) => {
                let den = self.eval(b)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                self.eval(a)? / den
            }
            Node::PowI(a, k) => {
                let base = self.eval(a)?;
                if base == 0.0 && *k < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                base.powi(*k)
            }
            Node::Sin(a) => self.eval(a)?.sin(),
            Node::Cos(a) => self.eval(a)?.cos(),
            Node::Exp(a) => self.eval(a)?.exp(),
            Node::Sqrt(a) => {
                let v = self.eval(a)?;
                if v < 0.0 {
                    return Err(EvalError::SqrtOfNegative(v));
                }
                v.sqrt()
            }
        };
        if !value.is_finite() {
            return Err(EvalError::NonFinite);
        }
        self.cache.insert(key, value);
        self.keep_alive.push(expr.node.clone());
        Ok(value)
    }
}

/// Memoizing differentiator. Batched tensor differentiation routes through a
/// single cache so that derivatives of shared sub-DAGs stay shared.
pub(crate) struct DiffCache {
    cache: HashMap<(usize, usize), ScalarExpr>,
    keep_alive: Vec<Arc<Node>>,
}

impl DiffCache {
    pub(crate) fn new() -> Self {
        DiffCache {
            cache: HashMap::new(),
            keep_alive: Vec::new(),
        }
    }

    pub(crate) fn derive(&mut self, expr: &ScalarExpr, coord: usize) -> ScalarExpr {
        let key = (Arc::as_ptr(&expr.node) as usize, coord);
        if let Some(d) = self.cache.get(&key) {
            return d.clone();
        }
        let dim = expr.dim;
        let result = match &*expr.node {
            Node::Const(_) => ScalarExpr::zero(dim),
            Node::Coord(i) => {
                if *i == coord {
                    ScalarExpr::one(dim)
                } else {
                    ScalarExpr::zero(dim)
                }
            }
            Node::Add(a, b) => self.derive(a, coord).add(&self.derive(b, coord)),
            Node::Mul(a, b) => {
                let da = self.derive(a, coord);
                let db = self.derive(b, coord);
                da.mul(b).add(&a.mul(&db))
            }
            Node::Quot(a, b) => {
                // (a/b)' = (a'b - ab') / b^2
                let da = self.derive(a, coord);
                let db = self.derive(b, coord);
                da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
            }
            Node::PowI(a, k) => {
                let da = self.derive(a, coord);
                a.powi(k - 1).scale(f64::from(*k)).mul(&da)
            }
            Node::Sin(a) => a.cos().mul(&self.derive(a, coord)),
            Node::Cos(a) => a.sin().neg().mul(&self.derive(a, coord)),
            Node::Exp(a) => expr.clone().mul(&self.derive(a, coord)),
            Node::Sqrt(a) => {
                // a' / (2 sqrt(a))
                self.derive(a, coord).div(&expr.scale(2.0))
            }
        };
        self.cache.insert(key, result.clone());
        self.keep_alive.push(expr.node.clone());
        result
    }
}

/// Parses an expression over the named coordinates.
///
/// Grammar (standard precedence, `^` binds tighter than unary minus,
/// `*` `/` and `+` `-` are left-associative):
///
/// ```text
/// expr   := term (('+'|'-') term)*
/// term   := factor (('*'|'/') factor)*
/// factor := ('-')? atom ('^' integer)?
/// atom   := number | ident | func '(' expr ')' | '(' expr ')'
/// func   := 'sin' | 'cos' | 'exp' | 'sqrt'
/// ```
pub fn parse_expression(text: &str, coord_names: &[&str]) -> Result<ScalarExpr, ParseError> {
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        coords: coord_names,
        dim: coord_names.len(),
    };
    parser.skip_ws();
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(expr)
}

const FUNCTIONS: [&str; 4] = ["sin", "cos", "exp", "sqrt"];

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    coords: &'a [&'a str],
    dim: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            kind: ParseErrorKind::Syntax,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    acc = acc.add(&rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    acc = acc.sub(&rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.factor()?;
                    acc = acc.mul(&rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.factor()?;
                    acc = acc.div(&rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<ScalarExpr, ParseError> {
        let negated = if self.peek() == Some(b'-') {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        };
        let atom = self.atom()?;
        self.skip_ws();
        let powered = if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let exponent = self.integer()?;
            atom.powi(exponent)
        } else {
            atom
        };
        // `^` binds tighter than unary minus: -x^2 is -(x^2).
        Ok(if negated { powered.neg() } else { powered })
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start || (self.pos == start + 1 && self.bytes[start] == b'-') {
            return Err(self.syntax("expected integer exponent"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<i32>().map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::Syntax,
            message: format!("integer exponent '{text}' out of range"),
        })
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("expected number, identifier or '('")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<ScalarExpr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // 'e' belonged to a following identifier, not an exponent
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(ScalarExpr::constant(v, self.dim)),
            Err(_) => Err(ParseError {
                offset: start,
                kind: ParseErrorKind::Syntax,
                message: format!("invalid number '{text}'"),
            }),
        }
    }

    fn identifier(&mut self) -> Result<ScalarExpr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            if !FUNCTIONS.contains(&name) {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnknownIdentifier,
                    message: format!("unknown function '{name}'"),
                });
            }
            self.pos += 1;
            self.skip_ws();
            let arg = self.expr()?;
            self.skip_ws();
            if self.peek() == Some(b',') {
                return Err(ParseError {
                    offset: self.pos,
                    kind: ParseErrorKind::ArityMismatch,
                    message: format!("'{name}' takes exactly one argument"),
                });
            }
            if self.peek() != Some(b')') {
                return Err(self.syntax("expected ')'"));
            }
            self.pos += 1;
            return Ok(match name {
                "sin" => arg.sin(),
                "cos" => arg.cos(),
                "exp" => arg.exp(),
                "sqrt" => arg.sqrt(),
                _ => unreachable!(),
            });
        }
        if FUNCTIONS.contains(&name) {
            return Err(ParseError {
                offset: start,
                kind: ParseErrorKind::ArityMismatch,
                message: format!("function '{name}' requires an argument list"),
            });
        }
        match self.coords.iter().position(|c| *c == name) {
            Some(i) => Ok(ScalarExpr::coord(i, self.dim)),
            None => Err(ParseError {
                offset: start,
                kind: ParseErrorKind::UnknownIdentifier,
                message: format!("unknown identifier '{name}'"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> ScalarExpr {
        parse_expression(text, &["t", "x", "y"]).unwrap()
    }

    /// Central finite difference, the independent oracle for `differentiate`.
    fn central_difference(e: &ScalarExpr, point: &[f64], coord: usize, step: f64) -> f64 {
        let mut hi = point.to_vec();
        let mut lo = point.to_vec();
        hi[coord] += step;
        lo[coord] -= step;
        (e.evaluate(&hi).unwrap() - e.evaluate(&lo).unwrap()) / (2.0 * step)
    }

    #[test]
    fn parse_tree_shape() {
        let e = parse_expression("x^2 + sin(t)", &["t", "x"]).unwrap();
        let x = ScalarExpr::coord(1, 2);
        let t = ScalarExpr::coord(0, 2);
        assert_eq!(e, x.powi(2).add(&t.sin()));
    }

    #[test]
    fn parse_constant() {
        let e = parse_expression("1", &["t", "x"]).unwrap();
        assert_eq!(e.as_constant(), Some(1.0));
    }

    #[test]
    fn parse_commutator_evaluates_to_zero() {
        let e = parse_expression("x*y - y*x", &["x", "y"]).unwrap();
        assert_eq!(e.evaluate(&[2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn parse_precedence() {
        // ^ > unary minus > * / > + -
        let e = parse("-t^2");
        assert_eq!(e.evaluate(&[3.0, 0.0, 0.0]).unwrap(), -9.0);
        let e = parse("2 + 3 * x^2");
        assert_eq!(e.evaluate(&[0.0, 2.0, 0.0]).unwrap(), 14.0);
        let e = parse("10 - 4 - 3");
        assert_eq!(e.as_constant(), Some(3.0));
        let e = parse("2*x/4");
        assert_eq!(e.evaluate(&[0.0, 6.0, 0.0]).unwrap(), 3.0);
        let e = parse("3 * -x");
        assert_eq!(e.evaluate(&[0.0, 2.0, 0.0]).unwrap(), -6.0);
    }

    #[test]
    fn parse_number_forms() {
        assert_eq!(parse("1.5e2").as_constant(), Some(150.0));
        assert_eq!(parse(".5").as_constant(), Some(0.5));
        assert_eq!(parse("2.").as_constant(), Some(2.0));
        assert_eq!(parse("1e-2").as_constant(), Some(0.01));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let err = parse_expression("x + ", &["x"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.offset, 4);

        let err = parse_expression("x + z", &["x", "y"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier);
        assert_eq!(err.offset, 4);

        let err = parse_expression("sin(x, y)", &["x", "y"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ArityMismatch);

        let err = parse_expression("sin + 1", &["x"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ArityMismatch);

        let err = parse_expression("tan(x)", &["x"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier);
    }

    #[test]
    fn evaluate_basics() {
        let e = parse_expression("x^2 + sin(t)", &["t", "x"]).unwrap();
        assert_eq!(e.evaluate(&[0.0, 3.0]).unwrap(), 9.0);

        let e = parse_expression("exp(0*t)", &["t"]).unwrap();
        assert_eq!(e.evaluate(&[17.0]).unwrap(), 1.0);

        let e = parse_expression("x/x", &["x"]).unwrap();
        assert_eq!(e.evaluate(&[0.0]).unwrap_err(), EvalError::DivisionByZero);

        let e = parse_expression("sqrt(x)", &["x"]).unwrap();
        assert!(matches!(
            e.evaluate(&[-1.0]).unwrap_err(),
            EvalError::SqrtOfNegative(_)
        ));

        let e = parse_expression("x", &["x"]).unwrap();
        assert!(matches!(
            e.evaluate(&[1.0, 2.0]).unwrap_err(),
            EvalError::PointDimension { .. }
        ));
    }

    #[test]
    fn derivative_of_square() {
        let x = ScalarExpr::coord(1, 2);
        let d = x.powi(2).differentiate(1);
        assert_eq!(d, x.scale(2.0));
        assert_eq!(x.powi(2).differentiate(0).as_constant(), Some(0.0));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = parse_expression("sin(t)*x", &["t", "x"]).unwrap();
        let d = e.differentiate(0);
        let p = [0.0, 2.0];
        assert!((d.evaluate(&p).unwrap() - 2.0).abs() < 1e-15);
        let fd = central_difference(&e, &p, 0, 1e-5);
        assert!((d.evaluate(&p).unwrap() - fd).abs() < 1e-9);
    }

    #[test]
    fn quotient_and_power_derivatives() {
        let e = parse("x / (1 + t^2)");
        for coord in 0..2 {
            let d = e.differentiate(coord);
            for p in [[0.3, -0.7, 0.0], [1.1, 0.4, 0.0], [-0.5, 0.9, 0.0]] {
                let fd = central_difference(&e, &p, coord, 1e-5);
                assert!((d.evaluate(&p).unwrap() - fd).abs() < 1e-8);
            }
        }
        let e = parse("(1 + x^2)^-2");
        let d = e.differentiate(1);
        let p = [0.0, 0.6, 0.0];
        let fd = central_difference(&e, &p, 1, 1e-5);
        assert!((d.evaluate(&p).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn sqrt_exp_derivatives() {
        let e = parse("sqrt(1 + x^2) + exp(t)");
        for coord in 0..2 {
            let d = e.differentiate(coord);
            let p = [0.2, -0.8, 0.0];
            let fd = central_difference(&e, &p, coord, 1e-5);
            assert!((d.evaluate(&p).unwrap() - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn shared_subexpressions_evaluate_once() {
        // A diamond-shaped DAG: the same node referenced twice.
        let x = ScalarExpr::coord(0, 1);
        let shared = x.powi(2).add(&x.sin());
        let e = shared.mul(&shared).add(&shared);
        let v = shared.evaluate(&[0.7]).unwrap();
        assert!((e.evaluate(&[0.7]).unwrap() - (v * v + v)).abs() < 1e-15);
    }

    // Strategy for random expression trees that are finite on [-1,1]^3.
    fn arb_expr() -> impl Strategy<Value = ScalarExpr> {
        let leaf = prop_oneof![
            (-2.0..2.0f64).prop_map(|c| ScalarExpr::constant(c, 3)),
            (0usize..3).prop_map(|i| ScalarExpr::coord(i, 3)),
        ];
        leaf.prop_recursive(4, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
                // Denominator 1 + b^2 keeps quotients pole-free on the box.
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| a.div(&ScalarExpr::one(3).add(&b.powi(2)))),
                (inner.clone(), 2i32..4).prop_map(|(a, k)| a.powi(k)),
                inner.clone().prop_map(|a| a.sin()),
                inner.clone().prop_map(|a| a.cos()),
                inner.clone().prop_map(|a| ScalarExpr::one(3).add(&a.powi(2)).sqrt()),
            ]
        })
    }

    proptest! {
        #[test]
        fn mixed_partials_commute(e in arb_expr(), p in prop::array::uniform3(-1.0..1.0f64)) {
            let dxy = e.differentiate(0).differentiate(1);
            let dyx = e.differentiate(1).differentiate(0);
            if let (Ok(a), Ok(b)) = (dxy.evaluate(&p), dyx.evaluate(&p)) {
                let scale = a.abs().max(b.abs()).max(1.0);
                prop_assert!((a - b).abs() / scale < 1e-9);
            }
        }

        #[test]
        fn differentiation_is_linear(
            e1 in arb_expr(),
            e2 in arb_expr(),
            a in -2.0..2.0f64,
            b in -2.0..2.0f64,
            p in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let combo = e1.scale(a).add(&e2.scale(b));
            let lhs = combo.differentiate(1);
            let rhs = e1.differentiate(1).scale(a).add(&e2.differentiate(1).scale(b));
            if let (Ok(l), Ok(r)) = (lhs.evaluate(&p), rhs.evaluate(&p)) {
                let scale = l.abs().max(r.abs()).max(1.0);
                prop_assert!((l - r).abs() / scale < 1e-10);
            }
        }

        #[test]
        fn derivative_matches_finite_difference_property(
            e in arb_expr(),
            p in prop::array::uniform3(-0.9..0.9f64),
            coord in 0usize..3,
        ) {
            let d = e.differentiate(coord);
            let step = 1e-5;
            let mut hi = p;
            let mut lo = p;
            hi[coord] += step;
            lo[coord] -= step;
            if let (Ok(exact), Ok(fh), Ok(fl)) = (d.evaluate(&p), e.evaluate(&hi), e.evaluate(&lo)) {
                let fd = (fh - fl) / (2.0 * step);
                let scale = exact.abs().max(1.0);
                prop_assert!((exact - fd).abs() / scale < 1e-5);
            }
        }

        #[test]
        fn parser_roundtrip_through_display(e in arb_expr(), p in prop::array::uniform3(-1.0..1.0f64)) {
            let rendered = e.to_string_with(&["t", "x", "y"]);
            let reparsed = parse_expression(&rendered, &["t", "x", "y"]).unwrap();
            match (e.evaluate(&p), reparsed.evaluate(&p)) {
                (Ok(a), Ok(b)) => {
                    let scale = a.abs().max(b.abs()).max(1.0);
                    prop_assert!((a - b).abs() / scale < 1e-12);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "eval mismatch: {a:?} vs {b:?}"),
            }
        }
    }
}
