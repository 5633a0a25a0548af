//! Expression language over the extended phase-space coordinates.
//!
//! A [`ScalarField`] is an immutable expression tree built from numeric
//! literals, the coordinates `q0..q(n-1)`, `p0..p(n-1)`, `S`, `t`, free
//! parameter identifiers, the operators `+ - * / ^`, and the intrinsics
//! `sin cos exp ln sqrt abs`. Partial derivatives are produced structurally
//! on the tree, so every derivative downstream is exact up to rounding.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = atom [ "^" unary ] ;          (* right associative *)
//! atom    = number | ident [ "(" expr ")" ] | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ident   = letter { letter | digit | "_" } ;
//! ```
//!
//! Identifiers of the form `q<k>` / `p<k>` are coordinates (with `k < n`),
//! `S` and `t` are the action and time, an identifier followed by `(` must
//! name an intrinsic, and every other identifier is a free parameter.

mod diff;
mod display;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

use crate::point::{EvalContext, Params};

pub use diff::ParamRates;

/// A phase-space coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Q(usize),
    P(usize),
    S,
    T,
}

impl Var {
    /// All `2n + 2` coordinates in canonical order `q, p, S, t`.
    pub fn all(n: usize) -> Vec<Var> {
        (0..n)
            .map(Var::Q)
            .chain((0..n).map(Var::P))
            .chain([Var::S, Var::T])
            .collect()
    }

    pub fn parse(name: &str, n: usize) -> Option<Var> {
        match name {
            "S" => Some(Var::S),
            "t" => Some(Var::T),
            _ => {
                let (head, digits) = name.split_at(1);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                let idx: usize = digits.parse().ok()?;
                let var = match head {
                    "q" => Var::Q(idx),
                    "p" => Var::P(idx),
                    _ => return None,
                };
                (idx < n).then_some(var)
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Q(i) => write!(f, "q{i}"),
            Var::P(i) => write!(f, "p{i}"),
            Var::S => f.write_str("S"),
            Var::T => f.write_str("t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Intrinsic {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Intrinsic::Sin,
            "cos" => Intrinsic::Cos,
            "exp" => Intrinsic::Exp,
            "ln" => Intrinsic::Ln,
            "sqrt" => Intrinsic::Sqrt,
            "abs" => Intrinsic::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Sin => "sin",
            Intrinsic::Cos => "cos",
            Intrinsic::Exp => "exp",
            Intrinsic::Ln => "ln",
            Intrinsic::Sqrt => "sqrt",
            Intrinsic::Abs => "abs",
        }
    }
}

pub(crate) type Expr = Arc<Node>;

#[derive(Debug, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(Var),
    Param(Arc<str>),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Call(Intrinsic, Expr),
}

impl Node {
    fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }
}

// Constructors below fold constants and drop additive/multiplicative
// identities; nothing else is rewritten.

fn konst(c: f64) -> Expr {
    Arc::new(Node::Const(c))
}

fn folded(c: f64, otherwise: impl FnOnce() -> Expr) -> Expr {
    if c.is_finite() {
        konst(c)
    } else {
        otherwise()
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match &*a {
        Node::Const(c) => konst(-c),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => folded(x + y, || Arc::new(Node::Add(a.clone(), b.clone()))),
        (Some(0.0), None) => b,
        (None, Some(0.0)) => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => folded(x - y, || Arc::new(Node::Sub(a.clone(), b.clone()))),
        (Some(0.0), None) => neg(b),
        (None, Some(0.0)) => a,
        _ => Arc::new(Node::Sub(a, b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => folded(x * y, || Arc::new(Node::Mul(a.clone(), b.clone()))),
        (Some(0.0), None) => konst(0.0),
        (None, Some(0.0)) => konst(0.0),
        (Some(1.0), None) => b,
        (None, Some(1.0)) => a,
        (Some(-1.0), None) => neg(b),
        (None, Some(-1.0)) => neg(a),
        _ => Arc::new(Node::Mul(a, b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => folded(x / y, || Arc::new(Node::Div(a.clone(), b.clone()))),
        (Some(0.0), _) => konst(0.0),
        (None, Some(1.0)) => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

pub(crate) fn pow(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(0.0)) => konst(1.0),
        (_, Some(1.0)) => a,
        (Some(x), Some(y)) => match eval_pow(x, y) {
            Ok(v) => konst(v),
            Err(_) => Arc::new(Node::Pow(a.clone(), b.clone())),
        },
        _ => Arc::new(Node::Pow(a, b)),
    }
}

pub(crate) fn call(f: Intrinsic, a: Expr) -> Expr {
    if let Some(x) = a.as_const() {
        if let Ok(v) = eval_call(f, x) {
            return konst(v);
        }
    }
    Arc::new(Node::Call(f, a))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown intrinsic `{name}` at byte {offset}")]
    UnknownIntrinsic { name: String, offset: usize },
    #[error("coordinate `{name}` at byte {offset} is out of range for dimension {dim}")]
    IndexOutOfRange { name: String, offset: usize, dim: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {message} in `{subexpr}`")]
    Domain { message: String, subexpr: String },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("point has dimension {found}, field expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

fn eval_pow(base: f64, exp: f64) -> Result<f64, &'static str> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return Err("zero raised to a negative power");
        }
        Ok(base.powi(exp as i32))
    } else if base > 0.0 {
        Ok(base.powf(exp))
    } else {
        Err("non-integer power of a non-positive base")
    }
}

fn eval_call(f: Intrinsic, x: f64) -> Result<f64, &'static str> {
    match f {
        Intrinsic::Sin => Ok(x.sin()),
        Intrinsic::Cos => Ok(x.cos()),
        Intrinsic::Exp => Ok(x.exp()),
        Intrinsic::Ln if x > 0.0 => Ok(x.ln()),
        Intrinsic::Ln => Err("logarithm of a non-positive number"),
        Intrinsic::Sqrt if x >= 0.0 => Ok(x.sqrt()),
        Intrinsic::Sqrt => Err("square root of a negative number"),
        Intrinsic::Abs => Ok(x.abs()),
    }
}

/// A parsed, exactly differentiable real-valued expression over
/// `(q, p, S, t)` and named parameters.
#[derive(Clone)]
pub struct ScalarField {
    root: Expr,
    dim: usize,
}

impl ScalarField {
    /// Parses `source` for a phase space of dimension `n`.
    pub fn parse(source: &str, n: usize) -> Result<Self, ParseError> {
        if n == 0 {
            return Err(ParseError::ZeroDimension);
        }
        let root = parse::Parser::new(source, n).parse()?;
        Ok(Self { root, dim: n })
    }

    pub(crate) fn from_expr(root: Expr, dim: usize) -> Self {
        Self { root, dim }
    }

    pub(crate) fn expr(&self) -> &Expr {
        &self.root
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Self::from_expr(konst(value), n)
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(0.0, n)
    }

    pub fn var(var: Var, n: usize) -> Self {
        match var {
            Var::Q(i) | Var::P(i) => assert!(i < n, "{var} out of range for dimension {n}"),
            _ => {}
        }
        Self::from_expr(Arc::new(Node::Var(var)), n)
    }

    pub fn param(name: &str, n: usize) -> Self {
        Self::from_expr(Arc::new(Node::Param(Arc::from(name))), n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The value if this field folded to a literal.
    pub fn as_constant(&self) -> Option<f64> {
        self.root.as_const()
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut vars = BTreeSet::new();
        visit(&self.root, &mut |node| {
            if let Node::Var(v) = node {
                vars.insert(*v);
            }
        });
        vars
    }

    pub fn free_params(&self) -> BTreeSet<String> {
        let mut params = BTreeSet::new();
        visit(&self.root, &mut |node| {
            if let Node::Param(name) = node {
                params.insert(name.to_string());
            }
        });
        params
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.free_vars().contains(&var)
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<f64, EvalError> {
        if ctx.point.dim() != self.dim {
            return Err(EvalError::DimensionMismatch { expected: self.dim, found: ctx.point.dim() });
        }
        eval(&self.root, ctx)
    }

    /// Exact partial derivative treating every parameter as a constant.
    pub fn partial(&self, var: Var) -> ScalarField {
        self.partial_with(var, &ParamRates::default())
    }

    /// Exact partial derivative where the parameters listed in `rates` are
    /// functions of `t` with the given time derivatives.
    pub fn partial_with(&self, var: Var, rates: &ParamRates) -> ScalarField {
        let root = diff::Differentiator::new(var, rates).diff(&self.root);
        ScalarField::from_expr(root, self.dim)
    }

    /// Replaces every occurrence of parameter `name` by `value`.
    pub fn substitute(&self, name: &str, value: &ScalarField) -> ScalarField {
        let mut memo = BTreeMap::new();
        let root = substitute(&self.root, name, &value.root, &mut memo);
        ScalarField::from_expr(root, self.dim.max(value.dim))
    }

    /// Number of distinct nodes in the expression graph.
    pub fn node_count(&self) -> usize {
        let mut seen = BTreeSet::new();
        count_nodes(&self.root, &mut seen);
        seen.len()
    }

    pub fn pow(&self, exponent: &ScalarField) -> ScalarField {
        self.binary(exponent, pow)
    }

    pub fn powf(&self, exponent: f64) -> ScalarField {
        self.pow(&ScalarField::constant(exponent, self.dim))
    }

    pub fn apply(&self, f: Intrinsic) -> ScalarField {
        ScalarField::from_expr(call(f, self.root.clone()), self.dim)
    }

    pub fn sqrt(&self) -> ScalarField {
        self.apply(Intrinsic::Sqrt)
    }

    pub fn exp(&self) -> ScalarField {
        self.apply(Intrinsic::Exp)
    }

    fn binary(&self, other: &ScalarField, op: fn(Expr, Expr) -> Expr) -> ScalarField {
        ScalarField::from_expr(op(self.root.clone(), other.root.clone()), self.dim.max(other.dim))
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({self})")
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::write_expr(f, &self.root)
    }
}

impl std::str::FromStr for ScalarField {
    type Err = ParseError;

    /// Parses with the smallest dimension that admits every coordinate used.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Parse once with a generous dimension to discover the coordinates.
        let probe = ScalarField::parse(s, usize::MAX / 2)?;
        let n = probe
            .free_vars()
            .iter()
            .filter_map(|v| match v {
                Var::Q(i) | Var::P(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(1);
        ScalarField::parse(s, n)
    }
}

fn visit(node: &Expr, f: &mut impl FnMut(&Node)) {
    f(node);
    match &**node {
        Node::Const(_) | Node::Var(_) | Node::Param(_) => {}
        Node::Neg(a) | Node::Call(_, a) => visit(a, f),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            visit(a, f);
            visit(b, f);
        }
    }
}

fn count_nodes(node: &Expr, seen: &mut BTreeSet<usize>) {
    if !seen.insert(Arc::as_ptr(node) as usize) {
        return;
    }
    match &**node {
        Node::Const(_) | Node::Var(_) | Node::Param(_) => {}
        Node::Neg(a) | Node::Call(_, a) => count_nodes(a, seen),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            count_nodes(a, seen);
            count_nodes(b, seen);
        }
    }
}

fn substitute(node: &Expr, name: &str, value: &Expr, memo: &mut BTreeMap<usize, Expr>) -> Expr {
    let key = Arc::as_ptr(node) as usize;
    if let Some(done) = memo.get(&key) {
        return done.clone();
    }
    let mut rec = |e: &Expr| substitute(e, name, value, memo);
    let out = match &**node {
        Node::Param(p) if &**p == name => value.clone(),
        Node::Const(_) | Node::Var(_) | Node::Param(_) => node.clone(),
        Node::Neg(a) => neg(rec(a)),
        Node::Call(f, a) => call(*f, rec(a)),
        Node::Add(a, b) => add(rec(a), rec(b)),
        Node::Sub(a, b) => sub(rec(a), rec(b)),
        Node::Mul(a, b) => mul(rec(a), rec(b)),
        Node::Div(a, b) => div(rec(a), rec(b)),
        Node::Pow(a, b) => pow(rec(a), rec(b)),
    };
    memo.insert(key, out.clone());
    out
}

fn domain(message: &str, node: &Expr) -> EvalError {
    EvalError::Domain {
        message: message.to_owned(),
        subexpr: display::to_string(node),
    }
}

fn eval(node: &Expr, ctx: &EvalContext) -> Result<f64, EvalError> {
    let value = match &**node {
        Node::Const(c) => return Ok(*c),
        Node::Var(v) => {
            return Ok(match *v {
                Var::Q(i) => ctx.point.q[i],
                Var::P(i) => ctx.point.p[i],
                Var::S => ctx.point.s,
                Var::T => ctx.point.t,
            })
        }
        Node::Param(name) => {
            return ctx
                .params
                .get(name)
                .ok_or_else(|| EvalError::UnboundParameter(name.to_string()))
        }
        Node::Neg(a) => -eval(a, ctx)?,
        Node::Add(a, b) => eval(a, ctx)? + eval(b, ctx)?,
        Node::Sub(a, b) => eval(a, ctx)? - eval(b, ctx)?,
        Node::Mul(a, b) => eval(a, ctx)? * eval(b, ctx)?,
        Node::Div(a, b) => {
            let num = eval(a, ctx)?;
            let den = eval(b, ctx)?;
            if den == 0.0 {
                return Err(domain("division by zero", node));
            }
            num / den
        }
        Node::Pow(a, b) => {
            let base = eval(a, ctx)?;
            let exp = eval(b, ctx)?;
            eval_pow(base, exp).map_err(|m| domain(m, node))?
        }
        Node::Call(f, a) => eval_call(*f, eval(a, ctx)?).map_err(|m| domain(m, node))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain("non-finite result", node))
    }
}

/// Evaluates a field against a bare parameter set at a point.
pub fn evaluate_at(field: &ScalarField, ctx: &EvalContext) -> Result<f64, EvalError> {
    field.evaluate(ctx)
}

/// Checks that every free parameter of `field` is bound in `params`.
pub fn unbound_params(field: &ScalarField, params: &Params) -> Vec<String> {
    field.free_params().into_iter().filter(|p| !params.contains(p)).collect()
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl ops::$trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.binary(rhs, $ctor)
            }
        }
        impl ops::$trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                self.binary(&rhs, $ctor)
            }
        }
        impl ops::$trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.binary(rhs, $ctor)
            }
        }
        impl ops::$trait<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                self.binary(&rhs, $ctor)
            }
        }
        impl ops::$trait<f64> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                self.binary(&ScalarField::constant(rhs, self.dim), $ctor)
            }
        }
        impl ops::$trait<f64> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                self.binary(&ScalarField::constant(rhs, self.dim), $ctor)
            }
        }
        impl ops::$trait<&ScalarField> for f64 {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                ScalarField::constant(self, rhs.dim).binary(rhs, $ctor)
            }
        }
        impl ops::$trait<ScalarField> for f64 {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                ScalarField::constant(self, rhs.dim).binary(&rhs, $ctor)
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::from_expr(neg(self.root.clone()), self.dim)
    }
}

impl ops::Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -&self
    }
}

impl std::iter::Sum for ScalarField {
    fn sum<I: Iterator<Item = ScalarField>>(iter: I) -> ScalarField {
        let mut acc: Option<ScalarField> = None;
        for item in iter {
            acc = Some(match acc {
                None => item,
                Some(a) => a + item,
            });
        }
        acc.unwrap_or_else(|| ScalarField::zero(1))
    }
}
