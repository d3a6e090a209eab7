//! Univariate expression trees over the time index `t`.

mod models;
mod parse;
mod simplify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use models::{paper_model, UnknownIndex, PAPER_INDICES};
pub use parse::{parse, ParseError};
pub use simplify::simplify;

pub const DEFAULT_MAX_DEPTH: usize = 10;
pub const MIN_EXPONENT: u8 = 2;
pub const MAX_EXPONENT: u8 = 8;

/// Why an evaluation failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error, Serialize)]
pub enum DomainError {
    #[error("division by zero")]
    DivByZero,
    #[error("logarithm of a non-positive value")]
    LogNonPositive,
    #[error("non-finite intermediate value")]
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Cos,
    Sin,
    Log,
    Exp,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 4] = [UnaryOp::Cos, UnaryOp::Sin, UnaryOp::Log, UnaryOp::Exp];

    pub fn name(&self) -> &'static str {
        match self {
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn apply(&self, x: f64) -> Result<f64, DomainError> {
        let y = match self {
            UnaryOp::Cos => x.cos(),
            UnaryOp::Sin => x.sin(),
            UnaryOp::Log if x <= 0.0 => return Err(DomainError::LogNonPositive),
            UnaryOp::Log => x.ln(),
            UnaryOp::Exp => x.exp(),
        };
        finite(y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn symbol(&self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    pub fn apply(&self, a: f64, b: f64) -> Result<f64, DomainError> {
        let y = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div if b == 0.0 => return Err(DomainError::DivByZero),
            BinaryOp::Div => a / b,
        };
        finite(y)
    }
}

fn finite(y: f64) -> Result<f64, DomainError> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(DomainError::Overflow)
    }
}

/// Expression node. Constants must be finite; `Pow` exponents lie in
/// `MIN_EXPONENT..=MAX_EXPONENT`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InvalidExpr {
    #[error("constant is not finite")]
    NonFiniteConstant,
    #[error("exponent {0} outside {MIN_EXPONENT}..={MAX_EXPONENT}")]
    ExponentOutOfRange(u8),
    #[error("depth {depth} exceeds maximum {max}")]
    TooDeep { depth: usize, max: usize },
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn add(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::Add, left, right)
    }

    pub fn sub(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::Sub, left, right)
    }

    pub fn mul(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::Mul, left, right)
    }

    pub fn div(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::Div, left, right)
    }

    pub fn pow(base: Expr, exponent: u8) -> Self {
        Expr::Pow(Box::new(base), exponent)
    }

    /// Evaluates at `t`. Never returns a non-finite value.
    pub fn eval(&self, t: f64) -> Result<f64, DomainError> {
        match self {
            Expr::Const(c) => finite(*c),
            Expr::Time => finite(t),
            Expr::Unary(op, x) => op.apply(x.eval(t)?),
            Expr::Binary(op, a, b) => op.apply(a.eval(t)?, b.eval(t)?),
            Expr::Pow(x, k) => finite(x.eval(t)?.powi(i32::from(*k))),
        }
    }

    /// Evaluates at every point of `ts` in one pass over the tree. Fails
    /// exactly when [`Expr::eval`] fails at some point.
    pub fn eval_batch(&self, ts: &[f64]) -> Result<Vec<f64>, DomainError> {
        let mut out = vec![0.0; ts.len()];
        self.eval_into(ts, &mut out, &mut Vec::new())?;
        Ok(out)
    }

    /// `spare` recycles buffers for right operands.
    fn eval_into(&self, ts: &[f64], out: &mut [f64], spare: &mut Vec<Vec<f64>>) -> Result<(), DomainError> {
        match self {
            Expr::Const(c) => out.fill(finite(*c)?),
            Expr::Time => {
                for (o, t) in out.iter_mut().zip(ts) {
                    *o = finite(*t)?;
                }
            }
            Expr::Unary(op, x) => {
                x.eval_into(ts, out, spare)?;
                for o in out.iter_mut() {
                    *o = op.apply(*o)?;
                }
            }
            Expr::Binary(op, a, b) => {
                a.eval_into(ts, out, spare)?;
                let mut right = spare.pop().unwrap_or_default();
                right.resize(ts.len(), 0.0);
                let result = b.eval_into(ts, &mut right, spare).and_then(|()| {
                    for (o, r) in out.iter_mut().zip(&right) {
                        *o = op.apply(*o, *r)?;
                    }
                    Ok(())
                });
                spare.push(right);
                result?;
            }
            Expr::Pow(x, k) => {
                x.eval_into(ts, out, spare)?;
                for o in out.iter_mut() {
                    *o = finite(o.powi(i32::from(*k)))?;
                }
            }
        }
        Ok(())
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Time => vec![],
            Expr::Unary(_, x) | Expr::Pow(x, _) => vec![x],
            Expr::Binary(_, a, b) => vec![a, b],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Time)
    }

    /// A single leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Time => 1,
            Expr::Unary(_, x) | Expr::Pow(x, _) => 1 + x.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Time => 1,
            Expr::Unary(_, x) | Expr::Pow(x, _) => 1 + x.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn contains_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Const(_) => false,
            Expr::Unary(_, x) | Expr::Pow(x, _) => x.contains_time(),
            Expr::Binary(_, a, b) => a.contains_time() || b.contains_time(),
        }
    }

    pub fn complexity(&self, w: &ComplexityWeights) -> u32 {
        complexity(self, w)
    }

    /// Checks the node invariants and the depth bound.
    pub fn validate(&self, max_depth: usize) -> Result<(), InvalidExpr> {
        fn check(e: &Expr) -> Result<(), InvalidExpr> {
            match e {
                Expr::Const(c) if !c.is_finite() => Err(InvalidExpr::NonFiniteConstant),
                Expr::Pow(_, k) if !(MIN_EXPONENT..=MAX_EXPONENT).contains(k) => {
                    Err(InvalidExpr::ExponentOutOfRange(*k))
                }
                _ => e.children().into_iter().try_for_each(check),
            }
        }
        check(self)?;
        let depth = self.depth();
        if depth > max_depth {
            return Err(InvalidExpr::TooDeep { depth, max: max_depth });
        }
        Ok(())
    }

    /// Constant values in preorder.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_preorder(&mut |e| {
            if let Expr::Const(c) = e {
                out.push(*c);
            }
        });
        out
    }

    /// Overwrites constants in preorder. `values` must hold at least as many
    /// entries as there are constants.
    pub fn set_constants(&mut self, values: &[f64]) {
        fn walk(e: &mut Expr, values: &[f64], next: &mut usize) {
            match e {
                Expr::Const(c) => {
                    *c = values[*next];
                    *next += 1;
                }
                Expr::Time => {}
                Expr::Unary(_, x) | Expr::Pow(x, _) => walk(x, values, next),
                Expr::Binary(_, a, b) => {
                    walk(a, values, next);
                    walk(b, values, next);
                }
            }
        }
        walk(self, values, &mut 0);
    }

    pub fn visit_preorder<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.visit_preorder(f);
        }
    }

    /// Node at preorder position `index`.
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        let mut seen = 0;
        let mut found = None;
        self.visit_preorder(&mut |e| {
            if seen == index {
                found = Some(e);
            }
            seen += 1;
        });
        found
    }

    pub fn subtree_mut(&mut self, index: usize) -> Option<&mut Expr> {
        fn walk<'a>(e: &'a mut Expr, index: usize, seen: &mut usize) -> Option<&'a mut Expr> {
            if *seen == index {
                return Some(e);
            }
            *seen += 1;
            match e {
                Expr::Const(_) | Expr::Time => None,
                Expr::Unary(_, x) | Expr::Pow(x, _) => walk(x, index, seen),
                Expr::Binary(_, a, b) => {
                    if let Some(found) = walk(a, index, seen) {
                        return Some(found);
                    }
                    walk(b, index, seen)
                }
            }
        }
        walk(self, index, &mut 0)
    }

    /// Depth of the node at each preorder position, root at 1.
    pub fn node_depths(&self) -> Vec<usize> {
        fn walk(e: &Expr, level: usize, out: &mut Vec<usize>) {
            out.push(level);
            for c in e.children() {
                walk(c, level + 1, out);
            }
        }
        let mut out = Vec::new();
        walk(self, 1, &mut out);
        out
    }

    /// Copy with the subtree at preorder `index` replaced by `replacement`.
    pub fn replace_subtree(&self, index: usize, replacement: Expr) -> Expr {
        let mut out = self.clone();
        if let Some(slot) = out.subtree_mut(index) {
            *slot = replacement;
        }
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_expr(self, f)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Per-node-kind weights for [`complexity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityWeights {
    pub constant: u32,
    pub time: u32,
    pub unary: u32,
    pub binary: u32,
    pub pow: u32,
    /// Added on top of `pow` for the exponent literal.
    pub exponent: u32,
}

impl Default for ComplexityWeights {
    fn default() -> Self {
        Self { constant: 1, time: 1, unary: 1, binary: 1, pow: 1, exponent: 1 }
    }
}

/// Weighted node count.
pub fn complexity(e: &Expr, w: &ComplexityWeights) -> u32 {
    match e {
        Expr::Const(_) => w.constant,
        Expr::Time => w.time,
        Expr::Unary(_, x) => w.unary + complexity(x, w),
        Expr::Binary(_, a, b) => w.binary + complexity(a, w) + complexity(b, w),
        Expr::Pow(x, _) => w.pow + w.exponent + complexity(x, w),
    }
}
