//! Scalar expressions in the Riemann invariants `R1..Rn`.
//!
//! An [`Expression`] is an immutable, reference-counted AST. Subtrees are shared
//! freely (differentiation reuses its operands), so an expression is really a
//! DAG; [`Tape`] compiles one or more expressions into a flat, hash-consed
//! instruction list for repeated evaluation.
//!
//! Variable indices are zero-based in the Rust API: `Expression::var(0)` is the
//! variable written `R1` in text.

mod diff;
mod parse;
mod tape;
mod univariate;

pub use parse::{parse, parse_with, ParseError, VarScheme};
pub use tape::Tape;
pub use univariate::{Role, UnivariateSpec};

use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

/// Unary elementary functions accepted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Applies the function, returning `None` outside its real domain.
    pub(crate) fn apply(self, x: f64) -> Option<f64> {
        match self {
            Func::Exp => Some(x.exp()),
            Func::Log => (x > 0.0).then(|| x.ln()),
            Func::Sin => Some(x.sin()),
            Func::Cos => Some(x.cos()),
            Func::Sqrt => (x >= 0.0).then(|| x.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Pow(Expression, u32),
    Neg(Expression),
    Call(Func, Expression),
}

#[derive(Clone)]
pub struct Expression(Arc<Node>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFinite,
    MissingVariable,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogOfNonPositive => "log of a non-positive value",
            EvalErrorKind::SqrtOfNegative => "sqrt of a negative value",
            EvalErrorKind::NonFinite => "non-finite intermediate value",
            EvalErrorKind::MissingVariable => "point has too few coordinates",
        })
    }
}

/// Evaluation failure together with the subterm that caused it.
#[derive(Debug, Clone, Error)]
#[error("{kind} in `{term}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub term: Expression,
}

impl Expression {
    fn from_node(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn ptr_eq(&self, other: &Expression) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn ptr_key(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    /// Cheap syntactic identity used by the simplifier: shared pointers,
    /// equal constants or the same variable.
    fn same_leaf(&self, other: &Expression) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            _ => false,
        }
    }

    pub fn add(&self, rhs: &Expression) -> Expression {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a + b),
            (Some(a), _) if a == 0.0 => return rhs.clone(),
            (_, Some(b)) if b == 0.0 => return self.clone(),
            _ => {}
        }
        if let Node::Neg(inner) = rhs.node() {
            return self.sub(inner);
        }
        Self::from_node(Node::Add(self.clone(), rhs.clone()))
    }

    pub fn sub(&self, rhs: &Expression) -> Expression {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a - b),
            (Some(a), _) if a == 0.0 => return rhs.neg(),
            (_, Some(b)) if b == 0.0 => return self.clone(),
            _ => {}
        }
        if self.same_leaf(rhs) {
            return Self::zero();
        }
        Self::from_node(Node::Sub(self.clone(), rhs.clone()))
    }

    pub fn mul(&self, rhs: &Expression) -> Expression {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a * b),
            (Some(a), _) if a == 0.0 => return Self::zero(),
            (_, Some(b)) if b == 0.0 => return Self::zero(),
            (Some(a), _) if a == 1.0 => return rhs.clone(),
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (Some(a), _) if a == -1.0 => return rhs.neg(),
            (_, Some(b)) if b == -1.0 => return self.neg(),
            _ => {}
        }
        Self::from_node(Node::Mul(self.clone(), rhs.clone()))
    }

    pub fn div(&self, rhs: &Expression) -> Expression {
        if self.is_zero() {
            return Self::zero();
        }
        if rhs.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            let q = a / b;
            if b != 0.0 && q.is_finite() {
                return Self::constant(q);
            }
        }
        Self::from_node(Node::Div(self.clone(), rhs.clone()))
    }

    pub fn neg(&self) -> Expression {
        match self.node() {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Self::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn powi(&self, exponent: u32) -> Expression {
        match exponent {
            0 => return Self::one(),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(c) = self.as_const() {
            let v = c.powi(exponent as i32);
            if v.is_finite() {
                return Self::constant(v);
            }
        }
        if self.is_one() {
            return Self::one();
        }
        Self::from_node(Node::Pow(self.clone(), exponent))
    }

    pub fn call(func: Func, arg: &Expression) -> Expression {
        if let Some(v) = arg.as_const().and_then(|c| func.apply(c)) {
            if v.is_finite() {
                return Self::constant(v);
            }
        }
        Self::from_node(Node::Call(func, arg.clone()))
    }

    pub fn exp(&self) -> Expression {
        Self::call(Func::Exp, self)
    }

    pub fn ln(&self) -> Expression {
        Self::call(Func::Log, self)
    }

    pub fn sin(&self) -> Expression {
        Self::call(Func::Sin, self)
    }

    pub fn cos(&self) -> Expression {
        Self::call(Func::Cos, self)
    }

    pub fn sqrt(&self) -> Expression {
        Self::call(Func::Sqrt, self)
    }

    /// Sum of a list of expressions; the empty sum is zero.
    pub fn sum<'a, I: IntoIterator<Item = &'a Expression>>(terms: I) -> Expression {
        terms
            .into_iter()
            .fold(Self::zero(), |acc, term| acc.add(term))
    }

    /// Evaluates at `point` (indexed by zero-based variable index).
    ///
    /// Compiles a throwaway [`Tape`]; callers evaluating the same expression
    /// many times should compile once and reuse it.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        Tape::compile(std::slice::from_ref(self))
            .eval(point)
            .map(|v| v[0])
    }

    /// Largest variable index referenced plus one (0 for constants).
    pub fn arity(&self) -> usize {
        let mut max = 0;
        self.visit_vars(&mut |i| max = max.max(i + 1));
        max
    }

    /// Sorted, deduplicated list of referenced variable indices.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars = Vec::new();
        self.visit_vars(&mut |i| vars.push(i));
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn depends_on(&self, index: usize) -> bool {
        let mut found = false;
        self.visit_vars(&mut |i| found |= i == index);
        found
    }

    fn visit_vars(&self, f: &mut dyn FnMut(usize)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr_key()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(i) => f(*i),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Pow(a, _) | Node::Neg(a) | Node::Call(_, a) => stack.push(a.clone()),
            }
        }
    }

    /// Replaces every variable `i` with `map(i)`.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expression) -> Expression {
        let mut cache = std::collections::HashMap::new();
        self.substitute_cached(map, &mut cache)
    }

    fn substitute_cached(
        &self,
        map: &dyn Fn(usize) -> Expression,
        cache: &mut std::collections::HashMap<*const Node, Expression>,
    ) -> Expression {
        if let Some(hit) = cache.get(&self.ptr_key()) {
            return hit.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => map(*i),
            Node::Add(a, b) => a
                .substitute_cached(map, cache)
                .add(&b.substitute_cached(map, cache)),
            Node::Sub(a, b) => a
                .substitute_cached(map, cache)
                .sub(&b.substitute_cached(map, cache)),
            Node::Mul(a, b) => a
                .substitute_cached(map, cache)
                .mul(&b.substitute_cached(map, cache)),
            Node::Div(a, b) => a
                .substitute_cached(map, cache)
                .div(&b.substitute_cached(map, cache)),
            Node::Pow(a, k) => a.substitute_cached(map, cache).powi(*k),
            Node::Neg(a) => a.substitute_cached(map, cache).neg(),
            Node::Call(func, a) => Expression::call(*func, &a.substitute_cached(map, cache)),
        };
        cache.insert(self.ptr_key(), out.clone());
        out
    }

    /// Renames variables: `R(i+1)` becomes `R(perm[i]+1)`.
    pub fn relabel(&self, perm: &[usize]) -> Expression {
        self.substitute(&|i| Expression::var(perm[i]))
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other) || self.0 == other.0
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

/// Prints in the input grammar; the output re-parses to an expression with
/// identical evaluations.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var(i) => write!(f, "R{}", i + 1),
            Node::Add(a, b) => {
                a.fmt_operand(f, 1)?;
                f.write_str(" + ")?;
                b.fmt_operand(f, 2)
            }
            Node::Sub(a, b) => {
                a.fmt_operand(f, 1)?;
                f.write_str(" - ")?;
                b.fmt_operand(f, 2)
            }
            Node::Mul(a, b) => {
                a.fmt_operand(f, 2)?;
                f.write_str("*")?;
                b.fmt_operand(f, 3)
            }
            Node::Div(a, b) => {
                a.fmt_operand(f, 2)?;
                f.write_str("/")?;
                b.fmt_operand(f, 4)
            }
            Node::Pow(a, k) => {
                a.fmt_operand(f, 5)?;
                write!(f, "^{k}")
            }
            Node::Neg(a) => {
                f.write_str("-")?;
                a.fmt_operand(f, 3)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $inherent:ident) => {
        impl ops::$trait<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                Expression::$inherent(self, rhs)
            }
        }
        impl ops::$trait<Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::$inherent(&self, &rhs)
            }
        }
        impl ops::$trait<&Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                Expression::$inherent(&self, rhs)
            }
        }
        impl ops::$trait<Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::$inherent(self, &rhs)
            }
        }
        impl ops::$trait<f64> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: f64) -> Expression {
                Expression::$inherent(self, &Expression::constant(rhs))
            }
        }
    };
}

binary_op!(Add, add, add);
binary_op!(Sub, sub, sub);
binary_op!(Mul, mul, mul);
binary_op!(Div, div, div);

impl ops::Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(self)
    }
}

impl ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(&self)
    }
}

impl From<f64> for Expression {
    fn from(value: f64) -> Self {
        Expression::constant(value)
    }
}
