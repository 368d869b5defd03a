use std::collections::HashMap;

use super::{EvalError, EvalErrorKind, Expression, Func, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    Var(usize),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Pow(u32, u32),
    Neg(u32),
    Call(Func, u32),
}

/// A set of expressions flattened into one instruction list.
///
/// Structurally identical subterms are stored once (hash-consing), so common
/// subexpressions shared between outputs, e.g. the speeds inside every
/// `a_ij`, are evaluated a single time per point.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    terms: Vec<Expression>,
    outputs: Vec<u32>,
    arity: usize,
}

impl Tape {
    pub fn compile(exprs: &[Expression]) -> Tape {
        let mut builder = Builder::default();
        let outputs = exprs.iter().map(|e| builder.visit(e)).collect();
        let arity = builder
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Tape {
            ops: builder.ops,
            terms: builder.terms,
            outputs,
            arity,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Minimum point dimension accepted by [`Tape::eval`].
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(point, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Evaluates every output into `out`, reusing `scratch` across calls.
    pub fn eval_into(
        &self,
        point: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        scratch.clear();
        scratch.reserve(self.ops.len());
        for (k, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Const(bits) => f64::from_bits(bits),
                Op::Var(i) => match point.get(i) {
                    Some(&v) => v,
                    None => return Err(self.fail(k, EvalErrorKind::MissingVariable)),
                },
                Op::Add(a, b) => scratch[a as usize] + scratch[b as usize],
                Op::Sub(a, b) => scratch[a as usize] - scratch[b as usize],
                Op::Mul(a, b) => scratch[a as usize] * scratch[b as usize],
                Op::Div(a, b) => {
                    let d = scratch[b as usize];
                    if d == 0.0 {
                        return Err(self.fail(k, EvalErrorKind::DivisionByZero));
                    }
                    scratch[a as usize] / d
                }
                Op::Pow(a, e) => powi(scratch[a as usize], e),
                Op::Neg(a) => -scratch[a as usize],
                Op::Call(func, a) => {
                    let x = scratch[a as usize];
                    match func.apply(x) {
                        Some(v) => v,
                        None => {
                            let kind = match func {
                                Func::Log => EvalErrorKind::LogOfNonPositive,
                                _ => EvalErrorKind::SqrtOfNegative,
                            };
                            return Err(self.fail(k, kind));
                        }
                    }
                }
            };
            if !v.is_finite() {
                return Err(self.fail(k, EvalErrorKind::NonFinite));
            }
            scratch.push(v);
        }
        for (slot, &idx) in out.iter_mut().zip(&self.outputs) {
            *slot = scratch[idx as usize];
        }
        Ok(())
    }

    fn fail(&self, k: usize, kind: EvalErrorKind) -> EvalError {
        EvalError {
            kind,
            term: self.terms[k].clone(),
        }
    }
}

// Repeated squaring: exact for small exponents and independent of libm.
fn powi(mut base: f64, mut e: u32) -> f64 {
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[derive(Default)]
struct Builder {
    ops: Vec<Op>,
    terms: Vec<Expression>,
    by_ptr: HashMap<*const Node, u32>,
    by_op: HashMap<Op, u32>,
}

impl Builder {
    fn visit(&mut self, e: &Expression) -> u32 {
        if let Some(&idx) = self.by_ptr.get(&e.ptr_key()) {
            return idx;
        }
        let op = match e.node() {
            Node::Const(c) => Op::Const(c.to_bits()),
            Node::Var(i) => Op::Var(*i),
            Node::Add(a, b) => Op::Add(self.visit(a), self.visit(b)),
            Node::Sub(a, b) => Op::Sub(self.visit(a), self.visit(b)),
            Node::Mul(a, b) => Op::Mul(self.visit(a), self.visit(b)),
            Node::Div(a, b) => Op::Div(self.visit(a), self.visit(b)),
            Node::Pow(a, k) => Op::Pow(self.visit(a), *k),
            Node::Neg(a) => Op::Neg(self.visit(a)),
            Node::Call(f, a) => Op::Call(*f, self.visit(a)),
        };
        let idx = match self.by_op.get(&op) {
            Some(&idx) => idx,
            None => {
                let idx = self.ops.len() as u32;
                self.ops.push(op);
                self.terms.push(e.clone());
                self.by_op.insert(op, idx);
                idx
            }
        };
        self.by_ptr.insert(e.ptr_key(), idx);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn common_subexpressions_are_shared() {
        let a = parse("sin(R1)*R2 + sin(R1)*R2", 2).unwrap();
        let tape = Tape::compile(&[a]);
        // R1, sin, R2, mul, add
        assert_eq!(tape.len(), 5);
    }

    #[test]
    fn multiple_outputs() {
        let e1 = parse("R1 + R2", 2).unwrap();
        let e2 = parse("(R1 + R2)^2", 2).unwrap();
        let tape = Tape::compile(&[e1, e2]);
        assert_eq!(tape.eval(&[1.0, 2.0]).unwrap(), vec![3.0, 9.0]);
        assert_eq!(tape.arity(), 2);
    }

    #[test]
    fn errors_carry_offending_subterm() {
        let e = parse("R1 + R1/R2", 2).unwrap();
        let err = e.evaluate(&[1.0, 0.0]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.term.to_string(), "R1/R2");
        let err = parse("log(R1 - 1)", 1)
            .unwrap()
            .evaluate(&[0.5])
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogOfNonPositive);
        let err = parse("sqrt(R1)", 1).unwrap().evaluate(&[-0.5]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::SqrtOfNegative);
    }

    #[test]
    fn pythagorean_identity() {
        let e = parse("sin(R1)^2 + cos(R1)^2", 1).unwrap();
        assert!((e.evaluate(&[0.7]).unwrap() - 1.0).abs() <= 1e-15);
        let e = parse("exp(0*R1)", 1).unwrap();
        assert_eq!(e.evaluate(&[123.0]).unwrap(), 1.0);
    }
}
