use std::collections::HashMap;

use super::{Expression, Func, Node};

impl Expression {
    /// Exact partial derivative with respect to variable `index` (zero-based).
    ///
    /// Shared subtrees are differentiated once per call, so the result stays
    /// a DAG of size linear in the input.
    pub fn differentiate(&self, index: usize) -> Expression {
        let mut cache = HashMap::new();
        self.diff_cached(index, &mut cache)
    }

    /// Derivative along a multi-index, e.g. `&[0, 0, 1]` for d³/dR1²dR2.
    pub fn differentiate_many(&self, indices: &[usize]) -> Expression {
        indices
            .iter()
            .fold(self.clone(), |e, &i| e.differentiate(i))
    }

    /// All first partial derivatives in variables `0..n`.
    pub fn gradient(&self, n: usize) -> Vec<Expression> {
        (0..n).map(|i| self.differentiate(i)).collect()
    }

    fn diff_cached(
        &self,
        index: usize,
        cache: &mut HashMap<*const Node, Expression>,
    ) -> Expression {
        if let Some(hit) = cache.get(&self.ptr_key()) {
            return hit.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expression::zero(),
            Node::Var(i) => {
                if *i == index {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Add(a, b) => a
                .diff_cached(index, cache)
                .add(&b.diff_cached(index, cache)),
            Node::Sub(a, b) => a
                .diff_cached(index, cache)
                .sub(&b.diff_cached(index, cache)),
            Node::Mul(a, b) => {
                let da = a.diff_cached(index, cache);
                let db = b.diff_cached(index, cache);
                da.mul(b).add(&a.mul(&db))
            }
            Node::Div(a, b) => {
                let da = a.diff_cached(index, cache);
                let db = b.diff_cached(index, cache);
                if db.is_zero() {
                    da.div(b)
                } else {
                    // a'/b - a b'/b^2, kept as two terms so a constant
                    // numerator collapses cleanly.
                    da.div(b).sub(&a.mul(&db).div(&b.powi(2)))
                }
            }
            Node::Pow(a, k) => {
                let da = a.diff_cached(index, cache);
                if da.is_zero() {
                    Expression::zero()
                } else {
                    Expression::constant(*k as f64).mul(&a.powi(k - 1)).mul(&da)
                }
            }
            Node::Neg(a) => a.diff_cached(index, cache).neg(),
            Node::Call(func, a) => {
                let da = a.diff_cached(index, cache);
                if da.is_zero() {
                    Expression::zero()
                } else {
                    match func {
                        Func::Exp => self.mul(&da),
                        Func::Log => da.div(a),
                        Func::Sin => a.cos().mul(&da),
                        Func::Cos => a.sin().mul(&da).neg(),
                        Func::Sqrt => da.div(&Expression::constant(2.0).mul(self)),
                    }
                }
            }
        };
        cache.insert(self.ptr_key(), d.clone());
        d
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn eval(text: &str, n: usize, wrt: &[usize], at: &[f64]) -> f64 {
        parse(text, n)
            .unwrap()
            .differentiate_many(wrt)
            .evaluate(at)
            .unwrap()
    }

    #[test]
    fn power_rule() {
        assert_eq!(eval("R1^2", 1, &[0], &[3.0]), 6.0);
    }

    #[test]
    fn independent_variable_gives_zero_expression() {
        let d = parse("R1", 2).unwrap().differentiate(1);
        assert!(d.is_zero());
    }

    #[test]
    fn third_derivative_of_cube_is_six() {
        let d = parse("R1^3", 1).unwrap().differentiate_many(&[0, 0, 0]);
        for x in [-2.0, 0.0, 0.5, 7.0] {
            assert_eq!(d.evaluate(&[x]).unwrap(), 6.0);
        }
    }

    #[test]
    fn elementary_functions() {
        let x = 0.7_f64;
        assert!((eval("log(R1)", 1, &[0], &[x]) - 1.0 / x).abs() < 1e-15);
        assert!((eval("sqrt(R1)", 1, &[0], &[x]) - 0.5 / x.sqrt()).abs() < 1e-15);
        assert!((eval("exp(2*R1)", 1, &[0], &[x]) - 2.0 * (2.0 * x).exp()).abs() < 1e-12);
        assert!((eval("sin(R1)*cos(R1)", 1, &[0], &[x]) - (2.0 * x).cos()).abs() < 1e-15);
        assert!((eval("log(R1^2)", 1, &[0, 0], &[x]) + 2.0 / (x * x)).abs() < 1e-12);
    }

    #[test]
    fn quotient_rule() {
        // d/dR2 (R1/R2) = -R1/R2^2
        assert_eq!(eval("R1/R2", 2, &[1], &[3.0, 2.0]), -0.75);
    }
}
