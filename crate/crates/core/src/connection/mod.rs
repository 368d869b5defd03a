//! The gl(2)-valued connection of a system with `a_ij = p_j λ^i + q_j`, its
//! flatness test, and transport of conservation-law coefficients.
//!
//! The forms are `ω11 = Σ p_i λ^i dR^i`, `ω12 = Σ q_i λ^i dR^i`,
//! `ω21 = Σ p_i dR^i`, `ω22 = Σ q_i dR^i`. A pair `(A, B)` satisfying
//! `dA = A ω11 + B ω12`, `dB = A ω21 + B ω22` gives a conservation law
//! `A dt + B dx` whose reciprocal transformation makes each transformed speed
//! depend on its own invariant only.

mod sections;

pub use sections::{
    decoupling_probe, decoupling_residual, transformed_speeds, DecouplingReport, Path, ProbeResult,
    SectionQuad,
};

use std::sync::OnceLock;

use thiserror::Error;

use crate::expr::{EvalError, Expression, Tape};
use crate::system::{SpeedCalculus, SystemError};

#[derive(Debug, Clone, Error)]
pub enum ConnectionError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("path leaves the hyperbolic region on segment {segment} at {point:?}: {source}")]
    PathDegeneracy {
        segment: usize,
        point: Vec<f64>,
        #[source]
        source: SystemError,
    },
    #[error("transformed speed {i} is singular at {point:?} (|M - λN| = {denominator:e})")]
    TransformSingular {
        i: usize,
        point: Vec<f64>,
        denominator: f64,
    },
    #[error("M - λ^{i} N changes sign between the base point and {point:?}")]
    Horizon { i: usize, point: Vec<f64> },
    #[error("sections are degenerate at the base point (AN - BM = {det:e})")]
    DegenerateSections { det: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

impl From<EvalError> for ConnectionError {
    fn from(e: EvalError) -> Self {
        ConnectionError::System(SystemError::Eval(e))
    }
}

/// Coefficients `(ω_ab)_i` as expressions; `coeffs[a][b][i]`, zero-based.
#[derive(Debug, Clone)]
pub struct ConnectionForms {
    coeffs: [[Vec<Expression>; 2]; 2],
}

impl ConnectionForms {
    pub fn build(calc: &SpeedCalculus) -> Result<Self, SystemError> {
        let n = calc.n();
        if n < 3 {
            return Err(SystemError::TooFewComponents { needed: 3, n });
        }
        let weighted = |v: &[Expression]| -> Vec<Expression> {
            v.iter().zip(&calc.lambdas).map(|(c, l)| c * l).collect()
        };
        Ok(Self {
            coeffs: [
                [weighted(&calc.p), weighted(&calc.q)],
                [calc.p.clone(), calc.q.clone()],
            ],
        })
    }

    pub fn zero(n: usize) -> Self {
        let z = vec![Expression::zero(); n];
        Self {
            coeffs: [[z.clone(), z.clone()], [z.clone(), z]],
        }
    }

    pub fn from_coefficients(coeffs: [[Vec<Expression>; 2]; 2]) -> Self {
        Self { coeffs }
    }

    pub fn n(&self) -> usize {
        self.coeffs[0][0].len()
    }

    /// `(ω_ab)_i` with zero-based `a, b, i`.
    pub fn coefficient(&self, a: usize, b: usize, i: usize) -> &Expression {
        &self.coeffs[a][b][i]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs
            .iter()
            .flatten()
            .flatten()
            .all(Expression::is_zero)
    }

    fn flat(&self) -> Vec<Expression> {
        self.coeffs.iter().flatten().flatten().cloned().collect()
    }
}

/// Form values at one point: `omega[a][b][i]`, plus the speeds there.
#[derive(Debug, Clone)]
pub struct FormValues {
    pub lambdas: Vec<f64>,
    pub omega: [[Vec<f64>; 2]; 2],
}

/// Compiled evaluator for the forms of one system.
pub struct FormsEvaluator {
    forms: ConnectionForms,
    values: Tape,
    speeds: Tape,
    n: usize,
    delta: f64,
    structure: OnceLock<Tape>,
}

impl FormsEvaluator {
    /// `lambdas` are used for the hyperbolicity check and returned with every
    /// evaluation; `delta` is the separation threshold.
    pub fn new(forms: ConnectionForms, lambdas: &[Expression], delta: f64) -> Self {
        let n = forms.n();
        let mut outputs = lambdas.to_vec();
        outputs.extend(forms.flat());
        Self {
            values: Tape::compile(&outputs),
            speeds: Tape::compile(lambdas),
            forms,
            n,
            delta,
            structure: OnceLock::new(),
        }
    }

    pub fn forms(&self) -> &ConnectionForms {
        &self.forms
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, point: &[f64]) -> Result<FormValues, SystemError> {
        let n = self.n;
        let out = match self.values.eval(point) {
            Ok(out) => out,
            Err(e) => {
                let lambdas = self.speeds.eval(point)?;
                Self::check(&lambdas, self.delta, point)?;
                return Err(e.into());
            }
        };
        let lambdas = out[..n].to_vec();
        Self::check(&lambdas, self.delta, point)?;
        let c = &out[n..];
        let block = |k: usize| c[k * n..(k + 1) * n].to_vec();
        Ok(FormValues {
            lambdas,
            omega: [[block(0), block(1)], [block(2), block(3)]],
        })
    }

    fn check(lambdas: &[f64], delta: f64, point: &[f64]) -> Result<(), SystemError> {
        let n = lambdas.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (lambdas[i] - lambdas[j]).abs();
                if gap < delta {
                    return Err(SystemError::DegeneratePoint {
                        i: i + 1,
                        j: j + 1,
                        gap,
                        threshold: delta,
                        point: point.to_vec(),
                    });
                }
            }
        }
        Ok(())
    }

    /// `max |∂_i(ω_ab)_j − ∂_j(ω_ab)_i − Σ_c[(ω_ac)_i(ω_cb)_j − (ω_ac)_j(ω_cb)_i]|`
    /// over `a, b` and `i < j`.
    pub fn structure_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        let n = self.n;
        let v = self.eval(point)?;
        let tape = self.structure.get_or_init(|| {
            let mut exprs = Vec::with_capacity(4 * n * n);
            for c in self.forms.flat() {
                exprs.extend(c.gradient(n));
            }
            Tape::compile(&exprs)
        });
        // d[a][b][j][i] = ∂_i (ω_ab)_j
        let d = tape.eval(point)?;
        let deriv = |a: usize, b: usize, j: usize, i: usize| d[((a * 2 + b) * n + j) * n + i];
        let w = &v.omega;
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut r = deriv(a, b, j, i) - deriv(a, b, i, j);
                        for c in 0..2 {
                            r -= w[a][c][i] * w[c][b][j] - w[a][c][j] * w[c][b][i];
                        }
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Right-hand side `(A ω11 + B ω12, A ω21 + B ω22)` for a pair `(A, B)`
    /// moving with velocity `dr`.
    fn rhs(v: &FormValues, row: [f64; 2], dr: &[f64]) -> [f64; 2] {
        let mut w = [[0.0; 2]; 2];
        for (a, wa) in w.iter_mut().enumerate() {
            for (b, wab) in wa.iter_mut().enumerate() {
                *wab = v.omega[a][b].iter().zip(dr).map(|(c, d)| c * d).sum();
            }
        }
        [
            row[0] * w[0][0] + row[1] * w[0][1],
            row[0] * w[1][0] + row[1] * w[1][1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::system::{QuasilinearSystem, SampleBox, SystemAnalysis};

    #[test]
    fn euler_forms_are_zero() {
        let sys = crate::generator::euler(4).unwrap();
        let calc = SpeedCalculus::new(sys.lambdas());
        assert!(ConnectionForms::build(&calc).unwrap().is_zero());
    }

    #[test]
    fn zero_forms_have_zero_structure_residual() {
        let lambdas: Vec<_> = (0..4).map(Expression::var).collect();
        let ev = FormsEvaluator::new(ConnectionForms::zero(4), &lambdas, 1e-3);
        assert_eq!(ev.structure_residual(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn three_component_forms_match_explicit_display() {
        let b = SampleBox::new(vec![[1.0, 2.0], [2.5, 3.5], [4.0, 5.0]]).unwrap();
        let sys = QuasilinearSystem::parse(&["R1 + R2*R3", "R2 + sin(R1)", "R3*R1"], b).unwrap();
        let an = SystemAnalysis::new(&sys);
        let calc = an.calculus();
        let forms = ConnectionForms::build(calc).unwrap();
        // Written out directly from the a_ij, independent of reference_pair.
        let a = |i: usize, j: usize| {
            let l = |k: usize| parse(&["R1 + R2*R3", "R2 + sin(R1)", "R3*R1"][k - 1], 3).unwrap();
            l(i).differentiate(j - 1).div(&(l(j) - l(i)))
        };
        let l = |k: usize| calc.lambdas[k - 1].clone();
        let p = [
            (a(3, 1) - a(2, 1)).div(&(l(3) - l(2))),
            (a(1, 2) - a(3, 2)).div(&(l(1) - l(3))),
            (a(2, 3) - a(1, 3)).div(&(l(2) - l(1))),
        ];
        let q = [
            (a(2, 1) * l(3) - a(3, 1) * l(2)).div(&(l(3) - l(2))),
            (a(3, 2) * l(1) - a(1, 2) * l(3)).div(&(l(1) - l(3))),
            (a(1, 3) * l(2) - a(2, 3) * l(1)).div(&(l(2) - l(1))),
        ];
        let point = [1.3, 2.9, 4.4];
        for i in 0..3 {
            let li = l(i + 1).evaluate(&point).unwrap();
            let pi = p[i].evaluate(&point).unwrap();
            let qi = q[i].evaluate(&point).unwrap();
            let expect = [[pi * li, qi * li], [pi, qi]];
            for (x, row) in expect.iter().enumerate() {
                for (y, &e) in row.iter().enumerate() {
                    let got = forms.coefficient(x, y, i).evaluate(&point).unwrap();
                    assert!(
                        (got - e).abs() <= 1e-12 * (1.0 + e.abs()),
                        "ω{}{} coeff {i}",
                        x + 1,
                        y + 1
                    );
                }
            }
        }
    }
}
