//! The diagonal system `R^i_t = λ^i(R) R^i_x` and its pointwise conditions.
//!
//! All conditions are computed from exact symbolic derivatives of the speeds
//! and then evaluated in floating point, so on systems where a condition holds
//! identically the residual sits at rounding level.

mod classify;
mod sample_box;

pub use classify::{classify, Condition, ConditionReport, ConditionResult, Verdict, Verdicts};
pub use sample_box::SampleBox;

use std::sync::{Arc, OnceLock};

use serde::Serialize;
use thiserror::Error;

use crate::connection::{ConnectionForms, FormsEvaluator};
use crate::expr::{EvalError, Expression, ParseError, Tape};

#[derive(Debug, Clone, Error)]
pub enum SystemError {
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("speed {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("speeds {i} and {j} are closer than {threshold:e} at {point:?} (|Δλ| = {gap:e})")]
    DegeneratePoint {
        i: usize,
        j: usize,
        gap: f64,
        threshold: f64,
        point: Vec<f64>,
    },
    #[error("degenerate quadruple: cross-ratio denominator vanishes")]
    DegenerateQuadruple,
    #[error("needs at least {needed} components, system has {n}")]
    TooFewComponents { needed: usize, n: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("only {accepted} of {attempted} sample points were usable (rejection rate above 90%)")]
    InsufficientSamples { accepted: usize, attempted: usize },
}

/// A diagonal quasilinear system together with the box its states are
/// sampled from.
#[derive(Debug, Clone)]
pub struct QuasilinearSystem {
    lambdas: Vec<Expression>,
    sample_box: SampleBox,
    labels: Option<Vec<String>>,
}

impl QuasilinearSystem {
    pub fn new(lambdas: Vec<Expression>, sample_box: SampleBox) -> Result<Self, SystemError> {
        let n = lambdas.len();
        if n < 2 {
            return Err(SystemError::Invalid(format!(
                "a system needs n >= 2 components, got {n}"
            )));
        }
        if sample_box.dim() != n {
            return Err(SystemError::Invalid(format!(
                "sampling box has {} intervals for {n} components",
                sample_box.dim()
            )));
        }
        for (i, l) in lambdas.iter().enumerate() {
            if l.arity() > n {
                return Err(SystemError::Invalid(format!(
                    "speed {} references R{} but n = {n}",
                    i + 1,
                    l.arity()
                )));
            }
        }
        Ok(Self {
            lambdas,
            sample_box,
            labels: None,
        })
    }

    /// Parses speeds written as `R1..Rn` expressions.
    pub fn parse(speeds: &[&str], sample_box: SampleBox) -> Result<Self, SystemError> {
        let n = speeds.len();
        let lambdas = speeds
            .iter()
            .enumerate()
            .map(|(i, s)| {
                crate::expr::parse(s, n).map_err(|source| SystemError::Parse {
                    index: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(lambdas, sample_box)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, SystemError> {
        if labels.len() != self.n() {
            return Err(SystemError::Invalid(format!(
                "{} labels for {} components",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[Expression] {
        &self.lambdas
    }

    pub fn sample_box(&self) -> &SampleBox {
        &self.sample_box
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_box(&self, sample_box: SampleBox) -> Result<Self, SystemError> {
        let mut out = Self::new(self.lambdas.clone(), sample_box)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Strict-hyperbolicity threshold `δ = 1e-3 · diam(box)`.
    pub fn separation_threshold(&self) -> f64 {
        1e-3 * self.sample_box.diameter()
    }

    /// Renames Riemann invariants: component `i` becomes component `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self, SystemError> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(SystemError::Invalid(
                "relabeling is not a permutation".into(),
            ));
        }
        let mut lambdas = vec![Expression::zero(); n];
        let mut bounds = vec![[0.0; 2]; n];
        for i in 0..n {
            lambdas[perm[i]] = self.lambdas[i].relabel(perm);
            bounds[perm[i]] = self.sample_box.bounds()[i];
        }
        Self::new(lambdas, SampleBox::new(bounds)?)
    }

    /// Returns `f^i` if every speed depends on its own invariant only.
    pub fn hopf_speeds(&self) -> Option<Vec<crate::expr::UnivariateSpec>> {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if l.variables().iter().any(|&v| v != i) {
                    return None;
                }
                let mut perm: Vec<usize> = (0..self.n()).collect();
                perm.swap(0, i);
                crate::expr::UnivariateSpec::from_expr(l.relabel(&perm), crate::expr::Role::F)
            })
            .collect()
    }
}

/// `a_ij = ∂_j λ^i / (λ^j − λ^i)` at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CharMatrix {
    pub point: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Row `i`, column `j`; the diagonal is unused and stored as zero.
    pub a: Vec<Vec<f64>>,
}

/// Parametrization `a_ij = p_j λ^i + q_j` at one point.
#[derive(Debug, Clone, Serialize)]
pub struct PqVector {
    pub point: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Largest disagreement between index pairs, and largest reconstruction
    /// error `|p_j λ^i + q_j − a_ij|`; zero exactly when the four-index
    /// relation holds. Always zero for n = 3.
    pub consistency: f64,
}

/// Cross-ratio `(w−y)(x−z) / ((w−z)(x−y))`.
pub fn cross_ratio(w: f64, x: f64, y: f64, z: f64) -> Result<f64, SystemError> {
    let den = (w - z) * (x - y);
    if den == 0.0 {
        return Err(SystemError::DegenerateQuadruple);
    }
    Ok((w - y) * (x - z) / den)
}

fn cross_ratio_expr(w: &Expression, x: &Expression, y: &Expression, z: &Expression) -> Expression {
    ((w - y) * (x - z)) / ((w - z) * (x - y))
}

/// The index pair `(i, k)`, `i < k`, both different from `j`, used to read
/// off `p_j` and `q_j`.
pub fn reference_pair(j: usize) -> (usize, usize) {
    match j {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Symbolic objects derived from the speeds.
#[derive(Debug, Clone)]
pub struct SpeedCalculus {
    pub lambdas: Vec<Expression>,
    /// `dlam[i][j] = ∂_j λ^i`.
    pub dlam: Vec<Vec<Expression>>,
    /// `a[i][j]` off the diagonal, zero on it.
    pub a: Vec<Vec<Expression>>,
    /// Closed-form `p_j`, `q_j` (n ≥ 3).
    pub p: Vec<Expression>,
    pub q: Vec<Expression>,
}

impl SpeedCalculus {
    pub fn new(lambdas: &[Expression]) -> Self {
        let n = lambdas.len();
        let dlam: Vec<Vec<Expression>> = lambdas.iter().map(|l| l.gradient(n)).collect();
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Expression::zero()
                        } else {
                            dlam[i][j].div(&(&lambdas[j] - &lambdas[i]))
                        }
                    })
                    .collect()
            })
            .collect::<Vec<Vec<_>>>();
        let (mut p, mut q) = (Vec::new(), Vec::new());
        if n >= 3 {
            for j in 0..n {
                let (i, k) = reference_pair(j);
                let gap = &lambdas[i] - &lambdas[k];
                p.push((&a[i][j] - &a[k][j]).div(&gap));
                q.push((&a[k][j] * &lambdas[i] - &a[i][j] * &lambdas[k]).div(&gap));
            }
        }
        Self {
            lambdas: lambdas.to_vec(),
            dlam,
            a,
            p,
            q,
        }
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }
}

/// Values of the speeds and `a_ij` at an accepted (strictly hyperbolic) point.
#[derive(Debug, Clone)]
struct PointValues {
    lambdas: Vec<f64>,
    a: Vec<Vec<f64>>,
}

/// Evaluator for every pointwise condition of one system.
///
/// Symbolic derivatives are built once and compiled into tapes lazily, the
/// first time each condition is requested.
pub struct SystemAnalysis {
    system: QuasilinearSystem,
    calc: SpeedCalculus,
    delta: f64,
    speeds: Tape,
    base: Tape,
    diag: Tape,
    semi_hamiltonian: OnceLock<(Vec<(usize, usize, usize)>, Tape)>,
    pq_derivatives: OnceLock<Tape>,
    cross_ratios: OnceLock<(Vec<[usize; 4]>, Tape)>,
    forms: OnceLock<Arc<FormsEvaluator>>,
}

impl SystemAnalysis {
    pub fn new(system: &QuasilinearSystem) -> Self {
        let calc = SpeedCalculus::new(system.lambdas());
        let n = calc.n();
        let mut outputs = calc.lambdas.clone();
        for row in &calc.a {
            outputs.extend(row.iter().cloned());
        }
        let base = Tape::compile(&outputs);
        let diag = Tape::compile(&(0..n).map(|i| calc.dlam[i][i].clone()).collect::<Vec<_>>());
        let speeds = Tape::compile(&calc.lambdas);
        Self {
            system: system.clone(),
            calc,
            delta: system.separation_threshold(),
            speeds,
            base,
            diag,
            semi_hamiltonian: OnceLock::new(),
            pq_derivatives: OnceLock::new(),
            cross_ratios: OnceLock::new(),
            forms: OnceLock::new(),
        }
    }

    pub fn system(&self) -> &QuasilinearSystem {
        &self.system
    }

    pub fn calculus(&self) -> &SpeedCalculus {
        &self.calc
    }

    pub fn n(&self) -> usize {
        self.calc.n()
    }

    pub fn separation_threshold(&self) -> f64 {
        self.delta
    }

    fn require(&self, needed: usize) -> Result<(), SystemError> {
        if self.n() < needed {
            Err(SystemError::TooFewComponents {
                needed,
                n: self.n(),
            })
        } else {
            Ok(())
        }
    }

    /// Speeds at `point`, failing if any two are closer than `δ`.
    pub fn hyperbolic_speeds(&self, point: &[f64]) -> Result<Vec<f64>, SystemError> {
        let n = self.n();
        let lambdas = self.speeds.eval(point)?;
        check_separation(&lambdas[..n], self.delta, point)?;
        Ok(lambdas)
    }

    fn values(&self, point: &[f64]) -> Result<PointValues, SystemError> {
        let n = self.n();
        let out = match self.base.eval(point) {
            Ok(out) => out,
            Err(e) => {
                // A vanishing speed gap shows up first as a division by zero.
                self.hyperbolic_speeds(point)?;
                return Err(e.into());
            }
        };
        let lambdas = out[..n].to_vec();
        check_separation(&lambdas, self.delta, point)?;
        let a = out[n..].chunks(n).map(|row| row.to_vec()).collect();
        Ok(PointValues { lambdas, a })
    }

    pub fn char_matrix(&self, point: &[f64]) -> Result<CharMatrix, SystemError> {
        let v = self.values(point)?;
        Ok(CharMatrix {
            point: point.to_vec(),
            lambdas: v.lambdas,
            a: v.a,
        })
    }

    /// `max |∂_k a_ij − ∂_j a_ik|` over pairwise distinct `i, j, k`.
    pub fn semi_hamiltonian_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        self.require(3)?;
        self.values(point)?;
        let (triples, tape) = self.semi_hamiltonian.get_or_init(|| {
            let n = self.n();
            let mut triples = Vec::new();
            let mut exprs = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    for k in (j + 1)..n {
                        if i == j || i == k {
                            continue;
                        }
                        triples.push((i, j, k));
                        exprs.push(self.calc.a[i][j].differentiate(k));
                        exprs.push(self.calc.a[i][k].differentiate(j));
                    }
                }
            }
            (triples, Tape::compile(&exprs))
        });
        let out = tape.eval(point)?;
        Ok((0..triples.len())
            .map(|t| (out[2 * t] - out[2 * t + 1]).abs())
            .fold(0.0, f64::max))
    }

    /// `max_i |∂_i λ^i|`. Needs no hyperbolicity.
    pub fn linear_degeneracy_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        Ok(self
            .diag
            .eval(point)?
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max))
    }

    /// Largest `|∂_m cr(λ^i, λ^j, λ^k, λ^l)|` over `samples` and coordinates.
    pub fn cross_ratio_constancy_residual(
        &self,
        quadruple: [usize; 4],
        samples: &[Vec<f64>],
    ) -> Result<f64, SystemError> {
        self.require(4)?;
        let n = self.n();
        let [i, j, k, l] = quadruple;
        let distinct = i != j && i != k && i != l && j != k && j != l && k != l;
        if !distinct || quadruple.iter().any(|&m| m >= n) {
            return Err(SystemError::Invalid(format!("bad quadruple {quadruple:?}")));
        }
        let lam = &self.calc.lambdas;
        let cr = cross_ratio_expr(&lam[i], &lam[j], &lam[k], &lam[l]);
        let tape = Tape::compile(&cr.gradient(n));
        let mut worst: f64 = 0.0;
        for point in samples {
            let v = self.values(point)?;
            cross_ratio(v.lambdas[i], v.lambdas[j], v.lambdas[k], v.lambdas[l])?;
            let grad = tape.eval(point)?;
            worst = grad.into_iter().map(f64::abs).fold(worst, f64::max);
        }
        Ok(worst)
    }

    /// Gradient magnitude of every 4-subset cross-ratio at one point.
    pub(crate) fn cross_ratio_gradient_max(&self, point: &[f64]) -> Result<f64, SystemError> {
        self.require(4)?;
        let v = self.values(point)?;
        let (quads, tape) = self.cross_ratios.get_or_init(|| {
            let n = self.n();
            let lam = &self.calc.lambdas;
            let mut quads = Vec::new();
            let mut exprs = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        for l in (k + 1)..n {
                            quads.push([i, j, k, l]);
                            let cr = cross_ratio_expr(&lam[i], &lam[j], &lam[k], &lam[l]);
                            exprs.extend(cr.gradient(n));
                        }
                    }
                }
            }
            (quads, Tape::compile(&exprs))
        });
        for &[i, j, k, l] in quads {
            cross_ratio(v.lambdas[i], v.lambdas[j], v.lambdas[k], v.lambdas[l])?;
        }
        Ok(tape
            .eval(point)?
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max))
    }

    /// Largest `|a_ij(λ^k−λ^l) + a_kj(λ^l−λ^i) + a_lj(λ^i−λ^k)|` over pairwise
    /// distinct `i, j, k, l`.
    pub fn quadruple_relation_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        self.require(4)?;
        let v = self.values(point)?;
        Ok(quadruple_residual(&v.lambdas, &v.a))
    }

    pub fn extract_pq(&self, point: &[f64]) -> Result<PqVector, SystemError> {
        self.require(3)?;
        let v = self.values(point)?;
        let (p, q, consistency) = fit_pq(&v.lambdas, &v.a);
        Ok(PqVector {
            point: point.to_vec(),
            p,
            q,
            consistency,
        })
    }

    /// Compiled connection forms built from the closed-form `p, q`.
    pub fn forms_evaluator(&self) -> Result<Arc<FormsEvaluator>, SystemError> {
        self.require(3)?;
        Ok(self
            .forms
            .get_or_init(|| {
                let forms = ConnectionForms::build(&self.calc).expect("n >= 3 checked");
                Arc::new(FormsEvaluator::new(forms, &self.calc.lambdas, self.delta))
            })
            .clone())
    }

    /// Flatness defect of the connection forms at `point`.
    pub fn structure_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        self.forms_evaluator()?.structure_residual(point)
    }

    /// `max |∂_j p_i − a_ij p_i|, |∂_j q_i − a_ij q_i|` over `i ≠ j`, using the
    /// closed-form `p, q`.
    pub fn pq_derivative_residual(&self, point: &[f64]) -> Result<f64, SystemError> {
        self.require(3)?;
        let v = self.values(point)?;
        let n = self.n();
        let tape = self.pq_derivatives.get_or_init(|| {
            let mut exprs = self.calc.p.clone();
            exprs.extend(self.calc.q.iter().cloned());
            for i in 0..n {
                for j in 0..n {
                    exprs.push(self.calc.p[i].differentiate(j));
                    exprs.push(self.calc.q[i].differentiate(j));
                }
            }
            Tape::compile(&exprs)
        });
        let out = tape.eval(point)?;
        let (p, q, d) = (&out[..n], &out[n..2 * n], &out[2 * n..]);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dp = d[2 * (i * n + j)];
                let dq = d[2 * (i * n + j) + 1];
                worst = worst
                    .max((dp - v.a[i][j] * p[i]).abs())
                    .max((dq - v.a[i][j] * q[i]).abs());
            }
        }
        Ok(worst)
    }
}

fn check_separation(lambdas: &[f64], delta: f64, point: &[f64]) -> Result<(), SystemError> {
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

pub(crate) fn quadruple_residual(lambdas: &[f64], a: &[Vec<f64>]) -> f64 {
    let n = lambdas.len();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if [i, k, l].contains(&j) || i == k || i == l || k == l {
                        continue;
                    }
                    let r = a[i][j] * (lambdas[k] - lambdas[l])
                        + a[k][j] * (lambdas[l] - lambdas[i])
                        + a[l][j] * (lambdas[i] - lambdas[k]);
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

/// `p_j, q_j` from the reference pair plus the consistency residual.
pub(crate) fn fit_pq(lambdas: &[f64], a: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = lambdas.len();
    let line = |i: usize, k: usize, j: usize| {
        let gap = lambdas[i] - lambdas[k];
        (
            (a[i][j] - a[k][j]) / gap,
            (a[k][j] * lambdas[i] - a[i][j] * lambdas[k]) / gap,
        )
    };
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut consistency: f64 = 0.0;
    for j in 0..n {
        let (i0, k0) = reference_pair(j);
        let (pj, qj) = line(i0, k0, j);
        p[j] = pj;
        q[j] = qj;
        for i in 0..n {
            if i == j {
                continue;
            }
            consistency = consistency.max((pj * lambdas[i] + qj - a[i][j]).abs());
            for k in (i + 1)..n {
                if k == j {
                    continue;
                }
                let (pk, qk) = line(i, k, j);
                consistency = consistency.max((pk - pj).abs()).max((qk - qj).abs());
            }
        }
    }
    (p, q, consistency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_box() -> SampleBox {
        SampleBox::new(vec![[1.0, 2.0], [2.5, 3.5], [4.0, 5.0], [6.0, 7.0]]).unwrap()
    }

    fn perturbed() -> QuasilinearSystem {
        QuasilinearSystem::parse(&["R1 + R2^2", "R2", "R3", "R4"], standard_box()).unwrap()
    }

    #[test]
    fn euler_char_matrix_vanishes_off_diagonal() {
        let sys = QuasilinearSystem::parse(&["R1", "R2", "R3", "R4"], standard_box()).unwrap();
        let cm = SystemAnalysis::new(&sys)
            .char_matrix(&[1.5, 3.0, 4.2, 6.9])
            .unwrap();
        assert!(cm.a.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn coincident_speeds_are_degenerate() {
        let b = SampleBox::new(vec![[-1.0, 1.0], [0.0, 2.0]]).unwrap();
        let sys = QuasilinearSystem::parse(&["R1 + R2", "R2"], b).unwrap();
        let err = SystemAnalysis::new(&sys)
            .char_matrix(&[0.0, 1.0])
            .unwrap_err();
        assert!(matches!(
            err,
            SystemError::DegeneratePoint { i: 1, j: 2, .. }
        ));
    }

    #[test]
    fn perturbed_char_matrix_by_hand() {
        let cm = SystemAnalysis::new(&perturbed())
            .char_matrix(&[1.0, 2.0, 3.0, 4.0])
            .unwrap();
        assert!((cm.a[0][1] + 4.0 / 3.0).abs() < 1e-15);
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 1) {
                    assert_eq!(cm.a[i][j], 0.0, "a[{i}][{j}]");
                }
            }
        }
    }

    #[test]
    fn perturbed_quadruple_residual_by_hand() {
        let an = SystemAnalysis::new(&perturbed());
        let cm = an.char_matrix(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = cm.a[0][1] * (cm.lambdas[2] - cm.lambdas[3]);
        assert!((r.abs() - 4.0 / 3.0).abs() < 1e-15);
        assert!(
            an.quadruple_relation_residual(&[1.0, 2.0, 3.0, 4.0])
                .unwrap()
                >= 4.0 / 3.0 - 1e-15
        );
    }

    #[test]
    fn cross_ratio_conventions() {
        assert!((cross_ratio(1.0, 2.0, 3.0, 4.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        // (w, x, w, x): numerator vanishes, denominator does not.
        assert_eq!(cross_ratio(1.0, 2.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(matches!(
            cross_ratio(1.0, 2.0, 2.0, 1.0),
            Err(SystemError::DegenerateQuadruple)
        ));
    }

    #[test]
    fn linear_degeneracy() {
        let b = SampleBox::new(vec![[0.0, 1.0]; 3]).unwrap();
        let consts = QuasilinearSystem::parse(&["1", "2", "3"], b.clone()).unwrap();
        assert_eq!(
            SystemAnalysis::new(&consts)
                .linear_degeneracy_residual(&[0.3, 0.1, 0.2])
                .unwrap(),
            0.0
        );
        let euler = QuasilinearSystem::parse(&["R1", "R2", "R3"], b).unwrap();
        assert_eq!(
            SystemAnalysis::new(&euler)
                .linear_degeneracy_residual(&[0.3, 0.1, 0.2])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn extract_pq_round_trip() {
        // a_ij = p_j λ^i + q_j for chosen p, q and distinct λ.
        let p = [1.0, 0.0, 2.0];
        let q = [0.0, 1.0, -1.0];
        let lambdas = [0.5, -1.0, 3.0];
        let a: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            p[j] * lambdas[i] + q[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let (pp, qq, c) = fit_pq(&lambdas, &a);
        for j in 0..3 {
            assert!((pp[j] - p[j]).abs() < 1e-15);
            assert!((qq[j] - q[j]).abs() < 1e-15);
        }
        assert!(c < 1e-15);
    }

    #[test]
    fn too_few_components() {
        let b = SampleBox::new(vec![[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let sys = QuasilinearSystem::parse(&["R1", "R2"], b).unwrap();
        let an = SystemAnalysis::new(&sys);
        assert!(matches!(
            an.semi_hamiltonian_residual(&[0.5, 2.5]),
            Err(SystemError::TooFewComponents { needed: 3, n: 2 })
        ));
        assert!(an.quadruple_relation_residual(&[0.5, 2.5]).is_err());
    }

    #[test]
    fn hopf_speeds_detects_uncoupled_form() {
        let b = SampleBox::new(vec![[0.0, 1.0]; 3]).unwrap();
        let sys = QuasilinearSystem::parse(&["R1^2", "sin(R2)", "3"], b.clone()).unwrap();
        let f = sys.hopf_speeds().unwrap();
        assert_eq!(f[1].instantiate(0).evaluate(&[0.5]).unwrap(), 0.5_f64.sin());
        assert_eq!(f[2].expr().as_const(), Some(3.0));
        let coupled = QuasilinearSystem::parse(&["R1 + R2", "R2", "R3"], b).unwrap();
        assert!(coupled.hopf_speeds().is_none());
    }

    #[test]
    fn relabel_rejects_non_permutations() {
        assert!(perturbed().relabel(&[0, 0, 1, 2]).is_err());
        let r = perturbed().relabel(&[3, 2, 1, 0]).unwrap();
        assert_eq!(r.lambdas()[3].to_string(), "R4 + R3^2");
        assert_eq!(r.sample_box().bounds()[3], [1.0, 2.0]);
    }
}
