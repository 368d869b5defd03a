//! Families with known answers: uncoupled Euler, Hopf and linear systems, and
//! their reciprocal images built from explicit conservation laws.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, Expression, ParseError, Role, UnivariateSpec};
use crate::system::{QuasilinearSystem, SampleBox, SystemError};

#[derive(Debug, Clone, Error)]
pub enum GeneratorError {
    #[error("invalid family: {0}")]
    Spec(String),
    #[error("{field}[{index}]: {source}")]
    Parse {
        field: &'static str,
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    #[serde(alias = "EULER")]
    Euler,
    #[serde(alias = "HOPF")]
    Hopf,
    #[serde(alias = "LINEAR")]
    Linear,
    #[serde(alias = "GENERIC_IMAGE")]
    GenericImage,
    #[serde(alias = "LINDEG_IMAGE")]
    LindegImage,
}

/// Family description as read from JSON, e.g.
/// `{"family": "generic_image", "n": 4, "f": ["u^2/2", ...], "g": ["1", ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: FamilyTag,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<[f64; 2]>>,
}

/// Default sampling box `[1.75k − 0.75, 1.75k + 0.25]`, `k = 1..n`.
pub fn default_box(n: usize) -> SampleBox {
    SampleBox::new(
        (1..=n)
            .map(|k| {
                let k = k as f64;
                [1.75 * k - 0.75, 1.75 * k + 0.25]
            })
            .collect(),
    )
    .expect("nonempty box")
}

/// Coefficients of `dx̃ = A dt + B dx`, `dt̃ = M dt + N dx` as functions of
/// the Riemann invariants.
#[derive(Debug, Clone)]
pub struct ConservationPairs {
    pub a: Expression,
    pub b: Expression,
    pub m: Expression,
    pub n: Expression,
    /// When every coefficient is a sum of one-variable terms, the terms of
    /// component `k` as `[a_k, b_k, m_k, n_k]` in variable 0.
    pub terms: Option<Vec<[Expression; 4]>>,
}

impl ConservationPairs {
    pub fn identity() -> Self {
        Self {
            a: Expression::zero(),
            b: Expression::one(),
            m: Expression::one(),
            n: Expression::zero(),
            terms: None,
        }
    }

    /// `(λ^i B − A) / (M − λ^i N)` for each base speed.
    pub fn transformed_speeds(&self, lambdas: &[Expression]) -> Vec<Expression> {
        lambdas
            .iter()
            .map(|l| (l * &self.b - &self.a).div(&(&self.m - l * &self.n)))
            .collect()
    }

    /// Jacobian `BM − AN` of `(x, t) ↦ (x̃, t̃)`.
    pub fn jacobian(&self) -> Expression {
        &self.b * &self.m - &self.a * &self.n
    }

    /// Pairs of the inverse change, `dx = Ã dt̃ + B̃ dx̃`, `dt = M̃ dt̃ + Ñ dx̃`.
    pub fn inverse(&self) -> Self {
        let det = self.jacobian();
        Self {
            a: self.a.neg().div(&det),
            b: self.m.div(&det),
            m: self.b.div(&det),
            n: self.n.neg().div(&det),
            terms: None,
        }
    }

    pub fn as_array(&self) -> [&Expression; 4] {
        [&self.a, &self.b, &self.m, &self.n]
    }
}

/// A generated system with the base it was obtained from.
#[derive(Debug, Clone)]
pub struct GeneratedFamily {
    pub spec: FamilySpec,
    pub system: QuasilinearSystem,
    /// Uncoupled system the family is a reciprocal image of (itself for the
    /// base families).
    pub base: QuasilinearSystem,
    /// Pairs taking base solutions to solutions of `system`.
    pub pairs: Option<ConservationPairs>,
}

pub fn euler(n: usize) -> Result<QuasilinearSystem, GeneratorError> {
    euler_in(n, default_box(n))
}

fn euler_in(n: usize, b: SampleBox) -> Result<QuasilinearSystem, GeneratorError> {
    if n < 2 {
        return Err(GeneratorError::Spec(format!("n = {n}: need n >= 2")));
    }
    Ok(QuasilinearSystem::new(
        (0..n).map(Expression::var).collect(),
        b,
    )?)
}

/// `λ^i = f^i(R^i)`.
pub fn hopf(f: &[UnivariateSpec]) -> Result<QuasilinearSystem, GeneratorError> {
    hopf_in(f, default_box(f.len()))
}

fn hopf_in(f: &[UnivariateSpec], b: SampleBox) -> Result<QuasilinearSystem, GeneratorError> {
    Ok(QuasilinearSystem::new(
        f.iter()
            .enumerate()
            .map(|(i, fi)| fi.instantiate(i))
            .collect(),
        b,
    )?)
}

fn linear_in(c: &[f64], b: SampleBox) -> Result<QuasilinearSystem, GeneratorError> {
    Ok(QuasilinearSystem::new(
        c.iter().map(|&ci| Expression::constant(ci)).collect(),
        b,
    )?)
}

/// Image of the Euler system under the pairs
/// `A = Σ((f^k)′R^k − f^k)`, `B = Σ(f^k)′`, and `M, N` likewise with `g`.
/// The speeds are `−Σ[(f^k)′(R^i−R^k) + f^k] / Σ[(g^k)′(R^i−R^k) + g^k]`.
pub fn generic_image(
    f: &[UnivariateSpec],
    g: &[UnivariateSpec],
) -> Result<(QuasilinearSystem, ConservationPairs), GeneratorError> {
    generic_image_in(f, g, default_box(f.len()))
}

fn generic_image_in(
    f: &[UnivariateSpec],
    g: &[UnivariateSpec],
    b: SampleBox,
) -> Result<(QuasilinearSystem, ConservationPairs), GeneratorError> {
    let n = f.len();
    if g.len() != n || n < 2 {
        return Err(GeneratorError::Spec(format!(
            "f and g need the same length n >= 2 (got {} and {})",
            n,
            g.len()
        )));
    }
    let inst = |h: &[UnivariateSpec]| -> (Vec<Expression>, Vec<Expression>) {
        let vals = h
            .iter()
            .enumerate()
            .map(|(k, hk)| hk.instantiate(k))
            .collect();
        let ders = h
            .iter()
            .enumerate()
            .map(|(k, hk)| hk.derivative().instantiate(k))
            .collect();
        (vals, ders)
    };
    let (fv, fd) = inst(f);
    let (gv, gd) = inst(g);
    let r: Vec<Expression> = (0..n).map(Expression::var).collect();
    let sum =
        |v: &dyn Fn(usize) -> Expression| Expression::sum((0..n).map(v).collect::<Vec<_>>().iter());
    let lambdas = (0..n)
        .map(|i| {
            let num = sum(&|k| &fd[k] * &(&r[i] - &r[k]) + &fv[k]);
            let den = sum(&|k| &gd[k] * &(&r[i] - &r[k]) + &gv[k]);
            num.div(&den).neg()
        })
        .collect();
    let u = Expression::var(0);
    let terms = f
        .iter()
        .zip(g)
        .map(|(fk, gk)| {
            let (fd, gd) = (fk.derivative(), gk.derivative());
            [
                fd.expr() * &u - fk.expr(),
                fd.expr().clone(),
                gd.expr() * &u - gk.expr(),
                gd.expr().clone(),
            ]
        })
        .collect();
    let pairs = ConservationPairs {
        a: sum(&|k| &fd[k] * &r[k] - &fv[k]),
        b: sum(&|k| fd[k].clone()),
        m: sum(&|k| &gd[k] * &r[k] - &gv[k]),
        n: sum(&|k| gd[k].clone()),
        terms: Some(terms),
    };
    Ok((QuasilinearSystem::new(lambdas, b)?, pairs))
}

/// Image of the linear system `λ^i = c^i` under `A = Σ c^k f^k`,
/// `B = Σ f^k`, `M = Σ c^k g^k`, `N = Σ g^k`:
/// `λ̃^i = −Σ(c^i − c^k) f^k / Σ(c^i − c^k) g^k`.
pub fn lindeg_image(
    c: &[f64],
    f: &[UnivariateSpec],
    g: &[UnivariateSpec],
) -> Result<(QuasilinearSystem, ConservationPairs), GeneratorError> {
    lindeg_image_in(c, f, g, default_box(c.len()))
}

fn check_distinct(c: &[f64]) -> Result<(), GeneratorError> {
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            if c[i] == c[j] {
                return Err(GeneratorError::Spec(format!(
                    "c must be pairwise distinct (c{} = c{} = {})",
                    i + 1,
                    j + 1,
                    c[i]
                )));
            }
        }
    }
    Ok(())
}

fn lindeg_image_in(
    c: &[f64],
    f: &[UnivariateSpec],
    g: &[UnivariateSpec],
    b: SampleBox,
) -> Result<(QuasilinearSystem, ConservationPairs), GeneratorError> {
    let n = c.len();
    if f.len() != n || g.len() != n || n < 2 {
        return Err(GeneratorError::Spec(format!(
            "c, f and g need the same length n >= 2 (got {}, {}, {})",
            n,
            f.len(),
            g.len()
        )));
    }
    check_distinct(c)?;
    let fv: Vec<_> = f
        .iter()
        .enumerate()
        .map(|(k, h)| h.instantiate(k))
        .collect();
    let gv: Vec<_> = g
        .iter()
        .enumerate()
        .map(|(k, h)| h.instantiate(k))
        .collect();
    let weighted = |v: &[Expression], w: &dyn Fn(usize) -> f64| {
        Expression::sum(
            (0..n)
                .map(|k| Expression::constant(w(k)) * &v[k])
                .collect::<Vec<_>>()
                .iter(),
        )
    };
    let lambdas = (0..n)
        .map(|i| {
            let num = weighted(&fv, &|k| c[i] - c[k]);
            let den = weighted(&gv, &|k| c[i] - c[k]);
            num.div(&den).neg()
        })
        .collect();
    let terms = (0..n)
        .map(|k| {
            let ck = Expression::constant(c[k]);
            [
                &ck * f[k].expr(),
                f[k].expr().clone(),
                &ck * g[k].expr(),
                g[k].expr().clone(),
            ]
        })
        .collect();
    let pairs = ConservationPairs {
        a: weighted(&fv, &|k| c[k]),
        b: Expression::sum(fv.iter()),
        m: weighted(&gv, &|k| c[k]),
        n: Expression::sum(gv.iter()),
        terms: Some(terms),
    };
    Ok((QuasilinearSystem::new(lambdas, b)?, pairs))
}

fn parse_list(
    field: &'static str,
    list: &Option<Vec<String>>,
    n: usize,
    role: Role,
) -> Result<Vec<UnivariateSpec>, GeneratorError> {
    let list = list
        .as_ref()
        .ok_or_else(|| GeneratorError::Spec(format!("missing '{field}'")))?;
    if list.len() != n {
        return Err(GeneratorError::Spec(format!(
            "'{field}' has {} entries, n = {n}",
            list.len()
        )));
    }
    list.iter()
        .enumerate()
        .map(|(index, s)| {
            UnivariateSpec::parse(s, "u", role).map_err(|source| GeneratorError::Parse {
                field,
                index,
                source,
            })
        })
        .collect()
}

impl FamilySpec {
    pub fn build(&self) -> Result<GeneratedFamily, GeneratorError> {
        let n = self.n;
        if n < 2 {
            return Err(GeneratorError::Spec(format!("n = {n}: need n >= 2")));
        }
        let b = match &self.sample_box {
            Some(b) => SampleBox::new(b.clone())?,
            None => default_box(n),
        };
        let c = || -> Result<Vec<f64>, GeneratorError> {
            let c = self
                .c
                .clone()
                .ok_or_else(|| GeneratorError::Spec("missing 'c'".into()))?;
            if c.len() != n {
                return Err(GeneratorError::Spec(format!(
                    "'c' has {} entries, n = {n}",
                    c.len()
                )));
            }
            Ok(c)
        };
        let (system, base, pairs) = match self.family {
            FamilyTag::Euler => {
                let s = euler_in(n, b)?;
                (s.clone(), s, None)
            }
            FamilyTag::Hopf => {
                let s = hopf_in(&parse_list("f", &self.f, n, Role::F)?, b)?;
                (s.clone(), s, None)
            }
            FamilyTag::Linear => {
                let c = c()?;
                check_distinct(&c)?;
                let s = linear_in(&c, b)?;
                (s.clone(), s, None)
            }
            FamilyTag::GenericImage => {
                let f = parse_list("f", &self.f, n, Role::F)?;
                let g = parse_list("g", &self.g, n, Role::G)?;
                let (s, p) = generic_image_in(&f, &g, b.clone())?;
                (s, euler_in(n, b)?, Some(p))
            }
            FamilyTag::LindegImage => {
                let c = c()?;
                let f = parse_list("f", &self.f, n, Role::F)?;
                let g = parse_list("g", &self.g, n, Role::G)?;
                let (s, p) = lindeg_image_in(&c, &f, &g, b.clone())?;
                (s, linear_in(&c, b)?, Some(p))
            }
        };
        Ok(GeneratedFamily {
            spec: self.clone(),
            system,
            base,
            pairs,
        })
    }
}

/// Parses `R1..Rn` expression strings; a convenience for tests and callers
/// holding speeds as text.
pub fn speeds_from_text(speeds: &[&str]) -> Result<Vec<Expression>, GeneratorError> {
    let n = speeds.len();
    speeds
        .iter()
        .enumerate()
        .map(|(index, s)| {
            parse(s, n).map_err(|source| GeneratorError::Parse {
                field: "lambda",
                index,
                source,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(list: &[&str], role: Role) -> Vec<UnivariateSpec> {
        list.iter()
            .map(|s| UnivariateSpec::parse(s, "u", role).unwrap())
            .collect()
    }

    fn eval_all(e: &[Expression], p: &[f64]) -> Vec<f64> {
        e.iter().map(|x| x.evaluate(p).unwrap()).collect()
    }

    #[test]
    fn euler_speeds_are_the_invariants() {
        let s = euler(4).unwrap();
        assert_eq!(
            eval_all(s.lambdas(), &[1.0, 2.0, 3.0, 4.0]),
            vec![1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn quadratic_generic_image_by_hand() {
        let (s, _) = generic_image(&uni(&["u^2/2"; 4], Role::F), &uni(&["1"; 4], Role::G)).unwrap();
        let got = eval_all(s.lambdas(), &[1.0, 2.0, 3.0, 4.0]);
        let want = [1.25, -1.25, -3.75, -6.25];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn linear_generic_image_collapses() {
        let (s, _) = generic_image(&uni(&["u"; 3], Role::F), &uni(&["1"; 3], Role::G)).unwrap();
        let p = [0.3, -1.7, 2.2];
        let got = eval_all(s.lambdas(), &p);
        for i in 0..3 {
            assert!((got[i] + p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lindeg_image_by_hand() {
        let (s, _) = lindeg_image(
            &[0.0, 1.0, 2.0, 3.0],
            &uni(&["u"; 4], Role::F),
            &uni(&["1"; 4], Role::G),
        )
        .unwrap();
        let got = eval_all(s.lambdas(), &[1.0, 2.0, 3.0, 4.0]);
        let want = [-10.0 / 3.0, -5.0, 0.0, -5.0 / 3.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        assert!(lindeg_image(
            &[0.0, 0.0],
            &uni(&["u"; 2], Role::F),
            &uni(&["1"; 2], Role::G)
        )
        .is_err());
    }

    #[test]
    fn pairs_reproduce_the_image_speeds() {
        let f = uni(&["u^2/2", "sin(u)", "u^3", "exp(u/4)"], Role::F);
        let g = uni(&["u", "1", "u^2/3", "2"], Role::G);
        let (s, pairs) = generic_image(&f, &g).unwrap();
        let base: Vec<_> = (0..4).map(Expression::var).collect();
        let via_pairs = pairs.transformed_speeds(&base);
        let p = [1.4, 3.1, 4.7, 6.6];
        for (a, b) in eval_all(s.lambdas(), &p)
            .iter()
            .zip(eval_all(&via_pairs, &p))
        {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn inverse_pairs_undo_the_transformation() {
        let (s, pairs) =
            generic_image(&uni(&["u^2/2"; 4], Role::F), &uni(&["u"; 4], Role::G)).unwrap();
        let back = pairs.inverse().transformed_speeds(s.lambdas());
        let p = [1.2, 2.9, 4.3, 6.8];
        for (i, v) in eval_all(&back, &p).iter().enumerate() {
            assert!((v - p[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn family_json() {
        let spec: FamilySpec = serde_json::from_str(
            r#"{"family": "generic_image", "n": 4, "f": ["u^2/2","u^2/2","u^2/2","u^2/2"], "g": ["1","1","1","1"]}"#,
        )
        .unwrap();
        let fam = spec.build().unwrap();
        assert!(fam.pairs.is_some());
        let bad: FamilySpec =
            serde_json::from_str(r#"{"family": "HOPF", "n": 2, "f": ["u", "v"]}"#).unwrap();
        assert!(matches!(
            bad.build(),
            Err(GeneratorError::Parse {
                field: "f",
                index: 1,
                ..
            })
        ));
    }
}
