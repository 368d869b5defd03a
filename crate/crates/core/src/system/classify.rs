use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use super::{QuasilinearSystem, SystemAnalysis, SystemError};

/// Outcome of one check. Serialized as `true`, `false` or `"NOT_APPLICABLE"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    NotApplicable,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::NotApplicable, x) | (x, Verdict::NotApplicable) => x,
            _ => Verdict::Yes,
        }
    }

    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Verdict::Yes => s.serialize_bool(true),
            Verdict::No => s.serialize_bool(false),
            Verdict::NotApplicable => s.serialize_str("NOT_APPLICABLE"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    SemiHamiltonian,
    LinearDegeneracy,
    CrossRatioConstancy,
    QuadrupleRelation,
    PqConsistency,
    PqDerivative,
    Gl2Structure,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::SemiHamiltonian,
        Condition::LinearDegeneracy,
        Condition::CrossRatioConstancy,
        Condition::QuadrupleRelation,
        Condition::PqConsistency,
        Condition::PqDerivative,
        Condition::Gl2Structure,
    ];

    /// Smallest `n` for which the condition is not vacuous.
    pub fn min_components(self) -> usize {
        match self {
            Condition::LinearDegeneracy => 1,
            Condition::SemiHamiltonian
            | Condition::PqConsistency
            | Condition::PqDerivative
            | Condition::Gl2Structure => 3,
            Condition::CrossRatioConstancy | Condition::QuadrupleRelation => 4,
        }
    }

    fn eval(self, an: &SystemAnalysis, point: &[f64]) -> Result<f64, SystemError> {
        match self {
            Condition::SemiHamiltonian => an.semi_hamiltonian_residual(point),
            Condition::LinearDegeneracy => an.linear_degeneracy_residual(point),
            Condition::CrossRatioConstancy => an.cross_ratio_gradient_max(point),
            Condition::QuadrupleRelation => an.quadruple_relation_residual(point),
            Condition::PqConsistency => an.extract_pq(point).map(|v| v.consistency),
            Condition::PqDerivative => an.pq_derivative_residual(point),
            Condition::Gl2Structure => an.structure_residual(point),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub status: Verdict,
    pub max_residual: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
    pub tolerance: f64,
    /// Residual at every accepted sample, in sampling order.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    #[serde(rename = "SEMI_HAMILTONIAN")]
    pub semi_hamiltonian: Verdict,
    #[serde(rename = "LINEARLY_DEGENERATE")]
    pub linearly_degenerate: Verdict,
    #[serde(rename = "PARALLELIZABLE_CLASS")]
    pub parallelizable_class: Verdict,
    #[serde(rename = "LINEARIZABLE_CLASS")]
    pub linearizable_class: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub samples_requested: usize,
    pub samples_accepted: usize,
    pub samples_rejected: usize,
    pub separation_threshold: f64,
    pub verdicts: Verdicts,
    pub conditions: Vec<ConditionResult>,
    pub notes: Vec<String>,
    /// Accepted sample points, in sampling order.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl ConditionReport {
    pub fn condition(&self, c: Condition) -> &ConditionResult {
        self.conditions
            .iter()
            .find(|r| r.condition == c)
            .expect("every condition is reported")
    }
}

/// Samples `count` strictly hyperbolic points from the system's box and
/// evaluates every applicable condition there.
///
/// Points where the speeds are too close or any residual fails to evaluate
/// are rejected and replaced; more than `9 · count` rejections (a rejection
/// rate above 90%) is an error.
pub fn classify(
    sys: &QuasilinearSystem,
    count: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ConditionReport, SystemError> {
    let an = SystemAnalysis::new(sys);
    classify_with(&an, count, seed, tolerance)
}

pub(crate) fn classify_with(
    an: &SystemAnalysis,
    count: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ConditionReport, SystemError> {
    let n = an.n();
    let active: Vec<Condition> = Condition::ALL
        .into_iter()
        .filter(|c| n >= c.min_components())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(count); active.len()];
    let mut rejected = 0;
    let max_attempts = 10 * count.max(1);
    let mut attempts = 0;
    let mut row = vec![0.0; active.len()];
    'draw: while samples.len() < count && attempts < max_attempts {
        attempts += 1;
        let point = an.system().sample_box().sample(&mut rng);
        for (slot, c) in row.iter_mut().zip(&active) {
            match c.eval(an, &point) {
                Ok(v) if v.is_finite() => *slot = v,
                Ok(_)
                | Err(SystemError::DegeneratePoint { .. })
                | Err(SystemError::DegenerateQuadruple)
                | Err(SystemError::Eval(_)) => {
                    rejected += 1;
                    continue 'draw;
                }
                Err(e) => return Err(e),
            }
        }
        for (col, &v) in values.iter_mut().zip(&row) {
            col.push(v);
        }
        samples.push(point);
    }
    if samples.len() < count {
        return Err(SystemError::InsufficientSamples {
            accepted: samples.len(),
            attempted: attempts,
        });
    }

    let mut conditions = Vec::new();
    for c in Condition::ALL {
        match active.iter().position(|a| *a == c) {
            Some(k) => {
                let col = std::mem::take(&mut values[k]);
                let worst =
                    col.iter()
                        .enumerate()
                        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                            Some((_, b)) if b >= v => best,
                            _ => Some((i, v)),
                        });
                let max = worst.map(|(_, v)| v);
                conditions.push(ConditionResult {
                    condition: c,
                    status: Verdict::from_bool(max.is_none_or(|m| m <= tolerance)),
                    max_residual: max,
                    worst_point: worst.map(|(i, _)| samples[i].clone()),
                    tolerance,
                    residuals: col,
                });
            }
            None => conditions.push(ConditionResult {
                condition: c,
                status: Verdict::NotApplicable,
                max_residual: None,
                worst_point: None,
                tolerance,
                residuals: Vec::new(),
            }),
        }
    }
    let status = |c: Condition| {
        conditions
            .iter()
            .find(|r| r.condition == c)
            .map(|r| r.status)
            .unwrap_or(Verdict::NotApplicable)
    };

    let semi_hamiltonian = status(Condition::SemiHamiltonian);
    let linearly_degenerate = status(Condition::LinearDegeneracy);
    let parallelizable_class = if n < 3 {
        Verdict::NotApplicable
    } else {
        semi_hamiltonian
            .and(linearly_degenerate)
            .and(status(Condition::CrossRatioConstancy))
    };
    let linearizable_class = if n < 3 {
        Verdict::NotApplicable
    } else {
        status(Condition::QuadrupleRelation).and(status(Condition::Gl2Structure))
    };

    let mut notes = Vec::new();
    match n {
        2 => notes.push(
            "n = 2: the three- and four-index conditions are vacuous; class verdicts are NOT_APPLICABLE"
                .to_string(),
        ),
        3 => notes.push(
            "n = 3: LINEARIZABLE_CLASS is the gl(2) flatness test, which decides reciprocal \
             decoupling into Hopf equations; its equivalence with linearizable webs on all \
             solutions is conjectural necessary+sufficient"
                .to_string(),
        ),
        _ => {}
    }

    Ok(ConditionReport {
        n,
        tolerance,
        seed,
        samples_requested: count,
        samples_accepted: samples.len(),
        samples_rejected: rejected,
        separation_threshold: an.separation_threshold(),
        verdicts: Verdicts {
            semi_hamiltonian,
            linearly_degenerate,
            parallelizable_class,
            linearizable_class,
        },
        conditions,
        notes,
        samples,
    })
}
