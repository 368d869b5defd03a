use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ConnectionError, FormValues, FormsEvaluator};
use crate::system::{SampleBox, SystemError};

/// Piecewise-linear path in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Vec<f64>>,
}

impl Path {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Result<Self, ConnectionError> {
        if waypoints.len() < 2 {
            return Err(ConnectionError::InvalidPath(
                "a path needs two waypoints".into(),
            ));
        }
        let n = waypoints[0].len();
        if waypoints
            .iter()
            .any(|w| w.len() != n || w.iter().any(|x| !x.is_finite()))
        {
            return Err(ConnectionError::InvalidPath(
                "waypoints must be finite and of equal dimension".into(),
            ));
        }
        Ok(Self { waypoints })
    }

    pub fn segment(from: &[f64], to: &[f64]) -> Result<Self, ConnectionError> {
        Self::new(vec![from.to_vec(), to.to_vec()])
    }

    /// Two legs: first coordinate moves, then all others.
    pub fn rectangle(from: &[f64], to: &[f64]) -> Result<Self, ConnectionError> {
        let mut corner = from.to_vec();
        if let (Some(c), Some(&t)) = (corner.first_mut(), to.first()) {
            *c = t;
        }
        Self::new(vec![from.to_vec(), corner, to.to_vec()])
    }

    pub fn reversed(&self) -> Self {
        let mut waypoints = self.waypoints.clone();
        waypoints.reverse();
        Self { waypoints }
    }

    pub fn waypoints(&self) -> &[Vec<f64>] {
        &self.waypoints
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.waypoints[self.waypoints.len() - 1]
    }

    fn segment_lengths(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| distance(&w[0], &w[1]))
            .collect()
    }

    /// Steps per segment for a target step length `h`.
    pub fn steps_for(&self, h: f64) -> Vec<usize> {
        self.segment_lengths()
            .into_iter()
            .map(|l| ((l / h).ceil() as usize).max(1))
            .collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl FormsEvaluator {
    /// Transports each row `(A, B)` along `path` with classical RK4 at step
    /// length about `h`.
    pub fn transport(
        &self,
        path: &Path,
        rows: &[[f64; 2]],
        h: f64,
    ) -> Result<Vec<[f64; 2]>, ConnectionError> {
        self.transport_observed(path, rows, &path.steps_for(h), &mut |_, _| Ok(()))
    }

    /// Transport with a fixed number of steps per segment. `observe` sees the
    /// form values and current rows at every step node, including both ends.
    pub fn transport_observed(
        &self,
        path: &Path,
        rows: &[[f64; 2]],
        steps: &[usize],
        observe: &mut dyn FnMut(&FormValues, &[[f64; 2]]) -> Result<(), ConnectionError>,
    ) -> Result<Vec<[f64; 2]>, ConnectionError> {
        if path.waypoints[0].len() != self.n {
            return Err(ConnectionError::InvalidPath(format!(
                "path lives in dimension {}, system has n = {}",
                path.waypoints[0].len(),
                self.n
            )));
        }
        let mut rows = rows.to_vec();
        let n = self.n;
        let mut at = vec![0.0; n];
        for (seg, w) in path.waypoints.windows(2).enumerate() {
            let m = steps.get(seg).copied().unwrap_or(1).max(1);
            let dr: Vec<f64> = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) / m as f64)
                .collect();
            let eval = |s: f64, at: &mut Vec<f64>| -> Result<FormValues, ConnectionError> {
                for k in 0..n {
                    at[k] = w[0][k] + s * dr[k];
                }
                self.eval(at)
                    .map_err(|source| ConnectionError::PathDegeneracy {
                        segment: seg,
                        point: at.clone(),
                        source,
                    })
            };
            for k in 0..m {
                let s = k as f64;
                let v1 = eval(s, &mut at)?;
                observe(&v1, &rows)?;
                let v2 = eval(s + 0.5, &mut at)?;
                let v4 = eval(s + 1.0, &mut at)?;
                for row in rows.iter_mut() {
                    let k1 = Self::rhs(&v1, *row, &dr);
                    let y2 = [row[0] + 0.5 * k1[0], row[1] + 0.5 * k1[1]];
                    let k2 = Self::rhs(&v2, y2, &dr);
                    let y3 = [row[0] + 0.5 * k2[0], row[1] + 0.5 * k2[1]];
                    let k3 = Self::rhs(&v2, y3, &dr);
                    let y4 = [row[0] + k3[0], row[1] + k3[1]];
                    let k4 = Self::rhs(&v4, y4, &dr);
                    for c in 0..2 {
                        row[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) / 6.0;
                    }
                }
                if k + 1 == m && seg + 2 == path.waypoints.len() {
                    observe(&v4, &rows)?;
                }
            }
        }
        Ok(rows)
    }
}

/// `λ̃^i = (λ^i B − A) / (M − λ^i N)`.
pub fn transformed_speeds(
    lambdas: &[f64],
    sections: [f64; 4],
    point: &[f64],
) -> Result<Vec<f64>, ConnectionError> {
    let [a, b, m, n] = sections;
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let den = m - l * n;
            if den.abs() < 1e-12 {
                Err(ConnectionError::TransformSingular {
                    i: i + 1,
                    point: point.to_vec(),
                    denominator: den.abs(),
                })
            } else {
                Ok((l * b - a) / den)
            }
        })
        .collect()
}

/// Two transported rows `(A, B)` and `(M, N)` with their base point.
#[derive(Clone)]
pub struct SectionQuad {
    evaluator: Arc<FormsEvaluator>,
    base: Vec<f64>,
    init: [f64; 4],
    h: f64,
}

impl SectionQuad {
    pub fn new(
        evaluator: Arc<FormsEvaluator>,
        base: Vec<f64>,
        init: [f64; 4],
        h: f64,
    ) -> Result<Self, ConnectionError> {
        let [a, b, m, n] = init;
        let det = a * n - b * m;
        if det.abs() < 1e-14 || !det.is_finite() {
            return Err(ConnectionError::DegenerateSections { det });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConnectionError::InvalidPath(format!(
                "step h = {h} must be positive"
            )));
        }
        evaluator.eval(&base)?;
        Ok(Self {
            evaluator,
            base,
            init,
            h,
        })
    }

    /// `(A, B) = (0, 1)`, `(M, N) = (1, 0)`, so `λ̃ = λ` at the base point.
    pub fn basis(
        evaluator: Arc<FormsEvaluator>,
        base: Vec<f64>,
        h: f64,
    ) -> Result<Self, ConnectionError> {
        Self::new(evaluator, base, [0.0, 1.0, 1.0, 0.0], h)
    }

    /// Rows replaced by `m · [[A, B], [M, N]]`.
    pub fn recombine(&self, m: [[f64; 2]; 2]) -> Result<Self, ConnectionError> {
        let [a, b, mm, n] = self.init;
        let init = [
            m[0][0] * a + m[0][1] * mm,
            m[0][0] * b + m[0][1] * n,
            m[1][0] * a + m[1][1] * mm,
            m[1][0] * b + m[1][1] * n,
        ];
        Self::new(self.evaluator.clone(), self.base.clone(), init, self.h)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn initial(&self) -> [f64; 4] {
        self.init
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn evaluator(&self) -> &FormsEvaluator {
        &self.evaluator
    }

    /// Step count used for the straight path from the base to `point`.
    pub fn steps_to(&self, point: &[f64]) -> usize {
        ((distance(&self.base, point) / self.h).ceil() as usize).max(1)
    }

    /// `(A, B, M, N)` at `point`, transported along the straight segment from
    /// the base.
    pub fn evaluate(&self, point: &[f64]) -> Result<[f64; 4], ConnectionError> {
        self.evaluate_with_steps(point, self.steps_to(point), false)
            .map(|(s, _)| s)
    }

    /// Like [`SectionQuad::evaluate`] with a fixed step count. With
    /// `check_horizon` the signs of every `M − λ^i N` are watched along the
    /// way. Also returns the speeds at `point`.
    pub fn evaluate_with_steps(
        &self,
        point: &[f64],
        steps: usize,
        check_horizon: bool,
    ) -> Result<([f64; 4], Vec<f64>), ConnectionError> {
        let [a, b, m, n] = self.init;
        if point == self.base.as_slice() {
            let v = self.evaluator.eval(point)?;
            return Ok((self.init, v.lambdas));
        }
        let path = Path::segment(&self.base, point)?;
        let mut signs: Option<Vec<f64>> = None;
        let mut last = Vec::new();
        let rows = self.evaluator.transport_observed(
            &path,
            &[[a, b], [m, n]],
            &[steps],
            &mut |v, rows| {
                let den: Vec<f64> = v
                    .lambdas
                    .iter()
                    .map(|l| rows[1][0] - l * rows[1][1])
                    .collect();
                if check_horizon {
                    match &signs {
                        None => signs = Some(den.iter().map(|d| d.signum()).collect()),
                        Some(s0) => {
                            if let Some(i) = den.iter().zip(s0).position(|(d, s)| d.signum() != *s)
                            {
                                return Err(ConnectionError::Horizon {
                                    i: i + 1,
                                    point: point.to_vec(),
                                });
                            }
                        }
                    }
                }
                last = v.lambdas.clone();
                Ok(())
            },
        )?;
        Ok(([rows[0][0], rows[0][1], rows[1][0], rows[1][1]], last))
    }

    /// Transformed speeds at `point`.
    pub fn transformed_speeds(&self, point: &[f64]) -> Result<Vec<f64>, ConnectionError> {
        let (s, lambdas) = self.evaluate_with_steps(point, self.steps_to(point), false)?;
        transformed_speeds(&lambdas, s, point)
    }
}

/// `max_{i≠j} |∂λ̃^i/∂R^j|` at `point` by central differences with step
/// `1e-4` of each box width. Every stencil point uses the same number of
/// transport steps, so the integrator error is a smooth function of the
/// endpoint and differences cleanly.
pub fn decoupling_residual(
    sections: &SectionQuad,
    point: &[f64],
    sample_box: &SampleBox,
) -> Result<f64, ConnectionError> {
    decoupling_residual_impl(sections, point, sample_box, false)
}

fn decoupling_residual_impl(
    sections: &SectionQuad,
    point: &[f64],
    sample_box: &SampleBox,
    check_horizon: bool,
) -> Result<f64, ConnectionError> {
    let n = point.len();
    let steps = sections.steps_to(point) + 1;
    let speeds_at = |p: &[f64]| -> Result<Vec<f64>, ConnectionError> {
        let (s, lambdas) = sections.evaluate_with_steps(p, steps, check_horizon)?;
        transformed_speeds(&lambdas, s, p)
    };
    let widths = sample_box.widths();
    let mut worst: f64 = 0.0;
    let mut shifted = point.to_vec();
    for j in 0..n {
        let e = 1e-4 * widths[j];
        shifted[j] = point[j] + e;
        let plus = speeds_at(&shifted)?;
        shifted[j] = point[j] - e;
        let minus = speeds_at(&shifted)?;
        shifted[j] = point[j];
        for i in 0..n {
            if i != j {
                worst = worst.max(((plus[i] - minus[i]) / (2.0 * e)).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub point: Vec<f64>,
    pub residual: f64,
}

/// Decoupling residuals at seeded probe points of the box.
#[derive(Debug, Clone, Serialize)]
pub struct DecouplingReport {
    pub base: Vec<f64>,
    pub initial_sections: [f64; 4],
    pub transport_step: f64,
    pub difference_step_fraction: f64,
    pub probes: Vec<ProbeResult>,
    pub max_residual: f64,
    /// Some `M − λ^i N` changes sign inside the box.
    pub horizon: bool,
    pub beyond_horizon: usize,
    pub rejected: usize,
}

/// Draws points from the box until `count` probes in the base point's
/// component of the transform domain have been evaluated.
pub fn decoupling_probe(
    sections: &SectionQuad,
    sample_box: &SampleBox,
    count: usize,
    seed: u64,
) -> Result<DecouplingReport, ConnectionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(count);
    let (mut beyond, mut rejected) = (0, 0);
    let max_attempts = 10 * count.max(1);
    let mut attempts = 0;
    while probes.len() < count && attempts < max_attempts {
        attempts += 1;
        let point = sample_box.sample(&mut rng);
        match decoupling_residual_impl(sections, &point, sample_box, true) {
            Ok(residual) => probes.push(ProbeResult { point, residual }),
            Err(ConnectionError::Horizon { .. })
            | Err(ConnectionError::TransformSingular { .. }) => beyond += 1,
            Err(ConnectionError::PathDegeneracy { .. })
            | Err(ConnectionError::System(SystemError::DegeneratePoint { .. }))
            | Err(ConnectionError::System(SystemError::Eval(_))) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    if probes.len() < count {
        return Err(ConnectionError::System(SystemError::InsufficientSamples {
            accepted: probes.len(),
            attempted: attempts,
        }));
    }
    let max_residual = probes.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(DecouplingReport {
        base: sections.base.clone(),
        initial_sections: sections.init,
        transport_step: sections.h,
        difference_step_fraction: 1e-4,
        probes,
        max_residual,
        horizon: beyond > 0,
        beyond_horizon: beyond,
        rejected,
    })
}
