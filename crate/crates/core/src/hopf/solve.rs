use serde::Serialize;

use super::{Grid, HopfError, InitialData, NodeStatus, SolutionSample};
use crate::expr::{Tape, UnivariateSpec};

/// Breaking times of one component, from `D(s) = d/ds f(φ(s))` sampled on
/// the data interval: forward `1 / max D` when `max D > 0`, backward
/// `1 / max(-D)` when `min D < 0`.
#[derive(Debug, Clone, Serialize)]
pub struct BreakingInfo {
    pub component: usize,
    pub forward: Option<f64>,
    pub backward: Option<f64>,
    pub max_slope: f64,
    pub min_slope: f64,
}

const BREAKING_SAMPLES: usize = 4001;
const SAFETY: f64 = 0.9;

/// One Hopf equation `R_t = f(R) R_x` with data `φ` on an interval.
#[derive(Debug, Clone)]
pub struct HopfComponent {
    phi: Tape,
    /// Outputs `F(s) = f(φ(s))` and `D(s) = F'(s)`.
    speed: Tape,
    interval: [f64; 2],
    bound: f64,
    pub breaking: BreakingInfo,
}

pub(crate) enum Foot {
    Found(f64),
    Outside,
    NoRoot,
}

impl HopfComponent {
    /// `index` is zero-based and only used for reporting.
    pub fn new(
        index: usize,
        f: &UnivariateSpec,
        phi: &UnivariateSpec,
        interval: [f64; 2],
    ) -> Result<Self, HopfError> {
        let big_f = f.expr().substitute(&|_| phi.expr().clone());
        let d = big_f.differentiate(0);
        let speed = Tape::compile(&[big_f, d]);
        let phi_tape = Tape::compile(&[phi.expr().clone()]);
        let [a, b] = interval;
        let (mut max_d, mut min_d, mut bound) = (f64::NEG_INFINITY, f64::INFINITY, 0.0_f64);
        for k in 0..BREAKING_SAMPLES {
            let s = a + (b - a) * k as f64 / (BREAKING_SAMPLES - 1) as f64;
            let v = speed.eval(&[s])?;
            phi_tape.eval(&[s])?;
            bound = bound.max(v[0].abs());
            max_d = max_d.max(v[1]);
            min_d = min_d.min(v[1]);
        }
        Ok(Self {
            phi: phi_tape,
            speed,
            interval,
            bound,
            breaking: BreakingInfo {
                component: index + 1,
                forward: (max_d > 0.0).then(|| 1.0 / max_d),
                backward: (min_d < 0.0).then(|| -1.0 / min_d),
                max_slope: max_d,
                min_slope: min_d,
            },
        })
    }

    /// Node times at which this component is masked.
    pub fn masked_at(&self, t: f64) -> bool {
        let edge = |tb: f64| SAFETY * tb * (1.0 - 1e-12);
        self.breaking.forward.is_some_and(|tb| t >= edge(tb))
            || self.breaking.backward.is_some_and(|tb| t <= -edge(tb))
    }

    pub fn profile(&self, s: f64) -> Result<f64, HopfError> {
        Ok(self.phi.eval(&[s])?[0])
    }

    /// `(F(s), F'(s))`.
    pub fn speed(&self, s: f64) -> Result<(f64, f64), HopfError> {
        let v = self.speed.eval(&[s])?;
        Ok((v[0], v[1]))
    }

    /// Solves `s - F(s) t = x` inside the data interval.
    pub(crate) fn foot(&self, x: f64, t: f64, warm: Option<f64>) -> Result<Foot, HopfError> {
        let [a, b] = self.interval;
        if t == 0.0 {
            return Ok(if a <= x && x <= b {
                Foot::Found(x)
            } else {
                Foot::Outside
            });
        }
        // The sampled bound can miss the true maximum between samples.
        let reach = (1.01 * self.bound + 1e-9) * t.abs();
        let mut lo = a.max(x - reach);
        let mut hi = b.min(x + reach);
        if lo > hi {
            return Ok(Foot::Outside);
        }
        let g = |s: f64| -> Result<(f64, f64), HopfError> {
            let (f, d) = self.speed(s)?;
            Ok((s - f * t - x, 1.0 - d * t))
        };
        let tol = 1e-12;
        let (glo, _) = g(lo)?;
        let (ghi, _) = g(hi)?;
        if glo > tol || ghi < -tol {
            return Ok(Foot::Outside);
        }
        if glo.abs() <= tol && glo.abs() <= ghi.abs() && lo == a {
            return Ok(Foot::Found(lo));
        }
        if ghi.abs() <= tol && hi == b {
            return Ok(Foot::Found(hi));
        }
        let mut s = warm.unwrap_or(0.5 * (lo + hi)).clamp(lo, hi);
        let mut best = (f64::INFINITY, s);
        for _ in 0..200 {
            let (gs, dg) = g(s)?;
            if gs.abs() < best.0 {
                best = (gs.abs(), s);
            }
            if gs == 0.0 {
                break;
            }
            if gs < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - gs / dg;
            let next = if dg > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - s).abs() <= 2.0 * f64::EPSILON * s.abs().max(1.0)
                || hi - lo <= f64::EPSILON * s.abs().max(1.0)
            {
                let (gn, _) = g(next)?;
                if gn.abs() < best.0 {
                    best = (gn.abs(), next);
                }
                break;
            }
            s = next;
        }
        Ok(if best.0 <= tol {
            Foot::Found(best.1)
        } else {
            Foot::NoRoot
        })
    }
}

/// Builds the components of `R^i_t = f^i(R^i) R^i_x` with data `data`.
pub(crate) fn components(
    f: &[UnivariateSpec],
    data: &InitialData,
) -> Result<Vec<HopfComponent>, HopfError> {
    if f.len() != data.n() {
        return Err(HopfError::Spec(format!(
            "{} speeds but {} initial profiles",
            f.len(),
            data.n()
        )));
    }
    f.iter()
        .zip(&data.profiles)
        .enumerate()
        .map(|(i, (fi, phi))| HopfComponent::new(i, fi, phi, data.interval))
        .collect()
}

/// Solves the uncoupled system node by node. Rows at or beyond 0.9 of a
/// component's breaking time are masked; if that masks every row the run
/// fails with [`HopfError::BreakdownDetected`].
pub fn solve_hopf(
    f: &[UnivariateSpec],
    data: &InitialData,
    grid: Grid,
) -> Result<SolutionSample, HopfError> {
    let comps = components(f, data)?;
    let n = comps.len();
    let mut sol = SolutionSample::new_masked(grid, n);
    sol.breaking = comps.iter().map(|c| c.breaking.clone()).collect();
    let mut prev_row: Vec<Option<f64>> = vec![None; grid.nx * n];
    for m in 0..grid.nt {
        let t = grid.t(m);
        if comps.iter().any(|c| c.masked_at(t)) {
            for l in 0..grid.nx {
                sol.status[grid.index(m, l)] = NodeStatus::Breaking;
            }
            continue;
        }
        let mut left: Vec<Option<f64>> = vec![None; n];
        for l in 0..grid.nx {
            let x = grid.x(l);
            let k = grid.index(m, l);
            let mut status = NodeStatus::Valid;
            for (i, c) in comps.iter().enumerate() {
                let warm = left[i].or(prev_row[l * n + i]);
                match c.foot(x, t, warm)? {
                    Foot::Found(s) => {
                        sol.values[k * n + i] = c.profile(s)?;
                        left[i] = Some(s);
                        prev_row[l * n + i] = Some(s);
                    }
                    Foot::Outside => {
                        status = NodeStatus::OutsideReach;
                        left[i] = None;
                    }
                    Foot::NoRoot => {
                        if status == NodeStatus::Valid {
                            status = NodeStatus::NoRoot;
                        }
                        left[i] = None;
                    }
                }
            }
            sol.status[k] = status;
        }
    }
    if sol.status.iter().all(|s| *s == NodeStatus::Breaking) {
        let (component, breaking_time) = comps
            .iter()
            .filter_map(|c| {
                let t = if grid.t0 >= 0.0 {
                    c.breaking.forward
                } else {
                    c.breaking.backward
                };
                t.map(|t| (c.breaking.component, t))
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        return Err(HopfError::BreakdownDetected {
            component,
            breaking_time,
        });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Role;

    fn ident() -> Vec<UnivariateSpec> {
        vec![UnivariateSpec::parse("u", "u", Role::F).unwrap()]
    }

    #[test]
    fn constant_data_stays_constant() {
        let data = InitialData::parse(&["2.5"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 1.0], [-1.0, 1.0], 11, 11).unwrap();
        let sol = solve_hopf(&ident(), &data, grid).unwrap();
        assert!(sol.values.iter().all(|&v| v == 2.5));
        assert_eq!(sol.valid_count(), 121);
    }

    #[test]
    fn linear_data_matches_hand_solution() {
        let data = InitialData::parse(&["x"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 0.5], [-1.0, 1.0], 51, 41).unwrap();
        let sol = solve_hopf(&ident(), &data, grid).unwrap();
        for m in 0..grid.nt {
            for l in 0..grid.nx {
                let exact = grid.x(l) / (1.0 - grid.t(m));
                assert!((sol.at(m, l)[0] - exact).abs() <= 1e-10);
            }
        }
        assert_eq!(sol.breaking[0].forward, Some(1.0));
        assert_eq!(sol.breaking[0].backward, None);
    }

    #[test]
    fn rows_near_breaking_are_masked() {
        let data = InitialData::parse(&["x"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 1.2], [-1.0, 1.0], 13, 5).unwrap();
        let sol = solve_hopf(&ident(), &data, grid).unwrap();
        assert_eq!(sol.first_breaking_row(), Some(9));
        for m in 9..13 {
            assert!((0..5).all(|l| !sol.valid(m, l)));
        }
        let late = Grid::new([0.95, 2.0], [-1.0, 1.0], 5, 5).unwrap();
        assert!(matches!(
            solve_hopf(&ident(), &data, late),
            Err(HopfError::BreakdownDetected { component: 1, .. })
        ));
    }

    #[test]
    fn decreasing_data_never_breaks_forward() {
        let data = InitialData::parse(&["-x"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 2.0], [-1.0, 1.0], 21, 11).unwrap();
        let sol = solve_hopf(&ident(), &data, grid).unwrap();
        assert_eq!(sol.first_breaking_row(), None);
        assert!((sol.at(20, 0)[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn outside_data_interval_is_masked() {
        let data = InitialData::parse(&["x"], [-1.0, 1.0]).unwrap();
        let grid = Grid::new([0.0, 0.5], [-1.0, 1.0], 3, 3).unwrap();
        let sol = solve_hopf(&ident(), &data, grid).unwrap();
        // At t = 0.5 the foot of x = ±1 is ±2.
        assert_eq!(sol.status[grid.index(2, 0)], NodeStatus::OutsideReach);
        assert!(sol.valid(2, 1));
    }
}
