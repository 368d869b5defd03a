use serde::Serialize;

use super::{CoordinateMap, Grid, HopfError, SolutionSample};
use crate::expr::{Expression, Tape};

/// One sampled leaf: vertices in the solution's `(x, t)` frame and, when a
/// coordinate map was supplied, their images `(x̃, t̃)`.
#[derive(Debug, Clone, Serialize)]
pub struct Characteristic {
    pub family: usize,
    pub seed: f64,
    pub points: Vec<[f64; 2]>,
    pub mapped: Option<Vec<[f64; 2]>>,
    /// The curve stopped early at the domain or mask boundary.
    pub truncated: bool,
}

fn locate(grid: &Grid, t: f64, x: f64) -> Option<(usize, usize, f64, f64)> {
    let u = (t - grid.t0) / grid.dt();
    let v = (x - grid.x0) / grid.dx();
    let eps = 1e-9;
    if !(u >= -eps
        && v >= -eps
        && u <= (grid.nt - 1) as f64 + eps
        && v <= (grid.nx - 1) as f64 + eps)
    {
        return None;
    }
    let m = (u.floor().max(0.0) as usize).min(grid.nt - 2);
    let l = (v.floor().max(0.0) as usize).min(grid.nx - 2);
    Some((
        m,
        l,
        (u - m as f64).clamp(0.0, 1.0),
        (v - l as f64).clamp(0.0, 1.0),
    ))
}

/// Bilinear interpolation of every component at `(t, x)`; `None` outside the
/// grid or when a cell corner is masked.
pub fn bilinear(sol: &SolutionSample, t: f64, x: f64) -> Option<Vec<f64>> {
    let (m, l, a, b) = locate(&sol.grid, t, x)?;
    let corners = [(m, l), (m, l + 1), (m + 1, l), (m + 1, l + 1)];
    if !corners.iter().all(|&(i, j)| sol.valid(i, j)) {
        return None;
    }
    let w = [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b];
    let mut out = vec![0.0; sol.n];
    for (&(i, j), wk) in corners.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(sol.at(i, j)) {
            *o += wk * v;
        }
    }
    Some(out)
}

impl CoordinateMap {
    /// Bilinear interpolation of `(x̃, t̃)` at `(t, x)`.
    pub fn interpolate(&self, t: f64, x: f64) -> Option<[f64; 2]> {
        let (m, l, a, b) = locate(&self.grid, t, x)?;
        let corners = [(m, l), (m, l + 1), (m + 1, l), (m + 1, l + 1)];
        let w = [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b];
        let mut out = [0.0; 2];
        for (&(i, j), wk) in corners.iter().zip(w) {
            let (xt, tt) = self.at(i, j)?;
            out[0] += wk * xt;
            out[1] += wk * tt;
        }
        Some(out)
    }
}

/// Integrates `dx/dt = −λ(R(x, t))` with RK4 and bilinear `R`, from `seeds`
/// points evenly spaced inside the first time row, with time step `step`.
/// `family` is one-based and only labels the output.
pub fn sample_characteristics(
    sol: &SolutionSample,
    speed: &Expression,
    map: Option<&CoordinateMap>,
    family: usize,
    seeds: usize,
    step: f64,
) -> Result<Vec<Characteristic>, HopfError> {
    if !(step > 0.0) {
        return Err(HopfError::Spec(format!("step {step} must be positive")));
    }
    let grid = sol.grid;
    let tape = Tape::compile(std::slice::from_ref(speed));
    let rate = |t: f64, x: f64| -> Option<f64> {
        let r = bilinear(sol, t, x)?;
        tape.eval(&r).ok().map(|v| -v[0])
    };
    let steps = ((grid.t1 - grid.t0) / step).round().max(1.0) as usize;
    let h = (grid.t1 - grid.t0) / steps as f64;
    let mut out = Vec::with_capacity(seeds);
    for k in 0..seeds {
        let seed = grid.x0 + (k + 1) as f64 * (grid.x1 - grid.x0) / (seeds + 1) as f64;
        let mut points = vec![[seed, grid.t0]];
        let mut truncated = rate(grid.t0, seed).is_none();
        let mut x = seed;
        if !truncated {
            for j in 0..steps {
                let t = grid.t0 + j as f64 * h;
                let t_next = if j + 1 == steps { grid.t1 } else { t + h };
                let next = (|| {
                    let k1 = rate(t, x)?;
                    let k2 = rate(t + 0.5 * h, x + 0.5 * h * k1)?;
                    let k3 = rate(t + 0.5 * h, x + 0.5 * h * k2)?;
                    let k4 = rate(t_next, x + h * k3)?;
                    Some(x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
                })();
                match next {
                    Some(xn) if rate(t_next, xn).is_some() => {
                        x = xn;
                        points.push([x, t_next]);
                    }
                    _ => {
                        truncated = true;
                        break;
                    }
                }
            }
        }
        let mapped = match map {
            Some(map) => {
                let mut mapped = Vec::with_capacity(points.len());
                for p in &points {
                    match map.interpolate(p[1], p[0]) {
                        Some(q) => mapped.push(q),
                        None => {
                            truncated = true;
                            break;
                        }
                    }
                }
                points.truncate(mapped.len());
                Some(mapped)
            }
            None => None,
        };
        out.push(Characteristic {
            family,
            seed,
            points,
            mapped,
            truncated,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Role, UnivariateSpec};
    use crate::generator::ConservationPairs;
    use crate::hopf::{pushforward, solve_hopf, InitialData, QuadratureOrder};

    #[test]
    fn constant_speed_gives_exact_lines() {
        let f = vec![UnivariateSpec::parse("1.5", "u", Role::F).unwrap()];
        let data = InitialData::parse(&["sin(x)"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 1.0], [-3.0, 3.0], 11, 31).unwrap();
        let sol = solve_hopf(&f, &data, grid).unwrap();
        let map = pushforward(
            &sol,
            &ConservationPairs::identity(),
            QuadratureOrder::RowFirst,
            1e-2,
        )
        .unwrap();
        let speed = Expression::constant(1.5);
        let curves = sample_characteristics(&sol, &speed, Some(&map), 1, 3, 0.1).unwrap();
        for c in &curves {
            assert!(!c.truncated);
            for p in &c.points {
                assert!((p[0] - (c.seed - 1.5 * p[1])).abs() < 1e-13);
            }
            let mapped = c.mapped.as_ref().unwrap();
            assert!((mapped[0][0] - (c.seed + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn leaving_the_domain_truncates() {
        let f = vec![UnivariateSpec::parse("u", "u", Role::F).unwrap()];
        let data = InitialData::parse(&["2"], [-10.0, 10.0]).unwrap();
        let grid = Grid::new([0.0, 1.0], [-1.0, 1.0], 11, 11).unwrap();
        let sol = solve_hopf(&f, &data, grid).unwrap();
        let curves = sample_characteristics(&sol, &Expression::var(0), None, 1, 1, 0.1).unwrap();
        assert!(curves[0].truncated);
        assert!(curves[0].points.len() < 11);
    }
}
