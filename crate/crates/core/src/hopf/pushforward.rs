use serde::Serialize;

use super::{Grid, HopfError, SolutionSample};
use crate::expr::{Expression, Tape};
use crate::generator::ConservationPairs;

/// Integration order of the trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureOrder {
    /// Along the first time row, then up every column.
    RowFirst,
    /// Up the first column, then along every row.
    ColumnFirst,
}

/// New coordinates `x̃, t̃` at the nodes of a solution grid, with origin at
/// the first node.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// `BM − AN`, the Jacobian of `(x, t) ↦ (x̃, t̃)`.
    pub jacobian: Vec<f64>,
    pub valid: Vec<bool>,
    /// Largest discrete `|B_t − A_x|` (and `|N_t − M_x|`) over cells,
    /// relative to the largest `|B_t| + |A_x|`.
    pub closedness: f64,
    pub order: QuadratureOrder,
}

impl CoordinateMap {
    pub fn at(&self, m: usize, l: usize) -> Option<(f64, f64)> {
        let k = self.grid.index(m, l);
        self.valid[k].then(|| (self.x[k], self.t[k]))
    }

    /// Largest coordinate difference over nodes valid in both maps.
    pub fn max_difference(&self, other: &CoordinateMap) -> f64 {
        (0..self.x.len())
            .filter(|&k| self.valid[k] && other.valid[k])
            .map(|k| {
                (self.x[k] - other.x[k])
                    .abs()
                    .max((self.t[k] - other.t[k]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Integrates `dx̃ = A dt + B dx`, `dt̃ = M dt + N dx` over the grid with the
/// composite trapezoid rule. Fails with [`HopfError::NotClosed`] when the
/// discrete closedness defect exceeds `10 · tolerance`.
pub fn pushforward(
    sol: &SolutionSample,
    pairs: &ConservationPairs,
    order: QuadratureOrder,
    tolerance: f64,
) -> Result<CoordinateMap, HopfError> {
    let grid = sol.grid;
    let n = sol.n;
    let exprs: Vec<Expression> = pairs.as_array().into_iter().cloned().collect();
    let tape = Tape::compile(&exprs);
    if tape.arity() > n {
        return Err(HopfError::Spec(format!(
            "pairs reference R{} but the solution has {n} components",
            tape.arity()
        )));
    }
    let len = grid.len();
    let mut coef = vec![[f64::NAN; 4]; len];
    let mut ok = vec![false; len];
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            let k = grid.index(m, l);
            if !sol.valid(m, l) {
                continue;
            }
            if let Ok(v) = tape.eval(sol.at(m, l)) {
                coef[k] = [v[0], v[1], v[2], v[3]];
                ok[k] = true;
            }
        }
    }

    let closedness = closedness_defect(&grid, &coef, &ok);
    if closedness > 10.0 * tolerance {
        return Err(HopfError::NotClosed {
            defect: closedness,
            limit: 10.0 * tolerance,
        });
    }

    let (dt, dx) = (grid.dt(), grid.dx());
    let mut xs = vec![f64::NAN; len];
    let mut ts = vec![f64::NAN; len];
    let mut valid = vec![false; len];
    let first = grid.index(0, 0);
    if ok[first] {
        xs[first] = 0.0;
        ts[first] = 0.0;
        valid[first] = true;
    }
    // One trapezoid step from node `a` to node `b`; `dir` selects the
    // x-direction (B, N with dx) or t-direction (A, M with dt).
    let step =
        |a: usize, b: usize, along_x: bool, xs: &mut [f64], ts: &mut [f64], valid: &mut [bool]| {
            if !(valid[a] && ok[b]) {
                return;
            }
            let (cx, ct, h) = if along_x { (1, 3, dx) } else { (0, 2, dt) };
            xs[b] = xs[a] + 0.5 * (coef[a][cx] + coef[b][cx]) * h;
            ts[b] = ts[a] + 0.5 * (coef[a][ct] + coef[b][ct]) * h;
            valid[b] = true;
        };
    match order {
        QuadratureOrder::RowFirst => {
            for l in 1..grid.nx {
                step(
                    grid.index(0, l - 1),
                    grid.index(0, l),
                    true,
                    &mut xs,
                    &mut ts,
                    &mut valid,
                );
            }
            for l in 0..grid.nx {
                for m in 1..grid.nt {
                    step(
                        grid.index(m - 1, l),
                        grid.index(m, l),
                        false,
                        &mut xs,
                        &mut ts,
                        &mut valid,
                    );
                }
            }
        }
        QuadratureOrder::ColumnFirst => {
            for m in 1..grid.nt {
                step(
                    grid.index(m - 1, 0),
                    grid.index(m, 0),
                    false,
                    &mut xs,
                    &mut ts,
                    &mut valid,
                );
            }
            for m in 0..grid.nt {
                for l in 1..grid.nx {
                    step(
                        grid.index(m, l - 1),
                        grid.index(m, l),
                        true,
                        &mut xs,
                        &mut ts,
                        &mut valid,
                    );
                }
            }
        }
    }
    let mut jacobian = vec![f64::NAN; len];
    for k in 0..len {
        if !ok[k] {
            continue;
        }
        let [a, b, m, nn] = coef[k];
        let j = b * m - a * nn;
        jacobian[k] = j;
        if j.abs() <= 1e-12 * ((b * m).abs() + (a * nn).abs()) {
            valid[k] = false;
        }
    }
    Ok(CoordinateMap {
        grid,
        x: xs,
        t: ts,
        jacobian,
        valid,
        closedness,
        order,
    })
}

fn closedness_defect(grid: &Grid, coef: &[[f64; 4]], ok: &[bool]) -> f64 {
    let (dt, dx) = (grid.dt(), grid.dx());
    let mut worst_defect: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for m in 0..grid.nt - 1 {
        for l in 0..grid.nx - 1 {
            let c = [
                grid.index(m, l),
                grid.index(m, l + 1),
                grid.index(m + 1, l),
                grid.index(m + 1, l + 1),
            ];
            if !c.iter().all(|&k| ok[k]) {
                continue;
            }
            // (t-coefficient, x-coefficient) = (A, B) and (M, N).
            for (ct, cx) in [(0, 1), (2, 3)] {
                let v = |k: usize, j: usize| coef[c[k]][j];
                let x_t = (v(2, cx) + v(3, cx) - v(0, cx) - v(1, cx)) / (2.0 * dt);
                let t_x = (v(1, ct) + v(3, ct) - v(0, ct) - v(2, ct)) / (2.0 * dx);
                worst_defect = worst_defect.max((x_t - t_x).abs());
                worst_scale = worst_scale.max(x_t.abs() + t_x.abs());
            }
        }
    }
    if worst_defect == 0.0 {
        0.0
    } else {
        worst_defect / worst_scale.max(f64::MIN_POSITIVE)
    }
}

/// `max_i |δ_t R^i − λ^i(R) δ_x R^i|` with central differences, over interior
/// nodes whose four neighbours are valid.
pub fn pde_residual(sol: &SolutionSample, lambdas: &[Expression]) -> Result<f64, HopfError> {
    let grid = sol.grid;
    let n = sol.n;
    if lambdas.len() != n {
        return Err(HopfError::Spec(format!(
            "{} speeds for a solution with {n} components",
            lambdas.len()
        )));
    }
    let tape = Tape::compile(lambdas);
    let (dt, dx) = (grid.dt(), grid.dx());
    let mut worst: f64 = 0.0;
    for m in 1..grid.nt.saturating_sub(1) {
        for l in 1..grid.nx.saturating_sub(1) {
            if ![(m, l), (m - 1, l), (m + 1, l), (m, l - 1), (m, l + 1)]
                .iter()
                .all(|&(a, b)| sol.valid(a, b))
            {
                continue;
            }
            let lam = tape.eval(sol.at(m, l))?;
            for i in 0..n {
                let rt = (sol.at(m + 1, l)[i] - sol.at(m - 1, l)[i]) / (2.0 * dt);
                let rx = (sol.at(m, l + 1)[i] - sol.at(m, l - 1)[i]) / (2.0 * dx);
                worst = worst.max((rt - lam[i] * rx).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Role, UnivariateSpec};
    use crate::hopf::{solve_hopf, InitialData};

    fn linear_solution(nt: usize, nx: usize) -> SolutionSample {
        linear_solution_to(0.5, nt, nx)
    }

    fn linear_solution_to(t1: f64, nt: usize, nx: usize) -> SolutionSample {
        let f = vec![UnivariateSpec::parse("u", "u", Role::F).unwrap()];
        let data = InitialData::parse(&["x"], [-10.0, 10.0]).unwrap();
        solve_hopf(
            &f,
            &data,
            Grid::new([0.0, t1], [-1.0, 1.0], nt, nx).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_pair_gives_shifted_coordinates() {
        let sol = linear_solution(11, 21);
        let map = pushforward(
            &sol,
            &ConservationPairs::identity(),
            QuadratureOrder::RowFirst,
            1e-2,
        )
        .unwrap();
        for m in 0..11 {
            for l in 0..21 {
                let (x, t) = map.at(m, l).unwrap();
                assert!((x - (sol.grid.x(l) + 1.0)).abs() < 1e-13);
                assert!((t - sol.grid.t(m)).abs() < 1e-13);
            }
        }
        assert_eq!(map.closedness, 0.0);
    }

    #[test]
    fn non_conservation_law_is_rejected() {
        let sol = linear_solution(21, 21);
        // B = R, A = 0 is not closed: B_t = R_t ≠ 0 = A_x.
        let pairs = ConservationPairs {
            a: Expression::zero(),
            b: Expression::var(0),
            m: Expression::one(),
            n: Expression::zero(),
            terms: None,
        };
        assert!(matches!(
            pushforward(&sol, &pairs, QuadratureOrder::RowFirst, 1e-2),
            Err(HopfError::NotClosed { .. })
        ));
    }

    #[test]
    fn pde_residual_matches_closed_form() {
        // For R = x/(1−t) the central time difference is x/((1−t)² − h²),
        // so the residual is x h² / ((1−t)²((1−t)² − h²)), largest at the
        // last interior row and column.
        let lam = [Expression::var(0)];
        for n in [11, 21] {
            let r = pde_residual(&linear_solution_to(0.1, n, n), &lam).unwrap();
            let h = 0.1 / (n - 1) as f64;
            let (t, x) = (0.1 - h, 1.0 - 2.0 / (n - 1) as f64);
            let a = (1.0 - t) * (1.0 - t);
            let exact = x * h * h / (a * (a - h * h));
            assert!((r - exact).abs() < 1e-6 * exact, "{r} vs {exact}");
        }
    }
}
