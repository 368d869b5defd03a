//! Numerics on sampled planar webs: the Schwarzian components `E, F, G, H`
//! fitted to `E λ³ + 3F λ² + 3G λ + H = V(λ)` for every family, the two
//! Hénaut residuals, and the straightness of sampled leaves.
//!
//! A web on a `(t, x)` grid is given by slopes `λ^i`; its leaves are the
//! integral curves of `V_i = ∂_t − λ^i ∂_x`.

mod henaut;
mod straightness;

pub use henaut::{henaut_field, henaut_residual};
pub use straightness::straightness;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expression, Tape};
use crate::hopf::{Grid, SolutionSample};

#[derive(Debug, Clone, Error)]
pub enum WebError {
    #[error(
        "a {n}-web does not determine E, F, G, H (need n >= 4); for n = 3 use the system-level gl(2) structure test"
    )]
    Underdetermined { n: usize },
    #[error("curve has {vertices} vertices or zero length; need at least 3 distinct vertices")]
    DegenerateCurve { vertices: usize },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Why a node is left out of a fitted field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFlag {
    Ok,
    /// No slope data, a missing neighbour for the derivatives, or two
    /// coinciding slopes.
    Missing,
    /// The slope matrix has condition number above 1e10.
    IllConditioned,
}

/// Slopes `λ^i` and their derivatives `V_i(λ^i) = λ^i_t − λ^i λ^i_x` on a
/// grid.
#[derive(Debug, Clone)]
pub struct WebSample {
    pub grid: Grid,
    pub n: usize,
    /// `slopes[index(m, l) * n + i]`.
    pub slopes: Vec<f64>,
    /// `derivatives[index(m, l) * n + i] = V_i(λ^i)`.
    pub derivatives: Vec<f64>,
    pub valid: Vec<bool>,
}

fn separated(lams: &[f64]) -> bool {
    let scale = lams.iter().fold(1.0_f64, |a, l| a.max(l.abs()));
    lams.iter()
        .enumerate()
        .all(|(i, a)| lams[i + 1..].iter().all(|b| (a - b).abs() >= 1e-9 * scale))
}

impl WebSample {
    /// The characteristic web of a solution of `R^i_t = λ^i(R) R^i_x`, with
    /// `V_i(λ^i) = Σ_k ∂_kλ^i (λ^k − λ^i) R^k_x` and `R^k_x` by central
    /// differences. Nodes without both `x`-neighbours are left out.
    pub fn from_solution(sol: &SolutionSample, lambdas: &[Expression]) -> Result<Self, WebError> {
        let n = sol.n;
        if lambdas.len() != n {
            return Err(WebError::Shape(format!(
                "{} speeds for a solution with {n} components",
                lambdas.len()
            )));
        }
        let mut outputs = lambdas.to_vec();
        for l in lambdas {
            outputs.extend(l.gradient(n));
        }
        let tape = Tape::compile(&outputs);
        let grid = sol.grid;
        let mut web = Self::empty(grid, n);
        let dx = grid.dx();
        let mut scratch = Vec::new();
        let mut buf = vec![0.0; n + n * n];
        let mut rx = vec![0.0; n];
        for m in 0..grid.nt {
            for l in 1..grid.nx.saturating_sub(1) {
                if !(sol.valid(m, l) && sol.valid(m, l - 1) && sol.valid(m, l + 1)) {
                    continue;
                }
                for (k, r) in rx.iter_mut().enumerate() {
                    *r = (sol.at(m, l + 1)[k] - sol.at(m, l - 1)[k]) / (2.0 * dx);
                }
                if tape
                    .eval_into(sol.at(m, l), &mut scratch, &mut buf)
                    .is_err()
                {
                    continue;
                }
                let (lam, grad) = buf.split_at(n);
                if !separated(lam) {
                    continue;
                }
                let node = grid.index(m, l);
                for i in 0..n {
                    let v: f64 = (0..n)
                        .map(|k| grad[i * n + k] * (lam[k] - lam[i]) * rx[k])
                        .sum();
                    web.slopes[node * n + i] = lam[i];
                    web.derivatives[node * n + i] = v;
                }
                web.valid[node] = true;
            }
        }
        Ok(web)
    }

    /// A web given only by slope values (`slopes[index(m, l) * n + i]`, NaN
    /// where unknown); `V_i(λ^i)` by central differences in `t` and `x`.
    pub fn from_slopes(grid: Grid, n: usize, slopes: Vec<f64>) -> Result<Self, WebError> {
        if slopes.len() != grid.len() * n {
            return Err(WebError::Shape(format!(
                "{} slope values for a {}x{} grid of {n} families",
                slopes.len(),
                grid.nt,
                grid.nx
            )));
        }
        let mut web = Self::empty(grid, n);
        let (dt, dx) = (grid.dt(), grid.dx());
        let at = |m: usize, l: usize| &slopes[grid.index(m, l) * n..(grid.index(m, l) + 1) * n];
        for m in 1..grid.nt.saturating_sub(1) {
            for l in 1..grid.nx.saturating_sub(1) {
                let stencil = [
                    at(m, l),
                    at(m - 1, l),
                    at(m + 1, l),
                    at(m, l - 1),
                    at(m, l + 1),
                ];
                if stencil.iter().any(|s| s.iter().any(|v| !v.is_finite())) || !separated(at(m, l))
                {
                    continue;
                }
                let node = grid.index(m, l);
                for i in 0..n {
                    let lt = (at(m + 1, l)[i] - at(m - 1, l)[i]) / (2.0 * dt);
                    let lx = (at(m, l + 1)[i] - at(m, l - 1)[i]) / (2.0 * dx);
                    web.slopes[node * n + i] = at(m, l)[i];
                    web.derivatives[node * n + i] = lt - at(m, l)[i] * lx;
                }
                web.valid[node] = true;
            }
        }
        Ok(web)
    }

    fn empty(grid: Grid, n: usize) -> Self {
        Self {
            grid,
            n,
            slopes: vec![f64::NAN; grid.len() * n],
            derivatives: vec![f64::NAN; grid.len() * n],
            valid: vec![false; grid.len()],
        }
    }

    pub fn slopes_at(&self, m: usize, l: usize) -> &[f64] {
        let k = self.grid.index(m, l) * self.n;
        &self.slopes[k..k + self.n]
    }

    pub fn derivatives_at(&self, m: usize, l: usize) -> &[f64] {
        let k = self.grid.index(m, l) * self.n;
        &self.derivatives[k..k + self.n]
    }
}

/// `E, F, G, H` on the web grid.
#[derive(Debug, Clone)]
pub struct SchwarzianField {
    pub grid: Grid,
    /// `[E, F, G, H]` per node, NaN where flagged.
    pub values: Vec<[f64; 4]>,
    /// `max_i |E λ³ + 3F λ² + 3G λ + H − V_i|` per node (exact solve for
    /// n = 4, least-squares optimum otherwise).
    pub residual: Vec<f64>,
    pub flags: Vec<NodeFlag>,
}

impl SchwarzianField {
    pub fn at(&self, m: usize, l: usize) -> Option<[f64; 4]> {
        let k = self.grid.index(m, l);
        (self.flags[k] == NodeFlag::Ok).then(|| self.values[k])
    }

    pub fn ok_count(&self) -> usize {
        self.flags.iter().filter(|f| **f == NodeFlag::Ok).count()
    }
}

/// Result of one node solve.
#[derive(Debug, Clone, Copy)]
pub struct NodeSolve {
    pub efgh: [f64; 4],
    pub residual: f64,
    pub condition: f64,
}

const MAX_CONDITION: f64 = 1e10;

fn row(l: f64) -> [f64; 4] {
    [l * l * l, 3.0 * l * l, 3.0 * l, 1.0]
}

/// Solves `E λ_i³ + 3F λ_i² + 3G λ_i + H = v_i` at one node: directly for
/// four slopes, in the least-squares sense (SVD) for more.
pub fn solve_node(slopes: &[f64], v: &[f64]) -> Result<NodeSolve, WebError> {
    let n = slopes.len();
    if n < 4 {
        return Err(WebError::Underdetermined { n });
    }
    if v.len() != n {
        return Err(WebError::Shape(format!(
            "{} values for {n} slopes",
            v.len()
        )));
    }
    let a = DMatrix::from_fn(n, 4, |i, j| row(slopes[i])[j]);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let x: [f64; 4] = if n == 4 {
        let m = Matrix4::from_fn(|i, j| a[(i, j)]);
        let sol = m.lu().solve(&Vector4::from_column_slice(v));
        match sol {
            Some(s) => [s[0], s[1], s[2], s[3]],
            None => [f64::NAN; 4],
        }
    } else {
        match svd.solve(&DVector::from_column_slice(v), 0.0) {
            Ok(s) => [s[0], s[1], s[2], s[3]],
            Err(_) => [f64::NAN; 4],
        }
    };
    let residual = (0..n)
        .map(|i| {
            let r = row(slopes[i]);
            (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + r[3] * x[3] - v[i]).abs()
        })
        .fold(0.0, f64::max);
    Ok(NodeSolve {
        efgh: x,
        residual,
        condition,
    })
}

/// Fits `E, F, G, H` at every valid node of the web.
pub fn solve_efgh(web: &WebSample) -> Result<SchwarzianField, WebError> {
    if web.n < 4 {
        return Err(WebError::Underdetermined { n: web.n });
    }
    let len = web.grid.len();
    let mut field = SchwarzianField {
        grid: web.grid,
        values: vec![[f64::NAN; 4]; len],
        residual: vec![f64::NAN; len],
        flags: vec![NodeFlag::Missing; len],
    };
    for m in 0..web.grid.nt {
        for l in 0..web.grid.nx {
            let k = web.grid.index(m, l);
            if !web.valid[k] {
                continue;
            }
            let s = solve_node(web.slopes_at(m, l), web.derivatives_at(m, l))?;
            if !(s.condition <= MAX_CONDITION) || s.efgh.iter().any(|v| !v.is_finite()) {
                field.flags[k] = NodeFlag::IllConditioned;
                continue;
            }
            field.values[k] = s.efgh;
            field.residual[k] = s.residual;
            field.flags[k] = NodeFlag::Ok;
        }
    }
    Ok(field)
}
