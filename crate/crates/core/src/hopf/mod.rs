//! Solutions of uncoupled Hopf systems `R^i_t = f^i(R^i) R^i_x` by
//! characteristics, and their images under reciprocal transformations.
//!
//! `R^i` is constant along `dx/dt = -f^i(R^i)`, so `R^i(x, t) = φ^i(s)` where
//! the foot `s` solves `x = s - f^i(φ^i(s)) t`.

mod characteristics;
mod driven;
mod pushforward;
mod quadrature;
mod regrid;
mod solve;

pub use characteristics::{bilinear, sample_characteristics, Characteristic};
pub use driven::{solve_driven, DrivenSystem};
pub use pushforward::{pde_residual, pushforward, CoordinateMap, QuadratureOrder};
pub use regrid::{inscribed_rectangle, regrid, ImageFrame};
pub use solve::{solve_hopf, BreakingInfo, HopfComponent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, ParseError, Role, UnivariateSpec};

#[derive(Debug, Clone, Error)]
pub enum HopfError {
    #[error("invalid input: {0}")]
    Spec(String),
    #[error("profile {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(
        "component {component} breaks at t = {breaking_time:e}; every grid row lies past 0.9 of it"
    )]
    BreakdownDetected {
        component: usize,
        breaking_time: f64,
    },
    #[error("pushforward forms are not closed on this solution (relative defect {defect:e} > {limit:e})")]
    NotClosed { defect: f64, limit: f64 },
    #[error("no valid nodes")]
    Empty,
}

/// Rectangular grid of nodes `(t_m, x_l)`, `m < nt`, `l < nx`, both ends
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
    pub nt: usize,
    pub nx: usize,
}

impl Grid {
    pub fn new(t: [f64; 2], x: [f64; 2], nt: usize, nx: usize) -> Result<Self, HopfError> {
        let g = Self {
            t0: t[0],
            t1: t[1],
            x0: x[0],
            x1: x[1],
            nt,
            nx,
        };
        if nt < 2 || nx < 2 {
            return Err(HopfError::Spec(format!(
                "grid needs at least 2x2 nodes, got {nt}x{nx}"
            )));
        }
        if !(g.t0.is_finite() && g.t1.is_finite() && g.x0.is_finite() && g.x1.is_finite())
            || g.t1 <= g.t0
            || g.x1 <= g.x0
        {
            return Err(HopfError::Spec(format!(
                "domain must be t0 < t1, x0 < x1 (got t [{}, {}], x [{}, {}])",
                g.t0, g.t1, g.x0, g.x1
            )));
        }
        Ok(g)
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn t(&self, m: usize) -> f64 {
        if m + 1 == self.nt {
            self.t1
        } else {
            self.t0 + m as f64 * self.dt()
        }
    }

    pub fn x(&self, l: usize) -> f64 {
        if l + 1 == self.nx {
            self.x1
        } else {
            self.x0 + l as f64 * self.dx()
        }
    }

    pub fn len(&self) -> usize {
        self.nt * self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, m: usize, l: usize) -> usize {
        m * self.nx + l
    }

    /// The same domain with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            nt: 2 * self.nt - 1,
            nx: 2 * self.nx - 1,
            ..*self
        }
    }
}

/// Cauchy data `R^i(x, 0) = φ^i(x)` known on `interval`.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub profiles: Vec<UnivariateSpec>,
    pub interval: [f64; 2],
}

/// JSON form: `{"profiles": ["1 + 0.1*sin(x)", ...], "interval": [-10, 10]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    pub profiles: Vec<String>,
    pub interval: [f64; 2],
}

impl InitialData {
    pub fn new(profiles: Vec<UnivariateSpec>, interval: [f64; 2]) -> Result<Self, HopfError> {
        if !(interval[0] < interval[1]) {
            return Err(HopfError::Spec(format!("bad data interval {interval:?}")));
        }
        if profiles.is_empty() {
            return Err(HopfError::Spec("no profiles".into()));
        }
        Ok(Self { profiles, interval })
    }

    pub fn parse(profiles: &[&str], interval: [f64; 2]) -> Result<Self, HopfError> {
        let profiles = profiles
            .iter()
            .enumerate()
            .map(|(index, p)| {
                UnivariateSpec::parse(p, "x", Role::Profile)
                    .map_err(|source| HopfError::Parse { index, source })
            })
            .collect::<Result<_, _>>()?;
        Self::new(profiles, interval)
    }

    pub fn from_spec(spec: &InitialDataSpec) -> Result<Self, HopfError> {
        let refs: Vec<&str> = spec.profiles.iter().map(String::as_str).collect();
        Self::parse(&refs, spec.interval)
    }

    pub fn to_spec(&self) -> InitialDataSpec {
        InitialDataSpec {
            profiles: self.profiles.iter().map(|p| p.to_text("x")).collect(),
            interval: self.interval,
        }
    }

    pub fn n(&self) -> usize {
        self.profiles.len()
    }
}

/// Why a node carries no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Valid,
    /// Within 0.9 of a breaking time, or past it.
    Breaking,
    /// The characteristic through the node starts outside the data interval
    /// or the mapped point falls outside the source domain.
    OutsideReach,
    /// The root solve failed to reach the required accuracy.
    NoRoot,
}

/// Gridded solution `R^i(t_m, x_l)`.
#[derive(Debug, Clone)]
pub struct SolutionSample {
    pub grid: Grid,
    pub n: usize,
    /// `values[index(m, l) * n + i]`.
    pub values: Vec<f64>,
    pub status: Vec<NodeStatus>,
    pub breaking: Vec<BreakingInfo>,
}

impl SolutionSample {
    pub fn new_masked(grid: Grid, n: usize) -> Self {
        Self {
            grid,
            n,
            values: vec![f64::NAN; grid.len() * n],
            status: vec![NodeStatus::OutsideReach; grid.len()],
            breaking: Vec::new(),
        }
    }

    pub fn at(&self, m: usize, l: usize) -> &[f64] {
        let k = self.grid.index(m, l) * self.n;
        &self.values[k..k + self.n]
    }

    pub fn valid(&self, m: usize, l: usize) -> bool {
        self.status[self.grid.index(m, l)] == NodeStatus::Valid
    }

    pub fn valid_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == NodeStatus::Valid)
            .count()
    }

    /// First grid row masked for breaking, if any.
    pub fn first_breaking_row(&self) -> Option<usize> {
        (0..self.grid.nt).find(|&m| {
            (0..self.grid.nx).any(|l| self.status[self.grid.index(m, l)] == NodeStatus::Breaking)
        })
    }
}
