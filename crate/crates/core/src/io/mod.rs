//! File formats: JSON specs and reports, CSV grids and polylines, SVG webs.

mod csv;
mod json;
mod svg;

pub use self::csv::{
    read_solution_csv, read_solution_with_map, write_polylines_csv, write_solution_csv,
    write_web_csv,
};
pub use self::json::{to_json, write_json};
pub use self::svg::web_svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, parse_with, Expression, ParseError, Tape, VarScheme};
use crate::generator::{ConservationPairs, FamilySpec};
use crate::hopf::{Grid, HopfError};
use crate::system::{QuasilinearSystem, SampleBox, SystemError};
use crate::web::{WebError, WebSample};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] ::csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Hopf(#[from] HopfError),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error("expression {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
}

/// System file: `{"n": 4, "lambda": ["R1 + R2^2", ...], "box": [[1, 2], ...]}`.
/// Generated systems also carry the family they came from and their
/// conservation pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub lambda: Vec<String>,
    #[serde(rename = "box")]
    pub sample_box: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PairsSpec>,
}

/// `dx̃ = A dt + B dx`, `dt̃ = M dt + N dx` with coefficients in `R1..Rn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsSpec {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "M")]
    pub m: String,
    #[serde(rename = "N")]
    pub n: String,
}

impl PairsSpec {
    pub fn from_pairs(p: &ConservationPairs) -> Self {
        Self {
            a: p.a.to_string(),
            b: p.b.to_string(),
            m: p.m.to_string(),
            n: p.n.to_string(),
        }
    }

    /// Parses the four coefficients as functions of `R1..Rn`.
    pub fn build(&self, n: usize) -> Result<ConservationPairs, IoError> {
        let one =
            |k: usize, s: &str| parse(s, n).map_err(|source| IoError::Parse { index: k, source });
        Ok(ConservationPairs {
            a: one(1, &self.a)?,
            b: one(2, &self.b)?,
            m: one(3, &self.m)?,
            n: one(4, &self.n)?,
            terms: None,
        })
    }
}

impl SystemSpec {
    pub fn from_system(sys: &QuasilinearSystem) -> Self {
        Self {
            n: sys.n(),
            lambda: sys.lambdas().iter().map(|l| l.to_string()).collect(),
            sample_box: sys.sample_box().bounds().to_vec(),
            labels: sys.labels().map(|l| l.to_vec()),
            family: None,
            pairs: None,
        }
    }

    pub fn build(&self) -> Result<QuasilinearSystem, SystemError> {
        if self.lambda.len() != self.n {
            return Err(SystemError::Invalid(format!(
                "n = {} but {} speeds given",
                self.n,
                self.lambda.len()
            )));
        }
        let speeds: Vec<&str> = self.lambda.iter().map(String::as_str).collect();
        let sys = QuasilinearSystem::parse(&speeds, SampleBox::new(self.sample_box.clone())?)?;
        match &self.labels {
            Some(l) => sys.with_labels(l.clone()),
            None => Ok(sys),
        }
    }
}

/// Slope field given analytically in `t` and `x`:
/// `{"slopes": ["0", "1", "t", "x/(1+t)"], "domain": [0, 1, 0, 1], "grid": [41, 41]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeFieldSpec {
    pub slopes: Vec<String>,
    /// `[t0, t1, x0, x1]`.
    pub domain: [f64; 4],
    /// `[nt, nx]`.
    pub grid: [usize; 2],
}

impl SlopeFieldSpec {
    pub fn grid(&self) -> Result<Grid, HopfError> {
        let d = self.domain;
        Grid::new([d[0], d[1]], [d[2], d[3]], self.grid[0], self.grid[1])
    }

    pub fn expressions(&self) -> Result<Vec<Expression>, IoError> {
        let scheme = VarScheme::Named(vec!["t".into(), "x".into()]);
        self.slopes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_with(s, &scheme).map_err(|source| IoError::Parse {
                    index: i + 1,
                    source,
                })
            })
            .collect()
    }

    /// Samples the slopes and builds the web (derivatives by differences).
    pub fn sample(&self) -> Result<WebSample, IoError> {
        let grid = self.grid()?;
        let n = self.slopes.len();
        let tape = Tape::compile(&self.expressions()?);
        let mut values = vec![f64::NAN; grid.len() * n];
        for m in 0..grid.nt {
            for l in 0..grid.nx {
                if let Ok(v) = tape.eval(&[grid.t(m), grid.x(l)]) {
                    let k = grid.index(m, l) * n;
                    values[k..k + n].copy_from_slice(&v);
                }
            }
        }
        Ok(WebSample::from_slopes(grid, n, values)?)
    }
}
