use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SystemError;

/// Per-coordinate closed intervals `[lo, hi]` for the Riemann invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SampleBox {
    bounds: Vec<[f64; 2]>,
}

impl SampleBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self, SystemError> {
        if bounds.is_empty() {
            return Err(SystemError::Invalid("empty sampling box".into()));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SystemError::Invalid(format!(
                    "box interval {} is not a finite [lo, hi] with lo <= hi: [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        let out = Self { bounds };
        if out.diameter() == 0.0 {
            return Err(SystemError::Invalid(
                "sampling box has zero diameter".into(),
            ));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| hi - lo).collect()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(x, [lo, hi])| lo <= x && x <= hi)
    }

    /// One uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&[lo, hi]| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for SampleBox {
    type Error = SystemError;

    fn try_from(bounds: Vec<[f64; 2]>) -> Result<Self, SystemError> {
        Self::new(bounds)
    }
}

impl From<SampleBox> for Vec<[f64; 2]> {
    fn from(b: SampleBox) -> Self {
        b.bounds
    }
}
