use crate::expr::{Expression, Tape};

use super::HopfError;

const NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `s ↦ ∫_{a}^{s} g(σ) dσ` on `[a, b]`, from an 8-point Gauss–Legendre rule
/// on equal panels plus one partial panel per query.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral {
    tape: Tape,
    a: f64,
    b: f64,
    width: f64,
    cumulative: Vec<f64>,
}

impl CumulativeIntegral {
    /// `g` is a function of variable 0.
    pub fn new(g: &Expression, interval: [f64; 2], max_panel: f64) -> Result<Self, HopfError> {
        let [a, b] = interval;
        let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
        let width = (b - a) / panels as f64;
        let tape = Tape::compile(std::slice::from_ref(g));
        let mut cumulative = Vec::with_capacity(panels + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..panels {
            let lo = a + k as f64 * width;
            acc += gauss(&tape, lo, lo + width)?;
            cumulative.push(acc);
        }
        Ok(Self {
            tape,
            a,
            b,
            width,
            cumulative,
        })
    }

    pub fn eval(&self, s: f64) -> Result<f64, HopfError> {
        let s = s.clamp(self.a, self.b);
        let k =
            (((s - self.a) / self.width).floor().max(0.0) as usize).min(self.cumulative.len() - 2);
        let lo = self.a + k as f64 * self.width;
        Ok(self.cumulative[k] + gauss(&self.tape, lo, s)?)
    }
}

fn gauss(tape: &Tape, lo: f64, hi: f64) -> Result<f64, HopfError> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    if half == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        sum += w * tape.eval(&[mid + half * x])?[0];
    }
    Ok(sum * half)
}
