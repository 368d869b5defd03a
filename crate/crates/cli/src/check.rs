use charweb::connection::{decoupling_probe, DecouplingReport, SectionQuad};
use charweb::generator::FamilySpec;
use charweb::io::{PairsSpec, SystemSpec};
use charweb::system::{classify, Condition, ConditionReport, SystemAnalysis};
use serde::Serialize;

use crate::output::{emit_report, read_json, Failure};
use crate::RunConfig;

const DECOUPLING_PROBES: usize = 20;
const DECOUPLING_TOLERANCE: f64 = 1e-6;
/// Decades `10^k` bounding the histogram bins.
const DECADES: std::ops::RangeInclusive<i32> = -16..=2;

/// Counts of residuals per decade: `counts[j]` holds residuals in
/// `(10^(k-1), 10^k]` for `k = decade_upper[j]`, the first bin also
/// taking everything smaller.
#[derive(Debug, Serialize)]
pub struct Histogram {
    pub condition: Condition,
    pub tolerance: f64,
    pub decade_upper: Vec<i32>,
    pub counts: Vec<usize>,
    pub above: usize,
    pub non_finite: usize,
}

impl Histogram {
    pub fn new(condition: Condition, tolerance: f64, residuals: &[f64]) -> Self {
        let decade_upper: Vec<i32> = DECADES.collect();
        let mut counts = vec![0; decade_upper.len()];
        let (mut above, mut non_finite) = (0, 0);
        for &r in residuals {
            if !r.is_finite() {
                non_finite += 1;
                continue;
            }
            match decade_upper.iter().position(|&k| r.abs() <= 10f64.powi(k)) {
                Some(j) => counts[j] += 1,
                None => above += 1,
            }
        }
        Self {
            condition,
            tolerance,
            decade_upper,
            counts,
            above,
            non_finite,
        }
    }
}

#[derive(Serialize)]
struct CheckReport<'a> {
    config: &'a RunConfig,
    report: &'a ConditionReport,
    histograms: Vec<Histogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decoupling: Option<Decoupling>,
}

#[derive(Serialize)]
struct Decoupling {
    tolerance: f64,
    decoupled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<DecouplingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let spec: SystemSpec = read_json(&config.input)?;
    let sys = spec.build()?;
    let o = &config.options;
    let report = classify(&sys, o.samples, o.seed, o.tol)?;
    let histograms = report
        .conditions
        .iter()
        .filter(|c| !c.residuals.is_empty())
        .map(|c| Histogram::new(c.condition, c.tolerance, &c.residuals))
        .collect();
    let decoupling = (sys.n() >= 3 && report.verdicts.linearizable_class.is_yes()).then(|| {
        let probe = || -> Result<DecouplingReport, Failure> {
            let ev = SystemAnalysis::new(&sys).forms_evaluator()?;
            let quad = SectionQuad::basis(ev, sys.sample_box().center(), o.step_h)?;
            Ok(decoupling_probe(
                &quad,
                sys.sample_box(),
                DECOUPLING_PROBES,
                o.seed,
            )?)
        };
        let tolerance = DECOUPLING_TOLERANCE;
        match probe() {
            Ok(r) => Decoupling {
                tolerance,
                decoupled: Some(r.max_residual <= tolerance),
                result: Some(r),
                error: None,
            },
            Err(e) => Decoupling {
                tolerance,
                decoupled: None,
                result: None,
                error: Some(e.message),
            },
        }
    });
    emit_report(
        config,
        "check.json",
        &CheckReport {
            config,
            report: &report,
            histograms,
            decoupling,
        },
    )
}

pub fn generate(config: &RunConfig) -> Result<(), Failure> {
    let family: FamilySpec = read_json(&config.input)?;
    let built = family.build()?;
    let mut spec = SystemSpec::from_system(&built.system);
    spec.family = Some(family);
    spec.pairs = built.pairs.as_ref().map(PairsSpec::from_pairs);
    emit_report(config, "system.json", &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins_by_decade() {
        let h = Histogram::new(
            Condition::SemiHamiltonian,
            1e-7,
            &[0.0, 1e-17, 3e-9, 1e-8, 5.0, 1e3, f64::NAN],
        );
        let at = |k: i32| h.counts[(k + 16) as usize];
        assert_eq!(at(-16), 2);
        assert_eq!(at(-8), 2);
        assert_eq!(at(1), 1);
        assert_eq!(h.above, 1);
        assert_eq!(h.non_finite, 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
    }
}
