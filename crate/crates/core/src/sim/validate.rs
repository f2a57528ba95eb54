//! Scoring estimated verdicts against simulated ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{simulate, SimScenario};
use crate::config::ModelConfig;
use crate::error::Result;
use crate::model::{Classification, FcsVerdict};
use crate::pipeline::{run_estimation, EstimationReport};

/// Counts of (truth, verdict) pairs over reliable verdicts; "acceptable"
/// truth means `|gamma_true| <= gamma_t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub acceptable_as_acceptable: usize,
    pub acceptable_as_unacceptable: usize,
    pub unacceptable_as_acceptable: usize,
    pub unacceptable_as_unacceptable: usize,
}

impl Confusion {
    pub fn correct(&self) -> usize {
        self.acceptable_as_acceptable + self.unacceptable_as_unacceptable
    }

    pub fn total(&self) -> usize {
        self.correct() + self.acceptable_as_unacceptable + self.unacceptable_as_acceptable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub fcs_total: usize,
    pub fcs_estimated: usize,
    pub unreliable: usize,
    pub confusion: Confusion,
    /// Correct share of reliable verdicts, absent when there are none.
    pub accuracy: Option<f64>,
    /// Share of estimated stations whose true error lies within one sigma.
    pub coverage: Option<f64>,
    pub mean_abs_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub rcs_clusters: usize,
    pub rcs_stations: usize,
    pub chains: usize,
    pub insufficient_data: bool,
    pub warnings: Vec<String>,
}

/// Compares verdicts to ground truth. Stations missing from the truth table
/// are reported as warnings and skipped.
pub fn score_verdicts(
    report: &EstimationReport,
    truth: &BTreeMap<String, f64>,
    gamma_t: f64,
) -> ValidationReport {
    let mut confusion = Confusion::default();
    let mut unreliable = 0;
    let mut covered = 0;
    let mut errors = Vec::new();
    let mut warnings = report.warnings.clone();
    let scored: Vec<(&FcsVerdict, f64)> = report
        .verdicts
        .iter()
        .filter_map(|v| match truth.get(&v.fcs_id) {
            Some(&g) => Some((v, g)),
            None => {
                warnings.push(format!("no ground truth for {}", v.fcs_id));
                None
            }
        })
        .collect();
    for &(v, g) in &scored {
        let err = v.gamma - g;
        errors.push(err.abs());
        if err.abs() <= v.sigma_gamma {
            covered += 1;
        }
        let truly_ok = g.abs() <= gamma_t;
        match (v.classification, truly_ok) {
            (Classification::Unreliable, _) => unreliable += 1,
            (Classification::Acceptable, true) => confusion.acceptable_as_acceptable += 1,
            (Classification::Unacceptable, true) => confusion.acceptable_as_unacceptable += 1,
            (Classification::Acceptable, false) => confusion.unacceptable_as_acceptable += 1,
            (Classification::Unacceptable, false) => confusion.unacceptable_as_unacceptable += 1,
        }
    }
    let n = scored.len();
    let ratio = |k: usize, d: usize| (d > 0).then(|| k as f64 / d as f64);
    ValidationReport {
        fcs_total: report.counts.fcs_total,
        fcs_estimated: report.counts.fcs_estimated,
        unreliable,
        confusion,
        accuracy: ratio(confusion.correct(), confusion.total()),
        coverage: ratio(covered, n),
        mean_abs_error: (n > 0).then(|| errors.iter().sum::<f64>() / n as f64),
        max_abs_error: errors.iter().copied().reduce(f64::max),
        rcs_clusters: report.counts.rcs_clusters,
        rcs_stations: report.counts.rcs_stations,
        chains: report.counts.chains,
        insufficient_data: report.counts.rcs_clusters == 0,
        warnings,
    }
}

/// Simulates the scenario, runs the estimator and scores the result.
pub fn run_validation(scenario: &SimScenario, cfg: &ModelConfig) -> Result<ValidationReport> {
    let data = simulate(scenario)?;
    let report = run_estimation(&data.orders, cfg)?;
    Ok(score_verdicts(&report, &data.fleet.ground_truth(), cfg.acceptable_gamma_t))
}
