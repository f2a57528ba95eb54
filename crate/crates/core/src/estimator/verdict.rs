//! Turning an error estimate into a probability of acceptability and a
//! classification.

use crate::model::{Classification, FcsVerdict, Provenance};

/// Fraction of `[gamma - sigma, gamma + sigma]` that lies inside
/// `[-gamma_t, gamma_t]`, with the resulting classification.
///
/// An interval that overshoots the band on both sides is unreliable; any
/// other interval is acceptable when more than half of it lies in the band.
/// A zero sigma is treated as a point.
pub fn acceptance_probability(gamma: f64, sigma: f64, gamma_t: f64) -> (f64, Classification) {
    let (lo, hi) = (gamma - sigma, gamma + sigma);
    if lo < -gamma_t && hi > gamma_t {
        let p = 2.0 * gamma_t / (2.0 * sigma);
        return (p, Classification::Unreliable);
    }
    let p = if sigma <= 0.0 {
        if gamma.abs() <= gamma_t {
            1.0
        } else {
            0.0
        }
    } else {
        let overlap = (hi.min(gamma_t) - lo.max(-gamma_t)).max(0.0);
        (overlap / (2.0 * sigma)).min(1.0)
    };
    let class = if p > 0.5 {
        Classification::Acceptable
    } else {
        Classification::Unacceptable
    };
    (p, class)
}

/// Inverse-variance weighted mean of independent estimates. Exact estimates
/// (zero sigma) take precedence and are averaged equally.
pub fn combine_inverse_variance(estimates: &[(f64, f64)]) -> Option<(f64, f64)> {
    if estimates.is_empty() {
        return None;
    }
    let exact: Vec<f64> = estimates
        .iter()
        .filter(|(_, s)| *s <= 0.0)
        .map(|(g, _)| *g)
        .collect();
    if !exact.is_empty() {
        return Some((exact.iter().sum::<f64>() / exact.len() as f64, 0.0));
    }
    let wsum: f64 = estimates.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let mean = estimates.iter().map(|(g, s)| g / (s * s)).sum::<f64>() / wsum;
    Some((mean, (1.0 / wsum).sqrt()))
}

/// Assembles a verdict; `p_acceptable` is stored in percent with one decimal
/// while the classification uses the unrounded probability.
pub fn make_verdict(
    fcs_id: &str,
    gamma: f64,
    sigma: f64,
    gamma_t: f64,
    provenance: Provenance,
) -> FcsVerdict {
    let (p, classification) = acceptance_probability(gamma, sigma, gamma_t);
    FcsVerdict {
        fcs_id: fcs_id.to_string(),
        gamma,
        sigma_gamma: sigma,
        interval: [gamma - sigma, gamma + sigma],
        p_acceptable: (p * 1000.0).round() / 10.0,
        classification,
        provenance,
    }
}
