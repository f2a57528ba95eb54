//! Truncated-normal model of the residual metering error inside a reference
//! cluster, and the standard uncertainty of the cluster's BPED estimate that
//! follows from it.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Station errors `N(0, sigma^2)` truncated to `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalErrorModel {
    pub sigma: f64,
    pub half_width: f64,
}

impl TruncatedNormalErrorModel {
    /// Model for clusters whose pairwise relative errors stay below `l`.
    pub fn for_cluster_threshold(sigma: f64, l: f64) -> Self {
        Self {
            sigma,
            half_width: l / 2.0,
        }
    }

    /// Probability mass of the untruncated normal inside the window.
    fn mass(&self) -> f64 {
        if self.half_width.is_infinite() {
            return 1.0;
        }
        erf(self.half_width / (std::f64::consts::SQRT_2 * self.sigma))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.abs() > self.half_width {
            return 0.0;
        }
        let z = x / self.sigma;
        INV_SQRT_2PI * (-0.5 * z * z).exp() / self.sigma / self.mass()
    }

    /// Variance of the truncated distribution (its mean is zero).
    pub fn variance(&self) -> f64 {
        let (s, h) = (self.sigma, self.half_width);
        if h.is_infinite() {
            return s * s;
        }
        if h <= 0.0 {
            return 0.0;
        }
        let beta = h / s;
        if beta < 1e-3 {
            // Series of the formula below; it cancels catastrophically here.
            return h * h / 3.0 - 2.0 * h.powi(4) / (45.0 * s * s);
        }
        let phi = INV_SQRT_2PI * (-0.5 * beta * beta).exp();
        s * s * (1.0 - 2.0 * beta * phi / self.mass())
    }
}

/// Standard uncertainty of a cluster BPED estimate caused by the mean
/// residual error of its `n` stations.
pub fn rcs_bias_sigma(model: &TruncatedNormalErrorModel, n: usize, e_d_true_est: f64) -> f64 {
    assert!(n >= 1, "cluster must have at least one station");
    (model.variance() / n as f64).sqrt() * e_d_true_est
}
