//! SOC quantization error model.
//!
//! The BMS reports SOC in whole percent, so the reported SOC change `y0` of a
//! segment differs from the true change by `y = dS2 - dS1`, the difference of
//! two independent uniform residuals on `[0, 1)`. Its prior density is the
//! triangle `1 - |y|` on `(-1, 1)`. Every uploaded sample of the segment
//! bounds the true BPED; the intersection of those bounds restricts `y` to
//! `[y_min, y_max]`, and the expected BPED is the conditional mean of
//! `E / (y0 + y)` over that interval, evaluated in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{BpedEstimate, ChargingSegment, QuantBounds};

/// Below this width the conditional density is treated as a point mass.
const DEGENERATE_WIDTH: f64 = 1e-12;

/// Density of the difference of two independent `U[0, 1)` residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TriangularPrior;

impl TriangularPrior {
    pub fn pdf(&self, y: f64) -> f64 {
        if y > -1.0 && y < 0.0 {
            1.0 + y
        } else if (0.0..1.0).contains(&y) {
            1.0 - y
        } else {
            0.0
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= -1.0 {
            0.0
        } else if y <= 0.0 {
            0.5 * (1.0 + y) * (1.0 + y)
        } else if y < 1.0 {
            1.0 - 0.5 * (1.0 - y) * (1.0 - y)
        } else {
            1.0
        }
    }

    /// Prior mass on `[lo, hi]`, computed from the antiderivative directly
    /// rather than as a CDF difference.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(-1.0);
        let hi = hi.min(1.0);
        if hi <= lo {
            return 0.0;
        }
        if hi <= 0.0 {
            0.5 * quant_a(lo, hi)
        } else if lo >= 0.0 {
            0.5 * quant_b(lo, hi)
        } else {
            0.5 * quant_c(lo, hi)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>() - rng.random::<f64>()
    }
}

/// Normalizer factor `a` for intervals left of zero.
fn quant_a(y_min: f64, y_max: f64) -> f64 {
    (y_max - y_min) * (2.0 + y_max + y_min)
}

/// Normalizer factor `b` for intervals right of zero.
fn quant_b(y_min: f64, y_max: f64) -> f64 {
    (y_max - y_min) * (2.0 - y_max - y_min)
}

/// Normalizer factor `c` for intervals straddling zero.
fn quant_c(y_min: f64, y_max: f64) -> f64 {
    2.0 * (y_max - y_min) - (y_max * y_max + y_min * y_min)
}

/// Which side of zero the conditioning interval lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignCase {
    /// `y_max <= 0`.
    Negative,
    /// `y_min >= 0`.
    Positive,
    /// `y_min < 0 < y_max`.
    Straddling,
}

/// The triangular prior restricted to `[y_min, y_max]` and renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalQuantDensity {
    pub y_min: f64,
    pub y_max: f64,
}

impl ConditionalQuantDensity {
    pub fn new(y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min >= -1.0 && y_max <= 1.0 && y_min <= y_max) {
            return Err(Error::Domain(format!(
                "quantization interval [{y_min}, {y_max}] is not inside [-1, 1]"
            )));
        }
        Ok(Self { y_min, y_max })
    }

    pub fn case(&self) -> SignCase {
        if self.y_max <= 0.0 {
            SignCase::Negative
        } else if self.y_min >= 0.0 {
            SignCase::Positive
        } else {
            SignCase::Straddling
        }
    }

    /// Prior mass of the interval: `a/2`, `b/2` or `c/2` by sign case.
    pub fn normalizer(&self) -> f64 {
        0.5 * match self.case() {
            SignCase::Negative => quant_a(self.y_min, self.y_max),
            SignCase::Positive => quant_b(self.y_min, self.y_max),
            SignCase::Straddling => quant_c(self.y_min, self.y_max),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if y < self.y_min || y > self.y_max {
            return 0.0;
        }
        let z = self.normalizer();
        if z <= 0.0 {
            return 0.0;
        }
        TriangularPrior.pdf(y) / z
    }

    /// Rejection sampling from the prior. Slow for narrow intervals; meant
    /// for Monte Carlo checks and demonstrations.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.y_max - self.y_min < DEGENERATE_WIDTH {
            return 0.5 * (self.y_min + self.y_max);
        }
        loop {
            let y = TriangularPrior.sample(rng);
            if y >= self.y_min && y <= self.y_max {
                return y;
            }
        }
    }
}

/// Feasible BPED interval of a segment from every uploaded sample.
///
/// Sample `i` with reported SOC change `s_i` and energy `e_i` bounds the true
/// BPED to `[e_i/(s_i+1), e_i/(s_i-1)]`; the upper bound exists only for
/// `s_i > 1`. The resulting `y` interval is clamped to `[-1, 1]` and the
/// BPED bounds are re-derived from the clamped `y` so both stay consistent.
pub fn quant_bounds(segment: &ChargingSegment) -> Result<QuantBounds> {
    let series = &segment.point_series;
    if series.len() < 2 || segment.delta_soc_pct < 1 {
        return Err(Error::Domain(format!(
            "segment {} has no SOC change to bound",
            segment.key()
        )));
    }
    let mut e_d_min = 0.0_f64;
    let mut e_d_max = f64::INFINITY;
    for p in &series[1..] {
        let s = f64::from(p.soc);
        e_d_min = e_d_min.max(p.energy_kwh / (s + 1.0));
        if p.soc > 1 {
            e_d_max = e_d_max.min(p.energy_kwh / (s - 1.0));
        }
    }
    if e_d_min > e_d_max {
        return Err(Error::DataInconsistency(format!(
            "segment {}: empty BPED interval [{e_d_min}, {e_d_max}]",
            segment.key()
        )));
    }
    let energy = segment.delta_energy_kwh;
    let y0 = f64::from(segment.delta_soc_pct);
    let y_min = (energy / e_d_max - y0).clamp(-1.0, 1.0);
    let y_max = (energy / e_d_min - y0).clamp(-1.0, 1.0);
    Ok(QuantBounds {
        e_d_min: energy / (y0 + y_max),
        e_d_max: energy / (y0 + y_min),
        y_min,
        y_max,
        y0,
    })
}

/// First and second moment of `E / (y0 + y)` under the conditional density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantMoments {
    pub mean: f64,
    pub second: f64,
}

impl QuantMoments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

pub fn quant_moments(energy_kwh: f64, bounds: &QuantBounds) -> Result<QuantMoments> {
    let (y_min, y_max, y0) = (bounds.y_min, bounds.y_max, bounds.y0);
    if !(y0 + y_min > 0.0) {
        return Err(Error::Domain(format!(
            "y0 + y_min must be positive, got {}",
            y0 + y_min
        )));
    }
    let density = ConditionalQuantDensity::new(y_min, y_max)?;
    let e = energy_kwh;
    if y_max - y_min < DEGENERATE_WIDTH {
        let v = e / (y0 + 0.5 * (y_min + y_max));
        return Ok(QuantMoments {
            mean: v,
            second: v * v,
        });
    }

    // ln((y0 + y_max) / (y0 + y_min)) without cancellation.
    let ln_span = ((y_max - y_min) / (y0 + y_min)).ln_1p();
    // 1/(y0 + y_min) - 1/(y0 + y_max) without cancellation.
    let inv_diff = (y_max - y_min) / ((y0 + y_min) * (y0 + y_max));
    let moments = match density.case() {
        SignCase::Negative => {
            let a = quant_a(y_min, y_max);
            // (1 + y)/(y0 + y) = 1 + (1 - y0)/(y0 + y)
            let mean = 2.0 * e / a * ((y_max - y_min) + (1.0 - y0) * ln_span);
            let second = 2.0 * e * e / a * ((1.0 - y0) * inv_diff + ln_span);
            QuantMoments { mean, second }
        }
        SignCase::Positive => {
            let b = quant_b(y_min, y_max);
            let mean = 2.0 * e / b * ((y_min - y_max) + (1.0 + y0) * ln_span);
            let second = 2.0 * e * e / b * ((1.0 + y0) * inv_diff - ln_span);
            QuantMoments { mean, second }
        }
        SignCase::Straddling => {
            let c = quant_c(y_min, y_max);
            let ln_up = (y_max / y0).ln_1p(); // ln((y0 + y_max)/y0)
            let ln_down = -(y_min / y0).ln_1p(); // ln(y0/(y0 + y_min))
            let mean = 2.0 * e / c * ((1.0 + y0) * ln_up + (1.0 - y0) * ln_down - y_min - y_max);
            let second = 2.0 * e * e / c
                * ((1.0 + y_min) / (y0 + y_min) + (y_max - 1.0) / (y0 + y_max) - ln_up + ln_down);
            QuantMoments { mean, second }
        }
    };
    Ok(moments)
}

/// Conditional expectation of the segment BPED under the quantization model.
pub fn expected_bped(energy_kwh: f64, bounds: &QuantBounds) -> Result<f64> {
    quant_moments(energy_kwh, bounds).map(|m| m.mean)
}

pub fn expected_bped_sq(energy_kwh: f64, bounds: &QuantBounds) -> Result<f64> {
    quant_moments(energy_kwh, bounds).map(|m| m.second)
}

/// Standard deviation of the segment BPED due to SOC quantization.
pub fn sigma_quant(energy_kwh: f64, bounds: &QuantBounds) -> Result<f64> {
    sigma_from_moments(energy_kwh, bounds, &quant_moments(energy_kwh, bounds)?)
}

fn sigma_from_moments(energy_kwh: f64, bounds: &QuantBounds, m: &QuantMoments) -> Result<f64> {
    let var = m.variance();
    // Below this the closed-form difference is dominated by rounding.
    if var < 1e-6 * m.second {
        let var = centered_variance(energy_kwh, bounds, m.mean);
        if var < 0.0 {
            return Err(Error::Numerical(format!("negative BPED variance {var}")));
        }
        return Ok(var.sqrt());
    }
    Ok(var.sqrt())
}

/// `E[(E/(y0+y) - mean)^2]` by Gauss-Legendre on each linear piece of the
/// conditional density.
fn centered_variance(energy_kwh: f64, b: &QuantBounds, mean: f64) -> f64 {
    if b.y_max - b.y_min < DEGENERATE_WIDTH {
        return 0.0;
    }
    let mut cuts = vec![b.y_min];
    if b.y_min < 0.0 && b.y_max > 0.0 {
        cuts.push(0.0);
    }
    cuts.push(b.y_max);
    let (mut num, mut den) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for &(x, wt) in gauss_legendre_16().iter() {
            let y = mid + half * x;
            let p = TriangularPrior.pdf(y) * wt * half;
            let d = energy_kwh / (b.y0 + y) - mean;
            num += p * d * d;
            den += p;
        }
    }
    num / den
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre_16() -> &'static [(f64, f64); 16] {
    static RULE: std::sync::OnceLock<[(f64, f64); 16]> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut out = [(0.0, 0.0); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Relative BPED error caused by the two SOC residuals of a segment.
pub fn quant_error_naive(delta_s1: f64, delta_s2: f64, s0: u32, sn: u32) -> Result<f64> {
    if sn <= s0 {
        return Err(Error::Domain(format!(
            "end SOC {sn} must exceed start SOC {s0}"
        )));
    }
    if !(0.0..1.0).contains(&delta_s1) || !(0.0..1.0).contains(&delta_s2) {
        return Err(Error::Domain("SOC residuals must lie in [0, 1)".into()));
    }
    Ok((delta_s2 - delta_s1) / f64::from(sn - s0))
}

/// Expected BPED of a segment with its three uncertainty components.
pub fn estimate_bped(segment: &ChargingSegment, cfg: &ModelConfig) -> Result<BpedEstimate> {
    let energy = segment.delta_energy_kwh;
    let y0 = f64::from(segment.delta_soc_pct);
    let (mean, second, sigma_q) = if cfg.soc_quantization {
        let bounds = quant_bounds(segment)?;
        let m = quant_moments(energy, &bounds)?;
        (m.mean, m.second, sigma_from_moments(energy, &bounds, &m)?)
    } else {
        let v = crate::model::compute_bped_naive(energy, y0)?;
        (v, v * v, 0.0)
    };
    let sigma_repeat = cfg.bped_rel_repeat * mean / y0.sqrt();
    let expected = cfg.eta_fixed * mean;
    let rel_sq = (sigma_q * sigma_q + sigma_repeat * sigma_repeat) / (mean * mean);
    Ok(BpedEstimate {
        segment_ref: segment.key(),
        mean_current_a: segment.mean_current_a,
        mean_temp_c: segment.mean_temp_c,
        delta_soc_pct: segment.delta_soc_pct,
        eta: cfg.eta_fixed,
        expected_e_d: expected,
        expected_e_d_sq: second,
        sigma_quant: sigma_q,
        sigma_repeat,
        sigma_cv: cfg.sigma_r_cv,
        sigma_total: expected * (cfg.sigma_r_cv * cfg.sigma_r_cv + rel_sq).sqrt(),
    })
}
