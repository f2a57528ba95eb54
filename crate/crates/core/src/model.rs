//! Domain types shared by the whole pipeline, and the three elementary
//! relations between station BPEDs and metering errors.
//!
//! Units: energy in kWh, SOC in integer percent, BPED in kWh per percent
//! point. Metering errors and every relative quantity are fractions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sample of a charging order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingPoint {
    /// Unix seconds, UTC.
    pub timestamp: i64,
    /// Cumulative energy reading of the station, kWh.
    pub energy_kwh: f64,
    /// BMS-reported SOC, integer percent.
    pub soc_pct: u32,
    pub current_a: f64,
    pub voltage_v: f64,
    pub temp_c: f64,
}

/// All samples of one charging order, time-sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingOrder {
    pub order_id: String,
    pub ev_id: String,
    pub fcs_id: String,
    #[serde(default)]
    pub battery_type: Option<String>,
    pub points: Vec<ChargingPoint>,
}

/// Identifies a segment: the `index`-th constant-current run of an order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentKey {
    pub ev_id: String,
    pub fcs_id: String,
    pub order_id: String,
    pub index: usize,
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.order_id, self.index)
    }
}

/// SOC and energy of one sample, relative to the segment's first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocEnergy {
    pub soc: u32,
    pub energy_kwh: f64,
}

/// A constant-current run cut from one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSegment {
    pub ev_id: String,
    pub fcs_id: String,
    pub order_id: String,
    /// Position of this run among the runs of its order.
    pub index: usize,
    #[serde(default)]
    pub battery_type: Option<String>,
    pub start_time: i64,
    pub end_time: i64,
    pub delta_energy_kwh: f64,
    pub delta_soc_pct: u32,
    pub start_soc_pct: u32,
    pub end_soc_pct: u32,
    pub mean_current_a: f64,
    pub peak_to_peak_current_a: f64,
    pub mean_temp_c: f64,
    pub mean_voltage_v: f64,
    /// Every sample of the run rebased so the first entry is `(0, 0.0)`.
    pub point_series: Vec<SocEnergy>,
}

impl ChargingSegment {
    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            ev_id: self.ev_id.clone(),
            fcs_id: self.fcs_id.clone(),
            order_id: self.order_id.clone(),
            index: self.index,
        }
    }
}

/// Feasible BPED interval of a segment and the matching range of the SOC
/// quantization error `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantBounds {
    pub e_d_min: f64,
    pub e_d_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Reported SOC change of the segment.
    pub y0: f64,
}

/// Expected BPED of one segment with its uncertainty components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpedEstimate {
    pub segment_ref: SegmentKey,
    pub mean_current_a: f64,
    pub mean_temp_c: f64,
    pub delta_soc_pct: u32,
    /// Conversion efficiency applied to the quantization-model expectation.
    pub eta: f64,
    /// Efficiency-corrected expected BPED.
    pub expected_e_d: f64,
    /// Second moment of the uncorrected BPED under the quantization model.
    pub expected_e_d_sq: f64,
    /// Quantization component, kWh/%.
    pub sigma_quant: f64,
    /// Repeatability component, kWh/%.
    pub sigma_repeat: f64,
    /// Relative uncertainty of the conversion efficiency.
    pub sigma_cv: f64,
    /// Combined standard uncertainty of `expected_e_d`, kWh/%.
    pub sigma_total: f64,
}

impl BpedEstimate {
    /// Expected BPED before the efficiency correction.
    pub fn uncorrected(&self) -> f64 {
        self.expected_e_d / self.eta
    }
}

/// Mean of several comparable segment estimates of one EV at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledBped {
    pub ev_id: String,
    pub fcs_id: String,
    pub members: Vec<SegmentKey>,
    pub expected_e_d: f64,
    pub sigma: f64,
    pub mean_current_a: f64,
    pub mean_temp_c: f64,
}

/// Stations sharing one EV whose pooled BPEDs agree within `l` pairwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcsCluster {
    pub ev_id: String,
    pub fcs_ids: Vec<String>,
    pub per_fcs_bped: BTreeMap<String, PooledBped>,
    /// Cluster estimate of the EV's true BPED (mean of the pooled values).
    pub e_d_true_est: f64,
    pub sigma_e_d_true: f64,
    /// Standard uncertainty of the cluster's residual metering bias, kWh/%.
    pub sigma_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Acceptable,
    Unacceptable,
    Unreliable,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Acceptable => "Acceptable",
            Classification::Unacceptable => "Unacceptable",
            Classification::Unreliable => "Unreliable",
        })
    }
}

/// How a station's error was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Member of one or more reference clusters, named by their EVs.
    RcsDirect { evs: Vec<String> },
    /// Reached along comparison chains, each listed root first.
    Chain { paths: Vec<Vec<String>> },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::RcsDirect { evs } => write!(f, "rcs:{}", evs.join("|")),
            Provenance::Chain { paths } => {
                let rendered: Vec<String> = paths.iter().map(|p| p.join(">")).collect();
                write!(f, "chain:{}", rendered.join("|"))
            }
        }
    }
}

/// Final per-station result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcsVerdict {
    pub fcs_id: String,
    pub gamma: f64,
    pub sigma_gamma: f64,
    pub interval: [f64; 2],
    /// Probability of an acceptable error, percent with one decimal.
    pub p_acceptable: f64,
    pub classification: Classification,
    pub provenance: Provenance,
}

/// BPED of a single segment, `energy / delta_soc`.
pub fn compute_bped_naive(energy_kwh: f64, delta_soc: f64) -> Result<f64> {
    if !(delta_soc > 0.0) {
        return Err(Error::Domain(format!(
            "SOC change must be positive, got {delta_soc}"
        )));
    }
    if !(energy_kwh > 0.0) {
        return Err(Error::Domain(format!(
            "energy must be positive, got {energy_kwh}"
        )));
    }
    Ok(energy_kwh / delta_soc)
}

/// Relative metering error of station B with respect to station A, from
/// the BPEDs of one EV observed at both.
pub fn relative_eem_error(e_d_b: f64, e_d_a: f64) -> Result<f64> {
    if !(e_d_a > 0.0) {
        return Err(Error::Domain(format!(
            "reference BPED must be positive, got {e_d_a}"
        )));
    }
    Ok((e_d_b - e_d_a) / e_d_a)
}

/// Metering error of B given the error of A and the relative error B to A.
pub fn chain_error(gamma_rel_b_to_a: f64, e_d_b: f64, e_d_a: f64, gamma_a: f64) -> Result<f64> {
    if !(e_d_a > 0.0) {
        return Err(Error::Domain(format!(
            "reference BPED must be positive, got {e_d_a}"
        )));
    }
    Ok(gamma_rel_b_to_a + e_d_b / e_d_a * gamma_a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bped_naive_examples() {
        assert!((compute_bped_naive(34.0, 100.0).unwrap() - 0.34).abs() < 1e-15);
        assert_eq!(compute_bped_naive(1.0, 1.0).unwrap(), 1.0);
        assert!((compute_bped_naive(32.4, 80.0).unwrap() - 0.405).abs() < 1e-15);
        assert!(compute_bped_naive(1.0, 0.0).is_err());
        assert!(compute_bped_naive(1.0, -2.0).is_err());
        assert!(compute_bped_naive(0.0, 2.0).is_err());
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_eem_error(0.34, 0.34).unwrap(), 0.0);
        assert!((relative_eem_error(0.3468, 0.34).unwrap() - 0.02).abs() < 1e-12);
        // (0.38 - 0.34) / 0.34 = 2/17
        assert!((relative_eem_error(0.38, 0.34).unwrap() - 2.0 / 17.0).abs() < 1e-12);
        assert!(relative_eem_error(0.3, 0.0).is_err());
    }

    #[test]
    fn chain_error_examples() {
        assert!((chain_error(0.0, 0.34, 0.34, 0.01).unwrap() - 0.01).abs() < 1e-15);
        assert!((chain_error(0.02, 0.3468, 0.34, 0.0).unwrap() - 0.02).abs() < 1e-15);
        assert!(chain_error(0.0, 0.3, -1.0, 0.0).is_err());
    }

    #[test]
    fn provenance_display() {
        let p = Provenance::Chain {
            paths: vec![vec!["C".into(), "D".into(), "E".into()]],
        };
        assert_eq!(p.to_string(), "chain:C>D>E");
        let r = Provenance::RcsDirect {
            evs: vec!["EV1".into()],
        };
        assert_eq!(r.to_string(), "rcs:EV1");
    }
}
