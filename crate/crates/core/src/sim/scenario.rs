//! Scenario parameters for synthetic fleets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::parse_kv;
use crate::error::{Error, Result};

/// Ratio of orders to stations used when `n_orders` is not given.
pub const ORDERS_PER_FCS: f64 = 12.7;

/// Every knob of the generator. Read from the same flat `key = value`
/// format as the model configuration; ranges are written `low,high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimScenario {
    pub n_fcs: usize,
    pub n_ev: usize,
    /// Defaults to `ORDERS_PER_FCS * n_fcs` when absent.
    pub n_orders: Option<usize>,
    pub seed: u64,
    pub sampling_interval_s: f64,
    /// Report SOC floored to whole percent. When off, samples are taken
    /// exactly at whole-percent crossings so the reported SOC is exact.
    pub quantize_soc: bool,

    pub fcs_error_sigma: f64,
    pub fraction_defective: f64,
    pub gamma_t: f64,
    pub cable_resistance_ohm: f64,

    /// Relative noise of the energy needed for each one-percent SOC step.
    pub rel_repeat_sigma: f64,
    pub e_d_range: [f64; 2],
    pub soh_range: [f64; 2],
    pub voltage_range_v: [f64; 2],
    pub current_range_a: [f64; 2],
    /// Relative session-to-session spread of the requested current.
    pub current_jitter_rel: f64,
    /// Uniform per-sample current ripple half-width, A.
    pub current_ripple_a: f64,
    pub taper_soc_range: [f64; 2],
    pub taper_ratio: f64,
    pub soc_start_range: [f64; 2],
    pub soc_end_range: [f64; 2],
    pub temp_mean_range_c: [f64; 2],
    pub temp_session_sd_c: f64,
    pub temp_out_of_band_fraction: f64,
    pub excluded_type_fraction: f64,
    pub swap_fraction: f64,

    pub timespan_days: f64,
    pub start_epoch_s: i64,
    /// Stations an EV may use are drawn from a window of this many
    /// neighbouring stations.
    pub home_window: usize,
    pub home_size_range: [usize; 2],
    pub heavy_user_fraction: f64,
    pub heavy_user_weight: f64,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            n_fcs: 500,
            n_ev: 1200,
            n_orders: None,
            seed: 1,
            sampling_interval_s: 60.0,
            quantize_soc: true,
            fcs_error_sigma: 0.0162,
            fraction_defective: 0.15,
            gamma_t: 0.02,
            cable_resistance_ohm: 0.0023,
            rel_repeat_sigma: 0.05,
            e_d_range: [0.3, 0.8],
            soh_range: [0.85, 1.0],
            voltage_range_v: [340.0, 420.0],
            current_range_a: [60.0, 180.0],
            current_jitter_rel: 0.005,
            current_ripple_a: 0.5,
            taper_soc_range: [75.0, 85.0],
            taper_ratio: 0.5,
            soc_start_range: [8.0, 35.0],
            soc_end_range: [80.0, 95.0],
            temp_mean_range_c: [22.0, 34.0],
            temp_session_sd_c: 1.0,
            temp_out_of_band_fraction: 0.03,
            excluded_type_fraction: 0.02,
            swap_fraction: 0.0,
            timespan_days: 45.0,
            start_epoch_s: 1_704_067_200,
            home_window: 16,
            home_size_range: [4, 12],
            heavy_user_fraction: 0.05,
            heavy_user_weight: 15.0,
        }
    }
}

fn kv_value(raw: &str) -> Value {
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|p| kv_value(p.trim())).collect());
    }
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::from(i);
    }
    match raw.parse::<f64>() {
        Ok(f) => Value::from(f),
        Err(_) => Value::String(raw.to_string()),
    }
}

impl SimScenario {
    pub fn orders(&self) -> usize {
        self.n_orders
            .unwrap_or_else(|| (ORDERS_PER_FCS * self.n_fcs as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_fcs == 0 || self.n_ev == 0 {
            return bad("n_fcs and n_ev must be positive");
        }
        if !(self.sampling_interval_s > 0.0) {
            return bad("sampling_interval_s must be positive");
        }
        if !(self.fcs_error_sigma >= 0.0 && self.rel_repeat_sigma >= 0.0) {
            return bad("sigmas must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.fraction_defective) {
            return bad("fraction_defective must lie in [0, 1]");
        }
        for (name, [lo, hi]) in [
            ("e_d_range", self.e_d_range),
            ("soh_range", self.soh_range),
            ("voltage_range_v", self.voltage_range_v),
            ("current_range_a", self.current_range_a),
            ("taper_soc_range", self.taper_soc_range),
            ("soc_start_range", self.soc_start_range),
            ("soc_end_range", self.soc_end_range),
            ("temp_mean_range_c", self.temp_mean_range_c),
        ] {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name}: low above high")));
            }
        }
        if !(self.e_d_range[0] > 0.0 && self.current_range_a[0] > 0.0 && self.voltage_range_v[0] > 0.0)
        {
            return bad("BPED, current and voltage must be positive");
        }
        if !(self.soc_start_range[0] >= 0.0
            && self.soc_start_range[1] < self.soc_end_range[0]
            && self.soc_end_range[1] <= 100.0)
        {
            return bad("SOC ranges must satisfy 0 <= start < end <= 100");
        }
        if self.home_size_range[0] == 0
            || self.home_size_range[0] > self.home_size_range[1]
            || self.home_window < self.home_size_range[1].min(self.n_fcs)
        {
            return bad("home_size_range must be positive and fit in home_window");
        }
        if !(self.taper_ratio > 0.0 && self.heavy_user_weight > 0.0) {
            return bad("taper_ratio and heavy_user_weight must be positive");
        }
        Ok(())
    }

    /// Overrides fields from parsed `key = value` pairs; unknown keys fail.
    pub fn apply_kv(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        let mut obj = match serde_json::to_value(&*self)? {
            Value::Object(m) => m,
            _ => unreachable!("scenario serializes to an object"),
        };
        for (k, raw) in pairs {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown scenario key `{k}`")));
            }
            obj.insert(k.clone(), kv_value(raw));
        }
        *self = serde_json::from_value(Value::Object(obj))
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        self.validate()
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut s = Self::default();
        s.apply_kv(&parse_kv(text)?)?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let Ok(Value::Object(obj)) = serde_json::to_value(self) else {
            unreachable!("scenario serializes to an object")
        };
        let render = |v: &Value| match v {
            Value::Array(items) => items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
            other => other.to_string(),
        };
        let obj: Map<String, Value> = obj;
        obj.iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, v)| format!("{k} = {}\n", render(v)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_order_ratio() {
        let s = SimScenario::default();
        assert_eq!(s.orders(), 6350);
        s.validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let s = SimScenario {
            n_orders: Some(700),
            seed: 7,
            e_d_range: [0.35, 0.5],
            quantize_soc: false,
            ..SimScenario::default()
        };
        let back = SimScenario::from_kv_str(&s.to_kv_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(SimScenario::from_kv_str("n_stations = 4").is_err());
        assert!(SimScenario::from_kv_str("n_fcs = 0").is_err());
        assert!(SimScenario::from_kv_str("soc_start_range = 50,90").is_err());
    }

    #[test]
    fn float_key_accepts_integer_text() {
        let s = SimScenario::from_kv_str("taper_ratio = 1\nseed = 9").unwrap();
        assert_eq!(s.taper_ratio, 1.0);
        assert_eq!(s.seed, 9);
    }
}
