//! Estimation-model configuration.
//!
//! Defaults are the reference parameter set of the estimation model. Config
//! files are flat `key = value` text whose keys are exactly the field names
//! of [`ModelConfig`]; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds and constants of the estimation model.
///
/// All relative quantities (errors, thresholds, sigmas) are dimensionless
/// fractions, never percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum peak-to-peak current inside one segment, A.
    pub current_pp_threshold_a: f64,
    /// Minimum SOC change of a retained segment, percent points.
    pub min_delta_soc_pct: u32,
    /// Relative repeatability of BPED per percent point of SOC.
    pub bped_rel_repeat: f64,
    /// Minimum number of stations in a reference cluster.
    pub min_rcs_fcs_count: usize,
    /// Maximum relative dispersion of expected BPED for one EV at one station.
    pub expected_bped_stability_threshold: f64,
    /// Population standard deviation of station metering errors.
    pub fcs_error_sigma: f64,
    /// Pairwise relative-error bound `l` for reference clusters.
    pub rcs_rel_error_threshold_l: f64,
    /// Longest comparison chain, counted in stations including the root.
    pub max_chain_len_fcs: usize,
    /// Maximum difference of mean temperature between paired segment groups, degC.
    pub d_temperature_threshold_c: f64,
    /// Acceptable metering error band half-width.
    pub acceptable_gamma_t: f64,
    /// Retained mean-temperature window, degC, inclusive.
    pub temp_window_c: [f64; 2],
    /// Maximum span of retained orders, days.
    pub max_timespan_days: f64,
    /// Relative uncertainty of the conversion efficiency.
    pub sigma_r_cv: f64,
    /// Conversion efficiency applied to every segment.
    pub eta_fixed: f64,
    /// Maximum difference of mean current between paired segment groups, A.
    pub d_current_threshold_a: f64,
    /// Use the SOC quantization model for expected BPED. When off, BPED is
    /// the plain energy over SOC ratio with no quantization uncertainty.
    pub soc_quantization: bool,
    /// Battery types whose segments are excluded (case-insensitive).
    pub excluded_battery_types: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            current_pp_threshold_a: 4.0,
            min_delta_soc_pct: 20,
            bped_rel_repeat: 0.06,
            min_rcs_fcs_count: 3,
            expected_bped_stability_threshold: 0.01,
            fcs_error_sigma: 0.0162,
            rcs_rel_error_threshold_l: 0.0067,
            max_chain_len_fcs: 4,
            d_temperature_threshold_c: 5.0,
            acceptable_gamma_t: 0.02,
            temp_window_c: [20.0, 40.0],
            max_timespan_days: 60.0,
            sigma_r_cv: 0.002,
            eta_fixed: 1.0,
            d_current_threshold_a: 4.0,
            soc_quantization: true,
            excluded_battery_types: vec!["LiFePO4".to_string()],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("current_pp_threshold_a", self.current_pp_threshold_a),
            ("bped_rel_repeat", self.bped_rel_repeat),
            (
                "expected_bped_stability_threshold",
                self.expected_bped_stability_threshold,
            ),
            ("fcs_error_sigma", self.fcs_error_sigma),
            ("rcs_rel_error_threshold_l", self.rcs_rel_error_threshold_l),
            ("d_temperature_threshold_c", self.d_temperature_threshold_c),
            ("acceptable_gamma_t", self.acceptable_gamma_t),
            ("max_timespan_days", self.max_timespan_days),
            ("sigma_r_cv", self.sigma_r_cv),
            ("eta_fixed", self.eta_fixed),
            ("d_current_threshold_a", self.d_current_threshold_a),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.min_delta_soc_pct == 0 {
            return Err(Error::Config("min_delta_soc_pct must be positive".into()));
        }
        if self.min_rcs_fcs_count < 2 {
            return Err(Error::Config("min_rcs_fcs_count must be at least 2".into()));
        }
        if self.max_chain_len_fcs == 0 {
            return Err(Error::Config("max_chain_len_fcs must be positive".into()));
        }
        if self.eta_fixed > 1.0 {
            return Err(Error::Config("eta_fixed cannot exceed 1".into()));
        }
        if !(self.temp_window_c[0] < self.temp_window_c[1]) {
            return Err(Error::Config(format!(
                "temp_window_c low must be below high, got {:?}",
                self.temp_window_c
            )));
        }
        Ok(())
    }

    /// Overrides fields from parsed `key = value` pairs.
    pub fn apply_kv(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (key, raw) in pairs {
            match key.as_str() {
                "current_pp_threshold_a" => self.current_pp_threshold_a = parse_f64(key, raw)?,
                "min_delta_soc_pct" => self.min_delta_soc_pct = parse_num(key, raw)?,
                "bped_rel_repeat" => self.bped_rel_repeat = parse_f64(key, raw)?,
                "min_rcs_fcs_count" => self.min_rcs_fcs_count = parse_num(key, raw)?,
                "expected_bped_stability_threshold" => {
                    self.expected_bped_stability_threshold = parse_f64(key, raw)?
                }
                "fcs_error_sigma" => self.fcs_error_sigma = parse_f64(key, raw)?,
                "rcs_rel_error_threshold_l" => {
                    self.rcs_rel_error_threshold_l = parse_f64(key, raw)?
                }
                "max_chain_len_fcs" => self.max_chain_len_fcs = parse_num(key, raw)?,
                "d_temperature_threshold_c" => {
                    self.d_temperature_threshold_c = parse_f64(key, raw)?
                }
                "acceptable_gamma_t" => self.acceptable_gamma_t = parse_f64(key, raw)?,
                "temp_window_c" => {
                    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
                    if parts.len() != 2 {
                        return Err(Error::Config(format!(
                            "temp_window_c expects `low,high`, got `{raw}`"
                        )));
                    }
                    self.temp_window_c = [parse_f64(key, parts[0])?, parse_f64(key, parts[1])?];
                }
                "max_timespan_days" => self.max_timespan_days = parse_f64(key, raw)?,
                "sigma_r_cv" => self.sigma_r_cv = parse_f64(key, raw)?,
                "eta_fixed" => self.eta_fixed = parse_f64(key, raw)?,
                "d_current_threshold_a" => self.d_current_threshold_a = parse_f64(key, raw)?,
                "soc_quantization" => self.soc_quantization = parse_num(key, raw)?,
                "excluded_battery_types" => {
                    self.excluded_battery_types = raw
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        self.validate()
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(&parse_kv(text)?)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    /// Renders the configuration in the same flat format [`Self::from_kv_str`] reads.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line(
            "current_pp_threshold_a",
            self.current_pp_threshold_a.to_string(),
        );
        line("min_delta_soc_pct", self.min_delta_soc_pct.to_string());
        line("bped_rel_repeat", self.bped_rel_repeat.to_string());
        line("min_rcs_fcs_count", self.min_rcs_fcs_count.to_string());
        line(
            "expected_bped_stability_threshold",
            self.expected_bped_stability_threshold.to_string(),
        );
        line("fcs_error_sigma", self.fcs_error_sigma.to_string());
        line(
            "rcs_rel_error_threshold_l",
            self.rcs_rel_error_threshold_l.to_string(),
        );
        line("max_chain_len_fcs", self.max_chain_len_fcs.to_string());
        line(
            "d_temperature_threshold_c",
            self.d_temperature_threshold_c.to_string(),
        );
        line("acceptable_gamma_t", self.acceptable_gamma_t.to_string());
        line(
            "temp_window_c",
            format!("{},{}", self.temp_window_c[0], self.temp_window_c[1]),
        );
        line("max_timespan_days", self.max_timespan_days.to_string());
        line("sigma_r_cv", self.sigma_r_cv.to_string());
        line("eta_fixed", self.eta_fixed.to_string());
        line(
            "d_current_threshold_a",
            self.d_current_threshold_a.to_string(),
        );
        line("soc_quantization", self.soc_quantization.to_string());
        line(
            "excluded_battery_types",
            self.excluded_battery_types.join(","),
        );
        out
    }
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// a repeated key is an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = k.trim().to_string();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

pub(crate) fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{raw}` as number: {e}")))
}

pub(crate) fn parse_num<T>(key: &str, raw: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{raw}`: {e}")))
}
