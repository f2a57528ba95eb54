//! Segment screening ahead of estimation: operating-condition filters, the
//! quantization feasibility check and the per-EV BPED stability screen.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{ChargingSegment, SegmentKey};
use crate::quant;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    TemperatureOutOfWindow,
    SocChangeTooSmall,
    OutsideTimeWindow,
    BatteryType,
    InfeasibleQuantBounds,
    UnstableEv,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::TemperatureOutOfWindow => "temperature-out-of-window",
            ExclusionReason::SocChangeTooSmall => "soc-change-too-small",
            ExclusionReason::OutsideTimeWindow => "outside-time-window",
            ExclusionReason::BatteryType => "battery-type",
            ExclusionReason::InfeasibleQuantBounds => "infeasible-quant-bounds",
            ExclusionReason::UnstableEv => "unstable-ev",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub segment_key: SegmentKey,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: Vec<ChargingSegment>,
    pub excluded: Vec<Exclusion>,
}

fn battery_excluded(segment: &ChargingSegment, cfg: &ModelConfig) -> bool {
    segment.battery_type.as_deref().is_some_and(|bt| {
        cfg.excluded_battery_types
            .iter()
            .any(|x| x.eq_ignore_ascii_case(bt))
    })
}

fn condition_reason(segment: &ChargingSegment, cfg: &ModelConfig) -> Option<ExclusionReason> {
    let [lo, hi] = cfg.temp_window_c;
    if !(segment.mean_temp_c >= lo && segment.mean_temp_c <= hi) {
        Some(ExclusionReason::TemperatureOutOfWindow)
    } else if segment.delta_soc_pct < cfg.min_delta_soc_pct {
        Some(ExclusionReason::SocChangeTooSmall)
    } else if battery_excluded(segment, cfg) {
        Some(ExclusionReason::BatteryType)
    } else {
        None
    }
}

/// Keeps segments charged inside the temperature window, with enough SOC
/// change, of an accepted battery type, and starting within
/// `max_timespan_days` of the earliest otherwise-retained segment.
pub fn filter_segments(segments: Vec<ChargingSegment>, cfg: &ModelConfig) -> FilterOutcome {
    let anchor = segments
        .iter()
        .filter(|s| condition_reason(s, cfg).is_none())
        .map(|s| s.start_time)
        .min();
    let span = cfg.max_timespan_days * SECONDS_PER_DAY;

    let mut out = FilterOutcome::default();
    for segment in segments {
        let reason = condition_reason(&segment, cfg).or_else(|| {
            let anchor = anchor.expect("a segment passing the conditions sets the anchor");
            ((segment.start_time - anchor) as f64 > span)
                .then_some(ExclusionReason::OutsideTimeWindow)
        });
        match reason {
            Some(reason) => out.excluded.push(Exclusion {
                segment_key: segment.key(),
                reason,
            }),
            None => out.retained.push(segment),
        }
    }
    out
}

/// Drops segments whose sample inequalities admit no BPED at all.
pub fn quarantine_infeasible(segments: Vec<ChargingSegment>, cfg: &ModelConfig) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for segment in segments {
        if cfg.soc_quantization && quant::quant_bounds(&segment).is_err() {
            out.excluded.push(Exclusion {
                segment_key: segment.key(),
                reason: ExclusionReason::InfeasibleQuantBounds,
            });
        } else {
            out.retained.push(segment);
        }
    }
    out
}

/// Sample standard deviation over mean.
pub fn relative_dispersion(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (n - 1) as f64).sqrt() / mean)
}

/// Relative repeatability of expected BPED for segments of one EV at one
/// station.
pub fn ev_stability(segments: &[ChargingSegment], cfg: &ModelConfig) -> Result<f64> {
    if segments.len() < 2 {
        return Err(Error::Domain(
            "stability needs at least two segments".into(),
        ));
    }
    let (ev, fcs) = (&segments[0].ev_id, &segments[0].fcs_id);
    if segments.iter().any(|s| &s.ev_id != ev || &s.fcs_id != fcs) {
        return Err(Error::Domain(
            "stability segments must share EV and station".into(),
        ));
    }
    let values = segments
        .iter()
        .map(|s| quant::estimate_bped(s, cfg).map(|e| e.uncorrected()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(relative_dispersion(&values).expect("n >= 2"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenOutcome {
    pub retained: Vec<ChargingSegment>,
    pub excluded: Vec<Exclusion>,
    /// EVs with no station visited twice, kept without a stability score.
    pub unscored_evs: Vec<String>,
    pub unstable_evs: Vec<String>,
}

/// Removes every segment of an EV whose expected BPED is unstable at any
/// station it used at least twice.
pub fn screen_unstable_evs(pool: Vec<ChargingSegment>, cfg: &ModelConfig) -> Result<ScreenOutcome> {
    let mut by_pair: BTreeMap<(&str, &str), Vec<&ChargingSegment>> = BTreeMap::new();
    for s in &pool {
        by_pair.entry((&s.ev_id, &s.fcs_id)).or_default().push(s);
    }
    let mut scored: BTreeSet<String> = BTreeSet::new();
    let mut unstable: BTreeSet<String> = BTreeSet::new();
    for ((ev, _), segs) in &by_pair {
        if segs.len() < 2 {
            continue;
        }
        scored.insert(ev.to_string());
        let owned: Vec<ChargingSegment> = segs.iter().map(|s| (*s).clone()).collect();
        if ev_stability(&owned, cfg)? > cfg.expected_bped_stability_threshold {
            unstable.insert(ev.to_string());
        }
    }
    let all_evs: BTreeSet<&str> = pool.iter().map(|s| s.ev_id.as_str()).collect();
    let unscored_evs = all_evs
        .into_iter()
        .filter(|ev| !scored.contains(*ev))
        .map(String::from)
        .collect();

    let mut out = ScreenOutcome {
        unscored_evs,
        unstable_evs: unstable.iter().cloned().collect(),
        ..Default::default()
    };
    for s in pool {
        if unstable.contains(&s.ev_id) {
            out.excluded.push(Exclusion {
                segment_key: s.key(),
                reason: ExclusionReason::UnstableEv,
            });
        } else {
            out.retained.push(s);
        }
    }
    Ok(out)
}

/// Exclusion log CSV: `segment_key,reason`.
pub fn write_exclusions<W: Write>(writer: W, exclusions: &[Exclusion]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["segment_key", "reason"])?;
    for e in exclusions {
        wtr.write_record([e.segment_key.to_string(), e.reason.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<exclusions>", e))?;
    Ok(())
}
