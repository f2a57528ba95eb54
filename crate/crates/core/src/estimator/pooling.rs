//! Pooling of per-segment BPED estimates into comparable groups.

use std::collections::BTreeMap;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{BpedEstimate, PooledBped};

/// Mean of the member estimates with `sigma = sqrt(sum sigma_i^2) / n`.
pub fn pool_bped(estimates: &[&BpedEstimate]) -> Result<PooledBped> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::Domain("cannot pool an empty set of estimates".into()))?;
    let (ev, fcs) = (&first.segment_ref.ev_id, &first.segment_ref.fcs_id);
    if estimates
        .iter()
        .any(|e| &e.segment_ref.ev_id != ev || &e.segment_ref.fcs_id != fcs)
    {
        return Err(Error::Domain(
            "pooled estimates must share one EV and one station".into(),
        ));
    }
    let n = estimates.len() as f64;
    let mean = |f: fn(&BpedEstimate) -> f64| estimates.iter().map(|e| f(e)).sum::<f64>() / n;
    let var_sum: f64 = estimates
        .iter()
        .map(|e| e.sigma_total * e.sigma_total)
        .sum();
    Ok(PooledBped {
        ev_id: ev.clone(),
        fcs_id: fcs.clone(),
        members: estimates.iter().map(|e| e.segment_ref.clone()).collect(),
        expected_e_d: mean(|e| e.expected_e_d),
        sigma: var_sum.sqrt() / n,
        mean_current_a: mean(|e| e.mean_current_a),
        mean_temp_c: mean(|e| e.mean_temp_c),
    })
}

/// Whether two groups were charged under comparable conditions.
pub fn comparable(a: &PooledBped, b: &PooledBped, cfg: &ModelConfig) -> bool {
    (a.mean_current_a - b.mean_current_a).abs() <= cfg.d_current_threshold_a
        && (a.mean_temp_c - b.mean_temp_c).abs() <= cfg.d_temperature_threshold_c
}

/// Pooled groups keyed by `(ev_id, fcs_id)`.
pub type GroupIndex = BTreeMap<(String, String), Vec<PooledBped>>;

/// Splits every (EV, station) pool into groups whose members span at most
/// the current and temperature thresholds, then pools each group.
///
/// Members are visited in order of current, temperature and key; each joins
/// the first group it fits into, otherwise opens a new one.
pub fn group_estimates(estimates: &[BpedEstimate], cfg: &ModelConfig) -> Result<GroupIndex> {
    let mut by_pair: BTreeMap<(String, String), Vec<&BpedEstimate>> = BTreeMap::new();
    for e in estimates {
        by_pair
            .entry((e.segment_ref.ev_id.clone(), e.segment_ref.fcs_id.clone()))
            .or_default()
            .push(e);
    }
    let mut out = GroupIndex::new();
    for (pair, mut members) in by_pair {
        members.sort_by(|a, b| {
            a.mean_current_a
                .total_cmp(&b.mean_current_a)
                .then(a.mean_temp_c.total_cmp(&b.mean_temp_c))
                .then_with(|| a.segment_ref.cmp(&b.segment_ref))
        });
        let mut groups: Vec<Vec<&BpedEstimate>> = Vec::new();
        for m in members {
            let slot = groups.iter_mut().find(|g| {
                let fits = |f: fn(&BpedEstimate) -> f64, limit: f64| {
                    let lo = g.iter().map(|e| f(e)).fold(f(m), f64::min);
                    let hi = g.iter().map(|e| f(e)).fold(f(m), f64::max);
                    hi - lo <= limit
                };
                fits(|e| e.mean_current_a, cfg.d_current_threshold_a)
                    && fits(|e| e.mean_temp_c, cfg.d_temperature_threshold_c)
            });
            match slot {
                Some(g) => g.push(m),
                None => groups.push(vec![m]),
            }
        }
        let pooled = groups
            .iter()
            .map(|g| pool_bped(g))
            .collect::<Result<Vec<_>>>()?;
        out.insert(pair, pooled);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SegmentKey;

    pub(crate) fn est(
        ev: &str,
        fcs: &str,
        idx: usize,
        e_d: f64,
        sigma: f64,
        current: f64,
        temp: f64,
    ) -> BpedEstimate {
        BpedEstimate {
            segment_ref: SegmentKey {
                ev_id: ev.into(),
                fcs_id: fcs.into(),
                order_id: format!("{ev}-{fcs}-{idx}"),
                index: 0,
            },
            mean_current_a: current,
            mean_temp_c: temp,
            delta_soc_pct: 30,
            eta: 1.0,
            expected_e_d: e_d,
            expected_e_d_sq: e_d * e_d,
            sigma_quant: 0.0,
            sigma_repeat: sigma,
            sigma_cv: 0.0,
            sigma_total: sigma,
        }
    }

    #[test]
    fn pooled_sigma() {
        let a = est("E", "F", 0, 0.40, 0.003, 100.0, 25.0);
        let b = est("E", "F", 1, 0.42, 0.004, 101.0, 26.0);
        let p = pool_bped(&[&a, &b]).unwrap();
        assert!((p.expected_e_d - 0.41).abs() < 1e-15);
        assert!((p.sigma - 0.0025).abs() < 1e-15);
        assert_eq!(p.members.len(), 2);
    }

    #[test]
    fn pooling_rejects_mixed_pairs() {
        let a = est("E", "F", 0, 0.40, 0.003, 100.0, 25.0);
        let b = est("E", "G", 1, 0.42, 0.004, 101.0, 26.0);
        assert!(pool_bped(&[&a, &b]).is_err());
        assert!(pool_bped(&[]).is_err());
    }

    #[test]
    fn groups_respect_thresholds() {
        let cfg = ModelConfig::default();
        let list = vec![
            est("E", "F", 0, 0.40, 0.003, 100.0, 25.0),
            est("E", "F", 1, 0.40, 0.003, 103.0, 26.0),
            est("E", "F", 2, 0.40, 0.003, 105.0, 26.0),
            est("E", "F", 3, 0.40, 0.003, 101.0, 35.0),
        ];
        let g = group_estimates(&list, &cfg).unwrap();
        let groups = &g[&("E".to_string(), "F".to_string())];
        assert_eq!(groups.len(), 3);
        assert_eq!(groups.iter().map(|p| p.members.len()).sum::<usize>(), 4);
    }
}
