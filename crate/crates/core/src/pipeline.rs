//! End-to-end estimation over a set of parsed charging orders.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::Result;
use crate::estimator::{
    build_chains, build_links, chain_propagate, combine_inverse_variance, find_rcs_clusters,
    group_estimates, make_verdict, rcs_error, ComparisonChain, TerminalReason,
};
use crate::ingest::segment_order;
use crate::model::{BpedEstimate, ChargingOrder, FcsVerdict, Provenance, RcsCluster};
use crate::preprocess::{filter_segments, quarantine_infeasible, screen_unstable_evs, Exclusion};
use crate::quant::estimate_bped;

/// Name of the cluster bias model recorded in every report.
pub const RCS_BIAS_MODEL: &str = "truncated-normal-mean";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCounts {
    pub orders: usize,
    pub segments: usize,
    pub retained_segments: usize,
    pub segment_groups: usize,
    pub fcs_total: usize,
    pub fcs_estimated: usize,
    pub rcs_clusters: usize,
    pub rcs_stations: usize,
    pub chains: usize,
}

/// Compact description of one comparison chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub stations: Vec<String>,
    pub evs: Vec<String>,
    pub terminal_reason: TerminalReason,
}

impl From<&ComparisonChain> for ChainSummary {
    fn from(c: &ComparisonChain) -> Self {
        Self {
            stations: c.stations(),
            evs: c.hops.iter().map(|h| h.ev_id.clone()).collect(),
            terminal_reason: c.terminal_reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub ev_id: String,
    pub fcs_ids: Vec<String>,
    pub e_d_true_est: f64,
    pub sigma_e_d_true: f64,
    pub sigma_bias: f64,
}

impl From<&RcsCluster> for ClusterSummary {
    fn from(c: &RcsCluster) -> Self {
        Self {
            ev_id: c.ev_id.clone(),
            fcs_ids: c.fcs_ids.clone(),
            e_d_true_est: c.e_d_true_est,
            sigma_e_d_true: c.sigma_e_d_true,
            sigma_bias: c.sigma_bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub config: ModelConfig,
    pub rcs_bias_model: String,
    pub counts: PipelineCounts,
    pub warnings: Vec<String>,
    pub verdicts: Vec<FcsVerdict>,
    pub unestimated_fcs: Vec<String>,
    pub unstable_evs: Vec<String>,
    pub unscored_evs: Vec<String>,
    pub clusters: Vec<ClusterSummary>,
    pub chains: Vec<ChainSummary>,
    #[serde(skip)]
    pub exclusions: Vec<Exclusion>,
}

impl EstimationReport {
    pub fn verdict(&self, fcs_id: &str) -> Option<&FcsVerdict> {
        self.verdicts.iter().find(|v| v.fcs_id == fcs_id)
    }
}

/// Runs segmentation, filtering, BPED estimation, reference clustering,
/// chain propagation and classification.
pub fn run_estimation(orders: &[ChargingOrder], cfg: &ModelConfig) -> Result<EstimationReport> {
    cfg.validate()?;
    let all_fcs: BTreeSet<String> = orders.iter().map(|o| o.fcs_id.clone()).collect();
    let segments: Vec<_> = orders
        .par_iter()
        .flat_map_iter(|o| segment_order(o, cfg.current_pp_threshold_a))
        .collect();
    let mut counts = PipelineCounts {
        orders: orders.len(),
        segments: segments.len(),
        fcs_total: all_fcs.len(),
        ..Default::default()
    };

    let mut exclusions = Vec::new();
    let filtered = filter_segments(segments, cfg);
    exclusions.extend(filtered.excluded);
    let feasible = quarantine_infeasible(filtered.retained, cfg);
    exclusions.extend(feasible.excluded);
    let screened = screen_unstable_evs(feasible.retained, cfg)?;
    exclusions.extend(screened.excluded);
    counts.retained_segments = screened.retained.len();

    let estimates: Vec<BpedEstimate> = screened
        .retained
        .par_iter()
        .map(|s| estimate_bped(s, cfg))
        .collect::<Result<_>>()?;
    let groups = group_estimates(&estimates, cfg)?;
    counts.segment_groups = groups.values().map(Vec::len).sum();

    let clusters = find_rcs_clusters(&groups, cfg)?;
    counts.rcs_clusters = clusters.len();

    // Direct verdicts for reference stations.
    // Per station: (gamma, sigma) from each cluster, and the cluster EVs.
    type Parts = (Vec<(f64, f64)>, Vec<String>);
    let mut rcs_parts: BTreeMap<String, Parts> = BTreeMap::new();
    for c in &clusters {
        for fcs in &c.fcs_ids {
            let entry = rcs_parts.entry(fcs.clone()).or_default();
            entry.0.push(rcs_error(c, fcs)?);
            entry.1.push(c.ev_id.clone());
        }
    }
    let mut rcs_estimates: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut verdicts: BTreeMap<String, FcsVerdict> = BTreeMap::new();
    for (fcs, (parts, mut evs)) in rcs_parts {
        let (g, s) = combine_inverse_variance(&parts).expect("at least one cluster");
        evs.sort();
        evs.dedup();
        rcs_estimates.insert(fcs.clone(), (g, s));
        verdicts.insert(
            fcs.clone(),
            make_verdict(&fcs, g, s, cfg.acceptable_gamma_t, Provenance::RcsDirect { evs }),
        );
    }
    counts.rcs_stations = rcs_estimates.len();

    // Chains from every reference station.
    let rcs_ids: BTreeSet<String> = rcs_estimates.keys().cloned().collect();
    let links = build_links(&groups, cfg);
    let chains = build_chains(&rcs_ids, &links, cfg);
    counts.chains = chains.iter().filter(|c| !c.hops.is_empty()).count();

    let propagated: Vec<_> = chains
        .par_iter()
        .map(|c| chain_propagate(c, rcs_estimates[&c.root_rcs_id]))
        .collect();
    // One estimate per (station, root); chains from one root share prefixes.
    type Estimate = (f64, f64, Vec<String>);
    let mut per_root: BTreeMap<String, BTreeMap<String, Estimate>> = BTreeMap::new();
    for est in propagated.into_iter().flatten() {
        per_root
            .entry(est.fcs_id.clone())
            .or_default()
            .entry(est.path[0].clone())
            .or_insert((est.gamma, est.sigma, est.path));
    }
    for (fcs, roots) in per_root {
        let parts: Vec<(f64, f64)> = roots.values().map(|(g, s, _)| (*g, *s)).collect();
        let paths = roots.into_values().map(|(_, _, p)| p).collect();
        let (g, s) = combine_inverse_variance(&parts).expect("at least one chain");
        verdicts.insert(
            fcs.clone(),
            make_verdict(&fcs, g, s, cfg.acceptable_gamma_t, Provenance::Chain { paths }),
        );
    }

    let verdicts: Vec<FcsVerdict> = verdicts.into_values().collect();
    counts.fcs_estimated = verdicts.len();
    let estimated: BTreeSet<&str> = verdicts.iter().map(|v| v.fcs_id.as_str()).collect();
    let unestimated_fcs = all_fcs
        .iter()
        .filter(|f| !estimated.contains(f.as_str()))
        .cloned()
        .collect();

    let mut warnings = Vec::new();
    if clusters.is_empty() {
        warnings.push("insufficient data: no reference cluster found".to_string());
    }

    Ok(EstimationReport {
        config: cfg.clone(),
        rcs_bias_model: RCS_BIAS_MODEL.to_string(),
        counts,
        warnings,
        verdicts,
        unestimated_fcs,
        unstable_evs: screened.unstable_evs,
        unscored_evs: screened.unscored_evs,
        clusters: clusters.iter().map(ClusterSummary::from).collect(),
        chains: chains.iter().map(ChainSummary::from).collect(),
        exclusions,
    })
}
