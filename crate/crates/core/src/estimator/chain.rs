//! Comparison chains: propagating a reference station's error to stations
//! that share an EV with it, one hop at a time.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::pooling::{comparable, GroupIndex};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{chain_error, relative_eem_error, PooledBped};

/// One hop: the same EV's pooled BPED at two stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHop {
    pub from_fcs: String,
    pub to_fcs: String,
    pub ev_id: String,
    pub from_group: PooledBped,
    pub to_group: PooledBped,
}

impl ChainHop {
    fn rel_var(&self) -> f64 {
        (self.from_group.sigma / self.from_group.expected_e_d).powi(2)
            + (self.to_group.sigma / self.to_group.expected_e_d).powi(2)
    }

    fn reversed(&self) -> ChainHop {
        ChainHop {
            from_fcs: self.to_fcs.clone(),
            to_fcs: self.from_fcs.clone(),
            ev_id: self.ev_id.clone(),
            from_group: self.to_group.clone(),
            to_group: self.from_group.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    /// The chain reached the configured station limit.
    MaxLength,
    /// The only way forward led into another reference station.
    HitAnotherRcs,
    /// No unvisited neighbour was left.
    DeadEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonChain {
    pub root_rcs_id: String,
    pub hops: Vec<ChainHop>,
    pub terminal_reason: TerminalReason,
}

impl ComparisonChain {
    /// Stations along the chain, root first.
    pub fn stations(&self) -> Vec<String> {
        let mut out = vec![self.root_rcs_id.clone()];
        out.extend(self.hops.iter().map(|h| h.to_fcs.clone()));
        out
    }
}

/// Best hop between every ordered pair of stations, keyed `from -> to`.
pub type LinkGraph = BTreeMap<String, BTreeMap<String, ChainHop>>;

/// Collects, for each pair of stations, the comparable group pair with the
/// smallest relative variance over all shared EVs.
pub fn build_links(groups: &GroupIndex, cfg: &ModelConfig) -> LinkGraph {
    let mut per_ev: BTreeMap<&str, Vec<&PooledBped>> = BTreeMap::new();
    for ((ev, _), list) in groups {
        per_ev.entry(ev.as_str()).or_default().extend(list.iter());
    }
    let mut graph = LinkGraph::new();
    for (ev, nodes) in per_ev {
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if a.fcs_id == b.fcs_id
                    || a.expected_e_d <= 0.0
                    || b.expected_e_d <= 0.0
                    || !comparable(a, b, cfg)
                {
                    continue;
                }
                let hop = ChainHop {
                    from_fcs: a.fcs_id.clone(),
                    to_fcs: b.fcs_id.clone(),
                    ev_id: ev.to_string(),
                    from_group: (*a).clone(),
                    to_group: (*b).clone(),
                };
                for h in [hop.reversed(), hop] {
                    let slot = graph.entry(h.from_fcs.clone()).or_default();
                    match slot.get(&h.to_fcs) {
                        Some(old) if old.rel_var() <= h.rel_var() => {}
                        _ => {
                            slot.insert(h.to_fcs.clone(), h);
                        }
                    }
                }
            }
        }
    }
    graph
}

/// Breadth-first chain tree from each reference station.
///
/// Neighbours are visited in `fcs_id` order, every station is entered at
/// most once per root, chains stop at `max_chain_len_fcs` stations and never
/// pass through another reference station. One chain is emitted per leaf.
pub fn build_chains(
    rcs_ids: &BTreeSet<String>,
    links: &LinkGraph,
    cfg: &ModelConfig,
) -> Vec<ComparisonChain> {
    let empty = BTreeMap::new();
    let mut chains = Vec::new();
    for root in rcs_ids {
        let mut visited: BTreeSet<&str> = BTreeSet::from([root.as_str()]);
        let mut queue: VecDeque<Vec<&ChainHop>> = VecDeque::from([Vec::new()]);
        while let Some(path) = queue.pop_front() {
            let here = path.last().map_or(root.as_str(), |h| h.to_fcs.as_str());
            let stations = path.len() + 1;
            if stations >= cfg.max_chain_len_fcs {
                chains.push(finish(root, &path, TerminalReason::MaxLength));
                continue;
            }
            let mut blocked_by_rcs = false;
            let mut grew = false;
            for (next, hop) in links.get(here).unwrap_or(&empty) {
                if rcs_ids.contains(next) {
                    blocked_by_rcs |= next != root;
                    continue;
                }
                if !visited.insert(next.as_str()) {
                    continue;
                }
                let mut longer = path.clone();
                longer.push(hop);
                queue.push_back(longer);
                grew = true;
            }
            if !grew {
                let reason = if blocked_by_rcs {
                    TerminalReason::HitAnotherRcs
                } else {
                    TerminalReason::DeadEnd
                };
                chains.push(finish(root, &path, reason));
            }
        }
    }
    chains
}

fn finish(root: &str, path: &[&ChainHop], reason: TerminalReason) -> ComparisonChain {
    ComparisonChain {
        root_rcs_id: root.to_string(),
        hops: path.iter().map(|h| (*h).clone()).collect(),
        terminal_reason: reason,
    }
}

/// Error estimate for one station reached along a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEstimate {
    pub fcs_id: String,
    pub gamma: f64,
    pub sigma: f64,
    /// Stations from the root up to and including `fcs_id`.
    pub path: Vec<String>,
}

/// Propagates the root's `(gamma, sigma)` along every hop of the chain.
///
/// Stops early, returning what was computed, if a hop has a non-positive
/// pooled BPED.
pub fn chain_propagate(chain: &ComparisonChain, root: (f64, f64)) -> Vec<ChainEstimate> {
    let (mut gamma, mut sigma) = root;
    let mut path = vec![chain.root_rcs_id.clone()];
    let mut out = Vec::with_capacity(chain.hops.len());
    for hop in &chain.hops {
        match propagate_hop(hop, gamma, sigma) {
            Ok((g, s)) => {
                gamma = g;
                sigma = s;
            }
            Err(_) => break,
        }
        path.push(hop.to_fcs.clone());
        out.push(ChainEstimate {
            fcs_id: hop.to_fcs.clone(),
            gamma,
            sigma,
            path: path.clone(),
        });
    }
    out
}

/// One propagation step from a station with error `gamma_c +- sigma_c`.
pub fn propagate_hop(hop: &ChainHop, gamma_c: f64, sigma_c: f64) -> Result<(f64, f64)> {
    let (ec, sc) = (hop.from_group.expected_e_d, hop.from_group.sigma);
    let (ed, sd) = (hop.to_group.expected_e_d, hop.to_group.sigma);
    if ec <= 0.0 || ed <= 0.0 {
        return Err(Error::Domain("pooled BPED must be positive".into()));
    }
    let gamma = chain_error(relative_eem_error(ed, ec)?, ed, ec, gamma_c)?;
    let k = 1.0 + gamma_c;
    let var =
        (k / ec * sd).powi(2) + (k * ed / (ec * ec) * sc).powi(2) + (ed / ec * sigma_c).powi(2);
    Ok((gamma, var.sqrt()))
}
