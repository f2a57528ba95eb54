//! Reference clusters: stations whose BPED for one EV agree closely enough
//! that their mean is taken as the EV's true BPED.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::pooling::{comparable, GroupIndex};
use super::truncnorm::{rcs_bias_sigma, TruncatedNormalErrorModel};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{relative_eem_error, PooledBped, RcsCluster};

/// Builds a cluster from one pooled group per station.
pub fn make_cluster(members: Vec<PooledBped>, cfg: &ModelConfig) -> Result<RcsCluster> {
    let first = members
        .first()
        .ok_or_else(|| Error::Domain("empty cluster".into()))?;
    let ev_id = first.ev_id.clone();
    let n = members.len();
    let mut per_fcs = BTreeMap::new();
    for m in members {
        if m.ev_id != ev_id {
            return Err(Error::Domain("cluster members must share one EV".into()));
        }
        let id = m.fcs_id.clone();
        if per_fcs.insert(id.clone(), m).is_some() {
            return Err(Error::Domain(format!(
                "station {id} appears twice in a cluster"
            )));
        }
    }
    let e_d_true_est = per_fcs.values().map(|p| p.expected_e_d).sum::<f64>() / n as f64;
    let sigma_e_d_true = per_fcs
        .values()
        .map(|p| p.sigma * p.sigma)
        .sum::<f64>()
        .sqrt()
        / n as f64;
    let model = TruncatedNormalErrorModel::for_cluster_threshold(
        cfg.fcs_error_sigma,
        cfg.rcs_rel_error_threshold_l,
    );
    Ok(RcsCluster {
        ev_id,
        fcs_ids: per_fcs.keys().cloned().collect(),
        sigma_bias: rcs_bias_sigma(&model, n, e_d_true_est),
        per_fcs_bped: per_fcs,
        e_d_true_est,
        sigma_e_d_true,
    })
}

fn agree(a: &PooledBped, b: &PooledBped, cfg: &ModelConfig) -> bool {
    if a.fcs_id == b.fcs_id || !comparable(a, b, cfg) {
        return false;
    }
    let l = cfg.rcs_rel_error_threshold_l;
    matches!(relative_eem_error(a.expected_e_d, b.expected_e_d), Ok(r) if r.abs() <= l)
        && matches!(relative_eem_error(b.expected_e_d, a.expected_e_d), Ok(r) if r.abs() <= l)
}

/// All maximal cliques of an undirected graph given as adjacency bitsets.
fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn expand(
        adj: &[Vec<bool>],
        r: &mut Vec<usize>,
        mut p: Vec<usize>,
        mut x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                out.push(r.clone());
            }
            return;
        }
        let pivot = *p
            .iter()
            .chain(x.iter())
            .max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count())
            .expect("p is non-empty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
        for v in candidates {
            r.push(v);
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            expand(adj, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    expand(
        adj,
        &mut Vec::new(),
        (0..adj.len()).collect(),
        Vec::new(),
        &mut out,
    );
    out
}

/// Finds reference clusters for every EV.
///
/// Nodes are pooled groups; two nodes are joined when they belong to
/// different stations, were charged under comparable conditions and their
/// relative error is within `l` in both directions. The largest clique with
/// at least `min_rcs_fcs_count` stations becomes a cluster (ties go to the
/// tighter spread, then to the smaller station list), its stations are
/// removed from that EV's graph and the search repeats.
pub fn find_rcs_clusters(groups: &GroupIndex, cfg: &ModelConfig) -> Result<Vec<RcsCluster>> {
    let mut per_ev: BTreeMap<&str, Vec<&PooledBped>> = BTreeMap::new();
    for ((ev, _), list) in groups {
        per_ev.entry(ev.as_str()).or_default().extend(list.iter());
    }
    let per_ev: Vec<Vec<&PooledBped>> = per_ev.into_values().collect();
    let found: Vec<Vec<RcsCluster>> = per_ev
        .into_par_iter()
        .map(|nodes| clusters_for_ev(nodes, cfg))
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn clusters_for_ev(mut nodes: Vec<&PooledBped>, cfg: &ModelConfig) -> Result<Vec<RcsCluster>> {
    let mut clusters = Vec::new();
    loop {
        let adj: Vec<Vec<bool>> = nodes
            .iter()
            .map(|a| nodes.iter().map(|b| agree(a, b, cfg)).collect())
            .collect();
        let best = maximal_cliques(&adj)
            .into_iter()
            .filter(|c| c.len() >= cfg.min_rcs_fcs_count.max(2))
            .map(|c| {
                let vals: Vec<f64> = c.iter().map(|&i| nodes[i].expected_e_d).collect();
                let hi = vals.iter().copied().fold(f64::MIN, f64::max);
                let lo = vals.iter().copied().fold(f64::MAX, f64::min);
                let mut ids: Vec<&str> = c.iter().map(|&i| nodes[i].fcs_id.as_str()).collect();
                ids.sort_unstable();
                (c, hi / lo - 1.0, ids.join("\u{0}"))
            })
            .min_by(|a, b| {
                b.0.len()
                    .cmp(&a.0.len())
                    .then(a.1.total_cmp(&b.1))
                    .then_with(|| a.2.cmp(&b.2))
            });
        let Some((clique, _, _)) = best else { break };
        let members: Vec<PooledBped> = clique.iter().map(|&i| nodes[i].clone()).collect();
        let used: Vec<String> = members.iter().map(|m| m.fcs_id.clone()).collect();
        clusters.push(make_cluster(members, cfg)?);
        nodes.retain(|n| !used.contains(&n.fcs_id));
    }
    Ok(clusters)
}

/// Error of a cluster station relative to the cluster's BPED estimate,
/// with its standard uncertainty.
pub fn rcs_error(cluster: &RcsCluster, fcs_id: &str) -> Result<(f64, f64)> {
    let member = cluster.per_fcs_bped.get(fcs_id).ok_or_else(|| {
        Error::Domain(format!("station {fcs_id} is not a member of this cluster"))
    })?;
    let n = cluster.per_fcs_bped.len() as f64;
    let (ea, sa) = (member.expected_e_d, member.sigma);
    let (e1, s1, se) = (
        cluster.e_d_true_est,
        cluster.sigma_e_d_true,
        cluster.sigma_bias,
    );
    if e1 <= 0.0 {
        return Err(Error::Domain("cluster BPED must be positive".into()));
    }
    let gamma = ea / e1 - 1.0;
    let cov = sa * sa / n;
    let var = sa * sa / (e1 * e1) + ea * ea * (s1 * s1 + se * se) / e1.powi(4)
        - 2.0 * ea / e1.powi(3) * cov;
    if var < -1e-18 {
        return Err(Error::Numerical(format!(
            "negative variance {var} for station {fcs_id}"
        )));
    }
    Ok((gamma, var.max(0.0).sqrt()))
}
