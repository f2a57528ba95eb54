//! Error estimation: pooling, reference clusters, comparison chains and
//! acceptance verdicts.

mod chain;
mod cluster_prob;
mod pooling;
mod rcs;
mod truncnorm;
mod verdict;

pub use chain::{
    build_chains, build_links, chain_propagate, propagate_hop, ChainEstimate, ChainHop,
    ComparisonChain, LinkGraph, TerminalReason,
};
pub use cluster_prob::{cluster_probability, ClusterMc};
pub use pooling::{comparable, group_estimates, pool_bped, GroupIndex};
pub use rcs::{find_rcs_clusters, make_cluster, rcs_error};
pub use truncnorm::{rcs_bias_sigma, TruncatedNormalErrorModel};
pub use verdict::{acceptance_probability, combine_inverse_variance, make_verdict};
