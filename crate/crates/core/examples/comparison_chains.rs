//! Carries a reference station's error outward through shared EVs.
//!
//! Topology: C is a reference station. EV-2 charges at C and D, EV-3 at
//! D and E, so the chain C -> D -> E reaches two more stations.
//!
//! cargo run --example comparison_chains

use std::collections::BTreeSet;

use fcs_mpc::estimator::{build_chains, build_links, chain_propagate, GroupIndex};
use fcs_mpc::model::PooledBped;
use fcs_mpc::ModelConfig;

fn group(ev: &str, fcs: &str, e_d: f64) -> PooledBped {
    PooledBped {
        ev_id: ev.into(),
        fcs_id: fcs.into(),
        members: vec![],
        expected_e_d: e_d,
        sigma: 0.002 * e_d,
        mean_current_a: 110.0,
        mean_temp_c: 26.0,
    }
}

fn main() {
    // True errors: C 0, D +1.2 %, E -2.5 %.
    let (ev2, ev3) = (0.42, 0.36);
    let mut groups = GroupIndex::new();
    for (ev, fcs, e) in [
        ("EV-2", "C", ev2),
        ("EV-2", "D", ev2 * 1.012),
        ("EV-3", "D", ev3 * 1.012),
        ("EV-3", "E", ev3 * 0.975),
    ] {
        groups.insert((ev.into(), fcs.into()), vec![group(ev, fcs, e)]);
    }
    let cfg = ModelConfig::default();
    let links = build_links(&groups, &cfg);
    let roots = BTreeSet::from(["C".to_string()]);
    for chain in build_chains(&roots, &links, &cfg) {
        println!("chain {} ({:?})", chain.stations().join(" -> "), chain.terminal_reason);
        for est in chain_propagate(&chain, (0.0, 0.004)) {
            println!(
                "  {}: {:+.2}% +- {:.2}% via {}",
                est.fcs_id,
                100.0 * est.gamma,
                100.0 * est.sigma,
                est.path.join(">")
            );
        }
    }
}
