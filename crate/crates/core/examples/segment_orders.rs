//! Reads a charging-order CSV, cuts constant-current segments and applies
//! the data-quality filters.
//!
//! cargo run --example segment_orders -- [orders.csv]
//!
//! Without an argument a small synthetic file is generated first.

use std::collections::BTreeMap;

use fcs_mpc::ingest::{parse_orders, parse_orders_from_reader, segment_order, write_orders, ParsedOrders};
use fcs_mpc::preprocess::{filter_segments, quarantine_infeasible, screen_unstable_evs};
use fcs_mpc::sim::{simulate, SimScenario};
use fcs_mpc::ModelConfig;

fn main() -> fcs_mpc::Result<()> {
    let parsed: ParsedOrders = match std::env::args().nth(1) {
        Some(path) => parse_orders(path.as_ref())?,
        None => {
            let sc = SimScenario {
                n_fcs: 30,
                n_ev: 60,
                n_orders: Some(300),
                ..Default::default()
            };
            let mut csv = Vec::new();
            write_orders(&mut csv, &simulate(&sc)?.orders)?;
            parse_orders_from_reader(csv.as_slice())?
        }
    };
    println!(
        "orders {}  rejected rows {}  quarantined orders {}",
        parsed.orders.len(),
        parsed.rejects.len(),
        parsed.quarantined.len()
    );

    let cfg = ModelConfig::default();
    let segments: Vec<_> = parsed
        .orders
        .iter()
        .flat_map(|o| segment_order(o, cfg.current_pp_threshold_a))
        .collect();
    println!("segments {}", segments.len());
    if let Some(s) = segments.first() {
        println!(
            "first: {} SOC {}->{} {:.2} kWh at {:.0} A",
            s.key(),
            s.start_soc_pct,
            s.end_soc_pct,
            s.delta_energy_kwh,
            s.mean_current_a
        );
    }

    let filtered = filter_segments(segments, &cfg);
    let feasible = quarantine_infeasible(filtered.retained, &cfg);
    let screened = screen_unstable_evs(feasible.retained, &cfg)?;
    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    for e in filtered.excluded.iter().chain(&feasible.excluded).chain(&screened.excluded) {
        *reasons.entry(format!("{:?}", e.reason)).or_default() += 1;
    }
    println!("retained {}", screened.retained.len());
    for (reason, n) in reasons {
        println!("excluded {n:>5}  {reason}");
    }
    println!("unstable EVs {}", screened.unstable_evs.len());
    Ok(())
}
