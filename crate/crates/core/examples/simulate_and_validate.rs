//! Simulates a fleet, estimates every station's metering error and scores
//! the verdicts against the known truth.
//!
//! cargo run --release --example simulate_and_validate -- [seed] [n_fcs n_ev n_orders]

use std::time::Instant;

use fcs_mpc::sim::{run_validation, SimScenario};
use fcs_mpc::ModelConfig;

fn main() -> fcs_mpc::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut scenario = SimScenario {
        seed: args.first().copied().unwrap_or(1),
        ..Default::default()
    };
    if let [_, f, e, o] = args[..] {
        scenario.n_fcs = f as usize;
        scenario.n_ev = e as usize;
        scenario.n_orders = Some(o as usize);
    }
    let started = Instant::now();
    let report = run_validation(&scenario, &ModelConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("elapsed {:.1?}", started.elapsed());
    Ok(())
}
