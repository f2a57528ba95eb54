//! Finds reference clusters: stations whose BPEDs for one EV agree so
//! closely that their common error can be taken as zero.
//!
//! cargo run --release --example reference_clusters -- [seed]

use fcs_mpc::pipeline::run_estimation;
use fcs_mpc::sim::{simulate, SimScenario};
use fcs_mpc::ModelConfig;

fn main() -> fcs_mpc::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let sc = SimScenario {
        n_fcs: 100,
        n_ev: 240,
        n_orders: Some(1400),
        seed,
        ..Default::default()
    };
    let data = simulate(&sc)?;
    let truth = data.fleet.ground_truth();
    let report = run_estimation(&data.orders, &ModelConfig::default())?;
    println!("{} clusters over {} stations", report.counts.rcs_clusters, report.counts.rcs_stations);
    for c in report.clusters.iter().take(10) {
        let errors: Vec<String> = c
            .fcs_ids
            .iter()
            .map(|f| format!("{f} {:+.2}%", 100.0 * truth[f]))
            .collect();
        println!(
            "{}: E_d {:.4} +- {:.4}, bias sd {:.4}; true errors {}",
            c.ev_id,
            c.e_d_true_est,
            c.sigma_e_d_true,
            c.sigma_bias,
            errors.join(", ")
        );
    }
    Ok(())
}
