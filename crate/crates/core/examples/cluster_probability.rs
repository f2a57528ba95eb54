//! How much requiring close agreement raises the chance that every station
//! of a candidate cluster is nearly error-free.
//!
//! cargo run --release --example cluster_probability -- [l] [fleets]

use fcs_mpc::estimator::{cluster_probability, ClusterMc};

fn main() {
    let mut args = std::env::args().skip(1);
    let l: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.005);
    let fleets = args.next().and_then(|a| a.parse().ok()).unwrap_or(200_000);
    let mc = ClusterMc { fleets, ..ClusterMc::default() };
    let (band, sigma) = (0.01, 0.0162);
    println!("errors N(0, {:.2}%), band +-{:.1}%, agreement within {:.2}%", 100.0 * sigma, 100.0 * band, 100.0 * l);
    println!(" n  agreeing  unconditioned");
    for n in 1..=10 {
        let cond = cluster_probability(n, band, l, sigma, mc);
        let free = cluster_probability(n, band, f64::INFINITY, sigma, mc);
        println!("{n:>2}  {cond:8.3}  {free:13.3}");
    }
}
