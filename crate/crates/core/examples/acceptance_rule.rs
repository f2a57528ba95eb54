//! Turns an error estimate and its uncertainty into a verdict: the share of
//! the one-sigma interval inside the acceptable band decides.
//!
//! cargo run --example acceptance_rule -- [gamma_t]

use fcs_mpc::estimator::{acceptance_probability, combine_inverse_variance};

fn main() {
    let t: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.02);
    println!("band +-{:.1}%", 100.0 * t);
    for (g, s) in [(-0.017, 0.011), (-0.041, 0.012), (0.005, 0.004), (0.018, 0.006), (0.0, 0.03)] {
        let (p, c) = acceptance_probability(g, s, t);
        println!("gamma {:+5.1}%  sigma {:4.1}%  ->  P {:5.1}%  {c}", 100.0 * g, 100.0 * s, 100.0 * p);
    }

    // Two independent estimates of one station, pooled first.
    let parts = [(0.012, 0.008), (0.021, 0.005)];
    if let Some((g, s)) = combine_inverse_variance(&parts) {
        let (p, c) = acceptance_probability(g, s, t);
        println!("combined {:+.2}% +- {:.2}%  ->  P {:.1}%  {c}", 100.0 * g, 100.0 * s, 100.0 * p);
    }
}
