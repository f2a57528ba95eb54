//! The three elementary relations: BPED of a segment, the relative error of
//! two stations seen by one EV, and carrying a known error to a neighbour.
//!
//! cargo run --example bped_basics

use fcs_mpc::model::{chain_error, compute_bped_naive, relative_eem_error};
use fcs_mpc::sim::conversion_efficiency;

fn main() -> fcs_mpc::Result<()> {
    // One EV charges 60 % at two stations; B meters 2 % more energy.
    let at_a = compute_bped_naive(20.4, 60.0)?;
    let at_b = compute_bped_naive(20.808, 60.0)?;
    println!("BPED at A {at_a:.4} kWh/%, at B {at_b:.4} kWh/%");

    let rel = relative_eem_error(at_b, at_a)?;
    println!("error of B relative to A: {:+.2}%", 100.0 * rel);

    // If A itself over-reads by 0.5 %, B's absolute error follows.
    let gamma_a = 0.005;
    let gamma_b = chain_error(rel, at_b, at_a, gamma_a)?;
    println!("with A at {:+.2}%, B is at {:+.3}%", 100.0 * gamma_a, 100.0 * gamma_b);

    // Cable losses between meter and battery are small at typical currents.
    for i in [60.0, 120.0, 200.0] {
        let eta = conversion_efficiency(400.0, i, 0.0023)?;
        println!("efficiency at 400 V, {i:>3} A, 2.3 mOhm: {eta:.5}");
    }
    Ok(())
}
