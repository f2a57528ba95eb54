//! Integer SOC reporting hides up to one percent on each end of a segment.
//! This example brackets the BPED of a segment and computes its expectation
//! and spread under the triangular quantization model.
//!
//! cargo run --example soc_quantization

use fcs_mpc::model::{ChargingSegment, SocEnergy};
use fcs_mpc::quant::{estimate_bped, quant_bounds, quant_moments};
use fcs_mpc::ModelConfig;

fn main() -> fcs_mpc::Result<()> {
    // Reported SOC 20 -> 80 %, with an intermediate sample at 50 %.
    let series = vec![
        SocEnergy { soc: 0, energy_kwh: 0.0 },
        SocEnergy { soc: 30, energy_kwh: 12.31 },
        SocEnergy { soc: 60, energy_kwh: 24.52 },
    ];
    let segment = ChargingSegment {
        ev_id: "EV1".into(),
        fcs_id: "FCS1".into(),
        order_id: "O1".into(),
        index: 0,
        battery_type: None,
        start_time: 0,
        end_time: 3_000,
        delta_energy_kwh: 24.52,
        delta_soc_pct: 60,
        start_soc_pct: 20,
        end_soc_pct: 80,
        mean_current_a: 120.0,
        peak_to_peak_current_a: 1.0,
        mean_temp_c: 25.0,
        mean_voltage_v: 400.0,
        point_series: series,
    };
    let naive = segment.delta_energy_kwh / f64::from(segment.delta_soc_pct);
    let b = quant_bounds(&segment)?;
    println!("naive BPED        {naive:.5}");
    println!("feasible interval [{:.5}, {:.5}]", b.e_d_min, b.e_d_max);
    println!("quantization y in [{:.3}, {:.3}]", b.y_min, b.y_max);

    let m = quant_moments(segment.delta_energy_kwh, &b)?;
    println!("expected BPED     {:.5} +- {:.5}", m.mean, m.variance().max(0.0).sqrt());

    let est = estimate_bped(&segment, &ModelConfig::default())?;
    println!(
        "with efficiency and repeatability: {:.5} +- {:.5} (quant {:.5}, repeat {:.5})",
        est.expected_e_d, est.sigma_total, est.sigma_quant, est.sigma_repeat
    );
    Ok(())
}
