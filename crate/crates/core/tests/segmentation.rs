mod common;

use fcs_mpc::ingest::{current_runs, parse_orders_from_reader, segment_order, write_orders};
use fcs_mpc::model::{ChargingOrder, ChargingPoint, ChargingSegment, SocEnergy};
use fcs_mpc::preprocess::{filter_segments, ExclusionReason};
use fcs_mpc::sim::{simulate, SimScenario};
use fcs_mpc::ModelConfig;
use proptest::prelude::*;

/// Greedy maximal runs, recomputing the spread of every candidate window.
fn runs_oracle(currents: &[f64], thr: f64) -> Vec<std::ops::Range<usize>> {
    let spread = |w: &[f64]| {
        w.iter().copied().fold(f64::MIN, f64::max) - w.iter().copied().fold(f64::MAX, f64::min)
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start < currents.len() {
        let mut end = start + 1;
        while end < currents.len() && spread(&currents[start..=end]) <= thr {
            end += 1;
        }
        out.push(start..end);
        start = end;
    }
    out
}

proptest! {
    #[test]
    fn runs_match_brute_force(currents in prop::collection::vec(0.0f64..30.0, 0..60), thr in 0.0f64..10.0) {
        prop_assert_eq!(current_runs(&currents, thr), runs_oracle(&currents, thr));
    }

    #[test]
    fn runs_partition_and_respect_threshold(currents in prop::collection::vec(0.0f64..30.0, 1..60), thr in 0.5f64..10.0) {
        let runs = current_runs(&currents, thr);
        let mut next = 0;
        for r in &runs {
            prop_assert_eq!(r.start, next);
            next = r.end;
            let w = &currents[r.clone()];
            let spread = w.iter().copied().fold(f64::MIN, f64::max) - w.iter().copied().fold(f64::MAX, f64::min);
            prop_assert!(spread <= thr);
        }
        prop_assert_eq!(next, currents.len());
    }

    #[test]
    fn csv_round_trip(seed in 0u64..50) {
        let sc = SimScenario { n_fcs: 5, n_ev: 5, n_orders: Some(6), seed, sampling_interval_s: 600.0, ..Default::default() };
        let data = simulate(&sc).unwrap();
        let mut buf = Vec::new();
        write_orders(&mut buf, &data.orders).unwrap();
        let parsed = parse_orders_from_reader(&buf[..]).unwrap();
        prop_assert!(parsed.rejects.is_empty() && parsed.quarantined.is_empty());
        let mut expected = data.orders.clone();
        expected.sort_by(|a, b| a.order_id.cmp(&b.order_id));
        prop_assert_eq!(parsed.orders, expected);
    }
}

fn point(t: i64, e: f64, soc: u32, i: f64) -> ChargingPoint {
    ChargingPoint {
        timestamp: t,
        energy_kwh: e,
        soc_pct: soc,
        current_a: i,
        voltage_v: 400.0,
        temp_c: 25.0,
    }
}

#[test]
fn segments_cover_runs_and_carry_relative_series() {
    let order = ChargingOrder {
        order_id: "O".into(),
        ev_id: "E".into(),
        fcs_id: "F".into(),
        battery_type: None,
        points: vec![
            point(0, 0.0, 20, 100.0),
            point(60, 4.0, 30, 101.0),
            point(120, 8.0, 40, 99.5),
            point(180, 12.0, 50, 60.0),
            point(240, 14.0, 55, 60.5),
        ],
    };
    let segs = segment_order(&order, 4.0);
    assert_eq!(segs.len(), 2);
    assert_eq!((segs[0].delta_soc_pct, segs[0].delta_energy_kwh), (20, 8.0));
    assert_eq!(segs[0].peak_to_peak_current_a, 1.5);
    assert_eq!(segs[0].point_series[1], SocEnergy { soc: 10, energy_kwh: 4.0 });
    assert_eq!((segs[1].delta_soc_pct, segs[1].delta_energy_kwh), (5, 2.0));
    assert_eq!(segs[1].index, 1);
}

fn seg(id: usize, temp: f64, dsoc: u32, start_day: f64, battery: Option<&str>) -> ChargingSegment {
    ChargingSegment {
        ev_id: format!("E{}", id % 3),
        fcs_id: "F".into(),
        order_id: format!("O{id}"),
        index: 0,
        battery_type: battery.map(String::from),
        start_time: (start_day * 86_400.0) as i64,
        end_time: (start_day * 86_400.0) as i64 + 3600,
        delta_energy_kwh: 0.4 * f64::from(dsoc),
        delta_soc_pct: dsoc,
        start_soc_pct: 10,
        end_soc_pct: 10 + dsoc,
        mean_current_a: 100.0,
        peak_to_peak_current_a: 1.0,
        mean_temp_c: temp,
        mean_voltage_v: 400.0,
        point_series: vec![],
    }
}

proptest! {
    #[test]
    fn filter_matches_predicates(
        specs in prop::collection::vec((10.0f64..50.0, 1u32..60, 0.0f64..120.0, prop::bool::ANY), 1..40)
    ) {
        let cfg = ModelConfig::default();
        let segs: Vec<ChargingSegment> = specs
            .iter()
            .enumerate()
            .map(|(i, &(t, d, day, lfp))| seg(i, t, d, day, lfp.then_some("lifepo4")))
            .collect();
        let passes = |s: &ChargingSegment| {
            (20.0..=40.0).contains(&s.mean_temp_c)
                && s.delta_soc_pct >= 20
                && s.battery_type.is_none()
        };
        let anchor = segs.iter().filter(|s| passes(s)).map(|s| s.start_time).min();
        let expected: Vec<String> = segs
            .iter()
            .filter(|s| passes(s) && (s.start_time - anchor.unwrap()) as f64 <= 60.0 * 86_400.0)
            .map(|s| s.order_id.clone())
            .collect();
        let out = filter_segments(segs.clone(), &cfg);
        let got: Vec<String> = out.retained.iter().map(|s| s.order_id.clone()).collect();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(out.retained.len() + out.excluded.len(), segs.len());
        for ex in &out.excluded {
            let s = segs.iter().find(|s| s.order_id == ex.segment_key.order_id).unwrap();
            let expected_reason = if !(20.0..=40.0).contains(&s.mean_temp_c) {
                ExclusionReason::TemperatureOutOfWindow
            } else if s.delta_soc_pct < 20 {
                ExclusionReason::SocChangeTooSmall
            } else if s.battery_type.is_some() {
                ExclusionReason::BatteryType
            } else {
                ExclusionReason::OutsideTimeWindow
            };
            prop_assert_eq!(ex.reason, expected_reason);
        }
    }
}
