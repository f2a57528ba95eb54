mod common;

use common::{ks_distance, mean_sd};
use fcs_mpc::sim::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_ev(sc: &SimScenario) -> (SimFleet, SimEv) {
    let mut s = sc.clone();
    s.n_fcs = 3;
    s.n_ev = 1;
    let fleet = generate_fleet(&s).unwrap();
    let ev = fleet.evs[0].clone();
    (fleet, ev)
}

fn plan(i: usize) -> OrderPlan {
    OrderPlan {
        order_id: format!("O{i}"),
        ev: 0,
        fcs: 0,
        start_time: 1_704_067_200 + 3_600 * i as i64,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reported_soc_is_floor_of_true_soc(seed in 0u64..10_000, gamma in -0.05f64..0.05) {
        let sc = SimScenario { seed, ..SimScenario::default() };
        let (fleet, ev) = one_ev(&sc);
        let fcs = SimFcs { gamma_true: gamma, ..fleet.fcs[0].clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (order, socs) = simulate_session_traced(&ev, &fcs, &plan(0), &sc, &mut rng).unwrap();
        prop_assert_eq!(order.points.len(), socs.len());
        for (p, s) in order.points.iter().zip(&socs) {
            prop_assert_eq!(p.soc_pct, s.floor() as u32);
        }
        for w in order.points.windows(2) {
            prop_assert!(w[1].timestamp > w[0].timestamp);
            prop_assert!(w[1].energy_kwh >= w[0].energy_kwh);
            prop_assert!(w[1].soc_pct >= w[0].soc_pct);
        }
    }

    #[test]
    fn metered_energy_matches_bookkeeping(seed in 0u64..10_000, gamma in -0.05f64..0.05, r in 0.0f64..0.01) {
        let sc = SimScenario {
            seed,
            rel_repeat_sigma: 0.0,
            current_ripple_a: 0.0,
            ..SimScenario::default()
        };
        let (fleet, ev) = one_ev(&sc);
        let fcs = SimFcs { gamma_true: gamma, cable_resistance_ohm: r, ..fleet.fcs[0].clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (order, socs) = simulate_session_traced(&ev, &fcs, &plan(0), &sc, &mut rng).unwrap();
        let s0 = socs[0];
        // The first sample sits before the taper unless the session starts past it.
        let i0 = order.points[0].current_a;
        let (i_cc, i_t) = if s0 < ev.taper_soc { (i0, i0 * sc.taper_ratio) } else { (i0 / sc.taper_ratio, i0) };
        let eta = |i: f64| 1.0 - i * r / ev.voltage_v;
        for (p, &s) in order.points.iter().zip(&socs) {
            let before = (s.min(ev.taper_soc) - s0).max(0.0);
            let after = (s - ev.taper_soc.max(s0)).max(0.0);
            let want = ev.e_d_true * (before / eta(i_cc) + after / eta(i_t)) * (1.0 + gamma);
            prop_assert!((p.energy_kwh - want).abs() <= 1e-9 * want.max(1.0));
        }
    }
}

#[test]
fn session_soc_residual_is_triangular() {
    let sc = SimScenario {
        sampling_interval_s: 900.0,
        ..SimScenario::default()
    };
    let (fleet, ev) = one_ev(&sc);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let residuals: Vec<f64> = (0..100_000)
        .map(|i| {
            let (order, socs) = simulate_session_traced(&ev, &fleet.fcs[0], &plan(i), &sc, &mut rng).unwrap();
            let (a, b) = (&order.points[0], order.points.last().unwrap());
            let reported = b.soc_pct as f64 - a.soc_pct as f64;
            reported - (socs[socs.len() - 1] - socs[0])
        })
        .collect();
    let tri_cdf = |y: f64| {
        if y <= -1.0 {
            0.0
        } else if y <= 0.0 {
            0.5 * (1.0 + y).powi(2)
        } else if y < 1.0 {
            1.0 - 0.5 * (1.0 - y).powi(2)
        } else {
            1.0
        }
    };
    let d = ks_distance(residuals, tri_cdf);
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn per_step_energy_has_configured_spread() {
    let sc = SimScenario {
        quantize_soc: false,
        cable_resistance_ohm: 0.0,
        rel_repeat_sigma: 0.05,
        ..SimScenario::default()
    };
    let (fleet, ev) = one_ev(&sc);
    let fcs = SimFcs { gamma_true: 0.0, cable_resistance_ohm: 0.0, ..fleet.fcs[0].clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rel = Vec::new();
    for i in 0..400 {
        let order = simulate_session(&ev, &fcs, &plan(i), &sc, &mut rng).unwrap();
        for w in order.points.windows(2) {
            assert_eq!(w[1].soc_pct, w[0].soc_pct + 1);
            rel.push((w[1].energy_kwh - w[0].energy_kwh) / ev.e_d_true - 1.0);
        }
    }
    let (m, sd) = mean_sd(&rel);
    let n = rel.len() as f64;
    assert!(m.abs() < 4.0 * 0.05 / n.sqrt(), "mean {m}");
    assert!((sd - 0.05).abs() < 0.05 * 0.03, "sd {sd}");
}

#[test]
fn station_errors_follow_labels() {
    let sc = SimScenario {
        n_fcs: 1000,
        ..SimScenario::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = draw_station_errors(&sc, &mut rng);
    let t = sc.gamma_t;
    let bad = g.iter().filter(|x| x.abs() > t).count();
    assert_eq!(bad, 150);
    assert!(g.iter().all(|x| x.abs() <= 2.0 * t));
}

#[test]
fn simulation_is_deterministic_across_thread_counts() {
    let sc = SimScenario {
        n_fcs: 40,
        n_ev: 80,
        n_orders: Some(400),
        seed: 9,
        ..SimScenario::default()
    };
    let a = simulate(&sc).unwrap();
    let b = simulate(&sc).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| simulate(&sc)).unwrap();
    assert_eq!(a, c);
    let other = simulate(&SimScenario { seed: 10, ..sc }).unwrap();
    assert_ne!(a.orders, other.orders);
}

#[test]
fn ground_truth_round_trips() {
    let sc = SimScenario {
        n_fcs: 25,
        n_ev: 10,
        ..SimScenario::default()
    };
    let fleet = generate_fleet(&sc).unwrap();
    let mut buf = Vec::new();
    write_ground_truth(&mut buf, &fleet.fcs).unwrap();
    assert_eq!(read_ground_truth(buf.as_slice()).unwrap(), fleet.ground_truth());
}
