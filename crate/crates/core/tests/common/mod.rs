//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fcs_mpc::estimator::ComparisonChain;
use fcs_mpc::model::{PooledBped, QuantBounds, RcsCluster};
use fcs_mpc::quant::SignCase;

use fcs_mpc::sim::{draw_station_errors, generate_fleet, OrderPlan, SimFcs, SimFleet, SimScenario};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod 7/15 quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 || (b - a).abs() < 1e-15 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(&f, a, b, tol, 40)
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Shape of an explicitly wired fleet.
#[derive(Debug, Clone, Copy)]
pub struct Wiring {
    /// Reference groups of error-free stations, each charged by one EV.
    pub ref_groups: usize,
    pub ref_group_size: usize,
    /// Visits of the group EV to each of its stations.
    pub ref_visits: usize,
    /// Stations added per layer; each is linked to a random station of the
    /// previous layer by its own EV visiting exactly those two stations.
    pub layers: [usize; 3],
}

impl Default for Wiring {
    fn default() -> Self {
        Self {
            ref_groups: 6,
            ref_group_size: 4,
            ref_visits: 3,
            layers: [24, 30, 30],
        }
    }
}

/// A fleet where every non-reference station is reachable from the
/// error-free reference groups in at most three hops.
pub fn wired_fleet(scenario: &SimScenario, w: Wiring, seed: u64) -> (SimFleet, Vec<OrderPlan>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ref = w.ref_groups * w.ref_group_size;
    let n_other: usize = w.layers.iter().sum();
    let n_ev = w.ref_groups + n_other;
    let mut sc = scenario.clone();
    sc.n_fcs = n_ref + n_other;
    sc.n_ev = n_ev;
    let base = generate_fleet(&sc).expect("valid scenario");
    let mut gammas = vec![0.0; n_ref];
    let mut other_sc = sc.clone();
    other_sc.n_fcs = n_other;
    gammas.extend(draw_station_errors(&other_sc, &mut rng));
    let fcs: Vec<SimFcs> = gammas
        .into_iter()
        .enumerate()
        .map(|(i, g)| SimFcs {
            fcs_id: format!("F{:04}", i + 1),
            gamma_true: g,
            cable_resistance_ohm: sc.cable_resistance_ohm,
        })
        .collect();

    let mut evs = base.evs;
    let mut plans = Vec::new();
    let mut t = sc.start_epoch_s;
    let mut plan = |ev: usize, fcs: usize, plans: &mut Vec<OrderPlan>| {
        t += 3_600;
        plans.push(OrderPlan {
            order_id: format!("O{:06}", plans.len() + 1),
            ev,
            fcs,
            start_time: t,
        });
    };
    #[allow(clippy::needless_range_loop)]
    for g in 0..w.ref_groups {
        let stations: Vec<usize> = (g * w.ref_group_size..(g + 1) * w.ref_group_size).collect();
        evs[g].home_fcs = stations.clone();
        for _ in 0..w.ref_visits {
            for &s in &stations {
                plan(g, s, &mut plans);
            }
        }
    }
    let mut previous: Vec<usize> = (0..n_ref).collect();
    let mut next_station = n_ref;
    let mut next_ev = w.ref_groups;
    for &count in &w.layers {
        let mut layer = Vec::with_capacity(count);
        for _ in 0..count {
            let anchor = *previous.choose(&mut rng).expect("non-empty layer");
            let s = next_station;
            next_station += 1;
            evs[next_ev].home_fcs = vec![anchor, s];
            plan(next_ev, anchor, &mut plans);
            plan(next_ev, s, &mut plans);
            next_ev += 1;
            layer.push(s);
        }
        previous = layer;
    }
    // Shuffle order ids against EV order so nothing depends on file order.
    let mut ids: Vec<String> = plans.iter().map(|p| p.order_id.clone()).collect();
    ids.shuffle(&mut rng);
    for (p, id) in plans.iter_mut().zip(ids) {
        p.order_id = id;
    }
    (SimFleet { fcs, evs }, plans)
}

/// Quantization bounds carrying only the `y` range.
pub fn quant_bounds_y(y_min: f64, y_max: f64, y0: f64) -> QuantBounds {
    QuantBounds {
        e_d_min: 0.0,
        e_d_max: 0.0,
        y_min,
        y_max,
        y0,
    }
}

/// First and second moments of `e / (y0 + y)` under the triangular prior
/// restricted to `[y_min, y_max]`, by quadrature.
pub fn quant_quadrature(e: f64, y_min: f64, y_max: f64, y0: f64) -> (f64, f64) {
    let w = |y: f64| 1.0 - y.abs();
    let piece = |f: &dyn Fn(f64) -> f64| {
        if y_min < 0.0 && y_max > 0.0 {
            integrate(f, y_min, 0.0, 1e-15) + integrate(f, 0.0, y_max, 1e-15)
        } else {
            integrate(f, y_min, y_max, 1e-15)
        }
    };
    let z = piece(&w);
    let m1 = piece(&|y| e / (y0 + y) * w(y)) / z;
    let m2 = piece(&|y| (e / (y0 + y)).powi(2) * w(y)) / z;
    (m1, m2)
}

/// A random `y` interval of the given sign case.
pub fn draw_case(rng: &mut ChaCha8Rng, case: SignCase) -> (f64, f64) {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (lo, hi) = (a.min(b), a.max(b));
    match case {
        SignCase::Negative => (-hi, -lo),
        SignCase::Positive => (lo, hi),
        SignCase::Straddling => (-a, b),
    }
}

pub fn pooled(ev: &str, fcs: &str, e: f64, s: f64) -> PooledBped {
    PooledBped {
        ev_id: ev.into(),
        fcs_id: fcs.into(),
        members: vec![],
        expected_e_d: e,
        sigma: s,
        mean_current_a: 100.0,
        mean_temp_c: 25.0,
    }
}

fn z(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Monte Carlo sd of a cluster member's error: every pooled BPED and the
/// cluster bias are perturbed by their own normal noise.
pub fn mc_rcs_sigma(cluster: &RcsCluster, fcs: &str, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let members: Vec<&PooledBped> = cluster.fcs_ids.iter().map(|f| &cluster.per_fcs_bped[f]).collect();
    let k = cluster.fcs_ids.iter().position(|f| f == fcs).expect("member");
    let n = members.len() as f64;
    let v: Vec<f64> = (0..draws)
        .map(|_| {
            let xs: Vec<f64> = members.iter().map(|m| m.expected_e_d + m.sigma * z(rng)).collect();
            let mean = xs.iter().sum::<f64>() / n + cluster.sigma_bias * z(rng);
            xs[k] / mean - 1.0
        })
        .collect();
    mean_sd(&v).1
}

/// Monte Carlo sd of the error at the end of a chain.
pub fn mc_chain_sigma(chain: &ComparisonChain, root: (f64, f64), draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let v: Vec<f64> = (0..draws)
        .map(|_| {
            let mut g = root.0 + root.1 * z(rng);
            for h in &chain.hops {
                let c = h.from_group.expected_e_d + h.from_group.sigma * z(rng);
                let d = h.to_group.expected_e_d + h.to_group.sigma * z(rng);
                g = d / c * (1.0 + g) - 1.0;
            }
            g
        })
        .collect();
    mean_sd(&v).1
}
