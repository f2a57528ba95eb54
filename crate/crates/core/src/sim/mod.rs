//! Synthetic fleets of stations and EVs with known metering errors.

mod scenario;
mod validate;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChargingOrder, ChargingPoint};

pub use scenario::{SimScenario, ORDERS_PER_FCS};
pub use validate::{run_validation, score_verdicts, Confusion, ValidationReport};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFcs {
    pub fcs_id: String,
    pub gamma_true: f64,
    pub cable_resistance_ohm: f64,
}

/// Battery replacement: from `day` on the EV charges with a new BPED.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub day: f64,
    pub e_d_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEv {
    pub ev_id: String,
    /// Battery energy per percent SOC, kWh.
    pub e_d_true: f64,
    pub rel_repeat_sigma: f64,
    pub rated_capacity_ah: f64,
    pub soh: f64,
    pub battery_type: String,
    pub swap_event: Option<SwapEvent>,
    pub voltage_v: f64,
    /// Requested constant current before the taper step, A.
    pub base_current_a: f64,
    pub taper_soc: f64,
    pub temp_mean_c: f64,
    /// Indices of the stations this EV uses.
    pub home_fcs: Vec<usize>,
    /// Relative share of all orders.
    pub activity: f64,
}

impl SimEv {
    fn e_d_at(&self, day: f64) -> f64 {
        match self.swap_event {
            Some(s) if day >= s.day => s.e_d_true,
            _ => self.e_d_true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFleet {
    pub fcs: Vec<SimFcs>,
    pub evs: Vec<SimEv>,
}

impl SimFleet {
    pub fn ground_truth(&self) -> BTreeMap<String, f64> {
        self.fcs
            .iter()
            .map(|f| (f.fcs_id.clone(), f.gamma_true))
            .collect()
    }
}

/// One planned charging session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPlan {
    pub order_id: String,
    pub ev: usize,
    pub fcs: usize,
    pub start_time: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub fleet: SimFleet,
    pub orders: Vec<ChargingOrder>,
}

/// Fraction of metered energy reaching the battery, `1 - I R / U`.
pub fn conversion_efficiency(u: f64, i: f64, r: f64) -> Result<f64> {
    if !(u > 0.0) || !(i >= 0.0) || !(r >= 0.0) {
        return Err(Error::Domain(format!(
            "conversion efficiency needs u > 0, i >= 0, r >= 0 (got {u}, {i}, {r})"
        )));
    }
    Ok(1.0 - i * r / u)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Station errors: a `fraction_defective` share gets `|gamma|` uniform on
/// `[gamma_t, 2 gamma_t]` with a random sign, the rest are normal with
/// `fcs_error_sigma` truncated to the acceptable band.
pub fn draw_station_errors<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> Vec<f64> {
    let n = scenario.n_fcs;
    let n_bad = (scenario.fraction_defective * n as f64).round() as usize;
    let defective: Vec<bool> = {
        let mut flags = vec![false; n];
        for i in sample_indices(rng, n, n_bad.min(n)) {
            flags[i] = true;
        }
        flags
    };
    let t = scenario.gamma_t;
    let sigma = scenario.fcs_error_sigma;
    defective
        .into_iter()
        .map(|bad| {
            if bad {
                let mag = uniform(rng, [t, 2.0 * t]);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            } else if sigma == 0.0 {
                0.0
            } else {
                let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
                loop {
                    let g: f64 = normal.sample(rng);
                    if g.abs() <= t {
                        break g;
                    }
                }
            }
        })
        .collect()
}

pub fn generate_fleet(scenario: &SimScenario) -> Result<SimFleet> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let gammas = draw_station_errors(scenario, &mut rng);
    let fcs = gammas
        .into_iter()
        .enumerate()
        .map(|(i, g)| SimFcs {
            fcs_id: format!("F{:04}", i + 1),
            gamma_true: g,
            cable_resistance_ohm: scenario.cable_resistance_ohm,
        })
        .collect();

    let n_fcs = scenario.n_fcs;
    let window = scenario.home_window.min(n_fcs);
    let evs = (0..scenario.n_ev)
        .map(|i| {
            let e_d = uniform(&mut rng, scenario.e_d_range);
            let soh = uniform(&mut rng, scenario.soh_range);
            let voltage = uniform(&mut rng, scenario.voltage_range_v);
            let [kmin, kmax] = scenario.home_size_range;
            let k = rng.random_range(kmin..=kmax).min(window);
            let centre = rng.random_range(0..n_fcs);
            let mut home: Vec<usize> = sample_indices(&mut rng, window, k)
                .into_iter()
                .map(|o| (centre + o) % n_fcs)
                .collect();
            home.sort_unstable();
            let battery_type = if rng.random::<f64>() < scenario.excluded_type_fraction {
                "LiFePO4"
            } else {
                "NCM"
            };
            let swap_event = (rng.random::<f64>() < scenario.swap_fraction).then(|| SwapEvent {
                day: uniform(&mut rng, [0.0, scenario.timespan_days]),
                e_d_true: uniform(&mut rng, scenario.e_d_range),
            });
            let heavy = rng.random::<f64>() < scenario.heavy_user_fraction;
            SimEv {
                ev_id: format!("V{:05}", i + 1),
                e_d_true: e_d,
                rel_repeat_sigma: scenario.rel_repeat_sigma,
                // Energy per percent = U * C * SOH / 100 / 1000.
                rated_capacity_ah: e_d * 1e5 / (voltage * soh),
                soh,
                battery_type: battery_type.to_string(),
                swap_event,
                voltage_v: voltage,
                base_current_a: uniform(&mut rng, scenario.current_range_a),
                taper_soc: uniform(&mut rng, scenario.taper_soc_range),
                temp_mean_c: uniform(&mut rng, scenario.temp_mean_range_c),
                home_fcs: home,
                activity: if heavy { scenario.heavy_user_weight } else { 1.0 },
            }
        })
        .collect();
    Ok(SimFleet { fcs, evs })
}

/// Assigns each order to an EV in proportion to its activity and to one of
/// the EV's home stations.
pub fn plan_orders(scenario: &SimScenario, fleet: &SimFleet) -> Result<Vec<OrderPlan>> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(u64::MAX);
    let weights = WeightedIndex::new(fleet.evs.iter().map(|e| e.activity))
        .map_err(|e| Error::Config(format!("EV activity weights: {e}")))?;
    let span = scenario.timespan_days * SECONDS_PER_DAY;
    (0..scenario.orders())
        .map(|i| {
            let ev = weights.sample(&mut rng);
            let home = &fleet.evs[ev].home_fcs;
            if home.is_empty() {
                return Err(Error::Config(format!("EV {} has no stations", fleet.evs[ev].ev_id)));
            }
            let fcs = home[rng.random_range(0..home.len())];
            Ok(OrderPlan {
                order_id: format!("O{:06}", i + 1),
                ev,
                fcs,
                start_time: scenario.start_epoch_s + uniform(&mut rng, [0.0, span]) as i64,
            })
        })
        .collect()
}

/// Energy needed for each whole-percent step, integrated over SOC.
struct StepProfile {
    first_step: i64,
    per_step: Vec<f64>,
}

impl StepProfile {
    /// Battery energy from `from` to `to` percent.
    fn energy(&self, from: f64, to: f64) -> f64 {
        let mut total = 0.0;
        let mut s = from;
        while s < to {
            let k = s.floor();
            let next = (k + 1.0).min(to);
            let idx = (k as i64 - self.first_step) as usize;
            total += self.per_step[idx] * (next - s);
            s = next;
        }
        total
    }
}

/// One session of `ev` at `fcs`, starting at `plan.start_time`.
///
/// SOC rises at the rate set by the current and the usable capacity; the
/// battery needs `e_d (1 + eps_k)` kWh for whole-percent step `k`; the
/// station meters battery energy over the cable efficiency times
/// `1 + gamma_true`. SOC is reported floored unless quantization is off.
pub fn simulate_session<R: Rng + ?Sized>(
    ev: &SimEv,
    fcs: &SimFcs,
    plan: &OrderPlan,
    scenario: &SimScenario,
    rng: &mut R,
) -> Result<ChargingOrder> {
    simulate_session_traced(ev, fcs, plan, scenario, rng).map(|(order, _)| order)
}

/// [`simulate_session`] that also returns the true SOC at every sample.
pub fn simulate_session_traced<R: Rng + ?Sized>(
    ev: &SimEv,
    fcs: &SimFcs,
    plan: &OrderPlan,
    scenario: &SimScenario,
    rng: &mut R,
) -> Result<(ChargingOrder, Vec<f64>)> {
    let day = (plan.start_time - scenario.start_epoch_s) as f64 / SECONDS_PER_DAY;
    let e_d = ev.e_d_at(day);
    let mut s0 = uniform(rng, scenario.soc_start_range);
    let mut s1 = uniform(rng, scenario.soc_end_range);
    if !scenario.quantize_soc {
        s0 = s0.round();
        s1 = s1.round();
    }
    let jitter = 1.0 + scenario.current_jitter_rel * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let i_cc = ev.base_current_a * jitter;
    let i_taper = i_cc * scenario.taper_ratio;
    let taper = if scenario.quantize_soc {
        ev.taper_soc
    } else {
        ev.taper_soc.round()
    };
    let temp = if rng.random::<f64>() < scenario.temp_out_of_band_fraction {
        if rng.random::<bool>() {
            uniform(rng, [5.0, 18.0])
        } else {
            uniform(rng, [42.0, 48.0])
        }
    } else {
        ev.temp_mean_c + scenario.temp_session_sd_c * rng.sample::<f64, _>(rand_distr::StandardNormal)
    };

    let first_step = s0.floor() as i64;
    let n_steps = (s1.ceil() as i64 - first_step).max(1) as usize;
    let per_step: Vec<f64> = (0..n_steps)
        .map(|_| {
            let eps = if ev.rel_repeat_sigma > 0.0 {
                ev.rel_repeat_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                0.0
            };
            e_d * (1.0 + eps)
        })
        .collect();
    let profile = StepProfile { first_step, per_step };

    let current_at = |s: f64| if s < taper { i_cc } else { i_taper };
    // Seconds per percent at current i.
    let sec_per_pct = |i: f64| 36.0 * ev.rated_capacity_ah * ev.soh / i;
    let eta = |i: f64| conversion_efficiency(ev.voltage_v, i, fcs.cable_resistance_ohm);
    let gain = 1.0 + fcs.gamma_true;

    // Metered energy from s0 to s, split at the taper point.
    let metered = |s: f64| -> Result<f64> {
        let mid = taper.clamp(s0, s);
        Ok((profile.energy(s0, mid) / eta(i_cc)? + profile.energy(mid, s) / eta(i_taper)?) * gain)
    };
    // Elapsed time from s0 to s.
    let elapsed = |s: f64| {
        let mid = taper.clamp(s0, s);
        (mid - s0) * sec_per_pct(i_cc) + (s - mid) * sec_per_pct(i_taper)
    };
    // SOC reached after t seconds.
    let soc_after = |t: f64| {
        let t_mid = elapsed(taper.clamp(s0, s1));
        let s = if t <= t_mid {
            s0 + t / sec_per_pct(i_cc)
        } else {
            taper.clamp(s0, s1) + (t - t_mid) / sec_per_pct(i_taper)
        };
        s.min(s1)
    };

    let sample_socs: Vec<f64> = if scenario.quantize_soc {
        let total = elapsed(s1);
        let mut socs: Vec<f64> = (0..)
            .map(|j| j as f64 * scenario.sampling_interval_s)
            .take_while(|&t| t < total)
            .map(soc_after)
            .collect();
        socs.push(s1);
        socs
    } else {
        (s0 as i64..=s1 as i64).map(|s| s as f64).collect()
    };

    let mut points = Vec::with_capacity(sample_socs.len());
    let mut last_ts = i64::MIN;
    for &s in &sample_socs {
        let ts = (plan.start_time + elapsed(s).round() as i64).max(last_ts.saturating_add(1));
        last_ts = ts;
        let ripple = if scenario.current_ripple_a > 0.0 {
            uniform(rng, [-scenario.current_ripple_a, scenario.current_ripple_a])
        } else {
            0.0
        };
        points.push(ChargingPoint {
            timestamp: ts,
            energy_kwh: metered(s)?,
            soc_pct: if scenario.quantize_soc {
                s.floor() as u32
            } else {
                s.round() as u32
            },
            current_a: current_at(s) + ripple,
            voltage_v: ev.voltage_v,
            temp_c: temp,
        });
    }
    let order = ChargingOrder {
        order_id: plan.order_id.clone(),
        ev_id: ev.ev_id.clone(),
        fcs_id: fcs.fcs_id.clone(),
        battery_type: Some(ev.battery_type.clone()),
        points,
    };
    Ok((order, sample_socs))
}

/// Simulates every planned order. Each order draws from its own RNG stream,
/// so the output does not depend on the number of worker threads.
pub fn simulate_orders(
    scenario: &SimScenario,
    fleet: &SimFleet,
    plans: &[OrderPlan],
) -> Result<Vec<ChargingOrder>> {
    plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            rng.set_stream(i as u64 + 1);
            let ev = fleet.evs.get(plan.ev).ok_or_else(|| {
                Error::Config(format!("order {} names unknown EV {}", plan.order_id, plan.ev))
            })?;
            let fcs = fleet.fcs.get(plan.fcs).ok_or_else(|| {
                Error::Config(format!("order {} names unknown station {}", plan.order_id, plan.fcs))
            })?;
            simulate_session(ev, fcs, plan, scenario, &mut rng)
        })
        .collect()
}

pub fn simulate(scenario: &SimScenario) -> Result<SimDataset> {
    let fleet = generate_fleet(scenario)?;
    let plans = plan_orders(scenario, &fleet)?;
    let orders = simulate_orders(scenario, &fleet, &plans)?;
    Ok(SimDataset { fleet, orders })
}

pub fn write_ground_truth<W: Write>(writer: W, fcs: &[SimFcs]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fcs_id", "gamma_true"])?;
    for f in fcs {
        w.write_record([f.fcs_id.clone(), f.gamma_true.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<ground truth>", e))?;
    Ok(())
}

pub fn read_ground_truth<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_col, g_col) = (col("fcs_id")?, col("gamma_true")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        let raw = rec.get(g_col).unwrap_or("");
        let g: f64 = raw.parse().map_err(|_| {
            Error::DataInconsistency(format!("ground truth for {id}: bad value `{raw}`"))
        })?;
        if out.insert(id.clone(), g).is_some() {
            return Err(Error::DataInconsistency(format!("duplicate ground truth for {id}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_examples() {
        assert!((conversion_efficiency(400.0, 200.0, 0.0023).unwrap() - 0.99885).abs() < 1e-12);
        assert_eq!(conversion_efficiency(400.0, 0.0, 0.0023).unwrap(), 1.0);
        assert!((conversion_efficiency(450.0, 100.0, 0.0023).unwrap() - 0.999_488_9).abs() < 1e-7);
        assert!(conversion_efficiency(0.0, 1.0, 0.0023).is_err());
        assert!(conversion_efficiency(400.0, -1.0, 0.0023).is_err());
    }

    fn small() -> SimScenario {
        SimScenario {
            n_fcs: 20,
            n_ev: 30,
            n_orders: Some(60),
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = simulate(&small()).unwrap();
        let b = simulate(&small()).unwrap();
        assert_eq!(a.orders, b.orders);
        assert_eq!(a.fleet, b.fleet);
    }

    #[test]
    fn defective_share_and_bands() {
        let s = SimScenario {
            n_fcs: 400,
            ..small()
        };
        let g = draw_station_errors(&s, &mut ChaCha8Rng::seed_from_u64(1));
        let bad = g.iter().filter(|x| x.abs() > s.gamma_t).count();
        assert_eq!(bad, 60);
        assert!(g.iter().all(|x| x.abs() <= 2.0 * s.gamma_t));
    }

    #[test]
    fn noise_free_session_energy() {
        let s = SimScenario {
            rel_repeat_sigma: 0.0,
            cable_resistance_ohm: 0.0,
            current_ripple_a: 0.0,
            quantize_soc: false,
            soc_start_range: [10.0, 10.0],
            soc_end_range: [90.0, 90.0],
            taper_soc_range: [95.0, 95.0],
            ..small()
        };
        let fleet = generate_fleet(&s).unwrap();
        let mut ev = fleet.evs[0].clone();
        ev.e_d_true = 0.4;
        let fcs = SimFcs {
            fcs_id: "F".into(),
            gamma_true: 0.0,
            cable_resistance_ohm: 0.0,
        };
        let plan = OrderPlan {
            order_id: "O".into(),
            ev: 0,
            fcs: 0,
            start_time: s.start_epoch_s,
        };
        let o = simulate_session(&ev, &fcs, &plan, &s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let de = o.points.last().unwrap().energy_kwh - o.points[0].energy_kwh;
        assert!((de - 32.0).abs() < 1e-9);
        assert_eq!(o.points.len(), 81);
    }

    #[test]
    fn ground_truth_round_trip() {
        let d = simulate(&small()).unwrap();
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &d.fleet.fcs).unwrap();
        assert_eq!(read_ground_truth(&buf[..]).unwrap(), d.fleet.ground_truth());
    }
}
