//! Charging-order CSV ingestion and constant-current segmentation.
//!
//! Input header: `order_id,ev_id,fcs_id,timestamp,energy_kwh,soc_pct,current_a,voltage_v,temp_c`
//! with an optional trailing `battery_type` column. Malformed rows go to a
//! rejects report; orders that violate monotonicity are quarantined whole.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChargingOrder, ChargingPoint, ChargingSegment, SocEnergy};

pub const ORDER_COLUMNS: [&str; 9] = [
    "order_id",
    "ev_id",
    "fcs_id",
    "timestamp",
    "energy_kwh",
    "soc_pct",
    "current_a",
    "voltage_v",
    "temp_c",
];

pub const BATTERY_TYPE_COLUMN: &str = "battery_type";

/// A row that could not be turned into a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file, header is line 1.
    pub line: u64,
    pub fields: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantinedOrder {
    pub order_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedOrders {
    pub header: Vec<String>,
    pub orders: Vec<ChargingOrder>,
    pub rejects: Vec<RejectedRow>,
    pub quarantined: Vec<QuarantinedOrder>,
}

struct RowData {
    ev_id: String,
    fcs_id: String,
    battery_type: Option<String>,
    point: ChargingPoint,
}

pub fn parse_orders(path: &Path) -> Result<ParsedOrders> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_orders_from_reader(std::io::BufReader::new(file))
}

pub fn parse_orders_from_reader<R: Read>(reader: R) -> Result<ParsedOrders> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();

    let mut col = [0usize; 9];
    for (slot, name) in col.iter_mut().zip(ORDER_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let battery_col = header.iter().position(|h| h == BATTERY_TYPE_COLUMN);

    let mut grouped: BTreeMap<String, Vec<RowData>> = BTreeMap::new();
    let mut rejects = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(RejectedRow {
                    line,
                    fields: Vec::new(),
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let fields: Vec<String> = record.iter().map(String::from).collect();
        match parse_row(&fields, &col, battery_col) {
            Ok((order_id, row)) => grouped.entry(order_id).or_default().push(row),
            Err(reason) => rejects.push(RejectedRow {
                line,
                fields,
                reason,
            }),
        }
    }

    let mut orders = Vec::with_capacity(grouped.len());
    let mut quarantined = Vec::new();
    for (order_id, rows) in grouped {
        match assemble_order(order_id.clone(), rows) {
            Ok(order) => orders.push(order),
            Err(reason) => quarantined.push(QuarantinedOrder { order_id, reason }),
        }
    }

    Ok(ParsedOrders {
        header,
        orders,
        rejects,
        quarantined,
    })
}

fn parse_row(
    fields: &[String],
    col: &[usize; 9],
    battery_col: Option<usize>,
) -> std::result::Result<(String, RowData), String> {
    let get = |idx: usize, name: &str| -> std::result::Result<&str, String> {
        fields
            .get(idx)
            .map(String::as_str)
            .ok_or_else(|| format!("missing field {name}"))
    };
    let num = |idx: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = get(idx, name)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("unparseable {name} `{raw}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite {name}"));
        }
        Ok(v)
    };

    let order_id = get(col[0], "order_id")?.to_string();
    let ev_id = get(col[1], "ev_id")?.to_string();
    let fcs_id = get(col[2], "fcs_id")?.to_string();
    if order_id.is_empty() || ev_id.is_empty() || fcs_id.is_empty() {
        return Err("empty identifier".to_string());
    }
    let timestamp = parse_timestamp(get(col[3], "timestamp")?)?;
    let energy_kwh = num(col[4], "energy_kwh")?;
    let soc_raw = num(col[5], "soc_pct")?;
    if soc_raw.fract() != 0.0 {
        return Err("fractional SOC".to_string());
    }
    if !(0.0..=100.0).contains(&soc_raw) {
        return Err("SOC out of range".to_string());
    }
    let current_a = num(col[6], "current_a")?;
    let voltage_v = num(col[7], "voltage_v")?;
    let temp_c = num(col[8], "temp_c")?;
    let battery_type = battery_col
        .and_then(|idx| fields.get(idx))
        .filter(|s| !s.is_empty())
        .cloned();

    Ok((
        order_id,
        RowData {
            ev_id,
            fcs_id,
            battery_type,
            point: ChargingPoint {
                timestamp,
                energy_kwh,
                soc_pct: soc_raw as u32,
                current_a,
                voltage_v,
                temp_c,
            },
        },
    ))
}

fn assemble_order(
    order_id: String,
    mut rows: Vec<RowData>,
) -> std::result::Result<ChargingOrder, String> {
    let ev_id = rows[0].ev_id.clone();
    let fcs_id = rows[0].fcs_id.clone();
    let battery_type = rows[0].battery_type.clone();
    if rows.iter().any(|r| r.ev_id != ev_id || r.fcs_id != fcs_id) {
        return Err("inconsistent ev_id/fcs_id within order".to_string());
    }
    if rows.len() < 2 {
        return Err("fewer than 2 points".to_string());
    }
    rows.sort_by_key(|r| r.point.timestamp);
    let points: Vec<ChargingPoint> = rows.into_iter().map(|r| r.point).collect();
    for w in points.windows(2) {
        if w[1].timestamp == w[0].timestamp {
            return Err("duplicate timestamp".to_string());
        }
        if w[1].energy_kwh < w[0].energy_kwh {
            return Err("non-monotone energy".to_string());
        }
        if w[1].soc_pct < w[0].soc_pct {
            return Err("non-monotone SOC".to_string());
        }
    }
    Ok(ChargingOrder {
        order_id,
        ev_id,
        fcs_id,
        battery_type,
        points,
    })
}

/// Parses an ISO-8601 timestamp as UTC. A missing offset means UTC.
pub fn parse_timestamp(raw: &str) -> std::result::Result<i64, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc().timestamp());
        }
    }
    Err(format!("bad timestamp `{raw}`"))
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

/// Writes orders in the ingestion format. The `battery_type` column is
/// emitted only when some order carries one.
pub fn write_orders<W: Write>(writer: W, orders: &[ChargingOrder]) -> Result<()> {
    let with_battery = orders.iter().any(|o| o.battery_type.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ORDER_COLUMNS.to_vec();
    if with_battery {
        header.push(BATTERY_TYPE_COLUMN);
    }
    wtr.write_record(&header)?;
    for order in orders {
        for p in &order.points {
            let mut rec = vec![
                order.order_id.clone(),
                order.ev_id.clone(),
                order.fcs_id.clone(),
                format_timestamp(p.timestamp),
                p.energy_kwh.to_string(),
                p.soc_pct.to_string(),
                p.current_a.to_string(),
                p.voltage_v.to_string(),
                p.temp_c.to_string(),
            ];
            if with_battery {
                rec.push(order.battery_type.clone().unwrap_or_default());
            }
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<orders>", e))?;
    Ok(())
}

/// Rejects report: the input columns followed by `reject_reason`.
pub fn write_rejects<W: Write>(
    writer: W,
    header: &[String],
    rejects: &[RejectedRow],
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let mut head: Vec<&str> = header.iter().map(String::as_str).collect();
    head.push("reject_reason");
    wtr.write_record(&head)?;
    for r in rejects {
        let mut rec: Vec<&str> = r.fields.iter().map(String::as_str).collect();
        rec.resize(header.len(), "");
        rec.push(&r.reason);
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<rejects>", e))?;
    Ok(())
}

/// Quarantine log: `order_id,reason`.
pub fn write_quarantine<W: Write>(writer: W, quarantined: &[QuarantinedOrder]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["order_id", "reason"])?;
    for q in quarantined {
        wtr.write_record([&q.order_id, &q.reason])?;
    }
    wtr.flush().map_err(|e| Error::io("<quarantine>", e))?;
    Ok(())
}

/// Greedy left-to-right maximal runs whose peak-to-peak current stays
/// within `threshold`. The runs partition `0..currents.len()`.
pub fn current_runs(currents: &[f64], threshold: f64) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    while start < currents.len() {
        let (mut lo, mut hi) = (currents[start], currents[start]);
        let mut end = start + 1;
        while end < currents.len() {
            let c = currents[end];
            let (nlo, nhi) = (lo.min(c), hi.max(c));
            if nhi - nlo > threshold {
                break;
            }
            lo = nlo;
            hi = nhi;
            end += 1;
        }
        runs.push(start..end);
        start = end;
    }
    runs
}

/// Cuts an order into constant-current segments. Runs with fewer than two
/// samples, no SOC increase or no energy are dropped.
pub fn segment_order(order: &ChargingOrder, current_pp_threshold: f64) -> Vec<ChargingSegment> {
    let currents: Vec<f64> = order.points.iter().map(|p| p.current_a).collect();
    current_runs(&currents, current_pp_threshold)
        .into_iter()
        .enumerate()
        .filter_map(|(index, run)| build_segment(order, index, &order.points[run]))
        .collect()
}

fn build_segment(
    order: &ChargingOrder,
    index: usize,
    pts: &[ChargingPoint],
) -> Option<ChargingSegment> {
    if pts.len() < 2 {
        return None;
    }
    let first = &pts[0];
    let last = &pts[pts.len() - 1];
    let delta_soc = last.soc_pct.checked_sub(first.soc_pct)?;
    let delta_energy = last.energy_kwh - first.energy_kwh;
    if delta_soc < 1 || !(delta_energy > 0.0) {
        return None;
    }
    let n = pts.len() as f64;
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.current_a), hi.max(p.current_a))
        });
    Some(ChargingSegment {
        ev_id: order.ev_id.clone(),
        fcs_id: order.fcs_id.clone(),
        order_id: order.order_id.clone(),
        index,
        battery_type: order.battery_type.clone(),
        start_time: first.timestamp,
        end_time: last.timestamp,
        delta_energy_kwh: delta_energy,
        delta_soc_pct: delta_soc,
        start_soc_pct: first.soc_pct,
        end_soc_pct: last.soc_pct,
        mean_current_a: pts.iter().map(|p| p.current_a).sum::<f64>() / n,
        peak_to_peak_current_a: hi - lo,
        mean_temp_c: pts.iter().map(|p| p.temp_c).sum::<f64>() / n,
        mean_voltage_v: pts.iter().map(|p| p.voltage_v).sum::<f64>() / n,
        point_series: pts
            .iter()
            .map(|p| SocEnergy {
                soc: p.soc_pct - first.soc_pct,
                energy_kwh: p.energy_kwh - first.energy_kwh,
            })
            .collect(),
    })
}
