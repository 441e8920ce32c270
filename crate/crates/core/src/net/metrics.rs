use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::des::SimTime;
use crate::phy::EnergyReport;

/// Drop categories reported as metrics columns, in column order.
pub const DROP_COLUMNS: [&str; 10] = [
    "low_snr",
    "collision",
    "half_duplex",
    "tx_busy",
    "bit_errors",
    "no_route",
    "duplicate",
    "suppressed",
    "out_of_coverage",
    "mac_give_up",
];

/// Running counters collected while a network runs.
#[derive(Clone, Debug, Default)]
pub struct MetricsAcc {
    pub generated: u64,
    delivered: HashSet<u64>,
    payload_bits: u64,
    delays: Vec<f64>,
    pub collisions: u64,
    pub transmissions: u64,
    tl_sum: f64,
    tl_count: u64,
    pub drops: BTreeMap<&'static str, u64>,
}

impl MetricsAcc {
    /// Returns false for a repeated delivery of the same packet.
    pub fn delivered(&mut self, uid: u64, payload_bytes: u32, created_at: SimTime, now: SimTime) -> bool {
        if !self.delivered.insert(uid) {
            return false;
        }
        self.payload_bits += 8 * payload_bytes as u64;
        self.delays.push((now.saturating_sub(created_at)).as_secs());
        true
    }

    pub fn link_loss(&mut self, tl_db: f64) {
        self.tl_sum += tl_db;
        self.tl_count += 1;
    }

    pub fn drop(&mut self, reason: &'static str) {
        *self.drops.entry(reason).or_default() += 1;
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered.len() as u64
    }

    pub fn summarize(&self, header: SummaryHeader, node_energy: Vec<(u16, EnergyReport)>) -> MetricsSummary {
        let mut sorted = self.delays.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let quantile = |q: f64| (n > 0).then(|| sorted[((q * n as f64).ceil() as usize).clamp(1, n) - 1]);
        let median = (n > 0).then(|| {
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            }
        });
        let delivered = self.delivered_count();
        MetricsSummary {
            generated: self.generated,
            delivered,
            delivery_ratio: if self.generated > 0 {
                (delivered as f64 / self.generated as f64).min(1.0)
            } else {
                0.0
            },
            throughput_bps: if header.duration > 0.0 { self.payload_bits as f64 / header.duration } else { 0.0 },
            delay_mean: (n > 0).then(|| sorted.iter().sum::<f64>() / n as f64),
            delay_median: median,
            delay_p95: quantile(0.95),
            collisions: self.collisions,
            transmissions: self.transmissions,
            mean_tl_db: (self.tl_count > 0).then(|| self.tl_sum / self.tl_count as f64),
            energy_j: node_energy.iter().map(|(_, e)| e.joules).sum(),
            drops: DROP_COLUMNS.iter().map(|k| (k.to_string(), self.drops.get(k).copied().unwrap_or(0))).collect(),
            node_energy,
            header,
        }
    }
}

/// Run identification carried into every summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryHeader {
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub events: u64,
    pub mode: String,
    pub mac: String,
    pub routing: String,
    pub propagation: String,
    /// Airtime of the data frame's headers (routing + MAC + PHY), seconds.
    pub data_header_td: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub header: SummaryHeader,
    pub generated: u64,
    pub delivered: u64,
    pub delivery_ratio: f64,
    /// Payload bits delivered per second of simulated time.
    pub throughput_bps: f64,
    pub delay_mean: Option<f64>,
    pub delay_median: Option<f64>,
    pub delay_p95: Option<f64>,
    pub collisions: u64,
    pub transmissions: u64,
    pub mean_tl_db: Option<f64>,
    pub energy_j: f64,
    pub drops: Vec<(String, u64)>,
    pub node_energy: Vec<(u16, EnergyReport)>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsSummary {
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = [
            "scenario",
            "seed",
            "duration",
            "events",
            "mode",
            "mac",
            "routing",
            "propagation",
            "data_header_td",
            "generated",
            "delivered",
            "delivery_ratio",
            "throughput_bps",
            "delay_mean",
            "delay_median",
            "delay_p95",
            "collisions",
            "transmissions",
            "mean_tl_db",
            "energy_j",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(DROP_COLUMNS.iter().map(|d| format!("drop_{d}")));
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let h = &self.header;
        let mut r = vec![
            h.scenario.clone(),
            h.seed.to_string(),
            h.duration.to_string(),
            h.events.to_string(),
            h.mode.clone(),
            h.mac.clone(),
            h.routing.clone(),
            h.propagation.clone(),
            h.data_header_td.to_string(),
            self.generated.to_string(),
            self.delivered.to_string(),
            self.delivery_ratio.to_string(),
            self.throughput_bps.to_string(),
            opt(self.delay_mean),
            opt(self.delay_median),
            opt(self.delay_p95),
            self.collisions.to_string(),
            self.transmissions.to_string(),
            opt(self.mean_tl_db),
            self.energy_j.to_string(),
        ];
        r.extend(self.drops.iter().map(|(_, n)| n.to_string()));
        r
    }

    pub fn drop_count(&self, reason: &str) -> u64 {
        self.drops.iter().find(|(k, _)| k == reason).map(|(_, n)| *n).unwrap_or(0)
    }
}

/// Write summaries as CSV rows under one header.
pub fn write_metrics_csv<W: std::io::Write>(out: W, rows: &[MetricsSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MetricsSummary::csv_header())?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}
