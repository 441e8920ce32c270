//! Physical layer: modulation, SNR, reception gating, spectrum occupancy,
//! collisions, half-duplex modem state and energy.

mod energy;
mod modulation;
mod receiver;
mod spectrum;

pub use energy::{EnergyMeter, EnergyReport, PowerState};
pub use modulation::{Modulation, DEFAULT_TARGET_BER};
pub use receiver::{PhyReceiver, RxFate, RxOutcome, TxBusy};
pub use spectrum::{spectrum_overlaps, Occupancy, SpectrumAllocation, SubcarrierSet, SubcarrierSpec};

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ber;
use crate::des::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    LowSnr,
    Collision,
    HalfDuplex,
    TxBusy,
    BitErrors,
    NoRoute,
    Duplicate,
    QueueFull,
    Suppressed,
    OutOfCoverage,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::LowSnr => "low_snr",
            DropReason::Collision => "collision",
            DropReason::HalfDuplex => "half_duplex",
            DropReason::TxBusy => "tx_busy",
            DropReason::BitErrors => "bit_errors",
            DropReason::NoRoute => "no_route",
            DropReason::Duplicate => "duplicate",
            DropReason::QueueFull => "queue_full",
            DropReason::Suppressed => "suppressed",
            DropReason::OutOfCoverage => "out_of_coverage",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptionPolicy {
    /// Accept iff `snr >= threshold` of the mode.
    #[default]
    Threshold,
    /// Accept iff the packet success probability from the analytic BER
    /// reaches `success_threshold`.
    Ber,
    /// Draw packet success from the analytic BER.
    BerStochastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Drop(DropReason),
}

/// `SL - TL - NL`, dB.
pub fn rx_snr(tl_db: f64, source_level_db: f64, noise_level_db: f64) -> f64 {
    source_level_db - tl_db - noise_level_db
}

fn default_mode() -> Modulation {
    Modulation::Bpsk
}
fn default_symbol_rate() -> f64 {
    1500.0
}
fn default_source_level() -> f64 {
    170.0
}
fn default_noise_level() -> f64 {
    50.0
}
fn default_success_threshold() -> f64 {
    0.5
}
fn default_tx_power() -> f64 {
    2.0
}
fn default_rx_power() -> f64 {
    0.1
}
fn default_idle_power() -> f64 {
    0.01
}

/// `[phy]` section of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyParams {
    #[serde(default = "default_mode")]
    pub mode: Modulation,
    #[serde(default = "default_symbol_rate")]
    pub symbol_rate: f64,
    #[serde(default = "default_source_level")]
    pub source_level_db: f64,
    #[serde(default = "default_noise_level")]
    pub noise_level_db: f64,
    #[serde(default)]
    pub reception_policy: ReceptionPolicy,
    /// Overrides the threshold of every mode.
    #[serde(default)]
    pub snr_threshold_db: Option<f64>,
    /// Per-mode overrides, keyed by mode name.
    #[serde(default)]
    pub thresholds: BTreeMap<Modulation, f64>,
    /// Arrivals below this SNR are not heard at all and do not interfere.
    #[serde(default)]
    pub detection_threshold_db: f64,
    /// Strongest-signal capture with SINR gating instead of dropping every
    /// overlapping packet.
    #[serde(default)]
    pub capture: bool,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    /// Noise bandwidth for the Eb/N0 conversion; defaults to the symbol rate.
    #[serde(default)]
    pub noise_bandwidth_hz: Option<f64>,
    #[serde(default = "default_tx_power")]
    pub tx_power_w: f64,
    #[serde(default = "default_rx_power")]
    pub rx_power_w: f64,
    #[serde(default = "default_idle_power")]
    pub idle_power_w: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        toml::from_str("").expect("all phy fields have defaults")
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |k: &str, m: String| Err((k.to_string(), m));
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return err("symbol_rate", format!("must be > 0, got {}", self.symbol_rate));
        }
        if !(self.source_level_db.is_finite() && self.noise_level_db.is_finite()) {
            return err("source_level_db", "source and noise levels must be finite".into());
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return err("success_threshold", format!("must lie in (0, 1], got {}", self.success_threshold));
        }
        if let Some(b) = self.noise_bandwidth_hz {
            if !(b > 0.0) {
                return err("noise_bandwidth_hz", format!("must be > 0, got {b}"));
            }
        }
        for (k, v) in [("tx_power_w", self.tx_power_w), ("rx_power_w", self.rx_power_w), ("idle_power_w", self.idle_power_w)] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(k, format!("must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn rate_bps(&self) -> f64 {
        self.mode.transmission_rate(self.symbol_rate)
    }

    /// Seconds on air for `bits` at the configured mode.
    pub fn airtime(&self, bits: u64) -> f64 {
        bits as f64 / self.rate_bps()
    }

    pub fn threshold_db(&self, mode: Modulation) -> f64 {
        self.thresholds
            .get(&mode)
            .copied()
            .or(self.snr_threshold_db)
            .unwrap_or_else(|| mode.default_threshold_db())
    }

    pub fn snr(&self, tl_db: f64) -> f64 {
        rx_snr(tl_db, self.source_level_db, self.noise_level_db)
    }

    pub fn ebn0_db(&self, snr_db: f64, mode: Modulation) -> f64 {
        let bw = self.noise_bandwidth_hz.unwrap_or(self.symbol_rate);
        ber::ebn0_from_snr(snr_db, mode, bw, self.symbol_rate)
    }

    pub fn audible(&self, snr_db: f64) -> bool {
        snr_db >= self.detection_threshold_db
    }

    /// Gate a packet of `bits` bits received at `snr_db` (or SINR under capture).
    pub fn reception_decision(&self, snr_db: f64, mode: Modulation, bits: u64, rng: &mut RngStream) -> Decision {
        match self.reception_policy {
            ReceptionPolicy::Threshold => {
                if snr_db >= self.threshold_db(mode) {
                    Decision::Accept
                } else {
                    Decision::Drop(DropReason::LowSnr)
                }
            }
            ReceptionPolicy::Ber | ReceptionPolicy::BerStochastic => {
                let p = ber::analytic_ber(mode, self.ebn0_db(snr_db, mode));
                let success = ber::packet_success_probability(p, bits);
                let ok = if self.reception_policy == ReceptionPolicy::Ber {
                    success >= self.success_threshold
                } else {
                    rng.random::<f64>() < success
                };
                if ok {
                    Decision::Accept
                } else {
                    Decision::Drop(DropReason::BitErrors)
                }
            }
        }
    }
}
