use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::ber;

/// Target bit error rate used to derive default SNR thresholds.
pub const DEFAULT_TARGET_BER: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam8,
    Qam16,
    Qam64,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Bpsk,
        Modulation::Qpsk,
        Modulation::Qam8,
        Modulation::Qam16,
        Modulation::Qam64,
    ];

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam8 => 3,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    /// Constellation size.
    pub fn order(self) -> u32 {
        1 << self.bits_per_symbol()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam8 => "qam8",
            Modulation::Qam16 => "qam16",
            Modulation::Qam64 => "qam64",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Modulation> {
        Modulation::ALL.get(code as usize).copied()
    }

    /// Bits per second at `symbol_rate` symbols per second.
    pub fn transmission_rate(self, symbol_rate: f64) -> f64 {
        symbol_rate * self.bits_per_symbol() as f64
    }

    /// SNR (dB, matched bandwidth) at which the AWGN bit error rate drops to `target_ber`.
    pub fn snr_for_ber(self, target_ber: f64) -> f64 {
        ber::ebn0_for_ber(self, target_ber) + 10.0 * (self.bits_per_symbol() as f64).log10()
    }

    /// `snr_for_ber(DEFAULT_TARGET_BER)`, computed once per mode.
    pub fn default_threshold_db(self) -> f64 {
        static TABLE: OnceLock<[f64; 5]> = OnceLock::new();
        TABLE.get_or_init(|| Modulation::ALL.map(|m| m.snr_for_ber(DEFAULT_TARGET_BER)))[self as usize]
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Modulation::ALL
            .into_iter()
            .find(|m| m.name() == lower || lower.strip_prefix(&m.order().to_string()) == Some("qam") && m.order() >= 8)
            .ok_or_else(|| format!("unknown modulation {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        assert_eq!(Modulation::Bpsk.transmission_rate(1500.0), 1500.0);
        assert_eq!(Modulation::Qam64.transmission_rate(1500.0), 9000.0);
        assert_eq!(
            Modulation::Qpsk.transmission_rate(700.0),
            2.0 * Modulation::Bpsk.transmission_rate(700.0)
        );
    }

    #[test]
    fn bits_strictly_increase() {
        for w in Modulation::ALL.windows(2) {
            assert!(w[0].bits_per_symbol() < w[1].bits_per_symbol());
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("QPSK".parse::<Modulation>(), Ok(Modulation::Qpsk));
        assert_eq!("16qam".parse::<Modulation>(), Ok(Modulation::Qam16));
        assert_eq!("qam64".parse::<Modulation>(), Ok(Modulation::Qam64));
        assert!("4qam".parse::<Modulation>().is_err());
        for m in Modulation::ALL {
            assert_eq!(Modulation::from_code(m.code()), Some(m));
        }
    }

    #[test]
    fn default_thresholds_hit_target_ber() {
        let mut last = f64::NEG_INFINITY;
        for m in Modulation::ALL {
            let snr = m.default_threshold_db();
            let ebn0 = snr - 10.0 * (m.bits_per_symbol() as f64).log10();
            let p = ber::analytic_ber(m, ebn0);
            assert!((p - DEFAULT_TARGET_BER).abs() < 1e-9, "{m}: {p}");
            assert!(snr > last, "thresholds grow with the constellation");
            last = snr;
        }
        // BPSK needs about 6.79 dB for 1e-3.
        assert!((Modulation::Bpsk.default_threshold_db() - 6.79).abs() < 0.01);
    }
}
