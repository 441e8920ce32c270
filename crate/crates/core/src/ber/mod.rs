//! Bit error rate: threshold gating, analytic AWGN curves and pilot-based
//! channel-estimation Monte Carlo.

mod pilot;

pub use pilot::{pilot_ber, EstimationMethod, PilotChannelSpec};

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::phy::Modulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BerMethod {
    Threshold,
    Analytic,
    LsPilot,
    MmsePilot,
    IdealPilot,
}

impl BerMethod {
    pub fn name(self) -> &'static str {
        match self {
            BerMethod::Threshold => "threshold",
            BerMethod::Analytic => "analytic",
            BerMethod::LsPilot => "ls_pilot",
            BerMethod::MmsePilot => "mmse_pilot",
            BerMethod::IdealPilot => "ideal_pilot",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub method: BerMethod,
    /// Standard error of `ber`; zero for closed-form methods.
    pub std_error: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub warning: Option<String>,
}

impl BerEstimate {
    fn exact(ber: f64, method: BerMethod) -> Self {
        BerEstimate {
            ber: ber.clamp(0.0, 1.0),
            method,
            std_error: 0.0,
            bit_errors: 0,
            bits: 0,
            warning: None,
        }
    }
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `snr >= threshold` decodes error-free, anything below loses every bit.
pub fn ber_threshold(snr_db: f64, threshold_db: f64) -> BerEstimate {
    BerEstimate::exact(if snr_db >= threshold_db { 0.0 } else { 1.0 }, BerMethod::Threshold)
}

/// AWGN bit error probability with Gray mapping.
///
/// BPSK and QPSK use `Q(sqrt(2 Eb/N0))`; the QAM orders use the
/// rectangular-constellation approximation
/// `(4/k)(1 - 1/sqrt(M)) Q(sqrt(3k/(M-1) Eb/N0))`, applied to 8-QAM as well
/// even though its constellation is not square.
pub fn analytic_ber(mode: Modulation, ebn0_db: f64) -> f64 {
    let g = 10f64.powf(ebn0_db / 10.0);
    let p = match mode {
        Modulation::Bpsk | Modulation::Qpsk => q_function((2.0 * g).sqrt()),
        _ => {
            let m = mode.order() as f64;
            let k = mode.bits_per_symbol() as f64;
            (4.0 / k) * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * k / (m - 1.0) * g).sqrt())
        }
    };
    p.clamp(0.0, 1.0)
}

pub fn ber_analytic(mode: Modulation, ebn0_db: f64) -> BerEstimate {
    BerEstimate::exact(analytic_ber(mode, ebn0_db), BerMethod::Analytic)
}

/// `Eb/N0 = SNR - 10 log10(bits/symbol) + 10 log10(bandwidth / symbol rate)`, all dB.
pub fn ebn0_from_snr(snr_db: f64, mode: Modulation, bandwidth_hz: f64, symbol_rate: f64) -> f64 {
    snr_db - 10.0 * (mode.bits_per_symbol() as f64).log10() + 10.0 * (bandwidth_hz / symbol_rate).log10()
}

/// Eb/N0 (dB) at which `analytic_ber` equals `target`, by bisection.
pub fn ebn0_for_ber(mode: Modulation, target: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_ber(mode, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Probability that every one of `bits` bits survives a channel with bit error rate `p`.
pub fn packet_success_probability(p: f64, bits: u64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if bits == 0 { 1.0 } else { 0.0 };
    }
    (bits as f64 * (-p).ln_1p()).exp()
}
