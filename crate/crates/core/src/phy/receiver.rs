//! Per-node modem: half-duplex state and the set of arrivals in flight.

use std::rc::Rc;

use super::spectrum::{spectrum_overlaps, Occupancy, SpectrumAllocation};
use super::PowerState;
use crate::des::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxFate {
    Clean,
    Collided,
    HalfDuplex,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RxOutcome {
    pub fate: RxFate,
    pub snr_db: f64,
    /// Sum of overlapping interferers' SNRs, linear.
    pub interference: f64,
}

impl RxOutcome {
    /// `S / (N + sum I)` in dB.
    pub fn sinr_db(&self) -> f64 {
        self.snr_db - 10.0 * (1.0 + self.interference).log10()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxBusy;

#[derive(Clone, Debug)]
struct Active {
    id: u64,
    start: SimTime,
    end: SimTime,
    allocation: Rc<SpectrumAllocation>,
    snr_db: f64,
    snr_lin: f64,
    interference: f64,
    fate: RxFate,
}

/// Tracks the audible arrivals at one node. Under the default rule every
/// arrival overlapping another (time, band and subcarriers) is collided;
/// with `capture` the overlap only accumulates interference for SINR gating.
#[derive(Clone, Debug, Default)]
pub struct PhyReceiver {
    capture: bool,
    tx_until: Option<SimTime>,
    active: Vec<Active>,
}

impl PhyReceiver {
    pub fn new(capture: bool) -> Self {
        PhyReceiver {
            capture,
            ..Default::default()
        }
    }

    pub fn is_transmitting(&self, now: SimTime) -> bool {
        self.tx_until.is_some_and(|u| now < u)
    }

    pub fn is_receiving(&self) -> bool {
        !self.active.is_empty()
    }

    pub fn power_state(&self, now: SimTime) -> PowerState {
        if self.is_transmitting(now) {
            PowerState::Transmitting
        } else if self.is_receiving() {
            PowerState::Receiving
        } else {
            PowerState::Idle
        }
    }

    /// Key the transmitter until `until`. Receptions still in progress are
    /// lost; one ending exactly now is already complete.
    pub fn start_transmit(&mut self, now: SimTime, until: SimTime) -> Result<(), TxBusy> {
        if self.is_transmitting(now) {
            return Err(TxBusy);
        }
        self.tx_until = Some(until);
        for a in self.active.iter_mut().filter(|a| a.end > now) {
            a.fate = RxFate::HalfDuplex;
        }
        Ok(())
    }

    pub fn end_transmit(&mut self, now: SimTime) {
        if self.tx_until.is_some_and(|u| u <= now) {
            self.tx_until = None;
        }
    }

    /// An audible arrival occupying `[start, end)` begins.
    pub fn arrival_start(&mut self, id: u64, start: SimTime, end: SimTime, allocation: Rc<SpectrumAllocation>, snr_db: f64) {
        let snr_lin = 10f64.powf(snr_db / 10.0);
        let mut new = Active {
            id,
            start,
            end,
            allocation,
            snr_db,
            snr_lin,
            interference: 0.0,
            fate: if self.is_transmitting(start) { RxFate::HalfDuplex } else { RxFate::Clean },
        };
        let occ_new = Occupancy {
            allocation: &new.allocation,
            start,
            end,
        };
        let mut hits = Vec::new();
        for (i, a) in self.active.iter().enumerate() {
            let occ = Occupancy {
                allocation: &a.allocation,
                start: a.start,
                end: a.end,
            };
            if spectrum_overlaps(&occ, &occ_new) {
                hits.push(i);
            }
        }
        for i in hits {
            let a = &mut self.active[i];
            a.interference += snr_lin;
            new.interference += a.snr_lin;
            if !self.capture {
                if a.fate == RxFate::Clean {
                    a.fate = RxFate::Collided;
                }
                if new.fate == RxFate::Clean {
                    new.fate = RxFate::Collided;
                }
            }
        }
        self.active.push(new);
    }

    /// The arrival `id` ends; returns how it fared, or `None` if unknown.
    pub fn arrival_end(&mut self, id: u64) -> Option<RxOutcome> {
        let i = self.active.iter().position(|a| a.id == id)?;
        let a = self.active.swap_remove(i);
        Some(RxOutcome {
            fate: a.fate,
            snr_db: a.snr_db,
            interference: a.interference,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s).unwrap()
    }

    #[test]
    fn two_simultaneous_packets_collide() {
        let a = Rc::new(SpectrumAllocation::default());
        let mut rx = PhyReceiver::new(false);
        rx.arrival_start(1, t(0.0), t(1.0), a.clone(), 20.0);
        rx.arrival_start(2, t(0.0), t(1.0), a, 20.0);
        assert_eq!(rx.arrival_end(1).unwrap().fate, RxFate::Collided);
        assert_eq!(rx.arrival_end(2).unwrap().fate, RxFate::Collided);
        assert!(!rx.is_receiving());
    }

    #[test]
    fn capture_accumulates_interference() {
        let a = Rc::new(SpectrumAllocation::default());
        let mut rx = PhyReceiver::new(true);
        rx.arrival_start(1, t(0.0), t(1.0), a.clone(), 20.0);
        rx.arrival_start(2, t(0.5), t(1.5), a, 10.0);
        let strong = rx.arrival_end(1).unwrap();
        let weak = rx.arrival_end(2).unwrap();
        assert_eq!(strong.fate, RxFate::Clean);
        assert!((strong.sinr_db() - (20.0 - 10.0 * 11f64.log10())).abs() < 1e-12);
        assert!((weak.sinr_db() - (10.0 - 10.0 * 101f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn transmit_aborts_reception() {
        let a = Rc::new(SpectrumAllocation::default());
        let mut rx = PhyReceiver::new(false);
        rx.arrival_start(1, t(0.0), t(1.0), a.clone(), 20.0);
        rx.start_transmit(t(0.5), t(0.8)).unwrap();
        assert_eq!(rx.start_transmit(t(0.6), t(0.9)), Err(TxBusy));
        rx.arrival_start(2, t(0.7), t(2.0), a, 20.0);
        rx.end_transmit(t(0.8));
        assert!(!rx.is_transmitting(t(0.8)));
        assert_eq!(rx.arrival_end(1).unwrap().fate, RxFate::HalfDuplex);
        assert_eq!(rx.arrival_end(2).unwrap().fate, RxFate::HalfDuplex);
    }
}
