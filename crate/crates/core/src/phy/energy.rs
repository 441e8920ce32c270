use serde::Serialize;

use crate::des::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerState {
    Idle,
    Receiving,
    Transmitting,
}

/// Time spent per modem state, accumulated in integer nanoseconds so the
/// three buckets partition the run exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMeter {
    state: PowerState,
    since: SimTime,
    nanos: [u64; 3],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub tx_time: f64,
    pub rx_time: f64,
    pub idle_time: f64,
    pub joules: f64,
}

impl Default for EnergyMeter {
    fn default() -> Self {
        EnergyMeter {
            state: PowerState::Idle,
            since: SimTime::ZERO,
            nanos: [0; 3],
        }
    }
}

impl EnergyMeter {
    fn bucket(state: PowerState) -> usize {
        match state {
            PowerState::Idle => 0,
            PowerState::Receiving => 1,
            PowerState::Transmitting => 2,
        }
    }

    /// Close the current interval at `now` and continue in `state`.
    pub fn set(&mut self, now: SimTime, state: PowerState) {
        let elapsed = now.saturating_sub(self.since).as_nanos();
        self.nanos[Self::bucket(self.state)] += elapsed;
        self.since = self.since.max(now);
        self.state = state;
    }

    pub fn state(&self) -> PowerState {
        self.state
    }

    /// Totals up to `end`, without mutating the meter.
    pub fn report(&self, end: SimTime, tx_w: f64, rx_w: f64, idle_w: f64) -> EnergyReport {
        let mut nanos = self.nanos;
        nanos[Self::bucket(self.state)] += end.saturating_sub(self.since).as_nanos();
        let secs = |n: u64| n as f64 * 1e-9;
        let (idle, rx, tx) = (secs(nanos[0]), secs(nanos[1]), secs(nanos[2]));
        EnergyReport {
            tx_time: tx,
            rx_time: rx,
            idle_time: idle,
            joules: tx * tx_w + rx * rx_w + idle * idle_w,
        }
    }

    pub fn total_nanos(&self, end: SimTime) -> u64 {
        self.nanos.iter().sum::<u64>() + end.saturating_sub(self.since).as_nanos()
    }
}
