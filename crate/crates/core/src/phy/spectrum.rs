//! Subcarrier-level spectrum occupancy and overlap tests.

use serde::{Deserialize, Serialize};

use crate::des::SimTime;

/// Bit set of occupied subcarrier indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SubcarrierSet {
    words: Vec<u64>,
}

impl SubcarrierSet {
    pub fn empty(n: usize) -> Self {
        SubcarrierSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn all(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        let w = i / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn intersects(&self, other: &SubcarrierSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(wi, w)| (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| wi * 64 + b))
    }
}

/// Inclusive index ranges, the configuration form of a subcarrier set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubcarrierSpec {
    /// `"all"`.
    Named(String),
    Ranges(Vec<[usize; 2]>),
}

impl Default for SubcarrierSpec {
    fn default() -> Self {
        SubcarrierSpec::Named("all".into())
    }
}

impl SubcarrierSpec {
    pub fn resolve(&self, n: usize) -> Result<SubcarrierSet, String> {
        match self {
            SubcarrierSpec::Named(s) if s == "all" => Ok(SubcarrierSet::all(n)),
            SubcarrierSpec::Named(s) => Err(format!("unknown subcarrier set {s:?}; use \"all\" or [[first, last], ...]")),
            SubcarrierSpec::Ranges(ranges) => {
                let mut set = SubcarrierSet::empty(n);
                for [a, b] in ranges {
                    if a > b || *b >= n {
                        return Err(format!("subcarrier range [{a}, {b}] invalid for {n} subcarriers"));
                    }
                    for i in *a..=*b {
                        set.insert(i);
                    }
                }
                if set.is_empty() {
                    return Err("subcarrier set is empty".into());
                }
                Ok(set)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumAllocation {
    pub band_start_hz: f64,
    pub total_bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub subcarriers: SubcarrierSet,
    /// Idle padding after each transmission, seconds.
    pub guard_time: f64,
}

impl Default for SpectrumAllocation {
    /// 8-12 kHz split into 64 subcarriers, all occupied, no guard.
    fn default() -> Self {
        SpectrumAllocation {
            band_start_hz: 8000.0,
            total_bandwidth_hz: 4000.0,
            num_subcarriers: 64,
            subcarrier_spacing_hz: 62.5,
            subcarriers: SubcarrierSet::all(64),
            guard_time: 0.0,
        }
    }
}

impl SpectrumAllocation {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.band_start_hz, self.total_bandwidth_hz, self.subcarrier_spacing_hz, self.guard_time]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.band_start_hz < 0.0 || self.total_bandwidth_hz <= 0.0 || self.subcarrier_spacing_hz <= 0.0 {
            return Err("band start must be >= 0 and bandwidth, spacing > 0".into());
        }
        if self.num_subcarriers == 0 {
            return Err("at least one subcarrier is required".into());
        }
        if self.num_subcarriers as f64 * self.subcarrier_spacing_hz > self.total_bandwidth_hz * (1.0 + 1e-12) {
            return Err(format!(
                "{} subcarriers x {} Hz exceed the {} Hz band",
                self.num_subcarriers, self.subcarrier_spacing_hz, self.total_bandwidth_hz
            ));
        }
        if self.subcarriers.max_index().is_some_and(|m| m >= self.num_subcarriers) {
            return Err("subcarrier index out of range".into());
        }
        if self.subcarriers.is_empty() {
            return Err("subcarrier set is empty".into());
        }
        if self.guard_time < 0.0 {
            return Err("guard time must be >= 0".into());
        }
        Ok(())
    }

    pub fn centre_frequency_khz(&self) -> f64 {
        (self.band_start_hz + self.total_bandwidth_hz / 2.0) / 1000.0
    }

    pub fn band_end_hz(&self) -> f64 {
        self.band_start_hz + self.total_bandwidth_hz
    }

    pub fn band_overlaps(&self, other: &SpectrumAllocation) -> bool {
        self.band_start_hz < other.band_end_hz() && other.band_start_hz < self.band_end_hz()
    }
}

/// An allocation held over `[start, end)`; `end` already includes the guard time.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy<'a> {
    pub allocation: &'a SpectrumAllocation,
    pub start: SimTime,
    pub end: SimTime,
}

impl<'a> Occupancy<'a> {
    /// Occupancy of a transmission with `airtime` seconds on air, padded by the guard time.
    pub fn new(allocation: &'a SpectrumAllocation, start: SimTime, airtime: f64) -> Self {
        let span = SimTime::from_secs(airtime + allocation.guard_time).expect("non-negative airtime");
        Occupancy {
            allocation,
            start,
            end: start + span,
        }
    }
}

/// Two occupancies collide iff their time intervals intersect, their bands
/// overlap and their subcarrier sets share an index.
pub fn spectrum_overlaps(a: &Occupancy<'_>, b: &Occupancy<'_>) -> bool {
    a.start < b.end
        && b.start < a.end
        && a.allocation.band_overlaps(b.allocation)
        && a.allocation.subcarriers.intersects(&b.allocation.subcarriers)
}
