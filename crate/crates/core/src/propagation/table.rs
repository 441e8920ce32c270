//! Precomputed arrival tables.
//!
//! CSV layout, one row per grid point, optional `# key=value` metadata lines
//! before the header:
//!
//! ```text
//! # frequency_khz=10
//! # environment=synthetic south pacific
//! range_m,tx_depth_m,rx_depth_m,tl_db,delay_s
//! 0,10,10,0,0.000006
//! ```
//!
//! The rows must cover the full Cartesian grid of the three axes. Queries are
//! interpolated trilinearly in (horizontal range, tx depth, rx depth); points
//! outside the grid hull are an error.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{thorp_absorption, PropagationQuery, TransmissionLoss};
use crate::error::PropagationError;

/// Relative frequency mismatch tolerated between query and table.
pub const FREQUENCY_TOLERANCE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalTable {
    pub frequency_khz: Option<f64>,
    pub environment: Option<String>,
    ranges: Vec<f64>,
    tx_depths: Vec<f64>,
    rx_depths: Vec<f64>,
    /// `[range][tx][rx]`, row-major.
    tl_db: Vec<f64>,
    delay_s: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    range_m: f64,
    tx_depth_m: f64,
    rx_depth_m: f64,
    tl_db: f64,
    delay_s: f64,
}

fn axis(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Index of the lower grid point and the interpolation weight of the upper one.
fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (first, last) = (axis[0], *axis.last().expect("non-empty axis"));
    if !(x >= first && x <= last) {
        return None;
    }
    if axis.len() == 1 {
        return Some((0, 0.0));
    }
    let hi = axis.partition_point(|a| *a < x).clamp(1, axis.len() - 1);
    let lo = hi - 1;
    Some((lo, (x - axis[lo]) / (axis[hi] - axis[lo])))
}

impl ArrivalTable {
    pub fn from_rows(
        rows: &[(f64, f64, f64, f64, f64)],
        frequency_khz: Option<f64>,
        environment: Option<String>,
    ) -> Result<Self, PropagationError> {
        if rows.is_empty() {
            return Err(PropagationError::Table("table has no rows".into()));
        }
        if rows.iter().any(|r| ![r.0, r.1, r.2, r.3, r.4].iter().all(|v| v.is_finite())) {
            return Err(PropagationError::Table("table contains non-finite values".into()));
        }
        let ranges = axis(rows.iter().map(|r| r.0));
        let tx_depths = axis(rows.iter().map(|r| r.1));
        let rx_depths = axis(rows.iter().map(|r| r.2));
        let n = ranges.len() * tx_depths.len() * rx_depths.len();
        if rows.len() != n {
            return Err(PropagationError::Table(format!(
                "expected a full {}x{}x{} grid ({n} rows), found {} rows",
                ranges.len(),
                tx_depths.len(),
                rx_depths.len(),
                rows.len()
            )));
        }
        let mut tl_db = vec![f64::NAN; n];
        let mut delay_s = vec![f64::NAN; n];
        let pos = |a: &[f64], x: f64| a.binary_search_by(|v| v.total_cmp(&x)).expect("value on axis");
        for r in rows {
            let i = (pos(&ranges, r.0) * tx_depths.len() + pos(&tx_depths, r.1)) * rx_depths.len() + pos(&rx_depths, r.2);
            if !tl_db[i].is_nan() {
                return Err(PropagationError::Table(format!(
                    "duplicate grid point range={} tx={} rx={}",
                    r.0, r.1, r.2
                )));
            }
            tl_db[i] = r.3;
            delay_s[i] = r.4;
        }
        Ok(ArrivalTable {
            frequency_khz,
            environment,
            ranges,
            tx_depths,
            rx_depths,
            tl_db,
            delay_s,
        })
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self, PropagationError> {
        let mut meta = BTreeMap::new();
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            let n = input
                .read_line(&mut line)
                .map_err(|e| PropagationError::Table(format!("read error: {e}")))?;
            if n == 0 {
                break;
            }
            match line.trim().strip_prefix('#') {
                Some(comment) => {
                    if let Some((k, v)) = comment.split_once('=') {
                        meta.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
                None => body.push_str(&line),
            }
        }
        let frequency_khz = match meta.get("frequency_khz") {
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| PropagationError::Table(format!("bad frequency_khz {v:?}")))?,
            ),
            None => None,
        };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let r = rec.map_err(|e| PropagationError::Table(format!("row {}: {e}", i + 1)))?;
            rows.push((r.range_m, r.tx_depth_m, r.rx_depth_m, r.tl_db, r.delay_s));
        }
        Self::from_rows(&rows, frequency_khz, meta.get("environment").cloned())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PropagationError> {
        let f = std::fs::File::open(path)
            .map_err(|e| PropagationError::Table(format!("cannot open {}: {e}", path.display())))?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if let Some(f) = self.frequency_khz {
            writeln!(out, "# frequency_khz={f}")?;
        }
        if let Some(e) = &self.environment {
            writeln!(out, "# environment={e}")?;
        }
        writeln!(out, "range_m,tx_depth_m,rx_depth_m,tl_db,delay_s")?;
        for (ri, r) in self.ranges.iter().enumerate() {
            for (ti, t) in self.tx_depths.iter().enumerate() {
                for (xi, x) in self.rx_depths.iter().enumerate() {
                    let i = self.index(ri, ti, xi);
                    writeln!(out, "{r},{t},{x},{:.4},{:.7}", self.tl_db[i], self.delay_s[i])?;
                }
            }
        }
        Ok(())
    }

    fn index(&self, r: usize, t: usize, x: usize) -> usize {
        (r * self.tx_depths.len() + t) * self.rx_depths.len() + x
    }

    pub fn max_range(&self) -> f64 {
        *self.ranges.last().expect("non-empty axis")
    }

    pub fn len(&self) -> usize {
        self.tl_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tl_db.is_empty()
    }

    /// Trilinear interpolation of (tl, delay) at a grid-space point.
    pub fn interpolate(&self, range: f64, tx_depth: f64, rx_depth: f64) -> Result<TransmissionLoss, PropagationError> {
        let out = || PropagationError::OutOfCoverage {
            range,
            tx_depth,
            rx_depth,
        };
        let (r0, wr) = bracket(&self.ranges, range).ok_or_else(out)?;
        let (t0, wt) = bracket(&self.tx_depths, tx_depth).ok_or_else(out)?;
        let (x0, wx) = bracket(&self.rx_depths, rx_depth).ok_or_else(out)?;
        let step = |len: usize, i: usize| usize::from(i + 1 < len);
        let (dr, dt, dx) = (
            step(self.ranges.len(), r0),
            step(self.tx_depths.len(), t0),
            step(self.rx_depths.len(), x0),
        );
        let mut tl = 0.0;
        let mut delay = 0.0;
        for (ir, fr) in [(0, 1.0 - wr), (dr, wr)] {
            for (it, ft) in [(0, 1.0 - wt), (dt, wt)] {
                for (ix, fx) in [(0, 1.0 - wx), (dx, wx)] {
                    let w = fr * ft * fx;
                    if w == 0.0 {
                        continue;
                    }
                    let i = self.index(r0 + ir, t0 + it, x0 + ix);
                    tl += w * self.tl_db[i];
                    delay += w * self.delay_s[i];
                }
            }
        }
        Ok(TransmissionLoss { tl_db: tl, delay })
    }

    /// A table computed for one frequency only serves queries near it.
    pub fn check_frequency(&self, frequency_khz: f64) -> Result<(), PropagationError> {
        match self.frequency_khz {
            Some(f) if (frequency_khz - f).abs() > FREQUENCY_TOLERANCE * f => Err(PropagationError::FrequencyMismatch {
                query_khz: frequency_khz,
                table_khz: f,
            }),
            _ => Ok(()),
        }
    }

    pub fn lookup(&self, query: &PropagationQuery) -> Result<TransmissionLoss, PropagationError> {
        self.check_frequency(query.frequency_khz)?;
        self.interpolate(query.tx.horizontal_distance(query.rx), query.tx.z, query.rx.z)
    }
}

/// Parameters of the synthetic deep-water table generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTableParams {
    pub frequency_khz: f64,
    pub max_range_m: f64,
    pub range_step_m: f64,
    pub depths_m: Vec<f64>,
}

impl Default for SyntheticTableParams {
    fn default() -> Self {
        SyntheticTableParams {
            frequency_khz: 10.0,
            max_range_m: 10_000.0,
            range_step_m: 250.0,
            depths_m: vec![10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0],
        }
    }
}

/// Canonical Munk sound-speed profile (axis at 1300 m).
pub fn munk_sound_speed(depth: f64) -> f64 {
    let eta = 2.0 * (depth - 1300.0) / 1300.0;
    1500.0 * (1.0 + 0.00737 * (eta + (-eta).exp() - 1.0))
}

/// Deterministic deep-ocean table: Munk profile averaged along the straight
/// path for the delay, spherical-to-cylindrical spreading with a 1 km
/// transition plus Thorp absorption for the loss, and a bounded
/// surface-interference ripple that grows with source and receiver depth.
pub fn synthetic_table(params: &SyntheticTableParams) -> Result<ArrivalTable, PropagationError> {
    if !(params.range_step_m > 0.0 && params.max_range_m >= 0.0 && !params.depths_m.is_empty()) {
        return Err(PropagationError::Config("synthetic table needs a positive step and depths".into()));
    }
    if params.depths_m.iter().any(|d| !(*d >= 0.0 && *d <= 1000.0)) {
        return Err(PropagationError::Config("synthetic table depths must lie in [0, 1000] m".into()));
    }
    let n = (params.max_range_m / params.range_step_m).round() as usize;
    let alpha = thorp_absorption(params.frequency_khz);
    let transition = 1000.0;
    let mut rows = Vec::new();
    for i in 0..=n {
        let range = i as f64 * params.range_step_m;
        for &zt in &params.depths_m {
            for &zr in &params.depths_m {
                let slant = range.hypot(zt - zr).max(1.0);
                let samples = 16;
                let c = (0..samples)
                    .map(|s| munk_sound_speed(zt + (zr - zt) * (s as f64 + 0.5) / samples as f64))
                    .sum::<f64>()
                    / samples as f64;
                let delay = range.hypot(zt - zr) / c;
                let spreading = if slant <= transition {
                    20.0 * slant.log10()
                } else {
                    20.0 * transition.log10() + 10.0 * (slant / transition).log10()
                };
                let lloyd = 3.0 * (1.0 - (2.0 * std::f64::consts::PI * zt * zr / (slant * 50.0)).cos()) * (-slant / 5000.0).exp();
                let tl = spreading + alpha * slant / 1000.0 + lloyd;
                rows.push((range, zt, zr, (tl * 1e4).round() / 1e4, (delay * 1e7).round() / 1e7));
            }
        }
    }
    ArrivalTable::from_rows(
        &rows,
        Some(params.frequency_khz),
        Some("synthetic deep water, Munk profile".into()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;

    fn tiny() -> ArrivalTable {
        // tl = range/100 + tx + 2 rx, delay = range/1500: linear, so trilinear is exact.
        let mut rows = Vec::new();
        for r in [0.0, 1000.0, 2000.0] {
            for t in [10.0, 20.0] {
                for x in [10.0, 30.0] {
                    rows.push((r, t, x, r / 100.0 + t + 2.0 * x, r / 1500.0));
                }
            }
        }
        ArrivalTable::from_rows(&rows, Some(10.0), None).unwrap()
    }

    #[test]
    fn grid_points_are_exact() {
        let t = tiny();
        let v = t.interpolate(1000.0, 20.0, 30.0).unwrap();
        assert_eq!(v.tl_db, 10.0 + 20.0 + 60.0);
        let v = t.interpolate(2000.0, 10.0, 10.0).unwrap();
        assert_eq!(v.tl_db, 20.0 + 10.0 + 20.0);
    }

    #[test]
    fn interior_matches_linear_oracle() {
        let t = tiny();
        let v = t.interpolate(1234.0, 13.0, 27.5).unwrap();
        assert!((v.tl_db - (12.34 + 13.0 + 55.0)).abs() < 1e-9);
        assert!((v.delay - 1234.0 / 1500.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_hull_is_an_error() {
        let t = tiny();
        assert!(matches!(t.interpolate(2500.0, 15.0, 15.0), Err(PropagationError::OutOfCoverage { .. })));
        assert!(t.interpolate(100.0, 5.0, 15.0).is_err());
        assert!(t.interpolate(100.0, 15.0, 31.0).is_err());
    }

    #[test]
    fn frequency_mismatch() {
        let t = tiny();
        let q = PropagationQuery::new(Position::new(0.0, 0.0, 10.0), Position::new(500.0, 0.0, 10.0), 12.0);
        assert!(matches!(t.lookup(&q), Err(PropagationError::FrequencyMismatch { .. })));
        let q = PropagationQuery { frequency_khz: 10.5, ..q };
        assert!(t.lookup(&q).is_ok());
    }

    #[test]
    fn incomplete_grid_rejected() {
        let rows = [(0.0, 10.0, 10.0, 1.0, 0.0), (100.0, 10.0, 10.0, 1.0, 0.1), (100.0, 20.0, 10.0, 1.0, 0.1)];
        assert!(ArrivalTable::from_rows(&rows, None, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = tiny();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = ArrivalTable::read(buf.as_slice()).unwrap();
        assert_eq!(back.frequency_khz, Some(10.0));
        let a = t.interpolate(777.0, 11.0, 12.0).unwrap();
        let b = back.interpolate(777.0, 11.0, 12.0).unwrap();
        assert!((a.tl_db - b.tl_db).abs() < 1e-3);
    }

    #[test]
    fn munk_axis_minimum() {
        assert!((munk_sound_speed(1300.0) - 1500.0).abs() < 1e-12);
        assert!(munk_sound_speed(0.0) < 1550.0);
    }

    #[test]
    fn synthetic_delays_respect_max_sound_speed() {
        let t = synthetic_table(&SyntheticTableParams::default()).unwrap();
        for (ri, r) in t.ranges.iter().enumerate() {
            for ti in 0..t.tx_depths.len() {
                for xi in 0..t.rx_depths.len() {
                    let i = t.index(ri, ti, xi);
                    assert!(t.delay_s[i] >= r / 1550.0);
                    assert!(t.tl_db[i].is_finite());
                }
            }
        }
    }
}
