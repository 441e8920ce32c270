//! Transmission-loss models and propagation delay.

mod table;

pub use table::{synthetic_table, ArrivalTable, SyntheticTableParams};

use serde::{Deserialize, Serialize};

use crate::des::SimTime;
use crate::error::PropagationError;
use crate::geometry::Position;

pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;
/// Loss that wipes out a 170 dB source; reported for out-of-range links.
pub const OUT_OF_RANGE_LOSS_DB: f64 = 170.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationQuery {
    pub tx: Position,
    pub rx: Position,
    pub frequency_khz: f64,
    pub time: SimTime,
}

impl PropagationQuery {
    pub fn new(tx: Position, rx: Position, frequency_khz: f64) -> Self {
        PropagationQuery {
            tx,
            rx,
            frequency_khz,
            time: SimTime::ZERO,
        }
    }

    pub fn distance(&self) -> f64 {
        self.tx.distance(self.rx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmissionLoss {
    pub tl_db: f64,
    /// Seconds.
    pub delay: f64,
}

/// Thorp's absorption coefficient in dB/km, `f` in kHz.
pub fn thorp_absorption(f_khz: f64) -> f64 {
    let f2 = f_khz * f_khz;
    0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
}

pub fn propagation_delay(query: &PropagationQuery, sound_speed: f64) -> f64 {
    query.distance() / sound_speed
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeParams {
    pub threshold_m: f64,
    #[serde(default = "default_out_of_range")]
    pub out_of_range_db: f64,
}

fn default_out_of_range() -> f64 {
    OUT_OF_RANGE_LOSS_DB
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThorpParams {
    /// Constant offset, dB.
    #[serde(default)]
    pub a0_db: f64,
    /// Spreading exponent: 1 cylindrical, 1.5 practical, 2 spherical.
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_k() -> f64 {
    1.5
}

impl Default for ThorpParams {
    fn default() -> Self {
        ThorpParams { a0_db: 0.0, k: 1.5 }
    }
}

/// `distance <= threshold` is lossless, anything beyond loses the whole source.
pub fn range_model(query: &PropagationQuery, params: &RangeParams, sound_speed: f64) -> TransmissionLoss {
    let tl_db = if query.distance() <= params.threshold_m {
        0.0
    } else {
        params.out_of_range_db
    };
    TransmissionLoss {
        tl_db,
        delay: propagation_delay(query, sound_speed),
    }
}

/// `A0 + 10 k log10(d) + (d / 1000) alpha(f)` in dB, with the spreading
/// term floored at 1 m.
pub fn thorp_model(query: &PropagationQuery, params: &ThorpParams, sound_speed: f64) -> TransmissionLoss {
    let d = query.distance();
    let spreading = 10.0 * params.k * d.max(1.0).log10();
    let absorption = d / 1000.0 * thorp_absorption(query.frequency_khz);
    TransmissionLoss {
        tl_db: params.a0_db + spreading + absorption,
        delay: propagation_delay(query, sound_speed),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropagationModel {
    Range(RangeParams),
    Thorp(ThorpParams),
    Table(ArrivalTable),
}

impl PropagationModel {
    pub fn name(&self) -> &'static str {
        match self {
            PropagationModel::Range(_) => "range",
            PropagationModel::Thorp(_) => "thorp",
            PropagationModel::Table(_) => "table",
        }
    }
}

/// A configured propagation model with the scenario's sound speed.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub model: PropagationModel,
    pub sound_speed: f64,
}

impl Propagation {
    pub fn new(model: PropagationModel, sound_speed: f64) -> Result<Self, PropagationError> {
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(PropagationError::Config(format!("sound speed must be > 0, got {sound_speed}")));
        }
        match &model {
            PropagationModel::Range(p) if !(p.threshold_m > 0.0) => {
                return Err(PropagationError::Config("range threshold must be > 0".into()))
            }
            PropagationModel::Thorp(p) if !(p.k.is_finite() && p.a0_db.is_finite()) => {
                return Err(PropagationError::Config("thorp parameters must be finite".into()))
            }
            _ => {}
        }
        Ok(Propagation { model, sound_speed })
    }

    pub fn loss(&self, query: &PropagationQuery) -> Result<TransmissionLoss, PropagationError> {
        if !(query.frequency_khz > 0.0) {
            return Err(PropagationError::Config(format!(
                "frequency must be > 0, got {} kHz",
                query.frequency_khz
            )));
        }
        match &self.model {
            PropagationModel::Range(p) => Ok(range_model(query, p, self.sound_speed)),
            PropagationModel::Thorp(p) => Ok(thorp_model(query, p, self.sound_speed)),
            PropagationModel::Table(t) => t.lookup(query),
        }
    }

    pub fn delay(&self, query: &PropagationQuery) -> f64 {
        propagation_delay(query, self.sound_speed)
    }

    /// Largest distance at which the loss stays at or below `max_tl_db`
    /// (bisection for Thorp, threshold for the range model, table extent otherwise).
    pub fn max_range_for_loss(&self, max_tl_db: f64, frequency_khz: f64) -> f64 {
        match &self.model {
            PropagationModel::Range(p) => p.threshold_m,
            PropagationModel::Thorp(p) => {
                let tl = |d: f64| thorp_model(&PropagationQuery::new(Position::ORIGIN, Position::new(d, 0.0, 0.0), frequency_khz), p, self.sound_speed).tl_db;
                if tl(0.0) > max_tl_db {
                    return 0.0;
                }
                let mut hi = 1.0;
                while tl(hi) <= max_tl_db && hi < 1e8 {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tl(mid) <= max_tl_db {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
            PropagationModel::Table(t) => t.max_range(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(d: f64, f: f64) -> PropagationQuery {
        PropagationQuery::new(Position::new(0.0, 0.0, 50.0), Position::new(d, 0.0, 50.0), f)
    }

    /// The four absorption terms evaluated one by one.
    fn absorption_oracle(f: f64) -> f64 {
        let f2 = f * f;
        let t1 = 0.11 * f2 / (1.0 + f2);
        let t2 = 44.0 * f2 / (4100.0 + f2);
        let t3 = 2.75e-4 * f2;
        let t4 = 0.003;
        t1 + t2 + t3 + t4
    }

    #[test]
    fn absorption_at_10_khz() {
        // 0.108911 + 1.047619 + 0.0275 + 0.003
        assert!((thorp_absorption(10.0) - 1.1870300).abs() < 1e-6, "{}", thorp_absorption(10.0));
        for f in [1.0, 5.0, 10.0, 20.0, 50.0] {
            assert!((thorp_absorption(f) - absorption_oracle(f)).abs() < 1e-12);
        }
    }

    #[test]
    fn thorp_at_one_km() {
        let tl = thorp_model(&q(1000.0, 10.0), &ThorpParams::default(), 1500.0);
        assert!((tl.tl_db - (45.0 + absorption_oracle(10.0))).abs() < 1e-9);
        assert!((tl.delay - 1000.0 / 1500.0).abs() < 1e-15);
    }

    #[test]
    fn thorp_at_zero_distance_is_offset() {
        let p = ThorpParams { a0_db: 3.0, k: 2.0 };
        assert_eq!(thorp_model(&q(0.0, 10.0), &p, 1500.0).tl_db, 3.0);
    }

    #[test]
    fn range_step() {
        let p = RangeParams { threshold_m: 3000.0, out_of_range_db: OUT_OF_RANGE_LOSS_DB };
        assert_eq!(range_model(&q(2000.0, 10.0), &p, 1500.0).tl_db, 0.0);
        assert_eq!(range_model(&q(3000.0, 10.0), &p, 1500.0).tl_db, 0.0);
        assert_eq!(range_model(&q(4000.0, 10.0), &p, 1500.0).tl_db, 170.0);
    }

    #[test]
    fn delay_examples() {
        assert_eq!(propagation_delay(&q(1500.0, 10.0), 1500.0), 1.0);
        assert!((propagation_delay(&q(4000.0, 10.0), 1500.0) - 2.6666666666666665).abs() < 1e-15);
        assert_eq!(propagation_delay(&q(0.0, 10.0), 1500.0), 0.0);
    }

    #[test]
    fn zero_frequency_rejected() {
        let p = Propagation::new(PropagationModel::Thorp(ThorpParams::default()), 1500.0).unwrap();
        assert!(p.loss(&q(10.0, 0.0)).is_err());
        assert!(Propagation::new(PropagationModel::Thorp(ThorpParams::default()), 0.0).is_err());
    }

    #[test]
    fn max_range_inverts_thorp() {
        let p = Propagation::new(PropagationModel::Thorp(ThorpParams::default()), 1500.0).unwrap();
        let r = p.max_range_for_loss(60.0, 10.0);
        let tl = p.loss(&q(r, 10.0)).unwrap().tl_db;
        assert!((tl - 60.0).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_monotonicity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = ThorpParams::default();
        for _ in 0..100 {
            let f: f64 = rng.random_range(0.01..100.0);
            let d: f64 = rng.random_range(1.0..50_000.0);
            let h = 1e-3;
            assert!(thorp_model(&q(d + h, f), &p, 1500.0).tl_db > thorp_model(&q(d, f), &p, 1500.0).tl_db);
            assert!(thorp_absorption(f + h) > thorp_absorption(f));
        }
    }
}
