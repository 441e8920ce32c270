use serde::{Deserialize, Serialize};

use crate::error::MobilityError;
use crate::geometry::Position;

fn default_true() -> bool {
    true
}

/// Underwater glider: saw-tooth dive/climb between two depths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UgParams {
    /// Speed along the glide path, m/s.
    pub speed: f64,
    /// Horizontal heading; normalised on construction.
    pub heading: [f64; 2],
    pub depth_min: f64,
    pub depth_max: f64,
    /// Full vertex angle of the zigzag, degrees.
    pub opening_angle: f64,
    /// Whether the first leg dives (depth increasing).
    #[serde(default = "default_true")]
    pub descending: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Glider {
    start: Position,
    heading: (f64, f64),
    horizontal_speed: f64,
    vertical_speed: f64,
    depth_min: f64,
    band: f64,
    /// Position of `start.z` on the unfolded depth line, in `[0, 2*band)`.
    phase: f64,
}

impl Glider {
    pub fn new(params: &UgParams, start: Position) -> Result<Self, MobilityError> {
        let p = params;
        if !(p.speed > 0.0 && p.speed.is_finite()) {
            return Err(MobilityError::Config(format!("glider speed must be > 0, got {}", p.speed)));
        }
        if !(p.depth_min > 0.0 && p.depth_min < p.depth_max && p.depth_max.is_finite()) {
            return Err(MobilityError::Config(format!(
                "glider depth band must satisfy 0 < depth_min < depth_max, got [{}, {}]",
                p.depth_min, p.depth_max
            )));
        }
        if !(p.opening_angle > 0.0 && p.opening_angle < 180.0) {
            return Err(MobilityError::Config(format!(
                "opening angle must lie in (0, 180) degrees, got {}",
                p.opening_angle
            )));
        }
        let norm = p.heading[0].hypot(p.heading[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(MobilityError::Config("glider heading must be a non-zero vector".into()));
        }
        if !(start.z >= p.depth_min && start.z <= p.depth_max) {
            return Err(MobilityError::Config(format!(
                "glider start depth {} outside [{}, {}]",
                start.z, p.depth_min, p.depth_max
            )));
        }
        let half = (p.opening_angle / 2.0).to_radians();
        let band = p.depth_max - p.depth_min;
        let offset = start.z - p.depth_min;
        let phase = if p.descending { offset } else { (2.0 * band - offset) % (2.0 * band) };
        Ok(Glider {
            start,
            heading: (p.heading[0] / norm, p.heading[1] / norm),
            horizontal_speed: p.speed * half.cos(),
            vertical_speed: p.speed * half.sin(),
            depth_min: p.depth_min,
            band,
            phase,
        })
    }

    /// Closed-form position: straight horizontal track plus a triangle wave in depth.
    pub fn position(&self, t: f64) -> Position {
        let t = t.max(0.0);
        let along = self.horizontal_speed * t;
        let period = 2.0 * self.band;
        let m = (self.phase + self.vertical_speed * t).rem_euclid(period);
        let depth = if m <= self.band { m } else { period - m };
        Position::new(
            self.start.x + along * self.heading.0,
            self.start.y + along * self.heading.1,
            (self.depth_min + depth).clamp(self.depth_min, self.depth_min + self.band),
        )
    }

    pub fn max_speed(&self) -> f64 {
        self.horizontal_speed.hypot(self.vertical_speed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(angle: f64) -> UgParams {
        UgParams {
            speed: 1.0,
            heading: [1.0, 0.0],
            depth_min: 10.0,
            depth_max: 30.0,
            opening_angle: angle,
            descending: true,
        }
    }

    #[test]
    fn identity_at_zero() {
        let start = Position::new(5.0, -3.0, 17.0);
        let g = Glider::new(&params(60.0), start).unwrap();
        assert_eq!(g.position(0.0), start);
        let mut up = params(60.0);
        up.descending = false;
        assert_eq!(Glider::new(&up, start).unwrap().position(0.0), start);
    }

    #[test]
    fn reaches_bottom_after_one_leg() {
        // Oracle: z(t) = 10 + tri(sin45 * t; 20); bottom at t = 20 / sin45.
        let g = Glider::new(&params(90.0), Position::new(0.0, 0.0, 10.0)).unwrap();
        let t_bottom = 20.0 / 45f64.to_radians().sin();
        assert!((t_bottom - 28.284271247461902).abs() < 1e-12);
        assert!((g.position(t_bottom).z - 30.0).abs() < 1e-9);
        assert!((g.position(2.0 * t_bottom).z - 10.0).abs() < 1e-9);
        assert!((g.position(t_bottom / 2.0).z - 20.0).abs() < 1e-9);
        assert!((g.position(t_bottom).x - t_bottom * 45f64.to_radians().cos()).abs() < 1e-9);
    }

    #[test]
    fn ascending_start_climbs_first() {
        let mut p = params(90.0);
        p.descending = false;
        let g = Glider::new(&p, Position::new(0.0, 0.0, 20.0)).unwrap();
        assert!(g.position(1.0).z < 20.0);
    }

    #[test]
    fn start_outside_band_rejected() {
        assert!(Glider::new(&params(90.0), Position::new(0.0, 0.0, 5.0)).is_err());
        assert!(Glider::new(&params(180.0), Position::new(0.0, 0.0, 15.0)).is_err());
        let mut p = params(90.0);
        p.depth_min = 0.0;
        assert!(Glider::new(&p, Position::new(0.0, 0.0, 15.0)).is_err());
    }
}
