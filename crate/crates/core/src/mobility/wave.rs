use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::MobilityError;
use crate::geometry::Position;

const GRAVITY: f64 = 9.81;

/// One directional sinusoid of the sea surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveComponent {
    /// Metres.
    pub amplitude: f64,
    /// rad/s.
    pub angular_frequency: f64,
    /// rad/m, horizontal.
    pub wavenumber: [f64; 2],
    #[serde(default)]
    pub phase: f64,
}

/// Sea-surface elevation as a sum of sinusoids:
/// `eta(x, y, t) = sum a_i cos(k_i . (x, y) - w_i t + phi_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveModel {
    pub components: Vec<WaveComponent>,
}

impl Default for WaveModel {
    /// A 0.5 m swell with an 8 s period travelling along +x, wavenumber from
    /// the deep-water dispersion relation.
    fn default() -> Self {
        let omega = 2.0 * PI / 8.0;
        WaveModel {
            components: vec![WaveComponent {
                amplitude: 0.5,
                angular_frequency: omega,
                wavenumber: [omega * omega / GRAVITY, 0.0],
                phase: 0.0,
            }],
        }
    }
}

impl WaveModel {
    pub fn validate(&self) -> Result<(), MobilityError> {
        for (i, c) in self.components.iter().enumerate() {
            let finite = c.amplitude.is_finite()
                && c.angular_frequency.is_finite()
                && c.wavenumber.iter().all(|k| k.is_finite())
                && c.phase.is_finite();
            if !finite || c.amplitude < 0.0 {
                return Err(MobilityError::Config(format!(
                    "wave component {i}: amplitude must be >= 0 and all terms finite"
                )));
            }
        }
        Ok(())
    }

    pub fn elevation(&self, x: f64, y: f64, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.amplitude * (c.wavenumber[0] * x + c.wavenumber[1] * y - c.angular_frequency * t + c.phase).cos())
            .sum()
    }

    pub fn max_elevation(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude).sum()
    }
}

fn default_surface_speed() -> f64 {
    1.0
}

/// Wave glider: straight surface track, float riding the waves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WgParams {
    #[serde(default = "default_surface_speed")]
    pub surface_speed: f64,
    pub heading: [f64; 2],
    #[serde(default)]
    pub wave: WaveModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveGlider {
    start: Position,
    velocity: (f64, f64),
    wave: WaveModel,
}

impl WaveGlider {
    pub fn new(params: &WgParams, start: Position) -> Result<Self, MobilityError> {
        if !(params.surface_speed >= 0.0 && params.surface_speed.is_finite()) {
            return Err(MobilityError::Config(format!(
                "wave glider speed must be >= 0, got {}",
                params.surface_speed
            )));
        }
        params.wave.validate()?;
        let norm = params.heading[0].hypot(params.heading[1]);
        let velocity = if norm > 0.0 {
            (
                params.surface_speed * params.heading[0] / norm,
                params.surface_speed * params.heading[1] / norm,
            )
        } else if params.surface_speed == 0.0 {
            (0.0, 0.0)
        } else {
            return Err(MobilityError::Config("wave glider heading must be a non-zero vector".into()));
        };
        Ok(WaveGlider {
            start,
            velocity,
            wave: params.wave.clone(),
        })
    }

    /// Depth follows the sea surface, so `z = -eta`.
    pub fn position(&self, t: f64) -> Position {
        let t = t.max(0.0);
        let x = self.start.x + self.velocity.0 * t;
        let y = self.start.y + self.velocity.1 * t;
        Position::new(x, y, -self.wave.elevation(x, y, t))
    }

    pub fn wave(&self) -> &WaveModel {
        &self.wave
    }

    /// Upper bound on |d position / dt|.
    pub fn max_speed(&self) -> f64 {
        let v = self.velocity.0.hypot(self.velocity.1);
        let dz: f64 = self
            .wave
            .components
            .iter()
            .map(|c| c.amplitude * (c.angular_frequency.abs() + c.wavenumber[0].hypot(c.wavenumber[1]) * v))
            .sum();
        v + dz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(wave: WaveModel, speed: f64) -> WgParams {
        WgParams {
            surface_speed: speed,
            heading: [0.0, 1.0],
            wave,
        }
    }

    #[test]
    fn flat_sea_is_a_straight_surface_track() {
        let flat = WaveModel {
            components: vec![WaveComponent {
                amplitude: 0.0,
                angular_frequency: 1.0,
                wavenumber: [0.1, 0.0],
                phase: 0.0,
            }],
        };
        let wg = WaveGlider::new(&params(flat, 2.0), Position::ORIGIN).unwrap();
        let p = wg.position(10.0);
        assert_eq!((p.x, p.y), (0.0, 20.0));
        assert_eq!(p.z.abs(), 0.0);
    }

    #[test]
    fn single_standing_component_gives_minus_cos() {
        let wave = WaveModel {
            components: vec![WaveComponent {
                amplitude: 1.0,
                angular_frequency: 1.0,
                wavenumber: [0.0, 0.0],
                phase: 0.0,
            }],
        };
        let wg = WaveGlider::new(&params(wave, 0.0), Position::ORIGIN).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0, 3.14, 10.0] {
            assert!((wg.position(t).z + f64::cos(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn default_swell() {
        let w = WaveModel::default();
        assert_eq!(w.max_elevation(), 0.5);
        assert!((w.components[0].angular_frequency - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn negative_amplitude_rejected() {
        let wave = WaveModel {
            components: vec![WaveComponent {
                amplitude: -1.0,
                angular_frequency: 1.0,
                wavenumber: [0.0, 0.0],
                phase: 0.0,
            }],
        };
        assert!(WaveGlider::new(&params(wave, 1.0), Position::ORIGIN).is_err());
    }
}
