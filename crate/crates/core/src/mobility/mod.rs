//! Position-over-time models. Every model is a pure function of time, so
//! positions can be queried lazily and in any order.

mod auv;
mod glider;
mod wave;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use crate::geometry::Position;
pub use auv::{parse_instructions, AuvInstruction, AuvPath};
pub use glider::{Glider, UgParams};
pub use wave::{WaveComponent, WaveGlider, WaveModel, WgParams};

use crate::error::MobilityError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuvSpec {
    /// Initial heading, degrees counter-clockwise from +x.
    #[serde(default)]
    pub yaw_deg: f64,
    /// Instruction program inline, in the instruction-file syntax.
    #[serde(default)]
    pub program: Option<String>,
    /// Path to an instruction file, relative to the configuration file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

/// Serializable mobility configuration, tagged by `model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum MobilitySpec {
    Static {},
    Ug(UgParams),
    Wg(WgParams),
    Auv(AuvSpec),
}

impl Default for MobilitySpec {
    fn default() -> Self {
        MobilitySpec::Static {}
    }
}

impl MobilitySpec {
    /// Instantiate at `start`; relative instruction files resolve against `base_dir`.
    pub fn build(&self, start: Position, base_dir: Option<&Path>) -> Result<Mobility, MobilityError> {
        if !start.is_finite() {
            return Err(MobilityError::Config("start position must be finite".into()));
        }
        Ok(match self {
            MobilitySpec::Static {} => Mobility::Static(start),
            MobilitySpec::Ug(p) => Mobility::Glider(Glider::new(p, start)?),
            MobilitySpec::Wg(p) => Mobility::WaveGlider(WaveGlider::new(p, start)?),
            MobilitySpec::Auv(spec) => {
                let text = match (&spec.program, &spec.file) {
                    (Some(p), None) => p.clone(),
                    (None, Some(f)) => {
                        let path = match base_dir {
                            Some(dir) if f.is_relative() => dir.join(f),
                            _ => f.clone(),
                        };
                        std::fs::read_to_string(&path).map_err(|e| {
                            MobilityError::Config(format!("cannot read instruction file {}: {e}", path.display()))
                        })?
                    }
                    (None, None) => String::new(),
                    (Some(_), Some(_)) => {
                        return Err(MobilityError::Config("give either `program` or `file`, not both".into()))
                    }
                };
                let instrs = parse_instructions(&text)?;
                Mobility::Auv(AuvPath::new(start, spec.yaw_deg.to_radians(), &instrs)?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mobility {
    Static(Position),
    Glider(Glider),
    WaveGlider(WaveGlider),
    Auv(AuvPath),
}

impl Mobility {
    /// Position `t` seconds after the model's start.
    pub fn position(&self, t: f64) -> Position {
        match self {
            Mobility::Static(p) => *p,
            Mobility::Glider(g) => g.position(t),
            Mobility::WaveGlider(w) => w.position(t),
            Mobility::Auv(a) => a.position(t),
        }
    }

    /// Bound on speed, used for continuity checks.
    pub fn max_speed(&self) -> f64 {
        match self {
            Mobility::Static(_) => 0.0,
            Mobility::Glider(g) => g.max_speed(),
            Mobility::WaveGlider(w) => w.max_speed(),
            Mobility::Auv(a) => a.max_speed(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Mobility::Static(_))
    }
}

/// A model anchored at an absolute simulation time.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMobility {
    pub model: Mobility,
    pub epoch: f64,
}

impl NodeMobility {
    pub fn new(model: Mobility) -> Self {
        NodeMobility { model, epoch: 0.0 }
    }

    pub fn starting_at(model: Mobility, epoch: f64) -> Self {
        NodeMobility { model, epoch }
    }

    pub fn position(&self, now: f64) -> Position {
        self.model.position(now - self.epoch)
    }
}

/// Sample `model` at `0, dt, 2dt, ...` up to and including `duration`.
pub fn sample_trajectory(model: &Mobility, duration: f64, dt: f64) -> Vec<(f64, Position)> {
    assert!(dt > 0.0, "dt must be positive");
    let n = (duration / dt + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            (t, model.position(t))
        })
        .collect()
}

pub fn write_trajectory_csv<W: Write>(out: W, samples: &[(f64, Position)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "z"])?;
    for (t, p) in samples {
        w.write_record(&[t.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn default_dt() -> f64 {
    1.0
}

/// Input of the `trajectory` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub start: Position,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub mobility: MobilitySpec,
}
