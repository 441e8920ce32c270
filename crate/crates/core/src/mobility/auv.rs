//! Instruction-driven AUV motion.
//!
//! Instruction file: one instruction per line, `#` starts a comment.
//!
//! ```text
//! LINE  vx vy vz duration       # world-frame velocity (m/s), seconds
//! CURVE v omega pitch duration  # m/s, rad/s (positive turns left), rad (positive dives), seconds
//! ```
//!
//! A curve is a helix: the heading turns at `omega` while the vehicle keeps
//! speed `v` along its path, so the horizontal track is a circular arc of
//! radius `v cos(pitch) / omega`. After the last instruction the vehicle holds
//! position.

use serde::{Deserialize, Serialize};

use crate::error::MobilityError;
use crate::geometry::Position;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum AuvInstruction {
    Line { velocity: [f64; 3], duration: f64 },
    Curve { speed: f64, angular_speed: f64, pitch: f64, duration: f64 },
}

impl AuvInstruction {
    pub fn duration(&self) -> f64 {
        match self {
            AuvInstruction::Line { duration, .. } | AuvInstruction::Curve { duration, .. } => *duration,
        }
    }

    pub fn speed(&self) -> f64 {
        match self {
            AuvInstruction::Line { velocity, .. } => Position::from(*velocity).norm(),
            AuvInstruction::Curve { speed, .. } => speed.abs(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let d = self.duration();
        if !(d > 0.0 && d.is_finite()) {
            return Err(format!("duration must be > 0, got {d}"));
        }
        match self {
            AuvInstruction::Line { velocity, .. } => {
                if !velocity.iter().all(|v| v.is_finite()) {
                    return Err("line velocity must be finite".into());
                }
            }
            AuvInstruction::Curve { speed, angular_speed, pitch, .. } => {
                if *angular_speed == 0.0 {
                    return Err("curve with zero angular speed; use LINE".into());
                }
                if !(speed.is_finite() && angular_speed.is_finite() && pitch.is_finite()) || *speed < 0.0 {
                    return Err("curve speed must be >= 0 and all terms finite".into());
                }
            }
        }
        Ok(())
    }
}

fn parse_fields(line_no: usize, fields: &[&str]) -> Result<[f64; 4], MobilityError> {
    if fields.len() != 4 {
        return Err(MobilityError::Parse {
            line: line_no,
            message: format!("expected 4 numbers, found {}", fields.len()),
        });
    }
    let mut out = [0.0; 4];
    for (slot, f) in out.iter_mut().zip(fields) {
        *slot = f.parse().map_err(|_| MobilityError::Parse {
            line: line_no,
            message: format!("not a number: {f:?}"),
        })?;
    }
    Ok(out)
}

/// Parse an instruction file.
pub fn parse_instructions(text: &str) -> Result<Vec<AuvInstruction>, MobilityError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().expect("non-empty line");
        let rest: Vec<&str> = tokens.collect();
        let instr = match keyword.to_ascii_uppercase().as_str() {
            "LINE" => {
                let [vx, vy, vz, duration] = parse_fields(line_no, &rest)?;
                AuvInstruction::Line { velocity: [vx, vy, vz], duration }
            }
            "CURVE" => {
                let [speed, angular_speed, pitch, duration] = parse_fields(line_no, &rest)?;
                AuvInstruction::Curve { speed, angular_speed, pitch, duration }
            }
            other => {
                return Err(MobilityError::Parse {
                    line: line_no,
                    message: format!("unknown instruction {other:?} (expected LINE or CURVE)"),
                })
            }
        };
        instr
            .validate()
            .map_err(|message| MobilityError::Parse { line: line_no, message })?;
        out.push(instr);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
struct Segment {
    t0: f64,
    pos0: Position,
    yaw0: f64,
    instr: AuvInstruction,
}

impl Segment {
    fn eval(&self, tau: f64) -> (Position, f64) {
        match &self.instr {
            AuvInstruction::Line { velocity, .. } => {
                let v = Position::from(*velocity);
                let yaw = if v.x != 0.0 || v.y != 0.0 { v.y.atan2(v.x) } else { self.yaw0 };
                (self.pos0 + v * tau, yaw)
            }
            AuvInstruction::Curve { speed, angular_speed, pitch, .. } => {
                let radius = speed * pitch.cos() / angular_speed;
                let yaw = self.yaw0 + angular_speed * tau;
                let p = Position::new(
                    self.pos0.x + radius * (yaw.sin() - self.yaw0.sin()),
                    self.pos0.y - radius * (yaw.cos() - self.yaw0.cos()),
                    self.pos0.z + speed * pitch.sin() * tau,
                );
                (p, yaw)
            }
        }
    }
}

/// A validated instruction program anchored at a start pose.
#[derive(Clone, Debug, PartialEq)]
pub struct AuvPath {
    segments: Vec<Segment>,
    end: Position,
    end_time: f64,
}

impl AuvPath {
    /// `yaw` is the initial heading in radians, counter-clockwise from +x.
    pub fn new(start: Position, yaw: f64, instructions: &[AuvInstruction]) -> Result<Self, MobilityError> {
        let mut segments = Vec::with_capacity(instructions.len());
        let (mut pos, mut heading, mut t) = (start, yaw, 0.0);
        for (i, instr) in instructions.iter().enumerate() {
            instr
                .validate()
                .map_err(|m| MobilityError::Config(format!("instruction {}: {m}", i + 1)))?;
            let seg = Segment {
                t0: t,
                pos0: pos,
                yaw0: heading,
                instr: instr.clone(),
            };
            (pos, heading) = seg.eval(instr.duration());
            t += instr.duration();
            segments.push(seg);
        }
        Ok(AuvPath {
            segments,
            end: pos,
            end_time: t,
        })
    }

    pub fn start(&self) -> Option<Position> {
        self.segments.first().map(|s| s.pos0)
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn position(&self, t: f64) -> Position {
        let t = t.max(0.0);
        if t >= self.end_time {
            return self.end;
        }
        let idx = self.segments.partition_point(|s| s.t0 <= t).saturating_sub(1);
        let seg = &self.segments[idx];
        seg.eval(t - seg.t0).0
    }

    pub fn max_speed(&self) -> f64 {
        self.segments.iter().map(|s| s.instr.speed()).fold(0.0, f64::max)
    }
}
