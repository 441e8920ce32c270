use serde::Serialize;

use crate::error::PacketError;

pub const TAILER_CAPACITY: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TailerValue {
    Int(i64),
    Scalar(f64),
    Vector(Vec<f64>),
}

impl TailerValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            TailerValue::Scalar(v) => Some(*v),
            TailerValue::Int(v) => Some(*v as f64),
            TailerValue::Vector(_) => None,
        }
    }
}

impl From<f64> for TailerValue {
    fn from(v: f64) -> Self {
        TailerValue::Scalar(v)
    }
}

impl From<i64> for TailerValue {
    fn from(v: i64) -> Self {
        TailerValue::Int(v)
    }
}

impl From<Vec<f64>> for TailerValue {
    fn from(v: Vec<f64>) -> Self {
        TailerValue::Vector(v)
    }
}

/// Node-local cross-layer parameters riding along with a packet.
///
/// Never counted in the wire length and dropped whenever the packet leaves
/// the node (see [`super::Packet::delivered_copy`]).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tailer {
    entries: Vec<(String, TailerValue)>,
}

impl Tailer {
    pub fn put(&mut self, key: &str, value: impl Into<TailerValue>) -> Result<(), PacketError> {
        let value = value.into();
        if let Some(slot) = self.entries.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value;
            return Ok(());
        }
        if self.entries.len() >= TAILER_CAPACITY {
            return Err(PacketError::TailerFull { max: TAILER_CAPACITY });
        }
        self.entries.push((key.to_string(), value));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&TailerValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
