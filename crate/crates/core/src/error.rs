use thiserror::Error;

use crate::des::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum DesError {
    #[error("invalid delay {0}: delays must be finite and non-negative")]
    InvalidDelay(f64),
    #[error("cannot schedule at {at}, clock is already at {now}")]
    InPast { at: SimTime, now: SimTime },
    #[error("event #{index} at {at} faulted: {message}")]
    EventFault { index: u64, at: SimTime, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum PacketError {
    #[error("protocol stack violation: expected {expected} header on top, found {found}")]
    StackViolation { expected: String, found: String },
    #[error("header stack is empty")]
    EmptyStack,
    #[error("tailer is full ({max} entries)")]
    TailerFull { max: usize },
    #[error("cannot decode {kind} header: {message}")]
    Decode { kind: String, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("invalid mobility configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("query outside table coverage: range {range} m, tx depth {tx_depth} m, rx depth {rx_depth} m")]
    OutOfCoverage { range: f64, tx_depth: f64, rx_depth: f64 },
    #[error("query frequency {query_khz} kHz does not match table frequency {table_khz} kHz")]
    FrequencyMismatch { query_khz: f64, table_khz: f64 },
    #[error("arrival table: {0}")]
    Table(String),
    #[error("invalid propagation parameters: {0}")]
    Config(String),
}

/// Scenario validation failure; `path` is the dotted key path of the offending value.
#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action schema violation: {0}")]
    Schema(String),
    #[error("episode is done; call reset")]
    Done,
    #[error("environment is closed")]
    Closed,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] Error),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Des(#[from] DesError),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
