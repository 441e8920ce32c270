//! Packet trace: one JSON object per line.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::des::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    /// Handed to the MAC queue.
    Enq,
    TxStart,
    TxEnd,
    RxStart,
    RxOk,
    RxDrop,
    /// Reached its destination's application.
    Deliver,
    MacGiveUp,
    /// Discarded above the PHY (routing or MAC), `reason` says why.
    Drop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Seconds.
    pub t: f64,
    pub node: u16,
    pub event: TraceEvent,
    pub uid: u64,
    pub kind: String,
    /// Bytes on the wire at the reporting layer.
    pub len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    /// Transmitter for receive events, next hop for enqueues.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<u16>,
}

impl TraceRecord {
    pub fn new(t: SimTime, node: u16, event: TraceEvent, uid: u64, kind: impl Into<String>, len: usize) -> Self {
        TraceRecord {
            t: t.as_secs(),
            node,
            event,
            uid,
            kind: kind.into(),
            len,
            reason: None,
            snr: None,
            peer: None,
        }
    }

    pub fn reason(mut self, r: impl Into<String>) -> Self {
        self.reason = Some(r.into());
        self
    }

    pub fn snr(mut self, snr: f64) -> Self {
        self.snr = Some(snr);
        self
    }

    pub fn peer(mut self, peer: u16) -> Self {
        self.peer = Some(peer);
        self
    }
}

/// Where records go.
pub enum TraceSink {
    Off,
    Memory(Vec<TraceRecord>),
    Writer(Box<dyn Write>),
}

impl std::fmt::Debug for TraceSink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceSink::Off => f.write_str("Off"),
            TraceSink::Memory(v) => write!(f, "Memory({} records)", v.len()),
            TraceSink::Writer(_) => f.write_str("Writer"),
        }
    }
}

impl TraceSink {
    pub fn is_on(&self) -> bool {
        !matches!(self, TraceSink::Off)
    }

    pub fn record(&mut self, rec: TraceRecord) -> std::io::Result<()> {
        match self {
            TraceSink::Off => Ok(()),
            TraceSink::Memory(v) => {
                v.push(rec);
                Ok(())
            }
            TraceSink::Writer(w) => {
                serde_json::to_writer(&mut *w, &rec)?;
                w.write_all(b"\n")
            }
        }
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        match self {
            TraceSink::Writer(w) => w.flush(),
            _ => Ok(()),
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        match self {
            TraceSink::Memory(v) => v,
            _ => &[],
        }
    }

    pub fn take_records(&mut self) -> Vec<TraceRecord> {
        match self {
            TraceSink::Memory(v) => std::mem::take(v),
            _ => Vec::new(),
        }
    }
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_field_order() {
        let rec = TraceRecord::new(SimTime::from_nanos(1_500_000_000), 3, TraceEvent::RxDrop, 42, "ALOHA/DATA", 112)
            .reason("collision")
            .snr(12.5)
            .peer(1);
        let line = to_jsonl(std::slice::from_ref(&rec));
        assert_eq!(
            line,
            "{\"t\":1.5,\"node\":3,\"event\":\"rx_drop\",\"uid\":42,\"kind\":\"ALOHA/DATA\",\"len\":112,\"reason\":\"collision\",\"snr\":12.5,\"peer\":1}\n"
        );
        assert_eq!(parse_jsonl(&line).unwrap(), vec![rec]);
    }
}
