//! Packets: payload descriptor, layered header stack and the node-local tailer.

mod header;
mod tailer;

pub use header::{
    Header, HeaderMode, Layer, NodeId, PacketKind, PrivateHeader, Protocol, PublicHeader,
};
pub use tailer::{Tailer, TailerValue, TAILER_CAPACITY};

use crate::des::SimTime;
use crate::error::PacketError;

/// Application payload. Only `size` is on the wire; `tag` and `values` let
/// applications carry typed content without a byte codec.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Payload {
    pub size: u32,
    pub tag: u32,
    pub values: Vec<f64>,
}

impl Payload {
    pub fn opaque(size: u32) -> Self {
        Payload { size, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub uid: u64,
    pub payload: Payload,
    pub created_at: SimTime,
    headers: Vec<Header>,
    pub tailer: Tailer,
}

impl Packet {
    pub fn new(uid: u64, payload: Payload, created_at: SimTime) -> Self {
        Packet {
            uid,
            payload,
            created_at,
            headers: Vec::new(),
            tailer: Tailer::default(),
        }
    }

    /// Payload plus every header on the stack; the tailer contributes nothing.
    pub fn wire_length(&self) -> usize {
        self.payload.size as usize + self.header_bytes()
    }

    pub fn header_bytes(&self) -> usize {
        self.headers.iter().map(Header::wire_size).sum()
    }

    pub fn wire_bits(&self) -> u64 {
        8 * self.wire_length() as u64
    }

    pub fn headers(&self) -> &[Header] {
        &self.headers
    }

    pub fn top(&self) -> Option<&Header> {
        self.headers.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut Header> {
        self.headers.last_mut()
    }

    pub fn header(&self, layer: Layer) -> Option<&Header> {
        self.headers.iter().find(|h| h.layer() == layer)
    }

    pub fn header_mut(&mut self, layer: Layer) -> Option<&mut Header> {
        self.headers.iter_mut().find(|h| h.layer() == layer)
    }

    /// Kind of the outermost header, i.e. what is on the air.
    pub fn kind(&self) -> Option<PacketKind> {
        self.top().map(Header::kind)
    }

    /// Push a header on the send path. Layers must arrive in routing → mac →
    /// phy order; each layer appears at most once.
    pub fn header_push(
        &mut self,
        public: PublicHeader,
        private: PrivateHeader,
        mode: HeaderMode,
    ) -> Result<(), PacketError> {
        let header = Header::new(public, private, mode)?;
        if let Some(top) = self.top() {
            if top.layer() >= header.layer() {
                return Err(PacketError::StackViolation {
                    expected: format!("a layer below {}", top.layer()),
                    found: header.layer().to_string(),
                });
            }
        }
        self.headers.push(header);
        Ok(())
    }

    /// Pop `layer`'s header on the receive path; it must be on top.
    pub fn header_pop(&mut self, layer: Layer) -> Result<(PublicHeader, PrivateHeader), PacketError> {
        match self.headers.last() {
            None => Err(PacketError::EmptyStack),
            Some(top) if top.layer() != layer => Err(PacketError::StackViolation {
                expected: layer.to_string(),
                found: top.layer().to_string(),
            }),
            Some(_) => {
                let h = self.headers.pop().expect("non-empty");
                Ok((h.public, h.private))
            }
        }
    }

    pub fn tailer_put(&mut self, key: &str, value: impl Into<TailerValue>) -> Result<(), PacketError> {
        self.tailer.put(key, value)
    }

    pub fn tailer_get(&self, key: &str) -> Option<&TailerValue> {
        self.tailer.get(key)
    }

    /// The copy a receiving node gets: same headers and payload, empty tailer.
    pub fn delivered_copy(&self) -> Packet {
        Packet {
            uid: self.uid,
            payload: self.payload.clone(),
            created_at: self.created_at,
            headers: self.headers.clone(),
            tailer: Tailer::default(),
        }
    }

    /// Serialize the header stack, outermost first, as it would go on air.
    pub fn encode_headers(&self) -> Vec<u8> {
        self.headers.iter().rev().flat_map(Header::encode).collect()
    }
}

/// Header size of a stand-alone packet of `kind` (no other layers, no payload).
pub fn header_size(kind: PacketKind, mode: HeaderMode) -> usize {
    kind.header_size(mode)
}

/// Header transmission delay at `rate_bps`.
pub fn header_tx_delay(kind: PacketKind, mode: HeaderMode, rate_bps: f64) -> f64 {
    8.0 * header_size(kind, mode) as f64 / rate_bps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;

    fn single(kind: PacketKind, payload: u32) -> Packet {
        let mut p = Packet::new(1, Payload::opaque(payload), SimTime::ZERO);
        p.header_push(
            PublicHeader::new(kind, NodeId(1), NodeId(2)),
            PrivateHeader::empty(kind),
            HeaderMode::Adaptive,
        )
        .unwrap();
        p
    }

    #[test]
    fn wire_length_of_single_layer_packets() {
        assert_eq!(single(PacketKind::GoalReq, 0).wire_length(), 53);
        assert_eq!(single(PacketKind::SfamaAck, 0).wire_length(), 7);
        assert_eq!(single(PacketKind::VbfData, 100).wire_length(), 143);
    }

    #[test]
    fn push_pop_is_lifo_and_additive() {
        let mut p = Packet::new(9, Payload::opaque(10), SimTime::ZERO);
        p.header_push(
            PublicHeader::new(PacketKind::VbfInterest, NodeId(1), NodeId(9)),
            PrivateHeader::VbfInterest { sender_pos: Position::ORIGIN, sink_pos: Position::new(1.0, 2.0, 3.0) },
            HeaderMode::Adaptive,
        )
        .unwrap();
        assert_eq!(p.wire_length(), 41);
        p.header_push(
            PublicHeader::new(PacketKind::AlohaData, NodeId(1), NodeId::BROADCAST),
            PrivateHeader::AlohaData,
            HeaderMode::Adaptive,
        )
        .unwrap();
        p.header_push(
            PublicHeader::new(PacketKind::PhyFrame, NodeId(1), NodeId::BROADCAST),
            PrivateHeader::PhyFrame { mode: 0, spectrum_profile: 0 },
            HeaderMode::Adaptive,
        )
        .unwrap();
        assert_eq!(p.wire_length(), 10 + 31 + 5 + 7);
        assert_eq!(p.encode_headers().len(), 43);

        assert!(matches!(p.header_pop(Layer::Routing), Err(PacketError::StackViolation { .. })));
        assert_eq!(p.header_pop(Layer::Phy).unwrap().0.kind, PacketKind::PhyFrame);
        assert_eq!(p.header_pop(Layer::Mac).unwrap().0.kind, PacketKind::AlohaData);
        assert_eq!(p.header_pop(Layer::Routing).unwrap().0.kind, PacketKind::VbfInterest);
        assert_eq!(p.header_pop(Layer::Routing), Err(PacketError::EmptyStack));
        assert_eq!(p.wire_length(), 10);
    }

    #[test]
    fn push_out_of_order_rejected() {
        let mut p = single(PacketKind::SfamaRts, 0);
        let r = p.header_push(
            PublicHeader::new(PacketKind::StaticData, NodeId(1), NodeId(2)),
            PrivateHeader::StaticData { hop_count: 0 },
            HeaderMode::Adaptive,
        );
        assert!(matches!(r, Err(PacketError::StackViolation { .. })));
    }

    #[test]
    fn tailer_never_counts_and_never_crosses_nodes() {
        let mut p = single(PacketKind::SfamaData, 100);
        let before = p.wire_length();
        p.tailer_put("snr_est", 12.3).unwrap();
        assert_eq!(p.wire_length(), before);
        assert_eq!(p.tailer_get("snr_est").and_then(TailerValue::as_f64), Some(12.3));
        let at_b = p.delivered_copy();
        assert_eq!(at_b.tailer_get("snr_est"), None);
        assert_eq!(at_b.wire_length(), before);
    }

    #[test]
    fn fixed_mode_pads_to_legacy_size() {
        for (kind, tg) in [
            (PacketKind::GoalAck, 92),
            (PacketKind::GoalReq, 92),
            (PacketKind::SfamaAck, 12),
            (PacketKind::VbfReady, 79),
        ] {
            assert_eq!(header_size(kind, HeaderMode::Fixed), tg);
        }
        assert!((header_tx_delay(PacketKind::GoalAck, HeaderMode::Fixed, 500.0) - 1.472).abs() < 1e-12);
    }
}
