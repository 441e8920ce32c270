//! Per-layer public/private headers and their byte layouts.
//!
//! Every header starts with a public part shared by all packet kinds of a
//! layer. Routing-layer public headers are 7 bytes (kind, sender, sink, uid);
//! MAC and PHY public headers are 5 bytes (kind, sender, sink). The private
//! part depends on the packet kind. Multi-byte fields are big-endian,
//! positions are three `f32`s.
//!
//! In [`HeaderMode::Fixed`] every header of a multi-kind protocol is
//! zero-padded to the protocol's legacy fixed length.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PacketError;
use crate::geometry::Position;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const BROADCAST: NodeId = NodeId(u16::MAX);

    pub fn is_broadcast(self) -> bool {
        self == NodeId::BROADCAST
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_broadcast() {
            write!(f, "*")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Layers in send-path order: a packet's header stack grows routing → mac → phy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Routing,
    Mac,
    Phy,
}

impl Layer {
    fn tag(self) -> u8 {
        match self {
            Layer::Routing => 1,
            Layer::Mac => 2,
            Layer::Phy => 3,
        }
    }

    pub fn public_size(self) -> usize {
        match self {
            Layer::Routing => 7,
            Layer::Mac | Layer::Phy => 5,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Layer::Routing => "routing",
            Layer::Mac => "mac",
            Layer::Phy => "phy",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Static,
    Vbf,
    Aloha,
    Sfama,
    Goal,
    Phy,
}

impl Protocol {
    /// Legacy fixed header length for protocols with several packet kinds.
    pub fn fixed_header_size(self) -> Option<usize> {
        match self {
            Protocol::Goal => Some(92),
            Protocol::Sfama => Some(12),
            Protocol::Vbf => Some(79),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Static => "STATIC",
            Protocol::Vbf => "VBF",
            Protocol::Aloha => "ALOHA",
            Protocol::Sfama => "SFAMA",
            Protocol::Goal => "GOAL",
            Protocol::Phy => "PHY",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Header length follows the packet kind.
    #[default]
    Adaptive,
    /// One padded length per protocol, as in the previous generation.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    StaticData,
    VbfInterest,
    VbfReady,
    VbfData,
    AlohaData,
    SfamaRts,
    SfamaCts,
    SfamaData,
    SfamaAck,
    GoalReq,
    GoalRep,
    GoalData,
    GoalAck,
    PhyFrame,
}

impl PacketKind {
    pub const ALL: [PacketKind; 14] = [
        PacketKind::StaticData,
        PacketKind::VbfInterest,
        PacketKind::VbfReady,
        PacketKind::VbfData,
        PacketKind::AlohaData,
        PacketKind::SfamaRts,
        PacketKind::SfamaCts,
        PacketKind::SfamaData,
        PacketKind::SfamaAck,
        PacketKind::GoalReq,
        PacketKind::GoalRep,
        PacketKind::GoalData,
        PacketKind::GoalAck,
        PacketKind::PhyFrame,
    ];

    pub fn protocol(self) -> Protocol {
        use PacketKind::*;
        match self {
            StaticData => Protocol::Static,
            VbfInterest | VbfReady | VbfData => Protocol::Vbf,
            AlohaData => Protocol::Aloha,
            SfamaRts | SfamaCts | SfamaData | SfamaAck => Protocol::Sfama,
            GoalReq | GoalRep | GoalData | GoalAck => Protocol::Goal,
            PhyFrame => Protocol::Phy,
        }
    }

    pub fn layer(self) -> Layer {
        match self.protocol() {
            Protocol::Static | Protocol::Vbf => Layer::Routing,
            Protocol::Aloha | Protocol::Sfama | Protocol::Goal => Layer::Mac,
            Protocol::Phy => Layer::Phy,
        }
    }

    /// Short label used in traces and reports, e.g. `"REQ"` for a GOAL request.
    pub fn label(self) -> &'static str {
        use PacketKind::*;
        match self {
            StaticData | VbfData | AlohaData | SfamaData | GoalData => "DATA",
            VbfInterest => "INTEREST",
            VbfReady => "READY",
            SfamaRts => "RTS",
            SfamaCts => "CTS",
            SfamaAck | GoalAck => "ACK",
            GoalReq => "REQ",
            GoalRep => "REP",
            PhyFrame => "FRAME",
        }
    }

    fn index(self) -> u8 {
        PacketKind::ALL.iter().position(|k| *k == self).expect("listed") as u8
    }

    /// First header byte: layer tag in the top two bits, kind index below.
    pub fn code(self) -> u8 {
        (self.layer().tag() << 6) | self.index()
    }

    pub fn from_code(code: u8) -> Option<PacketKind> {
        let kind = *PacketKind::ALL.get((code & 0x3f) as usize)?;
        (kind.code() == code).then_some(kind)
    }

    /// Layout of the private part as `(field, bytes)` pairs.
    pub fn private_fields(self) -> &'static [(&'static str, usize)] {
        use PacketKind::*;
        match self {
            StaticData => &[("hop_count", 1)],
            VbfInterest => &[("sender_pos", 12), ("sink_pos", 12)],
            VbfReady => &[("sink_pos", 12)],
            VbfData => &[("source_pos", 12), ("target_pos", 12), ("forwarder_pos", 12)],
            AlohaData => &[],
            SfamaRts | SfamaCts => &[("data_len", 2), ("retry", 1)],
            SfamaData | SfamaAck => &[("seq", 2)],
            GoalReq => &[
                ("source_pos", 12),
                ("sink_pos", 12),
                ("sender_pos", 12),
                ("send_time", 8),
                ("data_len", 2),
                ("seq", 2),
            ],
            GoalRep => &[("replier_pos", 12), ("send_time", 8), ("seq", 2), ("priority", 1)],
            GoalData => &[("send_time", 8), ("seq", 2), ("data_len", 2), ("final_sink", 2), ("hop_count", 1)],
            GoalAck => &[("seq", 2), ("ack_window", 2)],
            PhyFrame => &[("mode", 1), ("spectrum_profile", 1)],
        }
    }

    pub fn public_fields(self) -> &'static [(&'static str, usize)] {
        match self.layer() {
            Layer::Routing => &[("kind", 1), ("sender", 2), ("sink", 2), ("uid", 2)],
            Layer::Mac | Layer::Phy => &[("kind", 1), ("sender", 2), ("sink", 2)],
        }
    }

    pub fn private_size(self) -> usize {
        self.private_fields().iter().map(|(_, n)| n).sum()
    }

    /// Header size (public + private) on the wire.
    pub fn header_size(self, mode: HeaderMode) -> usize {
        let natural = self.layer().public_size() + self.private_size();
        match (mode, self.protocol().fixed_header_size()) {
            (HeaderMode::Fixed, Some(fixed)) => fixed,
            _ => natural,
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.protocol().name(), self.label())
    }
}

/// Fields every packet of a layer carries. `uid` is only on the wire for
/// routing-layer headers (truncated to 16 bits there).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PublicHeader {
    pub kind: PacketKind,
    pub sender: NodeId,
    pub sink: NodeId,
    pub uid: u16,
}

impl PublicHeader {
    pub fn new(kind: PacketKind, sender: NodeId, sink: NodeId) -> Self {
        PublicHeader { kind, sender, sink, uid: 0 }
    }

    pub fn with_uid(mut self, uid: u64) -> Self {
        self.uid = uid as u16;
        self
    }

    pub fn layer(&self) -> Layer {
        self.kind.layer()
    }

    pub fn serialized_size(&self) -> usize {
        self.kind.layer().public_size()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PrivateHeader {
    StaticData { hop_count: u8 },
    VbfInterest { sender_pos: Position, sink_pos: Position },
    VbfReady { sink_pos: Position },
    VbfData { source_pos: Position, target_pos: Position, forwarder_pos: Position },
    AlohaData,
    SfamaRts { data_len: u16, retry: u8 },
    SfamaCts { data_len: u16, retry: u8 },
    SfamaData { seq: u16 },
    SfamaAck { seq: u16 },
    GoalReq { source_pos: Position, sink_pos: Position, sender_pos: Position, send_time: f64, data_len: u16, seq: u16 },
    GoalRep { replier_pos: Position, send_time: f64, seq: u16, priority: u8 },
    GoalData { send_time: f64, seq: u16, data_len: u16, final_sink: NodeId, hop_count: u8 },
    GoalAck { seq: u16, ack_window: u16 },
    PhyFrame { mode: u8, spectrum_profile: u8 },
}

impl PrivateHeader {
    pub fn kind(&self) -> PacketKind {
        use PrivateHeader as P;
        match self {
            P::StaticData { .. } => PacketKind::StaticData,
            P::VbfInterest { .. } => PacketKind::VbfInterest,
            P::VbfReady { .. } => PacketKind::VbfReady,
            P::VbfData { .. } => PacketKind::VbfData,
            P::AlohaData => PacketKind::AlohaData,
            P::SfamaRts { .. } => PacketKind::SfamaRts,
            P::SfamaCts { .. } => PacketKind::SfamaCts,
            P::SfamaData { .. } => PacketKind::SfamaData,
            P::SfamaAck { .. } => PacketKind::SfamaAck,
            P::GoalReq { .. } => PacketKind::GoalReq,
            P::GoalRep { .. } => PacketKind::GoalRep,
            P::GoalData { .. } => PacketKind::GoalData,
            P::GoalAck { .. } => PacketKind::GoalAck,
            P::PhyFrame { .. } => PacketKind::PhyFrame,
        }
    }

    pub fn serialized_size(&self) -> usize {
        self.kind().private_size()
    }

    /// A zero-valued private header of the given kind.
    pub fn empty(kind: PacketKind) -> PrivateHeader {
        use PrivateHeader as P;
        let o = Position::ORIGIN;
        match kind {
            PacketKind::StaticData => P::StaticData { hop_count: 0 },
            PacketKind::VbfInterest => P::VbfInterest { sender_pos: o, sink_pos: o },
            PacketKind::VbfReady => P::VbfReady { sink_pos: o },
            PacketKind::VbfData => P::VbfData { source_pos: o, target_pos: o, forwarder_pos: o },
            PacketKind::AlohaData => P::AlohaData,
            PacketKind::SfamaRts => P::SfamaRts { data_len: 0, retry: 0 },
            PacketKind::SfamaCts => P::SfamaCts { data_len: 0, retry: 0 },
            PacketKind::SfamaData => P::SfamaData { seq: 0 },
            PacketKind::SfamaAck => P::SfamaAck { seq: 0 },
            PacketKind::GoalReq => P::GoalReq {
                source_pos: o,
                sink_pos: o,
                sender_pos: o,
                send_time: 0.0,
                data_len: 0,
                seq: 0,
            },
            PacketKind::GoalRep => P::GoalRep { replier_pos: o, send_time: 0.0, seq: 0, priority: 0 },
            PacketKind::GoalData => P::GoalData {
                send_time: 0.0,
                seq: 0,
                data_len: 0,
                final_sink: NodeId(0),
                hop_count: 0,
            },
            PacketKind::GoalAck => P::GoalAck { seq: 0, ack_window: 0 },
            PacketKind::PhyFrame => P::PhyFrame { mode: 0, spectrum_profile: 0 },
        }
    }
}

/// One layer's header as carried in a packet's header stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub public: PublicHeader,
    pub private: PrivateHeader,
    pub mode: HeaderMode,
}

impl Header {
    /// Fails if the public and private parts disagree on the packet kind.
    pub fn new(public: PublicHeader, private: PrivateHeader, mode: HeaderMode) -> Result<Self, PacketError> {
        if public.kind != private.kind() {
            return Err(PacketError::Decode {
                kind: public.kind.to_string(),
                message: format!("private header is {}", private.kind()),
            });
        }
        Ok(Header { public, private, mode })
    }

    pub fn kind(&self) -> PacketKind {
        self.public.kind
    }

    pub fn layer(&self) -> Layer {
        self.public.layer()
    }

    pub fn wire_size(&self) -> usize {
        self.kind().header_size(self.mode)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(self.wire_size()));
        let p = &self.public;
        w.u8(p.kind.code());
        w.u16(p.sender.0);
        w.u16(p.sink.0);
        if p.layer() == Layer::Routing {
            w.u16(p.uid);
        }
        use PrivateHeader as P;
        match &self.private {
            P::StaticData { hop_count } => w.u8(*hop_count),
            P::VbfInterest { sender_pos, sink_pos } => {
                w.pos(*sender_pos);
                w.pos(*sink_pos);
            }
            P::VbfReady { sink_pos } => w.pos(*sink_pos),
            P::VbfData { source_pos, target_pos, forwarder_pos } => {
                w.pos(*source_pos);
                w.pos(*target_pos);
                w.pos(*forwarder_pos);
            }
            P::AlohaData => {}
            P::SfamaRts { data_len, retry } | P::SfamaCts { data_len, retry } => {
                w.u16(*data_len);
                w.u8(*retry);
            }
            P::SfamaData { seq } | P::SfamaAck { seq } => w.u16(*seq),
            P::GoalReq { source_pos, sink_pos, sender_pos, send_time, data_len, seq } => {
                w.pos(*source_pos);
                w.pos(*sink_pos);
                w.pos(*sender_pos);
                w.f64(*send_time);
                w.u16(*data_len);
                w.u16(*seq);
            }
            P::GoalRep { replier_pos, send_time, seq, priority } => {
                w.pos(*replier_pos);
                w.f64(*send_time);
                w.u16(*seq);
                w.u8(*priority);
            }
            P::GoalData { send_time, seq, data_len, final_sink, hop_count } => {
                w.f64(*send_time);
                w.u16(*seq);
                w.u16(*data_len);
                w.u16(final_sink.0);
                w.u8(*hop_count);
            }
            P::GoalAck { seq, ack_window } => {
                w.u16(*seq);
                w.u16(*ack_window);
            }
            P::PhyFrame { mode, spectrum_profile } => {
                w.u8(*mode);
                w.u8(*spectrum_profile);
            }
        }
        let mut bytes = w.0;
        bytes.resize(self.wire_size(), 0);
        bytes
    }

    /// Parse one header from the front of `bytes`; returns it with the number
    /// of bytes consumed.
    pub fn decode(bytes: &[u8], mode: HeaderMode) -> Result<(Header, usize), PacketError> {
        let code = *bytes.first().ok_or_else(|| decode_err("?", "empty input"))?;
        let kind = PacketKind::from_code(code).ok_or_else(|| decode_err("?", &format!("unknown kind byte {code:#04x}")))?;
        let size = kind.header_size(mode);
        if bytes.len() < size {
            return Err(decode_err(&kind.to_string(), &format!("need {size} bytes, have {}", bytes.len())));
        }
        let mut r = Reader { buf: &bytes[1..size] };
        let sender = NodeId(r.u16());
        let sink = NodeId(r.u16());
        let uid = if kind.layer() == Layer::Routing { r.u16() } else { 0 };
        let public = PublicHeader { kind, sender, sink, uid };
        use PrivateHeader as P;
        let private = match kind {
            PacketKind::StaticData => P::StaticData { hop_count: r.u8() },
            PacketKind::VbfInterest => P::VbfInterest { sender_pos: r.pos(), sink_pos: r.pos() },
            PacketKind::VbfReady => P::VbfReady { sink_pos: r.pos() },
            PacketKind::VbfData => P::VbfData {
                source_pos: r.pos(),
                target_pos: r.pos(),
                forwarder_pos: r.pos(),
            },
            PacketKind::AlohaData => P::AlohaData,
            PacketKind::SfamaRts => P::SfamaRts { data_len: r.u16(), retry: r.u8() },
            PacketKind::SfamaCts => P::SfamaCts { data_len: r.u16(), retry: r.u8() },
            PacketKind::SfamaData => P::SfamaData { seq: r.u16() },
            PacketKind::SfamaAck => P::SfamaAck { seq: r.u16() },
            PacketKind::GoalReq => P::GoalReq {
                source_pos: r.pos(),
                sink_pos: r.pos(),
                sender_pos: r.pos(),
                send_time: r.f64(),
                data_len: r.u16(),
                seq: r.u16(),
            },
            PacketKind::GoalRep => P::GoalRep {
                replier_pos: r.pos(),
                send_time: r.f64(),
                seq: r.u16(),
                priority: r.u8(),
            },
            PacketKind::GoalData => P::GoalData {
                send_time: r.f64(),
                seq: r.u16(),
                data_len: r.u16(),
                final_sink: NodeId(r.u16()),
                hop_count: r.u8(),
            },
            PacketKind::GoalAck => P::GoalAck { seq: r.u16(), ack_window: r.u16() },
            PacketKind::PhyFrame => P::PhyFrame { mode: r.u8(), spectrum_profile: r.u8() },
        };
        Ok((Header { public, private, mode }, size))
    }
}

fn decode_err(kind: &str, message: &str) -> PacketError {
    PacketError::Decode {
        kind: kind.to_string(),
        message: message.to_string(),
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn pos(&mut self, p: Position) {
        self.f32(p.x as f32);
        self.f32(p.y as f32);
        self.f32(p.z as f32);
    }
}

// Slices are pre-sized by `decode`, so the fixed-width reads cannot run short.
struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        head.try_into().expect("sized")
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_be_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_be_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_be_bytes(self.take())
    }
    fn pos(&mut self) -> Position {
        let x = self.f32() as f64;
        let y = self.f32() as f64;
        let z = self.f32() as f64;
        Position::new(x, y, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kind_codes_are_unique_and_invertible() {
        for k in PacketKind::ALL {
            assert_eq!(PacketKind::from_code(k.code()), Some(k));
        }
        assert_eq!(PacketKind::from_code(0x3f), None);
        // right index, wrong layer tag
        assert_eq!(PacketKind::from_code(PacketKind::VbfData.code() ^ 0x40), None);
    }

    #[test]
    fn encoded_length_matches_layout() {
        for k in PacketKind::ALL {
            for mode in [HeaderMode::Adaptive, HeaderMode::Fixed] {
                let h = Header::new(PublicHeader::new(k, NodeId(1), NodeId(2)), PrivateHeader::empty(k), mode).unwrap();
                let public: usize = k.public_fields().iter().map(|f| f.1).sum();
                assert_eq!(public, k.layer().public_size());
                assert_eq!(h.encode().len(), h.wire_size(), "{k}");
                if mode == HeaderMode::Adaptive {
                    assert_eq!(h.wire_size(), public + k.private_size());
                }
            }
        }
    }

    #[test]
    fn mismatched_parts_rejected() {
        let r = Header::new(
            PublicHeader::new(PacketKind::SfamaRts, NodeId(1), NodeId(2)),
            PrivateHeader::SfamaAck { seq: 1 },
            HeaderMode::Adaptive,
        );
        assert!(r.is_err());
    }

    #[test]
    fn truncated_input_is_a_decode_error() {
        let h = Header::new(
            PublicHeader::new(PacketKind::VbfData, NodeId(1), NodeId(2)),
            PrivateHeader::empty(PacketKind::VbfData),
            HeaderMode::Adaptive,
        )
        .unwrap();
        let bytes = h.encode();
        assert!(Header::decode(&bytes[..20], HeaderMode::Adaptive).is_err());
        assert!(Header::decode(&[], HeaderMode::Adaptive).is_err());
    }

    fn arb_pos() -> impl Strategy<Value = Position> {
        (-1e5f32..1e5, -1e5f32..1e5, 0f32..6e3).prop_map(|(x, y, z)| Position::new(x as f64, y as f64, z as f64))
    }

    fn arb_header() -> impl Strategy<Value = Header> {
        let private = prop_oneof![
            any::<u8>().prop_map(|hop_count| PrivateHeader::StaticData { hop_count }),
            (arb_pos(), arb_pos()).prop_map(|(a, b)| PrivateHeader::VbfInterest { sender_pos: a, sink_pos: b }),
            arb_pos().prop_map(|sink_pos| PrivateHeader::VbfReady { sink_pos }),
            (arb_pos(), arb_pos(), arb_pos()).prop_map(|(a, b, c)| PrivateHeader::VbfData {
                source_pos: a,
                target_pos: b,
                forwarder_pos: c
            }),
            Just(PrivateHeader::AlohaData),
            (any::<u16>(), any::<u8>()).prop_map(|(data_len, retry)| PrivateHeader::SfamaRts { data_len, retry }),
            (any::<u16>(), any::<u8>()).prop_map(|(data_len, retry)| PrivateHeader::SfamaCts { data_len, retry }),
            any::<u16>().prop_map(|seq| PrivateHeader::SfamaData { seq }),
            any::<u16>().prop_map(|seq| PrivateHeader::SfamaAck { seq }),
            (arb_pos(), arb_pos(), arb_pos(), -1e6f64..1e6, any::<u16>(), any::<u16>()).prop_map(
                |(a, b, c, send_time, data_len, seq)| PrivateHeader::GoalReq {
                    source_pos: a,
                    sink_pos: b,
                    sender_pos: c,
                    send_time,
                    data_len,
                    seq
                }
            ),
            (arb_pos(), -1e6f64..1e6, any::<u16>(), any::<u8>()).prop_map(|(p, send_time, seq, priority)| {
                PrivateHeader::GoalRep { replier_pos: p, send_time, seq, priority }
            }),
            (-1e6f64..1e6, any::<u16>(), any::<u16>(), any::<u16>(), any::<u8>()).prop_map(
                |(send_time, seq, data_len, s, hop_count)| PrivateHeader::GoalData {
                    send_time,
                    seq,
                    data_len,
                    final_sink: NodeId(s),
                    hop_count
                }
            ),
            (any::<u16>(), any::<u16>()).prop_map(|(seq, ack_window)| PrivateHeader::GoalAck { seq, ack_window }),
            (any::<u8>(), any::<u8>()).prop_map(|(mode, spectrum_profile)| PrivateHeader::PhyFrame {
                mode,
                spectrum_profile
            }),
        ];
        (private, any::<u16>(), any::<u16>(), any::<u16>(), any::<bool>()).prop_map(|(private, s, d, uid, fixed)| {
            let kind = private.kind();
            let mut public = PublicHeader::new(kind, NodeId(s), NodeId(d));
            if kind.layer() == Layer::Routing {
                public.uid = uid;
            }
            let mode = if fixed { HeaderMode::Fixed } else { HeaderMode::Adaptive };
            Header { public, private, mode }
        })
    }

    proptest! {
        #[test]
        fn bytes_round_trip(h in arb_header()) {
            let bytes = h.encode();
            let (back, used) = Header::decode(&bytes, h.mode).unwrap();
            prop_assert_eq!(used, bytes.len());
            prop_assert_eq!(back.encode(), bytes);
            prop_assert_eq!(back, h);
        }
    }
}
