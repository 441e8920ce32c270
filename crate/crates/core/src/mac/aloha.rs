use std::collections::VecDeque;

use super::{MacAction, MacCtx};
use crate::packet::{Layer, NodeId, Packet, PacketKind, PrivateHeader, PublicHeader};

/// Pure Aloha: send as soon as the modem is free, no sensing, no ACK.
#[derive(Clone, Debug, Default)]
pub struct Aloha {
    queue: VecDeque<Packet>,
    sending: bool,
}

impl Aloha {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn enqueue(&mut self, ctx: &mut MacCtx<'_>, mut packet: Packet, next_hop: NodeId, out: &mut Vec<MacAction>) {
        let public = PublicHeader::new(PacketKind::AlohaData, ctx.node, next_hop).with_uid(packet.uid);
        packet
            .header_push(public, PrivateHeader::AlohaData, ctx.header_mode)
            .expect("mac header goes below routing");
        if self.sending {
            self.queue.push_back(packet);
        } else {
            self.sending = true;
            out.push(MacAction::Transmit(packet));
        }
    }

    pub fn on_tx_end(&mut self, _ctx: &mut MacCtx<'_>, out: &mut Vec<MacAction>) {
        match self.queue.pop_front() {
            Some(p) => out.push(MacAction::Transmit(p)),
            None => self.sending = false,
        }
    }

    pub fn on_receive(&mut self, ctx: &mut MacCtx<'_>, mut frame: Packet, out: &mut Vec<MacAction>) {
        let Some(h) = frame.header(Layer::Mac) else { return };
        if h.public.kind != PacketKind::AlohaData {
            return;
        }
        if h.public.sink == ctx.node || h.public.sink.is_broadcast() {
            frame.header_pop(Layer::Mac).expect("mac header on top");
            out.push(MacAction::Deliver(frame));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::{rng_stream, SimTime};
    use crate::packet::{HeaderMode, Payload};

    fn ctx<'a>(rng: &'a mut crate::des::RngStream, uid: &'a mut u64) -> MacCtx<'a> {
        MacCtx {
            now: SimTime::ZERO,
            node: NodeId(1),
            rng,
            header_mode: HeaderMode::Adaptive,
            next_uid: uid,
        }
    }

    #[test]
    fn sends_immediately_then_queues() {
        let (mut rng, mut uid) = (rng_stream(1, 1), 100);
        let mut c = ctx(&mut rng, &mut uid);
        let mut mac = Aloha::new();
        let mut out = Vec::new();
        mac.enqueue(&mut c, Packet::new(1, Payload::opaque(10), SimTime::ZERO), NodeId(2), &mut out);
        mac.enqueue(&mut c, Packet::new(2, Payload::opaque(10), SimTime::ZERO), NodeId(2), &mut out);
        assert_eq!(out.len(), 1);
        assert!(matches!(&out[0], MacAction::Transmit(p) if p.uid == 1 && p.wire_length() == 15));
        out.clear();
        mac.on_tx_end(&mut c, &mut out);
        assert!(matches!(&out[0], MacAction::Transmit(p) if p.uid == 2));
        out.clear();
        mac.on_tx_end(&mut c, &mut out);
        assert!(out.is_empty());
        assert!(!mac.sending);
    }

    #[test]
    fn filters_by_mac_destination() {
        let (mut rng, mut uid) = (rng_stream(1, 1), 100);
        let mut c = ctx(&mut rng, &mut uid);
        let mut mac = Aloha::new();
        let mut out = Vec::new();
        let frame = |sink| {
            let mut p = Packet::new(7, Payload::opaque(10), SimTime::ZERO);
            p.header_push(PublicHeader::new(PacketKind::AlohaData, NodeId(9), sink), PrivateHeader::AlohaData, HeaderMode::Adaptive)
                .unwrap();
            p
        };
        mac.on_receive(&mut c, frame(NodeId(3)), &mut out);
        assert!(out.is_empty());
        mac.on_receive(&mut c, frame(NodeId(1)), &mut out);
        mac.on_receive(&mut c, frame(NodeId::BROADCAST), &mut out);
        assert_eq!(out.len(), 2);
        assert!(matches!(&out[0], MacAction::Deliver(p) if p.headers().is_empty()));
    }
}
