//! Slotted FAMA: RTS/CTS/DATA/ACK with every transmission starting on a slot
//! boundary. Slots are long enough for a control frame to reach any node, so
//! each handshake step takes one slot and the data phase `n_d` slots.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MacAction, MacCtx};
use crate::des::SimTime;
use crate::packet::{Layer, NodeId, Packet, PacketKind, Payload, PrivateHeader, PublicHeader};

/// Timers fire this long after a boundary so that a frame ending exactly on
/// the boundary is processed first.
const SLACK: SimTime = SimTime::from_nanos(1_000);
const DEDUP_MEMORY: usize = 64;

fn default_backoff() -> u32 {
    8
}
fn default_retry_limit() -> u32 {
    5
}

/// `[mac]` parameters of SFAMA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfamaParams {
    /// Seconds; defaults to the largest propagation delay between any two
    /// nodes at t = 0 plus the RTS airtime.
    #[serde(default)]
    pub slot_length: Option<f64>,
    #[serde(default = "default_backoff")]
    pub max_backoff_slots: u32,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
}

impl Default for SfamaParams {
    fn default() -> Self {
        SfamaParams {
            slot_length: None,
            max_backoff_slots: default_backoff(),
            retry_limit: default_retry_limit(),
        }
    }
}

/// Scenario-derived timing shared by every node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SfamaTiming {
    pub slot: SimTime,
    pub rate_bps: f64,
    /// Bytes added below the MAC.
    pub phy_overhead: usize,
    pub max_propagation: f64,
    pub guard_time: f64,
}

impl SfamaTiming {
    /// Slots needed to deliver a data frame of `bytes` on-air bytes.
    pub fn data_slots(&self, bytes: usize) -> u64 {
        let t = 8.0 * bytes as f64 / self.rate_bps + self.guard_time + self.max_propagation;
        ((t / self.slot.as_secs()).ceil() as u64).max(1)
    }

    fn boundary_at_or_after(&self, t: SimTime) -> SimTime {
        let l = self.slot.as_nanos();
        SimTime::from_nanos(t.as_nanos().div_ceil(l) * l)
    }

    /// Index of the slot a frame received at `t` was sent in.
    fn sent_slot(&self, t: SimTime) -> u64 {
        t.as_nanos().saturating_sub(1) / self.slot.as_nanos()
    }

    fn slot_start(&self, index: u64) -> SimTime {
        SimTime::from_nanos(index * self.slot.as_nanos())
    }

    fn slots(&self, n: u64) -> SimTime {
        SimTime::from_nanos(n * self.slot.as_nanos())
    }
}

#[derive(Clone, Debug)]
struct Entry {
    packet: Packet,
    dst: NodeId,
    retries: u32,
    seq: u16,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum State {
    Idle,
    Contend,
    WaitCts,
    SendData,
    WaitAck,
    Broadcasting,
    SendCts { to: NodeId, data_len: u16 },
    WaitData { from: NodeId },
    SendAck { to: NodeId, seq: u16 },
    AckSent,
}

#[derive(Clone, Debug)]
pub struct Sfama {
    timing: SfamaTiming,
    params: SfamaParams,
    queue: VecDeque<Entry>,
    state: State,
    token: u64,
    defer_until: SimTime,
    next_seq: u16,
    recent: VecDeque<(NodeId, u16)>,
}

impl Sfama {
    pub fn new(timing: SfamaTiming, params: SfamaParams) -> Self {
        Sfama {
            timing,
            params,
            queue: VecDeque::new(),
            state: State::Idle,
            token: 0,
            defer_until: SimTime::ZERO,
            next_seq: 0,
            recent: VecDeque::new(),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    fn arm(&mut self, at: SimTime, out: &mut Vec<MacAction>) {
        self.token += 1;
        out.push(MacAction::Timer { at, token: self.token });
    }

    fn control(ctx: &mut MacCtx<'_>, kind: PacketKind, sink: NodeId, private: PrivateHeader) -> Packet {
        let uid = ctx.fresh_uid();
        let mut p = Packet::new(uid, Payload::opaque(0), ctx.now);
        p.header_push(PublicHeader::new(kind, ctx.node, sink).with_uid(uid), private, ctx.header_mode)
            .expect("empty stack");
        p
    }

    fn data_frame(ctx: &MacCtx<'_>, e: &Entry) -> Packet {
        let mut p = e.packet.clone();
        p.header_push(
            PublicHeader::new(PacketKind::SfamaData, ctx.node, e.dst).with_uid(p.uid),
            PrivateHeader::SfamaData { seq: e.seq },
            ctx.header_mode,
        )
        .expect("mac header goes below routing");
        p
    }

    fn data_len(&self, ctx: &MacCtx<'_>, e: &Entry) -> u16 {
        let bytes = e.packet.wire_length() + PacketKind::SfamaData.header_size(ctx.header_mode) + self.timing.phy_overhead;
        bytes.min(u16::MAX as usize) as u16
    }

    fn resume(&mut self, ctx: &mut MacCtx<'_>, out: &mut Vec<MacAction>) {
        if self.queue.is_empty() {
            self.state = State::Idle;
            self.token += 1;
        } else {
            self.state = State::Contend;
            let at = self.timing.boundary_at_or_after(ctx.now.max(self.defer_until));
            self.arm(at, out);
        }
    }

    fn fail(&mut self, ctx: &mut MacCtx<'_>, out: &mut Vec<MacAction>) {
        let head = self.queue.front_mut().expect("a packet is in flight");
        head.retries += 1;
        if head.retries > self.params.retry_limit {
            let e = self.queue.pop_front().expect("head exists");
            out.push(MacAction::GiveUp(e.packet));
            self.resume(ctx, out);
        } else {
            let k = ctx.rng.random_range(1..=self.params.max_backoff_slots.max(1)) as u64;
            self.state = State::Contend;
            let at = self.timing.boundary_at_or_after(ctx.now) + self.timing.slots(k);
            self.arm(at, out);
        }
    }

    fn defer(&mut self, until: SimTime) {
        self.defer_until = self.defer_until.max(until);
    }

    fn remember(&mut self, sender: NodeId, seq: u16) -> bool {
        if self.recent.contains(&(sender, seq)) {
            return false;
        }
        if self.recent.len() == DEDUP_MEMORY {
            self.recent.pop_front();
        }
        self.recent.push_back((sender, seq));
        true
    }

    pub fn enqueue(&mut self, ctx: &mut MacCtx<'_>, packet: Packet, next_hop: NodeId, out: &mut Vec<MacAction>) {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.queue.push_back(Entry {
            packet,
            dst: next_hop,
            retries: 0,
            seq,
        });
        if self.state == State::Idle {
            self.resume(ctx, out);
        }
    }

    pub fn on_timer(&mut self, ctx: &mut MacCtx<'_>, token: u64, out: &mut Vec<MacAction>) {
        if token != self.token {
            return;
        }
        let slot = self.timing.slot;
        match self.state {
            State::Contend => {
                if ctx.now < self.defer_until {
                    let at = self.timing.boundary_at_or_after(self.defer_until);
                    self.arm(at, out);
                    return;
                }
                let head = self.queue.front().expect("contending with a packet");
                if head.dst.is_broadcast() {
                    out.push(MacAction::Transmit(Self::data_frame(ctx, head)));
                    self.state = State::Broadcasting;
                } else {
                    let data_len = self.data_len(ctx, head);
                    let rts = PrivateHeader::SfamaRts {
                        data_len,
                        retry: head.retries.min(u8::MAX as u32) as u8,
                    };
                    let dst = head.dst;
                    out.push(MacAction::Transmit(Self::control(ctx, PacketKind::SfamaRts, dst, rts)));
                    self.state = State::WaitCts;
                    self.arm(ctx.now + slot + slot + SLACK, out);
                }
            }
            State::WaitCts | State::WaitAck => self.fail(ctx, out),
            State::SendData => {
                let head = self.queue.front().expect("packet awaiting data slot");
                let n_d = self.timing.data_slots(self.data_len(ctx, head) as usize);
                out.push(MacAction::Transmit(Self::data_frame(ctx, head)));
                self.state = State::WaitAck;
                self.arm(ctx.now + self.timing.slots(n_d + 1) + SLACK, out);
            }
            State::SendCts { to, data_len } => {
                let cts = PrivateHeader::SfamaCts { data_len, retry: 0 };
                out.push(MacAction::Transmit(Self::control(ctx, PacketKind::SfamaCts, to, cts)));
                self.state = State::WaitData { from: to };
                let n_d = self.timing.data_slots(data_len as usize);
                self.arm(ctx.now + self.timing.slots(n_d + 1) + SLACK, out);
            }
            State::WaitData { .. } => self.resume(ctx, out),
            State::SendAck { to, seq } => {
                out.push(MacAction::Transmit(Self::control(ctx, PacketKind::SfamaAck, to, PrivateHeader::SfamaAck { seq })));
                self.state = State::AckSent;
            }
            State::Idle | State::Broadcasting | State::AckSent => {}
        }
    }

    pub fn on_tx_end(&mut self, ctx: &mut MacCtx<'_>, out: &mut Vec<MacAction>) {
        match self.state {
            State::Broadcasting => {
                self.queue.pop_front();
                self.resume(ctx, out);
            }
            State::AckSent => self.resume(ctx, out),
            _ => {}
        }
    }

    pub fn on_receive(&mut self, ctx: &mut MacCtx<'_>, mut frame: Packet, out: &mut Vec<MacAction>) {
        let Some(h) = frame.header(Layer::Mac) else { return };
        let (public, private) = (h.public, h.private.clone());
        let for_me = public.sink == ctx.node;
        let s = self.timing.sent_slot(ctx.now);
        match private {
            PrivateHeader::SfamaRts { data_len, .. } => {
                let n_d = self.timing.data_slots(data_len as usize);
                if for_me {
                    let free = matches!(self.state, State::Idle | State::Contend) && ctx.now >= self.defer_until;
                    if free {
                        self.state = State::SendCts {
                            to: public.sender,
                            data_len,
                        };
                        let at = self.timing.boundary_at_or_after(ctx.now);
                        self.arm(at, out);
                    }
                } else {
                    self.defer(self.timing.slot_start(s + 3 + n_d));
                }
            }
            PrivateHeader::SfamaCts { data_len, .. } => {
                if for_me {
                    let expected = self.queue.front().is_some_and(|e| e.dst == public.sender);
                    if self.state == State::WaitCts && expected {
                        self.state = State::SendData;
                        let at = self.timing.boundary_at_or_after(ctx.now);
                        self.arm(at, out);
                    }
                } else {
                    let n_d = self.timing.data_slots(data_len as usize);
                    self.defer(self.timing.slot_start(s + 2 + n_d));
                }
            }
            PrivateHeader::SfamaData { seq } => {
                if public.sink.is_broadcast() {
                    if self.remember(public.sender, seq) {
                        frame.header_pop(Layer::Mac).expect("mac header on top");
                        out.push(MacAction::Deliver(frame));
                    }
                } else if for_me {
                    let fresh = self.remember(public.sender, seq);
                    if self.state == (State::WaitData { from: public.sender }) {
                        self.state = State::SendAck { to: public.sender, seq };
                        let at = self.timing.boundary_at_or_after(ctx.now);
                        self.arm(at, out);
                    }
                    if fresh {
                        frame.header_pop(Layer::Mac).expect("mac header on top");
                        out.push(MacAction::Deliver(frame));
                    }
                } else {
                    // The data phase began at most at slot `s`, so the ACK slot
                    // ends no later than `s + n_d + 1`.
                    let n_d = self.timing.data_slots(frame.wire_length() + self.timing.phy_overhead);
                    self.defer(self.timing.slot_start(s + n_d + 1));
                }
            }
            PrivateHeader::SfamaAck { seq } => {
                if for_me && self.state == State::WaitAck && self.queue.front().is_some_and(|e| e.seq == seq && e.dst == public.sender) {
                    self.queue.pop_front();
                    self.resume(ctx, out);
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::rng_stream;
    use crate::packet::HeaderMode;

    fn timing() -> SfamaTiming {
        SfamaTiming {
            slot: SimTime::from_nanos(1_000_000_000),
            rate_bps: 1500.0,
            phy_overhead: 7,
            max_propagation: 0.7,
            guard_time: 0.0,
        }
    }

    #[test]
    fn slot_arithmetic() {
        let t = timing();
        assert_eq!(t.boundary_at_or_after(SimTime::from_nanos(1)), SimTime::from_nanos(1_000_000_000));
        assert_eq!(t.boundary_at_or_after(SimTime::from_nanos(2_000_000_000)), SimTime::from_nanos(2_000_000_000));
        assert_eq!(t.sent_slot(SimTime::from_nanos(2_000_000_000)), 1);
        assert_eq!(t.sent_slot(SimTime::from_nanos(2_000_000_001)), 2);
        // 100 B frame: 0.533 s + 0.7 s -> two slots.
        assert_eq!(t.data_slots(100), 2);
        assert_eq!(t.data_slots(1), 1);
    }

    #[test]
    fn sender_walks_the_handshake() {
        let mut rng = rng_stream(1, 1);
        let mut uid = 1000;
        let mut mac = Sfama::new(timing(), SfamaParams::default());
        let mut out = Vec::new();
        let at = |ns: u64| SimTime::from_nanos(ns);
        let mut ctx = MacCtx {
            now: at(300_000_000),
            node: NodeId(1),
            rng: &mut rng,
            header_mode: HeaderMode::Adaptive,
            next_uid: &mut uid,
        };
        mac.enqueue(&mut ctx, Packet::new(1, Payload::opaque(50), SimTime::ZERO), NodeId(2), &mut out);
        let MacAction::Timer { at: t1, token } = out[0] else { panic!("{out:?}") };
        assert_eq!(t1, at(1_000_000_000));
        out.clear();
        ctx.now = t1;
        mac.on_timer(&mut ctx, token, &mut out);
        assert!(matches!(&out[0], MacAction::Transmit(p) if p.kind() == Some(PacketKind::SfamaRts) && p.wire_length() == 8));
        assert_eq!(mac.state, State::WaitCts);
    }
}
