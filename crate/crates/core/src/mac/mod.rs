//! Medium access control. Each protocol is a per-node state machine that
//! reacts to enqueues, transmit completions, receptions and its own timers
//! by returning actions for the network to carry out.

mod aloha;
mod sfama;

pub use aloha::Aloha;
pub use sfama::{Sfama, SfamaParams, SfamaTiming};

use serde::{Deserialize, Serialize};

use crate::des::{RngStream, SimTime};
use crate::packet::{HeaderMode, NodeId, Packet, PacketKind};
use crate::phy::DropReason;

pub struct MacCtx<'a> {
    pub now: SimTime,
    pub node: NodeId,
    pub rng: &'a mut RngStream,
    pub header_mode: HeaderMode,
    /// Source of uids for control frames.
    pub next_uid: &'a mut u64,
}

impl MacCtx<'_> {
    pub fn fresh_uid(&mut self) -> u64 {
        let uid = *self.next_uid;
        *self.next_uid += 1;
        uid
    }
}

#[derive(Debug)]
pub enum MacAction {
    /// Put a frame (MAC header on top) on the air now.
    Transmit(Packet),
    /// Call `on_timer(token)` at `at`.
    Timer { at: SimTime, token: u64 },
    /// Hand a received packet (MAC header removed) to routing.
    Deliver(Packet),
    GiveUp(Packet),
    Drop(Packet, DropReason),
}

// `Aloha {}` rather than a unit variant so stray keys under `[mac]` are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase", deny_unknown_fields)]
pub enum MacParams {
    Aloha {},
    Sfama(SfamaParams),
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams::Aloha {}
    }
}

impl MacParams {
    pub fn name(&self) -> &'static str {
        match self {
            MacParams::Aloha {} => "aloha",
            MacParams::Sfama(_) => "sfama",
        }
    }

    pub fn data_kind(&self) -> PacketKind {
        match self {
            MacParams::Aloha {} => PacketKind::AlohaData,
            MacParams::Sfama(_) => PacketKind::SfamaData,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Mac {
    Aloha(Aloha),
    Sfama(Sfama),
}

impl Mac {
    pub fn enqueue(&mut self, ctx: &mut MacCtx<'_>, packet: Packet, next_hop: NodeId, out: &mut Vec<MacAction>) {
        match self {
            Mac::Aloha(m) => m.enqueue(ctx, packet, next_hop, out),
            Mac::Sfama(m) => m.enqueue(ctx, packet, next_hop, out),
        }
    }

    pub fn on_tx_end(&mut self, ctx: &mut MacCtx<'_>, out: &mut Vec<MacAction>) {
        match self {
            Mac::Aloha(m) => m.on_tx_end(ctx, out),
            Mac::Sfama(m) => m.on_tx_end(ctx, out),
        }
    }

    pub fn on_receive(&mut self, ctx: &mut MacCtx<'_>, frame: Packet, out: &mut Vec<MacAction>) {
        match self {
            Mac::Aloha(m) => m.on_receive(ctx, frame, out),
            Mac::Sfama(m) => m.on_receive(ctx, frame, out),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut MacCtx<'_>, token: u64, out: &mut Vec<MacAction>) {
        match self {
            Mac::Aloha(_) => {}
            Mac::Sfama(m) => m.on_timer(ctx, token, out),
        }
    }

    pub fn queue_len(&self) -> usize {
        match self {
            Mac::Aloha(m) => m.queue_len(),
            Mac::Sfama(m) => m.queue_len(),
        }
    }
}
