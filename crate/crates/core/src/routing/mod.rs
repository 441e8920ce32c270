//! Network layer: static next-hop tables and vector-based forwarding.

mod static_routes;
mod vbf;

pub use static_routes::{StaticRouting, StaticTable};
pub use vbf::{hold_time, vbf_eligible, Vbf, VbfParams};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::des::SimTime;
use crate::geometry::Position;
use crate::packet::{HeaderMode, NodeId, Packet, PacketKind};
use crate::phy::DropReason;

pub struct RoutingCtx {
    pub now: SimTime,
    pub node: NodeId,
    pub position: Position,
    pub header_mode: HeaderMode,
}

#[derive(Debug)]
pub enum RouteAction {
    /// Hand to the MAC for `next_hop`.
    Send { packet: Packet, next_hop: NodeId },
    /// Give to the local application (routing header removed).
    Deliver(Packet),
    Drop(Packet, DropReason),
    Timer { at: SimTime, token: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticParams {
    /// Inline `[node, destination, next_hop]` triples.
    #[serde(default)]
    pub routes: Option<Vec<[u16; 3]>>,
    /// CSV `node,destination,next_hop`, relative to the scenario file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase", deny_unknown_fields)]
pub enum RoutingParams {
    Static(StaticParams),
    Vbf(VbfParams),
}

impl Default for RoutingParams {
    fn default() -> Self {
        RoutingParams::Static(StaticParams::default())
    }
}

impl RoutingParams {
    pub fn name(&self) -> &'static str {
        match self {
            RoutingParams::Static(_) => "static",
            RoutingParams::Vbf(_) => "vbf",
        }
    }

    pub fn data_kind(&self) -> PacketKind {
        match self {
            RoutingParams::Static(_) => PacketKind::StaticData,
            RoutingParams::Vbf(_) => PacketKind::VbfData,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Routing {
    Static(StaticRouting),
    Vbf(Vbf),
}

impl Routing {
    /// A packet generated at this node for `dest`, located at `dest_pos`.
    pub fn originate(&mut self, ctx: &mut RoutingCtx, packet: Packet, dest: NodeId, dest_pos: Position, out: &mut Vec<RouteAction>) {
        match self {
            Routing::Static(r) => r.originate(ctx, packet, dest, out),
            Routing::Vbf(r) => r.originate(ctx, packet, dest, dest_pos, out),
        }
    }

    pub fn on_receive(&mut self, ctx: &mut RoutingCtx, packet: Packet, out: &mut Vec<RouteAction>) {
        match self {
            Routing::Static(r) => r.on_receive(ctx, packet, out),
            Routing::Vbf(r) => r.on_receive(ctx, packet, out),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut RoutingCtx, token: u64, out: &mut Vec<RouteAction>) {
        match self {
            Routing::Static(_) => {}
            Routing::Vbf(r) => r.on_timer(ctx, token, out),
        }
    }
}
