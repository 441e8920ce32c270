//! Vector-based forwarding. Only nodes inside a pipe of radius `W` around the
//! source→sink segment relay a packet; each waits a holding time that is
//! shortest for the node best placed along the vector, and gives up if it
//! hears someone else relay the same packet first.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{RouteAction, RoutingCtx};
use crate::des::SimTime;
use crate::geometry::{point_line_distance, point_segment_distance, Position};
use crate::packet::{Layer, NodeId, Packet, PacketKind, PrivateHeader, PublicHeader};
use crate::phy::DropReason;

fn default_pipe_radius() -> f64 {
    200.0
}
fn default_tau_max() -> f64 {
    1.0
}
fn default_v0() -> f64 {
    1500.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbfParams {
    /// `W`, metres.
    #[serde(default = "default_pipe_radius")]
    pub pipe_radius: f64,
    /// `tau_max`, seconds.
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    /// Speed normalising the distance term of the holding time, m/s.
    #[serde(default = "default_v0")]
    pub v0: f64,
    /// Transmission range `R`; derived from the channel when absent.
    #[serde(default)]
    pub range_m: Option<f64>,
}

impl Default for VbfParams {
    fn default() -> Self {
        VbfParams {
            pipe_radius: default_pipe_radius(),
            tau_max: default_tau_max(),
            v0: default_v0(),
            range_m: None,
        }
    }
}

impl VbfParams {
    pub fn validate(&self) -> Result<(), (String, String)> {
        if !(self.pipe_radius > 0.0 && self.pipe_radius.is_finite()) {
            return Err(("pipe_radius".into(), format!("must be > 0, got {}", self.pipe_radius)));
        }
        if !(self.tau_max >= 0.0 && self.tau_max.is_finite()) {
            return Err(("tau_max".into(), format!("must be >= 0, got {}", self.tau_max)));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(("v0".into(), format!("must be > 0, got {}", self.v0)));
        }
        if let Some(r) = self.range_m {
            if !(r > 0.0 && r.is_finite()) {
                return Err(("range_m".into(), format!("must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// Inside the pipe: distance to the source–sink segment at most `w`.
pub fn vbf_eligible(node: Position, source: Position, sink: Position, w: f64) -> bool {
    point_segment_distance(node, source, sink) <= w
}

/// Desirableness `p/W + (R - d cos(theta))/R`, floored at zero.
fn desirableness(p: f64, d_cos_theta: f64, w: f64, range: f64) -> f64 {
    (p / w + (range - d_cos_theta) / range).max(0.0)
}

/// Holding time of `node` for a packet last relayed at `forwarder` towards `sink`.
pub fn hold_time(node: Position, forwarder: Position, sink: Position, params: &VbfParams, range: f64) -> f64 {
    let p = point_line_distance(node, forwarder, sink);
    let d = node.distance(forwarder);
    let axis = sink - forwarder;
    let len = axis.norm();
    let d_cos = if len > 0.0 { (node - forwarder).dot(axis) / len } else { 0.0 };
    let alpha = desirableness(p, d_cos, params.pipe_radius, range);
    (alpha.sqrt() * params.tau_max + (range - d) / params.v0).max(0.0)
}

#[derive(Clone, Debug)]
struct Pending {
    token: u64,
    packet: Packet,
}

#[derive(Clone, Debug)]
pub struct Vbf {
    params: VbfParams,
    range: f64,
    /// uid -> time the entry may be forgotten.
    seen: HashMap<u64, SimTime>,
    window: SimTime,
    pending: HashMap<u64, Pending>,
    timers: HashMap<u64, u64>,
    next_token: u64,
}

impl Vbf {
    pub fn new(params: VbfParams, range: f64, sound_speed: f64) -> Self {
        let window = 2.0 * params.tau_max + 2.0 * range / sound_speed;
        Vbf {
            params,
            range,
            seen: HashMap::new(),
            window: SimTime::from_secs(window).unwrap_or(SimTime::INFINITY),
            pending: HashMap::new(),
            timers: HashMap::new(),
            next_token: 0,
        }
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    fn mark_seen(&mut self, uid: u64, now: SimTime) {
        if self.seen.len() > 4096 {
            self.seen.retain(|_, until| *until > now);
        }
        self.seen.insert(uid, now.saturating_add(self.window));
    }

    fn is_seen(&self, uid: u64, now: SimTime) -> bool {
        self.seen.get(&uid).is_some_and(|until| *until > now)
    }

    pub fn originate(&mut self, ctx: &mut RoutingCtx, mut packet: Packet, dest: NodeId, dest_pos: Position, out: &mut Vec<RouteAction>) {
        let private = PrivateHeader::VbfData {
            source_pos: ctx.position,
            target_pos: dest_pos,
            forwarder_pos: ctx.position,
        };
        packet
            .header_push(PublicHeader::new(PacketKind::VbfData, ctx.node, dest).with_uid(packet.uid), private, ctx.header_mode)
            .expect("routing header goes first");
        if dest == ctx.node {
            packet.header_pop(Layer::Routing).expect("just pushed");
            out.push(RouteAction::Deliver(packet));
            return;
        }
        self.mark_seen(packet.uid, ctx.now);
        out.push(RouteAction::Send {
            packet,
            next_hop: NodeId::BROADCAST,
        });
    }

    pub fn on_receive(&mut self, ctx: &mut RoutingCtx, mut packet: Packet, out: &mut Vec<RouteAction>) {
        let Some(h) = packet.header(Layer::Routing) else { return };
        let PrivateHeader::VbfData {
            source_pos,
            target_pos,
            forwarder_pos,
        } = h.private
        else {
            return;
        };
        let uid = packet.uid;
        if h.public.sink == ctx.node {
            if self.is_seen(uid, ctx.now) {
                out.push(RouteAction::Drop(packet, DropReason::Duplicate));
            } else {
                self.mark_seen(uid, ctx.now);
                packet.header_pop(Layer::Routing).expect("routing header on top");
                out.push(RouteAction::Deliver(packet));
            }
            return;
        }
        if let Some(p) = self.pending.remove(&uid) {
            self.timers.remove(&p.token);
            out.push(RouteAction::Drop(p.packet, DropReason::Suppressed));
            return;
        }
        if self.is_seen(uid, ctx.now) || !vbf_eligible(ctx.position, source_pos, target_pos, self.params.pipe_radius) {
            return;
        }
        self.mark_seen(uid, ctx.now);
        let hold = hold_time(ctx.position, forwarder_pos, target_pos, &self.params, self.range);
        self.next_token += 1;
        let token = self.next_token;
        self.timers.insert(token, uid);
        self.pending.insert(uid, Pending { token, packet });
        let at = ctx.now + SimTime::from_secs(hold).expect("hold time is finite and non-negative");
        out.push(RouteAction::Timer { at, token });
    }

    pub fn on_timer(&mut self, ctx: &mut RoutingCtx, token: u64, out: &mut Vec<RouteAction>) {
        let Some(uid) = self.timers.remove(&token) else { return };
        let Some(Pending { mut packet, .. }) = self.pending.remove(&uid) else { return };
        let h = packet.header_mut(Layer::Routing).expect("pending packets keep their routing header");
        h.public.sender = ctx.node;
        if let PrivateHeader::VbfData { forwarder_pos, .. } = &mut h.private {
            *forwarder_pos = ctx.position;
        }
        self.mark_seen(uid, ctx.now);
        out.push(RouteAction::Send {
            packet,
            next_hop: NodeId::BROADCAST,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{HeaderMode, Payload};

    #[test]
    fn best_placed_node_fires_immediately() {
        let params = VbfParams::default();
        let r = 3000.0;
        let f = Position::ORIGIN;
        let sink = Position::new(10_000.0, 0.0, 0.0);
        let t = hold_time(Position::new(r, 0.0, 0.0), f, sink, &params, r);
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn formula_at_pipe_edge() {
        // p = W and d cos(theta) = 0 give alpha = 2.
        assert_eq!(desirableness(200.0, 0.0, 200.0, 3000.0), 2.0);
        let params = VbfParams::default();
        let r = 3000.0;
        let hold = 2f64.sqrt() * params.tau_max + r / params.v0;
        let node = Position::new(0.0, 200.0, 0.0);
        let h = hold_time(node, Position::ORIGIN, Position::new(5000.0, 0.0, 0.0), &params, r);
        // d = 200 here rather than 0, so the distance term shrinks by 200/v0.
        assert!((h - (hold - 200.0 / params.v0)).abs() < 1e-12);
    }

    #[test]
    fn eligibility_on_axis_and_outside() {
        let (a, b) = (Position::ORIGIN, Position::new(1000.0, 0.0, 0.0));
        assert!(vbf_eligible(Position::new(500.0, 0.0, 0.0), a, b, 1e-9));
        assert!(!vbf_eligible(Position::new(500.0, 400.0, 0.0), a, b, 200.0));
        assert!(vbf_eligible(Position::new(500.0, -200.0, 0.0), a, b, 200.0));
    }

    fn data_from(source: Position, sink: Position, uid: u64) -> Packet {
        let mut p = Packet::new(uid, Payload::opaque(10), SimTime::ZERO);
        p.header_push(
            PublicHeader::new(PacketKind::VbfData, NodeId(1), NodeId(9)).with_uid(uid),
            PrivateHeader::VbfData {
                source_pos: source,
                target_pos: sink,
                forwarder_pos: source,
            },
            HeaderMode::Adaptive,
        )
        .unwrap();
        p
    }

    #[test]
    fn overheard_relay_suppresses_pending_forward() {
        let mut vbf = Vbf::new(VbfParams::default(), 3000.0, 1500.0);
        let sink = Position::new(6000.0, 0.0, 0.0);
        let mut ctx = RoutingCtx {
            now: SimTime::ZERO,
            node: NodeId(2),
            position: Position::new(1000.0, 50.0, 0.0),
            header_mode: HeaderMode::Adaptive,
        };
        let mut out = Vec::new();
        vbf.on_receive(&mut ctx, data_from(Position::ORIGIN, sink, 5), &mut out);
        let RouteAction::Timer { token, .. } = out[0] else { panic!("{out:?}") };
        out.clear();
        vbf.on_receive(&mut ctx, data_from(Position::ORIGIN, sink, 5), &mut out);
        assert!(matches!(&out[0], RouteAction::Drop(p, DropReason::Suppressed) if p.uid == 5));
        out.clear();
        vbf.on_timer(&mut ctx, token, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn outside_pipe_ignores() {
        let mut vbf = Vbf::new(VbfParams::default(), 3000.0, 1500.0);
        let mut ctx = RoutingCtx {
            now: SimTime::ZERO,
            node: NodeId(2),
            position: Position::new(1000.0, 900.0, 0.0),
            header_mode: HeaderMode::Adaptive,
        };
        let mut out = Vec::new();
        vbf.on_receive(&mut ctx, data_from(Position::ORIGIN, Position::new(6000.0, 0.0, 0.0), 5), &mut out);
        assert!(out.is_empty());
    }
}
