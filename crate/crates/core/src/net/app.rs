use std::collections::HashMap;

use super::Node;
use crate::des::SimTime;
use crate::geometry::Position;
use crate::packet::{NodeId, Packet, Payload};

/// Hooks for code running on top of the network's delivery service.
pub trait Application {
    fn on_deliver(&mut self, _api: &mut AppApi<'_>, _node: NodeId, _packet: &Packet) {}
    fn on_timer(&mut self, _api: &mut AppApi<'_>, _node: NodeId, _tag: u64) {}
}

impl Application for () {}

#[derive(Debug)]
pub(crate) enum AppCommand {
    Send { from: NodeId, dest: NodeId, payload: Payload },
    Timer { node: NodeId, at: SimTime, tag: u64 },
}

/// What an application may see and do from inside a callback. Sends and
/// timers take effect once the callback returns.
pub struct AppApi<'a> {
    now: SimTime,
    nodes: &'a [Node],
    index: &'a HashMap<NodeId, usize>,
    commands: &'a mut Vec<AppCommand>,
}

impl<'a> AppApi<'a> {
    pub(crate) fn new(now: SimTime, nodes: &'a [Node], index: &'a HashMap<NodeId, usize>, commands: &'a mut Vec<AppCommand>) -> Self {
        AppApi { now, nodes, index, commands }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn position(&self, node: NodeId) -> Option<Position> {
        let i = *self.index.get(&node)?;
        Some(self.nodes[i].mobility.position(self.now.as_secs()))
    }

    pub fn send(&mut self, from: NodeId, dest: NodeId, payload: Payload) {
        self.commands.push(AppCommand::Send { from, dest, payload });
    }

    /// Call `on_timer(node, tag)` after `delay` seconds.
    pub fn timer(&mut self, node: NodeId, delay: f64, tag: u64) {
        let at = self.now.saturating_add(SimTime::from_secs(delay.max(0.0)).unwrap_or(SimTime::INFINITY));
        self.commands.push(AppCommand::Timer { node, at, tag });
    }
}
