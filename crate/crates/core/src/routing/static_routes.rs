use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::rc::Rc;

use super::{RouteAction, RoutingCtx};
use crate::packet::{Layer, NodeId, Packet, PacketKind, PrivateHeader, PublicHeader};
use crate::phy::DropReason;

/// Next hop per `(node, destination)`. Without explicit routes every
/// destination is reached directly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StaticTable {
    explicit: Option<HashMap<(NodeId, NodeId), NodeId>>,
}

impl StaticTable {
    pub fn direct() -> Self {
        StaticTable::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = [u16; 3]>) -> Result<Self, String> {
        let mut map = HashMap::new();
        for [node, dest, hop] in triples {
            if node == dest {
                return Err(format!("route at node {node} to itself"));
            }
            if map.insert((NodeId(node), NodeId(dest)), NodeId(hop)).is_some() {
                return Err(format!("duplicate route at node {node} to {dest}"));
            }
        }
        Ok(StaticTable { explicit: Some(map) })
    }

    /// CSV with a `node,destination,next_hop` header.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let headers = reader.headers().map_err(|e| e.to_string())?.clone();
        let expected = ["node", "destination", "next_hop"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(format!("route table header must be `node,destination,next_hop`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")));
        }
        let mut triples = Vec::new();
        for (i, rec) in reader.deserialize::<(u16, u16, u16)>().enumerate() {
            let (a, b, c) = rec.map_err(|e| format!("row {}: {e}", i + 2))?;
            triples.push([a, b, c]);
        }
        Self::from_triples(triples)
    }

    pub fn next_hop(&self, node: NodeId, dest: NodeId) -> Option<NodeId> {
        if dest.is_broadcast() {
            return Some(NodeId::BROADCAST);
        }
        match &self.explicit {
            None => Some(dest),
            Some(map) => map.get(&(node, dest)).copied(),
        }
    }

    /// Every configured chain must stay among `nodes`, never revisit a node
    /// and end at its destination.
    pub fn validate(&self, nodes: &BTreeSet<NodeId>) -> Result<(), String> {
        let Some(map) = &self.explicit else { return Ok(()) };
        let sorted: BTreeMap<_, _> = map.iter().collect();
        for (&(start, dest), _) in sorted {
            for n in [start, dest] {
                if !nodes.contains(&n) {
                    return Err(format!("route {start}->{dest} names unknown node {n}"));
                }
            }
            let mut visited = BTreeSet::from([start]);
            let mut at = start;
            while at != dest {
                let Some(&hop) = map.get(&(at, dest)) else {
                    return Err(format!("route {start}->{dest} dead-ends at node {at}"));
                };
                if !nodes.contains(&hop) {
                    return Err(format!("route {start}->{dest} uses unknown next hop {hop}"));
                }
                if !visited.insert(hop) {
                    return Err(format!("route {start}->{dest} loops through node {hop}"));
                }
                at = hop;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StaticRouting {
    table: Rc<StaticTable>,
}

impl StaticRouting {
    pub fn new(table: Rc<StaticTable>) -> Self {
        StaticRouting { table }
    }

    fn forward(&self, ctx: &RoutingCtx, packet: Packet, dest: NodeId, out: &mut Vec<RouteAction>) {
        match self.table.next_hop(ctx.node, dest) {
            Some(next_hop) => out.push(RouteAction::Send { packet, next_hop }),
            None => out.push(RouteAction::Drop(packet, DropReason::NoRoute)),
        }
    }

    pub fn originate(&mut self, ctx: &mut RoutingCtx, mut packet: Packet, dest: NodeId, out: &mut Vec<RouteAction>) {
        packet
            .header_push(
                PublicHeader::new(PacketKind::StaticData, ctx.node, dest).with_uid(packet.uid),
                PrivateHeader::StaticData { hop_count: 0 },
                ctx.header_mode,
            )
            .expect("routing header goes first");
        if dest == ctx.node {
            packet.header_pop(Layer::Routing).expect("just pushed");
            out.push(RouteAction::Deliver(packet));
            return;
        }
        self.forward(ctx, packet, dest, out);
    }

    pub fn on_receive(&mut self, ctx: &mut RoutingCtx, mut packet: Packet, out: &mut Vec<RouteAction>) {
        let Some(h) = packet.header_mut(Layer::Routing) else { return };
        let dest = h.public.sink;
        if dest == ctx.node || dest.is_broadcast() {
            packet.header_pop(Layer::Routing).expect("routing header on top");
            out.push(RouteAction::Deliver(packet));
            return;
        }
        if let PrivateHeader::StaticData { hop_count } = &mut h.private {
            *hop_count = hop_count.saturating_add(1);
        }
        self.forward(ctx, packet, dest, out);
    }
}
