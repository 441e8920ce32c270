//! The simulated network: nodes with a routing/MAC/PHY stack sharing one
//! acoustic channel, driven by the event kernel.

mod app;
mod metrics;

pub use app::{AppApi, Application};
pub use metrics::{write_metrics_csv, MetricsAcc, MetricsSummary, SummaryHeader, DROP_COLUMNS};

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use rand_distr::Exp;

use crate::des::{node_rng, Kernel, Next, RngStream, RunReport, SimTime, StopReason, StreamPurpose};
use crate::error::{ConfigError, DesError, Error, PropagationError};
use crate::geometry::Position;
use crate::mac::{Aloha, Mac, MacAction, MacCtx, MacParams, Sfama, SfamaTiming};
use crate::mobility::NodeMobility;
use crate::packet::{HeaderMode, Layer, NodeId, Packet, PacketKind, Payload, PrivateHeader, PublicHeader};
use crate::phy::{Decision, DropReason, EnergyMeter, Modulation, PhyParams, PhyReceiver, RxFate, SpectrumAllocation};
use crate::propagation::{Propagation, PropagationModel, PropagationQuery};
use crate::routing::{RouteAction, Routing, RoutingCtx, RoutingParams, StaticRouting, Vbf};
use crate::scenario::{Scenario, TrafficConfig, TrafficPattern};
use crate::trace::{TraceEvent, TraceRecord, TraceSink};

/// Extra time a default SFAMA slot gets beyond propagation plus RTS airtime.
const SLOT_MARGIN: SimTime = SimTime::from_nanos(1_000);

/// A frame on the air, shared by every arrival it causes.
#[derive(Debug)]
struct InFlight {
    frame: Packet,
    sender: usize,
    mac_kind: PacketKind,
    mode: Modulation,
    bits: u64,
    allocation: Rc<SpectrumAllocation>,
}

#[derive(Debug)]
struct Arrival {
    node: usize,
    id: u64,
    flight: Rc<InFlight>,
    snr_db: f64,
    end: SimTime,
    blocked: Option<DropReason>,
}

#[derive(Debug)]
enum NetEvent {
    Generate { flow: usize },
    TxEnd { node: usize },
    RxStart(Box<Arrival>),
    RxEnd { node: usize, id: u64, flight: Rc<InFlight> },
    MacTimer { node: usize, token: u64 },
    RouteTimer { node: usize, token: u64 },
    AppTimer { node: usize, tag: u64 },
}

#[derive(Debug)]
pub(crate) struct Node {
    id: NodeId,
    mobility: NodeMobility,
    allocation: Rc<SpectrumAllocation>,
    mac: Mac,
    routing: Routing,
    rx: PhyReceiver,
    energy: EnergyMeter,
    mac_rng: RngStream,
    phy_rng: RngStream,
    traffic_rng: RngStream,
    /// Uid, kind and length of the frame on the air.
    on_air: Option<(u64, PacketKind, usize)>,
}

#[derive(Debug)]
struct Flow {
    cfg: TrafficConfig,
    source: usize,
    mean_interval: f64,
    sent: u64,
}

/// What one call to [`Network::run`] produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub metrics: MetricsSummary,
}

/// Largest propagation delay between any two nodes at `t`.
fn max_propagation_delay(nodes: &[Node], sound_speed: f64, t: f64) -> f64 {
    let pos: Vec<Position> = nodes.iter().map(|n| n.mobility.position(t)).collect();
    let mut max: f64 = 0.0;
    for (i, a) in pos.iter().enumerate() {
        for b in &pos[i + 1..] {
            max = max.max(a.distance(*b) / sound_speed);
        }
    }
    max
}

/// Transmission range used by the pipe holding-time formula.
fn vbf_range(propagation: &Propagation, phy: &PhyParams, frequency_khz: f64) -> f64 {
    match &propagation.model {
        PropagationModel::Range(p) => p.threshold_m,
        PropagationModel::Thorp(_) => {
            let budget = phy.source_level_db - phy.noise_level_db - phy.threshold_db(phy.mode);
            propagation.max_range_for_loss(budget, frequency_khz)
        }
        PropagationModel::Table(t) => t.max_range(),
    }
}

pub struct Network<A: Application = ()> {
    kernel: Kernel<NetEvent>,
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    phy: PhyParams,
    propagation: Propagation,
    frequency_khz: f64,
    header_mode: HeaderMode,
    routing_kind: PacketKind,
    flows: Vec<Flow>,
    trace: TraceSink,
    metrics: MetricsAcc,
    next_uid: u64,
    next_arrival: u64,
    app: A,
    header: SummaryHeader,
    duration: SimTime,
    sfama_timing: Option<SfamaTiming>,
}

impl Network<()> {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, Error> {
        Self::build(scenario, ())
    }
}

impl<A: Application> Network<A> {
    /// Validate `scenario` against its files and geometry and assemble the network.
    pub fn build(scenario: &Scenario, app: A) -> Result<Self, Error> {
        scenario.validate()?;
        let base = scenario.base_dir.as_deref();
        let propagation = scenario.propagation.build(scenario.sound_speed, base)?;
        let default_alloc = Rc::new(scenario.spectrum.allocation(None).map_err(|m| ConfigError::new("spectrum", m))?);
        let frequency_khz = default_alloc.centre_frequency_khz();
        if let PropagationModel::Table(t) = &propagation.model {
            t.check_frequency(frequency_khz)
                .map_err(|e| ConfigError::new("propagation", format!("{e}; the band centre is {frequency_khz} kHz")))?;
        }
        let table = Rc::new(scenario.static_table()?);
        let phy = scenario.phy.clone();
        let mode = phy.mode;
        let rate = phy.rate_bps();
        let seed = scenario.seed;

        let mut nodes = Vec::with_capacity(scenario.nodes.len());
        let mut index = HashMap::new();
        for (i, n) in scenario.nodes.iter().enumerate() {
            let model = n
                .mobility
                .build(n.position, base)
                .map_err(|e| ConfigError::new(format!("nodes[{i}].mobility"), e.to_string()))?;
            let allocation = match &n.subcarriers {
                None => default_alloc.clone(),
                Some(sc) => Rc::new(
                    scenario
                        .spectrum
                        .allocation(Some(sc))
                        .map_err(|m| ConfigError::new(format!("nodes[{i}].subcarriers"), m))?,
                ),
            };
            index.insert(NodeId(n.id), i);
            nodes.push(Node {
                id: NodeId(n.id),
                mobility: NodeMobility::new(model),
                allocation,
                mac: Mac::Aloha(Aloha::new()),
                routing: Routing::Static(StaticRouting::new(table.clone())),
                rx: PhyReceiver::new(phy.capture),
                energy: EnergyMeter::default(),
                mac_rng: node_rng(seed, n.id, StreamPurpose::Mac),
                phy_rng: node_rng(seed, n.id, StreamPurpose::Phy),
                traffic_rng: node_rng(seed, n.id, StreamPurpose::Traffic),
                on_air: None,
            });
        }

        let phy_bytes = PacketKind::PhyFrame.header_size(scenario.header_mode);
        let guard = default_alloc.guard_time;
        let sfama_timing = match &scenario.mac {
            MacParams::Aloha {} => None,
            MacParams::Sfama(p) => {
                let max_prop = max_propagation_delay(&nodes, scenario.sound_speed, 0.0);
                let rts_bytes = PacketKind::SfamaRts.header_size(scenario.header_mode) + phy_bytes;
                let rts_air = 8.0 * rts_bytes as f64 / rate;
                let minimum = max_prop + rts_air;
                let slot = match p.slot_length {
                    Some(l) if l < minimum => {
                        return Err(ConfigError::new(
                            "mac.slot_length",
                            format!("{l} s is shorter than the largest propagation delay plus RTS airtime ({minimum} s)"),
                        )
                        .into())
                    }
                    Some(l) => SimTime::from_secs(l).expect("validated"),
                    None => {
                        let base = SimTime::from_secs(minimum + guard).expect("finite geometry");
                        SimTime::from_nanos(base.as_nanos() + 1) + SLOT_MARGIN
                    }
                };
                Some(SfamaTiming {
                    slot,
                    rate_bps: rate,
                    phy_overhead: phy_bytes,
                    max_propagation: max_prop,
                    guard_time: guard,
                })
            }
        };
        let vbf_r = match &scenario.routing {
            RoutingParams::Vbf(p) => Some(p.range_m.unwrap_or_else(|| vbf_range(&propagation, &phy, frequency_khz))),
            RoutingParams::Static(_) => None,
        };
        for node in &mut nodes {
            if let (MacParams::Sfama(p), Some(t)) = (&scenario.mac, sfama_timing) {
                node.mac = Mac::Sfama(Sfama::new(t, p.clone()));
            }
            if let (RoutingParams::Vbf(p), Some(r)) = (&scenario.routing, vbf_r) {
                node.routing = Routing::Vbf(Vbf::new(p.clone(), r, scenario.sound_speed));
            }
        }

        let flows = scenario
            .traffic
            .iter()
            .map(|t| Flow {
                cfg: t.clone(),
                source: index[&NodeId(t.source)],
                mean_interval: t.mean_interval().expect("validated"),
                sent: 0,
            })
            .collect();

        let data_header = scenario.routing.data_kind().header_size(scenario.header_mode)
            + scenario.mac.data_kind().header_size(scenario.header_mode)
            + phy_bytes;
        let header = SummaryHeader {
            scenario: scenario.name.clone(),
            seed,
            duration: scenario.duration,
            events: 0,
            mode: mode.name().to_string(),
            mac: scenario.mac.name().to_string(),
            routing: scenario.routing.name().to_string(),
            propagation: propagation.model.name().to_string(),
            data_header_td: 8.0 * data_header as f64 / rate,
        };

        let mut net = Network {
            kernel: Kernel::with_max_events(scenario.max_events),
            nodes,
            index,
            phy,
            propagation,
            frequency_khz,
            header_mode: scenario.header_mode,
            routing_kind: scenario.routing.data_kind(),
            flows,
            trace: TraceSink::Off,
            metrics: MetricsAcc::default(),
            next_uid: 1,
            next_arrival: 0,
            app,
            header,
            duration: SimTime::from_secs(scenario.duration).expect("validated"),
            sfama_timing,
        };
        net.schedule_flows()?;
        Ok(net)
    }

    fn schedule_flows(&mut self) -> Result<(), Error> {
        for f in 0..self.flows.len() {
            let start = SimTime::from_secs(self.flows[f].cfg.start).expect("validated");
            let first = match self.flows[f].cfg.pattern {
                TrafficPattern::Cbr => start,
                TrafficPattern::Poisson => start + self.poisson_gap(f),
            };
            if self.flow_allows(f, first) {
                self.kernel.schedule_at(first, NetEvent::Generate { flow: f })?;
            }
        }
        Ok(())
    }

    fn poisson_gap(&mut self, f: usize) -> SimTime {
        let flow = &self.flows[f];
        let exp = Exp::new(1.0 / flow.mean_interval).expect("positive rate");
        let gap: f64 = self.nodes[flow.source].traffic_rng.sample(exp);
        SimTime::from_secs(gap).unwrap_or(SimTime::INFINITY)
    }

    fn flow_allows(&self, f: usize, at: SimTime) -> bool {
        let cfg = &self.flows[f].cfg;
        let within_stop = cfg.stop.is_none_or(|s| at.as_secs() <= s);
        let within_count = cfg.count.is_none_or(|c| self.flows[f].sent < c);
        !at.is_infinite() && within_stop && within_count
    }

    pub fn set_trace(&mut self, sink: TraceSink) {
        self.trace = sink;
    }

    pub fn trace(&self) -> &TraceSink {
        &self.trace
    }

    pub fn take_trace(&mut self) -> TraceSink {
        std::mem::replace(&mut self.trace, TraceSink::Off)
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    pub fn app(&self) -> &A {
        &self.app
    }

    pub fn app_mut(&mut self) -> &mut A {
        &mut self.app
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn sfama_timing(&self) -> Option<SfamaTiming> {
        self.sfama_timing
    }

    pub fn frequency_khz(&self) -> f64 {
        self.frequency_khz
    }

    pub fn phy(&self) -> &PhyParams {
        &self.phy
    }

    pub fn propagation(&self) -> &Propagation {
        &self.propagation
    }

    pub fn position(&self, node: NodeId) -> Option<Position> {
        let i = *self.index.get(&node)?;
        Some(self.nodes[i].mobility.position(self.now().as_secs()))
    }

    /// Replace a node's trajectory from now on.
    pub fn set_mobility(&mut self, node: NodeId, mobility: NodeMobility) -> Result<(), ConfigError> {
        let i = *self
            .index
            .get(&node)
            .ok_or_else(|| ConfigError::new("node", format!("unknown node {node}")))?;
        self.nodes[i].mobility = mobility;
        Ok(())
    }

    /// Originate a packet now, as if the node's application had generated it.
    pub fn send(&mut self, from: NodeId, dest: NodeId, payload: Payload) -> Result<u64, ConfigError> {
        let i = *self
            .index
            .get(&from)
            .ok_or_else(|| ConfigError::new("node", format!("unknown node {from}")))?;
        let uid = self.fresh_uid();
        self.metrics.generated += 1;
        let packet = Packet::new(uid, payload, self.now());
        self.originate(i, dest, packet).map_err(|e| ConfigError::new("send", e))?;
        Ok(uid)
    }

    /// Call the application's `on_timer(node, tag)` at `at`.
    pub fn schedule_app_timer(&mut self, node: NodeId, at: SimTime, tag: u64) -> Result<(), Error> {
        let i = *self
            .index
            .get(&node)
            .ok_or_else(|| ConfigError::new("node", format!("unknown node {node}")))?;
        self.kernel.schedule_at(at, NetEvent::AppTimer { node: i, tag })?;
        Ok(())
    }

    fn fresh_uid(&mut self) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        uid
    }

    fn record(&mut self, rec: impl FnOnce() -> TraceRecord) -> Result<(), String> {
        if self.trace.is_on() {
            self.trace.record(rec()).map_err(|e| format!("trace write failed: {e}"))?;
        }
        Ok(())
    }

    fn touch_energy(&mut self, i: usize) {
        let now = self.now();
        let node = &mut self.nodes[i];
        let state = node.rx.power_state(now);
        node.energy.set(now, state);
    }

    /// Execute events up to and including `until`.
    pub fn run_until(&mut self, until: SimTime) -> Result<StopReason, Error> {
        loop {
            match self.kernel.next_event(until) {
                Next::Event(at, ev) => {
                    let index = self.kernel.events_executed() - 1;
                    self.dispatch(ev).map_err(|message| DesError::EventFault { index, at, message })?;
                }
                Next::Done(stop) => return Ok(stop),
            }
        }
    }

    /// Run to the scenario duration and summarize.
    pub fn run(&mut self) -> Result<RunOutcome, Error> {
        let stop = self.run_until(self.duration)?;
        self.trace.flush().map_err(|e| Error::Io {
            path: "trace".into(),
            source: e,
        })?;
        Ok(RunOutcome {
            report: self.kernel.report(stop),
            metrics: self.summary(),
        })
    }

    pub fn summary(&self) -> MetricsSummary {
        let now = self.now();
        let energy = self
            .nodes
            .iter()
            .map(|n| (n.id.0, n.energy.report(now, self.phy.tx_power_w, self.phy.rx_power_w, self.phy.idle_power_w)))
            .collect();
        let mut header = self.header.clone();
        header.events = self.kernel.events_executed();
        header.duration = now.as_secs();
        self.metrics.summarize(header, energy)
    }

    fn dispatch(&mut self, ev: NetEvent) -> Result<(), String> {
        match ev {
            NetEvent::Generate { flow } => self.on_generate(flow),
            NetEvent::TxEnd { node } => self.on_tx_end(node),
            NetEvent::RxStart(a) => self.on_rx_start(*a),
            NetEvent::RxEnd { node, id, flight } => self.on_rx_end(node, id, flight),
            NetEvent::MacTimer { node, token } => {
                let mut out = Vec::new();
                let n = &mut self.nodes[node];
                let mut ctx = MacCtx {
                    now: self.kernel.now(),
                    node: n.id,
                    rng: &mut n.mac_rng,
                    header_mode: self.header_mode,
                    next_uid: &mut self.next_uid,
                };
                n.mac.on_timer(&mut ctx, token, &mut out);
                self.mac_actions(node, out)
            }
            NetEvent::RouteTimer { node, token } => {
                let mut out = Vec::new();
                let mut ctx = self.routing_ctx(node);
                self.nodes[node].routing.on_timer(&mut ctx, token, &mut out);
                self.route_actions(node, out)
            }
            NetEvent::AppTimer { node, tag } => {
                let mut commands = Vec::new();
                let id = self.nodes[node].id;
                let mut api = AppApi::new(self.kernel.now(), &self.nodes, &self.index, &mut commands);
                self.app.on_timer(&mut api, id, tag);
                self.app_commands(commands)
            }
        }
    }

    fn routing_ctx(&self, i: usize) -> RoutingCtx {
        let now = self.now();
        let n = &self.nodes[i];
        RoutingCtx {
            now,
            node: n.id,
            position: n.mobility.position(now.as_secs()),
            header_mode: self.header_mode,
        }
    }

    fn on_generate(&mut self, f: usize) -> Result<(), String> {
        let now = self.now();
        let uid = self.fresh_uid();
        let flow = &mut self.flows[f];
        flow.sent += 1;
        let (source, dest, size) = (flow.source, NodeId(flow.cfg.destination), flow.cfg.payload_bytes);
        let packet = Packet::new(uid, Payload::opaque(size), now);
        self.metrics.generated += 1;
        self.originate(source, dest, packet)?;
        let gap = match self.flows[f].cfg.pattern {
            TrafficPattern::Cbr => SimTime::from_secs(self.flows[f].mean_interval).expect("validated"),
            TrafficPattern::Poisson => self.poisson_gap(f),
        };
        let next = now.saturating_add(gap);
        if self.flow_allows(f, next) {
            self.kernel.schedule_at(next, NetEvent::Generate { flow: f }).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn originate(&mut self, i: usize, dest: NodeId, packet: Packet) -> Result<(), String> {
        let now = self.now().as_secs();
        let dest_pos = match self.index.get(&dest) {
            Some(&d) => self.nodes[d].mobility.position(now),
            None => self.nodes[i].mobility.position(now),
        };
        let mut out = Vec::new();
        let mut ctx = self.routing_ctx(i);
        self.nodes[i].routing.originate(&mut ctx, packet, dest, dest_pos, &mut out);
        self.route_actions(i, out)
    }

    fn route_actions(&mut self, i: usize, actions: Vec<RouteAction>) -> Result<(), String> {
        let now = self.now();
        let id = self.nodes[i].id;
        let rkind = self.routing_kind;
        for action in actions {
            match action {
                RouteAction::Send { packet, next_hop } => {
                    let (uid, len, kind) = (packet.uid, packet.wire_length(), packet.kind().unwrap_or(rkind));
                    self.record(|| TraceRecord::new(now, id.0, TraceEvent::Enq, uid, kind.to_string(), len).peer(next_hop.0))?;
                    let mut out = Vec::new();
                    let n = &mut self.nodes[i];
                    let mut ctx = MacCtx {
                        now,
                        node: id,
                        rng: &mut n.mac_rng,
                        header_mode: self.header_mode,
                        next_uid: &mut self.next_uid,
                    };
                    n.mac.enqueue(&mut ctx, packet, next_hop, &mut out);
                    self.mac_actions(i, out)?;
                }
                RouteAction::Deliver(packet) => {
                    let uid = packet.uid;
                    let bytes = packet.payload.size;
                    self.record(|| TraceRecord::new(now, id.0, TraceEvent::Deliver, uid, rkind.to_string(), bytes as usize))?;
                    self.metrics.delivered(uid, bytes, packet.created_at, now);
                    let mut commands = Vec::new();
                    let mut api = AppApi::new(now, &self.nodes, &self.index, &mut commands);
                    self.app.on_deliver(&mut api, id, &packet);
                    self.app_commands(commands)?;
                }
                RouteAction::Drop(packet, reason) => self.trace_drop(i, &packet, reason.name(), packet.kind().unwrap_or(rkind))?,
                RouteAction::Timer { at, token } => {
                    self.kernel
                        .schedule_at(at.max(now), NetEvent::RouteTimer { node: i, token })
                        .map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(())
    }

    fn trace_drop(&mut self, i: usize, packet: &Packet, reason: &'static str, kind: PacketKind) -> Result<(), String> {
        let now = self.now();
        let id = self.nodes[i].id;
        self.metrics.drop(reason);
        let (uid, len) = (packet.uid, packet.wire_length());
        self.record(|| TraceRecord::new(now, id.0, TraceEvent::Drop, uid, kind.to_string(), len).reason(reason))
    }

    fn app_commands(&mut self, commands: Vec<app::AppCommand>) -> Result<(), String> {
        for c in commands {
            match c {
                app::AppCommand::Send { from, dest, payload } => {
                    self.send(from, dest, payload).map_err(|e| e.to_string())?;
                }
                app::AppCommand::Timer { node, at, tag } => {
                    self.schedule_app_timer(node, at.max(self.now()), tag).map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(())
    }

    fn mac_actions(&mut self, i: usize, actions: Vec<MacAction>) -> Result<(), String> {
        let now = self.now();
        for action in actions {
            match action {
                MacAction::Transmit(frame) => self.transmit(i, frame)?,
                MacAction::Timer { at, token } => {
                    self.kernel
                        .schedule_at(at.max(now), NetEvent::MacTimer { node: i, token })
                        .map_err(|e| e.to_string())?;
                }
                MacAction::Deliver(packet) => {
                    let mut out = Vec::new();
                    let mut ctx = self.routing_ctx(i);
                    self.nodes[i].routing.on_receive(&mut ctx, packet, &mut out);
                    self.route_actions(i, out)?;
                }
                MacAction::GiveUp(packet) => {
                    let id = self.nodes[i].id;
                    self.metrics.drop("mac_give_up");
                    let kind = packet.kind().unwrap_or(self.routing_kind);
                    let (uid, len) = (packet.uid, packet.wire_length());
                    self.record(|| TraceRecord::new(now, id.0, TraceEvent::MacGiveUp, uid, kind.to_string(), len).reason("mac_give_up"))?;
                }
                MacAction::Drop(packet, reason) => {
                    let kind = packet.kind().unwrap_or(self.routing_kind);
                    self.trace_drop(i, &packet, reason.name(), kind)?;
                }
            }
        }
        Ok(())
    }

    fn transmit(&mut self, i: usize, mut frame: Packet) -> Result<(), String> {
        let now = self.now();
        let id = self.nodes[i].id;
        let mac = frame.header(Layer::Mac).ok_or("frame without a MAC header")?.public;
        frame
            .header_push(
                PublicHeader::new(PacketKind::PhyFrame, id, mac.sink),
                PrivateHeader::PhyFrame {
                    mode: self.phy.mode.code(),
                    spectrum_profile: 0,
                },
                self.header_mode,
            )
            .map_err(|e| e.to_string())?;
        let bits = frame.wire_bits();
        let len = frame.wire_length();
        let allocation = self.nodes[i].allocation.clone();
        let airtime = self.phy.airtime(bits);
        let span = SimTime::from_secs(airtime + allocation.guard_time).ok_or("invalid airtime")?;
        let tx_end = now + span;
        if self.nodes[i].rx.start_transmit(now, tx_end).is_err() {
            return self.trace_drop(i, &frame, DropReason::TxBusy.name(), mac.kind);
        }
        self.touch_energy(i);
        self.metrics.transmissions += 1;
        let uid = frame.uid;
        self.nodes[i].on_air = Some((uid, mac.kind, len));
        self.record(|| TraceRecord::new(now, id.0, TraceEvent::TxStart, uid, mac.kind.to_string(), len).peer(mac.sink.0))?;
        self.kernel.schedule_at(tx_end, NetEvent::TxEnd { node: i }).map_err(|e| e.to_string())?;

        let t = now.as_secs();
        let tx_pos = self.nodes[i].mobility.position(t);
        let flight = Rc::new(InFlight {
            frame,
            sender: i,
            mac_kind: mac.kind,
            mode: self.phy.mode,
            bits,
            allocation,
        });
        for j in 0..self.nodes.len() {
            if j == i {
                continue;
            }
            let rx_pos = self.nodes[j].mobility.position(t);
            let mut query = PropagationQuery::new(tx_pos, rx_pos, self.frequency_khz);
            query.time = now;
            let (snr_db, delay, blocked) = match self.propagation.loss(&query) {
                Ok(tl) => {
                    self.metrics.link_loss(tl.tl_db);
                    (self.phy.snr(tl.tl_db), tl.delay, None)
                }
                Err(PropagationError::OutOfCoverage { .. }) => (f64::NEG_INFINITY, self.propagation.delay(&query), Some(DropReason::OutOfCoverage)),
                Err(e) => return Err(e.to_string()),
            };
            let start = now + SimTime::from_secs(delay).ok_or("invalid propagation delay")?;
            let id = self.next_arrival;
            self.next_arrival += 1;
            let arrival = Arrival {
                node: j,
                id,
                flight: flight.clone(),
                snr_db,
                end: start + span,
                blocked,
            };
            self.kernel
                .schedule_at(start, NetEvent::RxStart(Box::new(arrival)))
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn on_tx_end(&mut self, i: usize) -> Result<(), String> {
        let now = self.now();
        self.nodes[i].rx.end_transmit(now);
        self.touch_energy(i);
        let mut out = Vec::new();
        let id = self.nodes[i].id;
        if let Some((uid, kind, len)) = self.nodes[i].on_air.take() {
            self.record(|| TraceRecord::new(now, id.0, TraceEvent::TxEnd, uid, kind.to_string(), len))?;
        }
        let n = &mut self.nodes[i];
        let mut ctx = MacCtx {
            now,
            node: id,
            rng: &mut n.mac_rng,
            header_mode: self.header_mode,
            next_uid: &mut self.next_uid,
        };
        n.mac.on_tx_end(&mut ctx, &mut out);
        self.mac_actions(i, out)
    }

    fn rx_record(&self, node: usize, event: TraceEvent, flight: &InFlight, snr: f64) -> TraceRecord {
        let rec = TraceRecord::new(
            self.now(),
            self.nodes[node].id.0,
            event,
            flight.frame.uid,
            flight.mac_kind.to_string(),
            flight.frame.wire_length(),
        )
        .peer(self.nodes[flight.sender].id.0);
        if snr.is_finite() {
            rec.snr(snr)
        } else {
            rec
        }
    }

    fn on_rx_start(&mut self, a: Arrival) -> Result<(), String> {
        let now = self.now();
        let reason = match a.blocked {
            Some(r) => Some(r),
            None if !self.phy.audible(a.snr_db) => Some(DropReason::LowSnr),
            None => None,
        };
        if let Some(r) = reason {
            self.metrics.drop(r.name());
            if self.trace.is_on() {
                let rec = self.rx_record(a.node, TraceEvent::RxDrop, &a.flight, a.snr_db).reason(r.name());
                self.record(|| rec)?;
            }
            return Ok(());
        }
        let node = &mut self.nodes[a.node];
        node.rx.arrival_start(a.id, now, a.end, a.flight.allocation.clone(), a.snr_db);
        self.touch_energy(a.node);
        if self.trace.is_on() {
            let rec = self.rx_record(a.node, TraceEvent::RxStart, &a.flight, a.snr_db);
            self.record(|| rec)?;
        }
        self.kernel
            .schedule_at(
                a.end,
                NetEvent::RxEnd {
                    node: a.node,
                    id: a.id,
                    flight: a.flight,
                },
            )
            .map_err(|e| e.to_string())?;
        Ok(())
    }

    fn on_rx_end(&mut self, i: usize, id: u64, flight: Rc<InFlight>) -> Result<(), String> {
        let node = &mut self.nodes[i];
        let outcome = node.rx.arrival_end(id).ok_or("arrival ended twice")?;
        self.touch_energy(i);
        let me = self.nodes[i].id;
        let sink = flight.frame.header(Layer::Phy).map(|h| h.public.sink).unwrap_or(NodeId::BROADCAST);
        let addressed = sink == me || sink.is_broadcast();
        let reason = match outcome.fate {
            RxFate::HalfDuplex => Some(DropReason::HalfDuplex),
            RxFate::Collided => Some(DropReason::Collision),
            RxFate::Clean => {
                let (gate_snr, interfered) = if self.phy.capture {
                    (outcome.sinr_db(), outcome.interference > 0.0)
                } else {
                    (outcome.snr_db, false)
                };
                match self.phy.reception_decision(gate_snr, flight.mode, flight.bits, &mut self.nodes[i].phy_rng) {
                    Decision::Accept => None,
                    Decision::Drop(DropReason::LowSnr) if interfered && outcome.snr_db >= self.phy.threshold_db(flight.mode) => {
                        Some(DropReason::Collision)
                    }
                    Decision::Drop(r) => Some(r),
                }
            }
        };
        if let Some(r) = reason {
            if r == DropReason::Collision && addressed {
                self.metrics.collisions += 1;
            }
            self.metrics.drop(r.name());
            if self.trace.is_on() {
                let rec = self.rx_record(i, TraceEvent::RxDrop, &flight, outcome.snr_db).reason(r.name());
                self.record(|| rec)?;
            }
            return Ok(());
        }
        if self.trace.is_on() {
            let rec = self.rx_record(i, TraceEvent::RxOk, &flight, outcome.snr_db);
            self.record(|| rec)?;
        }
        let mut frame = flight.frame.delivered_copy();
        frame.header_pop(Layer::Phy).map_err(|e| e.to_string())?;
        let now = self.now();
        let mut out = Vec::new();
        let n = &mut self.nodes[i];
        let mut ctx = MacCtx {
            now,
            node: me,
            rng: &mut n.mac_rng,
            header_mode: self.header_mode,
            next_uid: &mut self.next_uid,
        };
        n.mac.on_receive(&mut ctx, frame, &mut out);
        self.mac_actions(i, out)
    }
}

/// Load-free convenience: build and run a scenario with an in-memory trace.
pub fn run_scenario(scenario: &Scenario, trace: bool) -> Result<(RunOutcome, Vec<TraceRecord>), Error> {
    let mut net = Network::from_scenario(scenario)?;
    if trace && scenario.trace.enabled {
        net.set_trace(TraceSink::Memory(Vec::new()));
    }
    let outcome = net.run()?;
    Ok((outcome, net.take_trace().take_records()))
}
