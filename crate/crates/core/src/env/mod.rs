//! Step-based environment over a running network: several AUV agents share
//! state through request/reply packets on the simulated channel and poll a
//! grid of sensors for buffered data.
//!
//! Every step each agent broadcasts a request at a random offset within the
//! first `request_jitter` seconds; the other agents answer after a random
//! jitter with their position and collected count. An agent's view of a peer is the newest reply it actually received,
//! with the reply's age. A peer is masked when nothing was ever heard from it
//! or when the last request whose reply deadline has passed went unanswered.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::des::{node_rng, RngStream, SimTime, StreamPurpose};
use crate::error::{ConfigError, EnvError};
use crate::geometry::Position;
use crate::mobility::{AuvInstruction, AuvPath, Mobility, NodeMobility};
use crate::net::{AppApi, Application, Network};
use crate::packet::{NodeId, Packet, Payload};
use crate::scenario::Scenario;

/// Hover plus eight compass headings.
pub const NUM_ACTIONS: usize = 9;
pub const ACTION_NAMES: [&str; NUM_ACTIONS] = ["hover", "e", "ne", "n", "nw", "w", "sw", "s", "se"];

const OWN_FEATURES: [&str; 4] = ["x", "y", "z", "collected"];
const REMOTE_FEATURES: [&str; 6] = ["x", "y", "z", "collected", "age", "mask"];

const TAG_REQ: u32 = 1;
const TAG_REP: u32 = 2;
const TAG_POLL: u32 = 3;
const TAG_DATA: u32 = 4;

fn default_step() -> f64 {
    5.0
}
fn default_horizon() -> u64 {
    500
}
fn default_speed() -> f64 {
    2.0
}
fn default_lambda() -> f64 {
    0.001
}
fn default_collection_range() -> f64 {
    300.0
}
fn default_jitter() -> f64 {
    0.5
}
fn default_request_jitter() -> f64 {
    2.0
}
fn default_initial_buffer() -> u32 {
    4
}
fn default_request_bytes() -> u32 {
    8
}
fn default_reply_bytes() -> u32 {
    24
}
fn default_data_bytes() -> u32 {
    64
}

/// `[env]` section of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    /// Controlled AUV node ids, in observation order.
    pub agents: Vec<u16>,
    /// Sensor node ids; every non-agent node when absent.
    #[serde(default)]
    pub sensors: Option<Vec<u16>>,
    #[serde(default = "default_step")]
    pub step_duration: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// AUV speed for the heading actions, m/s.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Reward cost per metre moved.
    #[serde(default = "default_lambda")]
    pub reward_lambda: f64,
    /// An agent polls the nearest non-empty sensor within this distance.
    #[serde(default = "default_collection_range")]
    pub collection_range: f64,
    /// Each agent sends its request and its poll at independent uniform
    /// offsets in `[0, request_jitter)` seconds after the step start.
    #[serde(default = "default_request_jitter")]
    pub request_jitter: f64,
    /// Replies wait uniformly in `[0, reply_jitter]` seconds.
    #[serde(default = "default_jitter")]
    pub reply_jitter: f64,
    /// Seconds after a request before a missing reply masks the peer;
    /// defaults to the step duration.
    #[serde(default)]
    pub reply_timeout: Option<f64>,
    #[serde(default = "default_initial_buffer")]
    pub initial_buffer: u32,
    /// New data items per sensor per second (Poisson).
    #[serde(default)]
    pub sensor_rate: f64,
    #[serde(default = "default_request_bytes")]
    pub request_bytes: u32,
    #[serde(default = "default_reply_bytes")]
    pub reply_bytes: u32,
    #[serde(default = "default_data_bytes")]
    pub data_bytes: u32,
}

impl EnvParams {
    pub fn sensors(&self, scenario: &Scenario) -> Vec<u16> {
        match &self.sensors {
            Some(s) => s.clone(),
            None => scenario.nodes.iter().map(|n| n.id).filter(|id| !self.agents.contains(id)).collect(),
        }
    }

    pub fn reply_timeout(&self) -> f64 {
        self.reply_timeout.unwrap_or(self.step_duration)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), ConfigError> {
        let e = |k: &str, m: String| Err(ConfigError::new(format!("env.{k}"), m));
        let ids = scenario.node_ids();
        if self.agents.is_empty() {
            return e("agents", "at least one agent is required".into());
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !ids.contains(&NodeId(*a)) {
                return e(&format!("agents[{i}]"), format!("unknown node {a}"));
            }
            if self.agents[..i].contains(a) {
                return e(&format!("agents[{i}]"), format!("node {a} listed twice"));
            }
        }
        for (i, s) in self.sensors(scenario).iter().enumerate() {
            if !ids.contains(&NodeId(*s)) {
                return e(&format!("sensors[{i}]"), format!("unknown node {s}"));
            }
            if self.agents.contains(s) {
                return e(&format!("sensors[{i}]"), format!("node {s} is also an agent"));
            }
        }
        let positive = [
            ("step_duration", self.step_duration),
            ("collection_range", self.collection_range),
            ("reply_timeout", self.reply_timeout()),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return e(k, format!("must be > 0, got {v}"));
            }
        }
        let non_negative = [
            ("speed", self.speed),
            ("reward_lambda", self.reward_lambda),
            ("reply_jitter", self.reply_jitter),
            ("request_jitter", self.request_jitter),
            ("sensor_rate", self.sensor_rate),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return e(k, format!("must be >= 0, got {v}"));
            }
        }
        if self.request_jitter >= self.step_duration {
            return e("request_jitter", format!("must be < step_duration ({})", self.step_duration));
        }
        if self.horizon == 0 {
            return e("horizon", "must be >= 1".into());
        }
        Ok(())
    }
}

/// The newest reply from one peer as seen by one agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeerView {
    pub position: Position,
    pub collected: f64,
    pub measured_at: SimTime,
    /// Sequence number (step index) of the request it answered.
    pub request: u64,
    /// Uid of the reply packet that carried it.
    pub uid: u64,
}

#[derive(Debug)]
struct Collect {
    agents: Vec<NodeId>,
    agent_index: HashMap<NodeId, usize>,
    sensor_index: HashMap<NodeId, usize>,
    buffers: Vec<u32>,
    collected: Vec<u64>,
    step_collected: Vec<u64>,
    /// `views[a][b]`: agent `a`'s latest view of agent `b`.
    views: Vec<Vec<Option<PeerView>>>,
    /// `answered[a][b]`: highest request sequence of `a` that `b` answered.
    answered: Vec<Vec<Option<u64>>>,
    rngs: Vec<RngStream>,
    arrivals: RngStream,
    jitter: f64,
    reply_bytes: u32,
    data_bytes: u32,
    pending_replies: HashMap<u64, (usize, usize, u64)>,
    pending_sends: HashMap<u64, (NodeId, Payload)>,
    next_tag: u64,
}

impl Application for Collect {
    fn on_deliver(&mut self, api: &mut AppApi<'_>, node: NodeId, packet: &Packet) {
        let Some(&from) = packet.payload.values.first() else { return };
        let from = NodeId(from as u16);
        match packet.payload.tag {
            TAG_REQ => {
                let (Some(&me), Some(&peer)) = (self.agent_index.get(&node), self.agent_index.get(&from)) else { return };
                let seq = packet.payload.values[1] as u64;
                let delay = self.rngs[me].random::<f64>() * self.jitter;
                self.next_tag += 1;
                self.pending_replies.insert(self.next_tag, (me, peer, seq));
                api.timer(node, delay, self.next_tag);
            }
            TAG_REP => {
                let (Some(&me), Some(&peer)) = (self.agent_index.get(&node), self.agent_index.get(&from)) else { return };
                let v = &packet.payload.values;
                let seq = v[1] as u64;
                let view = PeerView {
                    position: Position::new(v[2], v[3], v[4]),
                    collected: v[5],
                    measured_at: packet.created_at,
                    request: seq,
                    uid: packet.uid,
                };
                if self.views[me][peer].is_none_or(|old| old.measured_at <= view.measured_at) {
                    self.views[me][peer] = Some(view);
                }
                let a = &mut self.answered[me][peer];
                *a = Some(a.map_or(seq, |s| s.max(seq)));
            }
            TAG_POLL => {
                let Some(&s) = self.sensor_index.get(&node) else { return };
                if self.buffers[s] > 0 {
                    api.send(node, from, Payload { size: self.data_bytes, tag: TAG_DATA, values: vec![node.0 as f64] });
                }
            }
            TAG_DATA => {
                let (Some(&me), Some(&s)) = (self.agent_index.get(&node), self.sensor_index.get(&from)) else { return };
                if self.buffers[s] > 0 {
                    self.buffers[s] -= 1;
                    self.collected[me] += 1;
                    self.step_collected[me] += 1;
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, api: &mut AppApi<'_>, node: NodeId, tag: u64) {
        if let Some((dest, payload)) = self.pending_sends.remove(&tag) {
            api.send(node, dest, payload);
            return;
        }
        let Some((me, peer, seq)) = self.pending_replies.remove(&tag) else { return };
        let Some(p) = api.position(node) else { return };
        let values = vec![node.0 as f64, seq as f64, p.x, p.y, p.z, self.collected[me] as f64];
        api.send(node, self.agents[peer], Payload { size: self.reply_bytes, tag: TAG_REP, values });
    }
}

/// Have agent `i` send `payload` at a uniform offset in `[0, jitter)`.
fn defer(net: &mut Network<Collect>, i: usize, dest: NodeId, payload: Payload, jitter: f64) -> Result<(), crate::error::Error> {
    let now = net.now();
    let app = net.app_mut();
    let delay = app.rngs[i].random::<f64>() * jitter;
    app.next_tag += 1;
    let tag = app.next_tag;
    let node = app.agents[i];
    app.pending_sends.insert(tag, (dest, payload));
    let at = now + SimTime::from_secs(delay).expect("validated jitter");
    net.schedule_app_timer(node, at, tag)
}

/// One agent's observation.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentObservation {
    /// Flat feature vector laid out per [`ObservationSpec::names`]; masked
    /// remote features hold 0.
    pub values: Vec<f64>,
    /// Per peer (in agent order, self skipped): the reply the values came from.
    pub sources: Vec<Option<PeerView>>,
}

impl AgentObservation {
    /// Mask bit of the `k`-th peer.
    pub fn peer_masked(&self, k: usize) -> bool {
        self.values[OWN_FEATURES.len() + k * REMOTE_FEATURES.len() + 5] != 0.0
    }

    /// Age in seconds of the `k`-th peer's features, `None` when masked.
    pub fn peer_age(&self, k: usize) -> Option<f64> {
        (!self.peer_masked(k)).then(|| self.values[OWN_FEATURES.len() + k * REMOTE_FEATURES.len() + 4])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub time: SimTime,
    pub agents: Vec<AgentObservation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub collected: Vec<u64>,
    pub distance: Vec<f64>,
    pub remaining: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObservationSpec {
    pub agents: Vec<u16>,
    pub names: Vec<String>,
}

impl ObservationSpec {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionSpec {
    pub agents: Vec<u16>,
    pub n: usize,
    pub names: Vec<String>,
}

/// Multi-AUV data collection over the simulated network.
pub struct DataCollectEnv {
    scenario: Scenario,
    params: EnvParams,
    sensors: Vec<u16>,
    net: Option<Network<Collect>>,
    steps: u64,
    done: bool,
    closed: bool,
    step_len: SimTime,
    trace: bool,
}

fn heading_velocity(action: usize, speed: f64) -> Option<[f64; 3]> {
    if action == 0 {
        return None;
    }
    let angle = (action - 1) as f64 * std::f64::consts::FRAC_PI_4;
    Some([speed * angle.cos(), speed * angle.sin(), 0.0])
}

impl DataCollectEnv {
    pub fn new(scenario: Scenario) -> Result<Self, EnvError> {
        let params = scenario
            .env
            .clone()
            .ok_or_else(|| ConfigError::new("env", "the scenario has no [env] section"))?;
        params.validate(&scenario)?;
        let step_len = SimTime::from_secs(params.step_duration).expect("validated");
        Ok(DataCollectEnv {
            sensors: params.sensors(&scenario),
            scenario,
            params,
            net: None,
            steps: 0,
            done: false,
            closed: false,
            step_len,
            trace: false,
        })
    }

    /// Load a scenario file or bundled name.
    pub fn load(source: &str) -> Result<Self, EnvError> {
        Self::new(Scenario::load(source)?)
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    /// Record a packet trace in memory from the next reset on.
    pub fn set_trace(&mut self, on: bool) {
        self.trace = on;
    }

    pub fn network(&self) -> Option<&Network<impl Application>> {
        self.net.as_ref()
    }

    pub fn network_mut(&mut self) -> Option<&mut Network<impl Application>> {
        self.net.as_mut()
    }

    pub fn observation_spec(&self) -> ObservationSpec {
        let peers = self.params.agents.len() - 1;
        let names = OWN_FEATURES
            .iter()
            .map(|f| format!("self.{f}"))
            .chain((0..peers).flat_map(|k| REMOTE_FEATURES.iter().map(move |f| format!("peer{k}.{f}"))))
            .chain(self.sensors.iter().map(|s| format!("sensor{s}.buffer")))
            .collect();
        ObservationSpec {
            agents: self.params.agents.clone(),
            names,
        }
    }

    pub fn action_spec(&self) -> ActionSpec {
        ActionSpec {
            agents: self.params.agents.clone(),
            n: NUM_ACTIONS,
            names: ACTION_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn check_open(&self) -> Result<(), EnvError> {
        if self.closed {
            Err(EnvError::Closed)
        } else {
            Ok(())
        }
    }

    /// Start a fresh episode; `seed` overrides the scenario seed.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Observation, EnvError> {
        self.check_open()?;
        let mut scenario = self.scenario.clone();
        if let Some(s) = seed {
            scenario.seed = s;
        }
        let p = &self.params;
        let agents: Vec<NodeId> = p.agents.iter().map(|&a| NodeId(a)).collect();
        let n = agents.len();
        let app = Collect {
            agent_index: agents.iter().enumerate().map(|(i, a)| (*a, i)).collect(),
            sensor_index: self.sensors.iter().enumerate().map(|(i, s)| (NodeId(*s), i)).collect(),
            buffers: vec![p.initial_buffer; self.sensors.len()],
            collected: vec![0; n],
            step_collected: vec![0; n],
            views: vec![vec![None; n]; n],
            answered: vec![vec![None; n]; n],
            rngs: agents.iter().map(|a| node_rng(scenario.seed, a.0, StreamPurpose::Environment)).collect(),
            arrivals: node_rng(scenario.seed, u16::MAX, StreamPurpose::Environment),
            jitter: p.reply_jitter,
            reply_bytes: p.reply_bytes,
            data_bytes: p.data_bytes,
            pending_replies: HashMap::new(),
            pending_sends: HashMap::new(),
            next_tag: 0,
            agents,
        };
        let mut net = Network::build(&scenario, app)?;
        if self.trace {
            net.set_trace(crate::trace::TraceSink::Memory(Vec::new()));
        }
        self.net = Some(net);
        self.steps = 0;
        self.done = false;
        Ok(self.observe())
    }

    fn net(&mut self) -> &mut Network<Collect> {
        self.net.as_mut().expect("reset before step")
    }

    fn observe(&self) -> Observation {
        let net = self.net.as_ref().expect("reset before observe");
        let app = net.app();
        let now = net.now();
        let timeout = SimTime::from_secs(self.params.reply_timeout()).expect("validated");
        // Request k goes out during step k; its deadline counts from the step start.
        let resolved = (0..self.steps).rev().find(|k| SimTime::from_nanos(k * self.step_len.as_nanos()) + timeout <= now);
        let agents = app
            .agents
            .iter()
            .enumerate()
            .map(|(a, &id)| {
                let pos = net.position(id).expect("agent exists");
                let mut values = vec![pos.x, pos.y, pos.z, app.collected[a] as f64];
                let mut sources = Vec::new();
                for b in (0..app.agents.len()).filter(|&b| b != a) {
                    let view = app.views[a][b];
                    let missed = resolved.is_some_and(|k| app.answered[a][b].is_none_or(|s| s < k));
                    match view {
                        Some(v) if !missed => {
                            let age = now.saturating_sub(v.measured_at).as_secs();
                            values.extend([v.position.x, v.position.y, v.position.z, v.collected, age, 0.0]);
                            sources.push(Some(v));
                        }
                        _ => {
                            values.extend([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
                            sources.push(None);
                        }
                    }
                }
                values.extend(app.buffers.iter().map(|&b| b as f64));
                AgentObservation { values, sources }
            })
            .collect();
        Observation { time: now, agents }
    }

    /// Apply one action per agent and advance one step.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        self.check_open()?;
        if self.net.is_none() {
            return Err(EnvError::Schema("call reset before step".into()));
        }
        if self.done {
            return Err(EnvError::Done);
        }
        let n = self.params.agents.len();
        if actions.len() != n {
            return Err(EnvError::Schema(format!("expected {n} actions, got {}", actions.len())));
        }
        if let Some((i, a)) = actions.iter().enumerate().find(|(_, &a)| a >= NUM_ACTIONS) {
            return Err(EnvError::Schema(format!("action {a} of agent {i} outside 0..{NUM_ACTIONS}")));
        }
        let params = self.params.clone();
        let step = self.steps;
        let step_len = self.step_len;
        let sensors = self.sensors.clone();
        let sensor_pos: Vec<Position> = {
            let net = self.net();
            sensors.iter().map(|&s| net.position(NodeId(s)).expect("sensor exists")).collect()
        };
        let net = self.net();
        let now = net.now();
        let t = now.as_secs();
        let mut distance = vec![0.0; n];
        for (i, (&agent, &action)) in params.agents.iter().zip(actions).enumerate() {
            let id = NodeId(agent);
            let pos = net.position(id).expect("agent exists");
            let model = match heading_velocity(action, params.speed) {
                None => Mobility::Static(pos),
                Some(velocity) => {
                    distance[i] = params.speed * params.step_duration;
                    let line = AuvInstruction::Line {
                        velocity,
                        duration: params.step_duration,
                    };
                    Mobility::Auv(AuvPath::new(pos, 0.0, &[line]).map_err(crate::error::Error::from)?)
                }
            };
            net.set_mobility(id, NodeMobility::starting_at(model, t))?;
        }
        net.app_mut().step_collected.iter_mut().for_each(|c| *c = 0);
        for (i, &agent) in params.agents.iter().enumerate() {
            let payload = Payload {
                size: params.request_bytes,
                tag: TAG_REQ,
                values: vec![agent as f64, step as f64],
            };
            defer(net, i, NodeId::BROADCAST, payload, params.request_jitter)?;
        }
        for (i, &agent) in params.agents.iter().enumerate() {
            let pos = net.position(NodeId(agent)).expect("agent exists");
            let buffers = &net.app().buffers;
            let target = sensor_pos
                .iter()
                .enumerate()
                .filter(|(k, p)| buffers[*k] > 0 && p.distance(pos) <= params.collection_range)
                .min_by(|a, b| a.1.distance(pos).total_cmp(&b.1.distance(pos)))
                .map(|(k, _)| sensors[k]);
            if let Some(s) = target {
                let payload = Payload {
                    size: params.request_bytes,
                    tag: TAG_POLL,
                    values: vec![agent as f64],
                };
                defer(net, i, NodeId(s), payload, params.request_jitter)?;
            }
        }
        let until = SimTime::from_nanos((step + 1) * step_len.as_nanos());
        net.run_until(until)?;
        if params.sensor_rate > 0.0 {
            let poisson = Poisson::new(params.sensor_rate * params.step_duration).expect("positive mean");
            let app = net.app_mut();
            for b in &mut app.buffers {
                *b += poisson.sample(&mut app.arrivals) as u32;
            }
        }
        self.steps += 1;
        let app = self.net.as_ref().expect("running").app();
        let collected = app.step_collected.clone();
        let remaining: u64 = app.buffers.iter().map(|&b| b as u64).sum();
        let rewards = collected
            .iter()
            .zip(&distance)
            .map(|(&c, &d)| c as f64 - params.reward_lambda * d)
            .collect();
        self.done = self.steps >= params.horizon || remaining == 0;
        Ok(StepResult {
            observation: self.observe(),
            rewards,
            done: self.done,
            info: StepInfo {
                collected,
                distance,
                remaining,
            },
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn now(&self) -> Option<SimTime> {
        self.net.as_ref().map(|n| n.now())
    }

    /// Release the simulation; later calls fail with [`EnvError::Closed`].
    pub fn close(&mut self) {
        self.net = None;
        self.closed = true;
    }
}
