//! Scenario files: one TOML document with network-wide settings and a list of
//! nodes. Device fields (position, mobility, subcarriers) vary per node; MAC,
//! routing, PHY and propagation are configured once for the whole network.

mod sweep;

pub use sweep::{apply_override, parse_value, sweep, with_overrides, SweepPoint};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::des::DEFAULT_MAX_EVENTS;
use crate::env::EnvParams;
use crate::error::{ConfigError, Error};
use crate::geometry::Position;
use crate::mac::MacParams;
use crate::mobility::MobilitySpec;
use crate::packet::{HeaderMode, NodeId};
use crate::phy::{PhyParams, SpectrumAllocation, SubcarrierSpec};
use crate::propagation::{
    synthetic_table, ArrivalTable, Propagation, PropagationModel, RangeParams, SyntheticTableParams, ThorpParams,
    DEFAULT_SOUND_SPEED,
};
use crate::routing::{RoutingParams, StaticTable};

/// Keys that only make sense network-wide and are refused inside `[[nodes]]`.
const NETWORK_KEYS: [&str; 7] = ["mac", "routing", "propagation", "phy", "spectrum", "header_mode", "sound_speed"];

const BUNDLED: [(&str, &str); 3] = [
    ("cluster5", include_str!("../../scenarios/cluster5.toml")),
    ("string21", include_str!("../../scenarios/string21.toml")),
    ("datacollect3x25", include_str!("../../scenarios/datacollect3x25.toml")),
];

/// Names of the scenarios compiled into the binary.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn default_name() -> String {
    "scenario".into()
}
fn default_seed() -> u64 {
    1
}
fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}
fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}
fn default_true() -> bool {
    true
}
fn default_payload() -> u32 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "SpectrumConfig::default_band_start")]
    pub band_start_hz: f64,
    #[serde(default = "SpectrumConfig::default_bandwidth")]
    pub total_bandwidth_hz: f64,
    #[serde(default = "SpectrumConfig::default_subcarriers")]
    pub num_subcarriers: usize,
    /// Defaults to the bandwidth divided evenly.
    #[serde(default)]
    pub subcarrier_spacing_hz: Option<f64>,
    /// Occupied subcarriers of nodes that do not override them.
    #[serde(default)]
    pub subcarriers: SubcarrierSpec,
    #[serde(default)]
    pub guard_time: f64,
}

impl SpectrumConfig {
    fn default_band_start() -> f64 {
        8000.0
    }
    fn default_bandwidth() -> f64 {
        4000.0
    }
    fn default_subcarriers() -> usize {
        64
    }

    /// Allocation of a node using `subcarriers` (or the network default).
    pub fn allocation(&self, subcarriers: Option<&SubcarrierSpec>) -> Result<SpectrumAllocation, String> {
        if self.num_subcarriers == 0 {
            return Err("at least one subcarrier is required".into());
        }
        let set = subcarriers.unwrap_or(&self.subcarriers).resolve(self.num_subcarriers)?;
        let alloc = SpectrumAllocation {
            band_start_hz: self.band_start_hz,
            total_bandwidth_hz: self.total_bandwidth_hz,
            num_subcarriers: self.num_subcarriers,
            subcarrier_spacing_hz: self
                .subcarrier_spacing_hz
                .unwrap_or(self.total_bandwidth_hz / self.num_subcarriers as f64),
            subcarriers: set,
            guard_time: self.guard_time,
        };
        alloc.validate()?;
        Ok(alloc)
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        toml::from_str("").expect("all spectrum fields have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSource {
    /// Arrival-table CSV, relative to the scenario file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// `"munk"`: the built-in synthetic deep-water table.
    #[serde(default)]
    pub builtin: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum PropagationConfig {
    Range(RangeParams),
    Thorp(ThorpParams),
    Table(TableSource),
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig::Thorp(ThorpParams::default())
    }
}

impl PropagationConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PropagationConfig::Range(_) => "range",
            PropagationConfig::Thorp(_) => "thorp",
            PropagationConfig::Table(_) => "table",
        }
    }

    pub fn build(&self, sound_speed: f64, base_dir: Option<&Path>) -> Result<Propagation, ConfigError> {
        let cfg = |m: String| ConfigError::new("propagation", m);
        let model = match self {
            PropagationConfig::Range(p) => PropagationModel::Range(*p),
            PropagationConfig::Thorp(p) => PropagationModel::Thorp(*p),
            PropagationConfig::Table(src) => PropagationModel::Table(match (&src.file, src.builtin.as_deref()) {
                (Some(f), None) => {
                    let path = match base_dir {
                        Some(dir) if f.is_relative() => dir.join(f),
                        _ => f.clone(),
                    };
                    ArrivalTable::load(&path).map_err(|e| ConfigError::new("propagation.file", format!("{}: {e}", path.display())))?
                }
                (None, Some("munk")) => synthetic_table(&SyntheticTableParams::default()).map_err(|e| cfg(e.to_string()))?,
                (None, Some(other)) => {
                    return Err(ConfigError::new("propagation.builtin", format!("unknown built-in table {other:?}; available: \"munk\"")))
                }
                _ => return Err(cfg("a table model needs exactly one of `file` or `builtin`".into())),
            }),
        };
        Propagation::new(model, sound_speed).map_err(|e| cfg(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { enabled: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: u16,
    pub position: Position,
    #[serde(default)]
    pub mobility: MobilitySpec,
    #[serde(default)]
    pub subcarriers: Option<SubcarrierSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficPattern {
    #[default]
    Cbr,
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub source: u16,
    /// `65535` broadcasts.
    pub destination: u16,
    #[serde(default)]
    pub pattern: TrafficPattern,
    /// Seconds between packets (CBR) or the mean gap (Poisson).
    #[serde(default)]
    pub interval: Option<f64>,
    /// Packets per second; alternative to `interval`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default = "default_payload")]
    pub payload_bytes: u32,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<u64>,
}

impl TrafficConfig {
    /// Mean gap between packets.
    pub fn mean_interval(&self) -> Option<f64> {
        match (self.interval, self.rate) {
            (Some(i), None) => Some(i),
            (None, Some(r)) => Some(1.0 / r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seconds of simulated time.
    pub duration: f64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    #[serde(default)]
    pub header_mode: HeaderMode,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(default)]
    pub phy: PhyParams,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub mac: MacParams,
    #[serde(default)]
    pub routing: RoutingParams,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub env: Option<EnvParams>,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub traffic: Vec<TrafficConfig>,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn toml_error(e: toml::de::Error) -> ConfigError {
    let msg = e.message().to_string();
    let location = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "document".into());
    ConfigError::new(location, msg)
}

/// Refuse per-node copies of network-wide settings.
fn check_uniformity(doc: &toml::Table) -> Result<(), ConfigError> {
    let Some(toml::Value::Array(nodes)) = doc.get("nodes") else { return Ok(()) };
    for (i, node) in nodes.iter().enumerate() {
        if let toml::Value::Table(t) = node {
            for key in NETWORK_KEYS {
                if t.contains_key(key) {
                    return Err(ConfigError::new(
                        format!("nodes[{i}].{key}"),
                        "network settings are uniform across the scenario and cannot be set per node",
                    ));
                }
            }
        }
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(toml_error)?;
        Self::from_table(doc)
    }

    pub fn from_table(doc: toml::Table) -> Result<Self, ConfigError> {
        check_uniformity(&doc)?;
        let scenario: Scenario = serde_path_to_error::deserialize(toml::Value::Table(doc)).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "document".into() } else { path }, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Read a scenario file, or a bundled scenario by name.
    pub fn load(source: &str) -> Result<Self, Error> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let mut s = Self::from_toml_str(&text)?;
            s.base_dir = path.parent().map(Path::to_path_buf);
            Ok(s)
        } else if let Some(text) = bundled(source) {
            Ok(Self::from_toml_str(text)?)
        } else {
            Err(ConfigError::new(
                "scenario",
                format!(
                    "{source:?} is neither a file nor a bundled scenario ({})",
                    bundled_names().collect::<Vec<_>>().join(", ")
                ),
            )
            .into())
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn node_ids(&self) -> BTreeSet<NodeId> {
        self.nodes.iter().map(|n| NodeId(n.id)).collect()
    }

    /// Checks that need no file access beyond the scenario itself.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = |p: &str, m: String| Err(ConfigError::new(p, m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return e("duration", format!("must be > 0, got {}", self.duration));
        }
        if self.max_events == 0 {
            return e("max_events", "must be > 0".into());
        }
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite()) {
            return e("sound_speed", format!("must be > 0, got {}", self.sound_speed));
        }
        self.phy.validate().or_else(|(k, m)| e(&format!("phy.{k}"), m))?;
        if let RoutingParams::Vbf(v) = &self.routing {
            v.validate().or_else(|(k, m)| e(&format!("routing.{k}"), m))?;
        }
        if let MacParams::Sfama(p) = &self.mac {
            if p.max_backoff_slots == 0 {
                return e("mac.max_backoff_slots", "must be >= 1".into());
            }
            if let Some(l) = p.slot_length {
                if !(l > 0.0 && l.is_finite()) {
                    return e("mac.slot_length", format!("must be > 0, got {l}"));
                }
            }
        }
        self.spectrum.allocation(None).map_err(|m| ConfigError::new("spectrum", m))?;
        if self.nodes.is_empty() {
            return e("nodes", "at least one node is required".into());
        }
        let mut ids = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if NodeId(n.id).is_broadcast() {
                return e(&format!("nodes[{i}].id"), format!("{} is reserved for broadcast", n.id));
            }
            if !ids.insert(n.id) {
                return e(&format!("nodes[{i}].id"), format!("duplicate node id {}", n.id));
            }
            if !n.position.is_finite() {
                return e(&format!("nodes[{i}].position"), "must be finite".into());
            }
            if let Some(sc) = &n.subcarriers {
                self.spectrum.allocation(Some(sc)).map_err(|m| ConfigError::new(format!("nodes[{i}].subcarriers"), m))?;
            }
        }
        for (i, t) in self.traffic.iter().enumerate() {
            let p = |k: &str| format!("traffic[{i}].{k}");
            if !ids.contains(&t.source) {
                return e(&p("source"), format!("unknown node {}", t.source));
            }
            let broadcast = NodeId(t.destination).is_broadcast();
            if !broadcast && !ids.contains(&t.destination) {
                return e(&p("destination"), format!("unknown node {}", t.destination));
            }
            if broadcast && matches!(self.routing, RoutingParams::Vbf(_)) {
                return e(&p("destination"), "vector-based forwarding needs a unicast destination".into());
            }
            match t.mean_interval() {
                Some(g) if g > 0.0 && g.is_finite() => {}
                Some(g) => return e(&p("interval"), format!("must be > 0, got {g}")),
                None => return e(&format!("traffic[{i}]"), "give exactly one of `interval` or `rate`".into()),
            }
            if !(t.start >= 0.0 && t.start.is_finite()) {
                return e(&p("start"), format!("must be >= 0, got {}", t.start));
            }
            if t.stop.is_some_and(|s| !(s >= t.start)) {
                return e(&p("stop"), "must not precede `start`".into());
            }
            if t.payload_bytes > u16::MAX as u32 {
                return e(&p("payload_bytes"), format!("at most {} bytes", u16::MAX));
            }
        }
        if let Some(env) = &self.env {
            env.validate(self)?;
        }
        Ok(())
    }

    /// Resolve the static route table (inline or from file).
    pub fn static_table(&self) -> Result<StaticTable, ConfigError> {
        let RoutingParams::Static(p) = &self.routing else {
            return Ok(StaticTable::direct());
        };
        let table = match (&p.routes, &p.file) {
            (None, None) => StaticTable::direct(),
            (Some(r), None) => StaticTable::from_triples(r.iter().copied()).map_err(|m| ConfigError::new("routing.routes", m))?,
            (None, Some(f)) => {
                let path = match &self.base_dir {
                    Some(dir) if f.is_relative() => dir.join(f),
                    _ => f.clone(),
                };
                let file = std::fs::File::open(&path).map_err(|e| ConfigError::new("routing.file", format!("{}: {e}", path.display())))?;
                StaticTable::read_csv(file).map_err(|m| ConfigError::new("routing.file", m))?
            }
            (Some(_), Some(_)) => return Err(ConfigError::new("routing", "give either `routes` or `file`, not both")),
        };
        table.validate(&self.node_ids()).map_err(|m| ConfigError::new("routing", m))?;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        duration = 10.0
        [[nodes]]
        id = 1
        position = [0.0, 0.0, 10.0]
        [[nodes]]
        id = 2
        position = [100.0, 0.0, 10.0]
        [[traffic]]
        source = 1
        destination = 2
        interval = 1.0
    "#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.seed, 1);
        assert_eq!(s.mac, MacParams::Aloha {});
        assert_eq!(s.propagation.name(), "thorp");
        assert_eq!(s.traffic[0].payload_bytes, 100);
        assert!(s.trace.enabled);
    }

    #[test]
    fn bundled_scenarios_load() {
        for name in bundled_names() {
            let s = Scenario::load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            s.static_table().unwrap();
        }
    }

    #[test]
    fn per_node_mac_is_rejected_with_its_path() {
        let text = MINIMAL.replace("id = 2\n", "id = 2\n        mac = { protocol = \"sfama\" }\n");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert_eq!(err.path, "nodes[1].mac");
    }

    #[test]
    fn schema_errors_carry_key_paths() {
        let err = Scenario::from_toml_str(&format!("{MINIMAL}\n[phy]\nmode = \"qam128\"\n")).unwrap_err();
        assert_eq!(err.path, "phy.mode");
        let err = Scenario::from_toml_str(&format!("{MINIMAL}\n[mac]\nprotocol = \"sfama\"\nslots = 3\n")).unwrap_err();
        assert!(err.path.starts_with("mac"), "{err}");
        let err = Scenario::from_toml_str(&MINIMAL.replace("interval = 1.0", "interval = -1.0")).unwrap_err();
        assert_eq!(err.path, "traffic[0].interval");
        let err = Scenario::from_toml_str(&MINIMAL.replace("destination = 2", "destination = 7")).unwrap_err();
        assert_eq!(err.path, "traffic[0].destination");
    }

    #[test]
    fn per_mode_thresholds_parse() {
        let s = Scenario::from_toml_str(&format!("{MINIMAL}\n[phy]\nmode = \"qam16\"\n[phy.thresholds]\nqam16 = 20.0\n")).unwrap();
        assert_eq!(s.phy.threshold_db(crate::phy::Modulation::Qam16), 20.0);
    }

    #[test]
    fn propagation_variants_parse() {
        let s = Scenario::from_toml_str(&format!("{MINIMAL}\n[propagation]\nmodel = \"range\"\nthreshold_m = 3000.0\n")).unwrap();
        assert_eq!(s.propagation.name(), "range");
        let s = Scenario::from_toml_str(&format!("{MINIMAL}\n[propagation]\nmodel = \"table\"\nbuiltin = \"munk\"\n")).unwrap();
        assert_eq!(s.propagation.build(1500.0, None).unwrap().model.name(), "table");
        assert!(Scenario::from_toml_str(&format!("{MINIMAL}\n[propagation]\nmodel = \"bellhop\"\n")).is_err());
    }

    #[test]
    fn routes_validate_at_load() {
        let text = format!("{MINIMAL}\n[routing]\nprotocol = \"static\"\nroutes = [[1, 2, 1]]\n");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(s.static_table().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::load("cluster5").unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }
}
