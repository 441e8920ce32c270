use rayon::prelude::*;

use super::Scenario;
use crate::error::{ConfigError, Error};
use crate::net::{MetricsSummary, Network};

/// Parse a command-line value as TOML (`3`, `2.5`, `true`, `"x"`), falling
/// back to a bare string so `qpsk` works unquoted.
pub fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

enum Step<'a> {
    Key(&'a str),
    Index(usize),
    All,
}

fn parse_path(path: &str) -> Result<Vec<Step<'_>>, ConfigError> {
    let bad = || ConfigError::new(path, "malformed parameter path");
    let mut steps = Vec::new();
    for part in path.split('.') {
        let (name, rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if name.is_empty() {
            return Err(bad());
        }
        steps.push(Step::Key(name));
        let mut rest = rest;
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped.find(']').ok_or_else(bad)?;
            let inner = &stripped[..end];
            steps.push(if inner == "*" {
                Step::All
            } else {
                Step::Index(inner.parse().map_err(|_| bad())?)
            });
            rest = &stripped[end + 1..];
        }
        if !rest.is_empty() {
            return Err(bad());
        }
    }
    Ok(steps)
}

fn set(target: &mut toml::Value, steps: &[Step<'_>], value: &toml::Value, path: &str) -> Result<(), ConfigError> {
    let Some((first, rest)) = steps.split_first() else {
        *target = value.clone();
        return Ok(());
    };
    match first {
        Step::Key(k) => {
            let toml::Value::Table(t) = target else {
                return Err(ConfigError::new(path, format!("`{k}` is not inside a table")));
            };
            if rest.is_empty() {
                t.insert(k.to_string(), value.clone());
                return Ok(());
            }
            let next = match rest[0] {
                Step::Key(_) => toml::Value::Table(toml::Table::new()),
                _ => toml::Value::Array(Vec::new()),
            };
            set(t.entry(k.to_string()).or_insert(next), rest, value, path)
        }
        Step::Index(i) => {
            let toml::Value::Array(a) = target else {
                return Err(ConfigError::new(path, "index applied to a non-array"));
            };
            let len = a.len();
            let item = a.get_mut(*i).ok_or_else(|| ConfigError::new(path, format!("index {i} out of range (length {len})")))?;
            set(item, rest, value, path)
        }
        Step::All => {
            let toml::Value::Array(a) = target else {
                return Err(ConfigError::new(path, "`[*]` applied to a non-array"));
            };
            a.iter_mut().try_for_each(|item| set(item, rest, value, path))
        }
    }
}

/// Set a dotted key such as `phy.mode`, `traffic[0].rate` or `traffic[*].rate`.
pub fn apply_override(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let steps = parse_path(path)?;
    let mut root = toml::Value::Table(std::mem::take(doc));
    let result = set(&mut root, &steps, &value, path);
    if let toml::Value::Table(t) = root {
        *doc = t;
    }
    result
}

/// Apply `overrides` in order and revalidate.
pub fn with_overrides(base: &Scenario, overrides: &[(String, toml::Value)]) -> Result<Scenario, ConfigError> {
    let mut doc = toml::Table::try_from(base).map_err(|e| ConfigError::new("scenario", e.to_string()))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v.clone())?;
    }
    let mut s = Scenario::from_table(doc)?;
    s.base_dir = base.base_dir.clone();
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: toml::Value,
    pub metrics: MetricsSummary,
}

/// Run `base` once per value of `key`, in parallel, all with the base seed.
pub fn sweep(base: &Scenario, key: &str, values: &[toml::Value]) -> Result<Vec<SweepPoint>, Error> {
    let scenarios = values
        .iter()
        .map(|v| with_overrides(base, &[(key.to_string(), v.clone())]))
        .collect::<Result<Vec<_>, _>>()?;
    scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| {
            let mut net = Network::from_scenario(s)?;
            let out = net.run()?;
            Ok(SweepPoint {
                value: v.clone(),
                metrics: out.metrics,
            })
        })
        .collect()
}
