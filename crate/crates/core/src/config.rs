//! Run configuration: one TOML file layered over built-in defaults, with
//! dotted `key=value` overrides on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::protocol::EvalConfig;
use crate::simhome::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub pairs: u32,
    pub days: u32,
    /// Also write the annotated-session sensor streams as record files.
    pub streams: bool,
    pub sim: SimConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            pairs: 12,
            days: 5,
            streams: false,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    /// Minutes decoded at the start of each 4-hour slot when rooms come from
    /// a trained model.
    pub minutes_per_slot: u32,
    /// Fold whose model decodes rooms; the first fold when absent.
    pub fold: Option<String>,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            minutes_per_slot: 20,
            fold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub alpha: f64,
    pub continuity: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            alpha: 0.05,
            continuity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub eval: EvalConfig,
    pub gait: GaitConfig,
    pub stats: StatsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            simulate: SimulateConfig::default(),
            eval: EvalConfig::default(),
            gait: GaitConfig::default(),
            stats: StatsConfig::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_err(format!("empty key in {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("{key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(config_err)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    /// Defaults, then the file at `path`, then each `key=value` override.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::Table::try_from(RunConfig::default()).map_err(config_err)?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::MissingInput {
                path: path.into(),
                reason: e.to_string(),
            })?;
            let file: toml::Table = text.parse().map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            merge(&mut table, file);
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| config_err(format!("override {o:?} is not key=value")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.simulate.pairs == 0 || self.simulate.days == 0 {
            return Err(config_err("simulate.pairs and simulate.days must be positive"));
        }
        if !(0.0..1.0).contains(&self.stats.alpha) || self.stats.alpha == 0.0 {
            return Err(config_err("stats.alpha must lie in (0, 1)"));
        }
        self.eval.train.validate().map_err(|e| config_err(e.to_string()))
    }
}
