//! Flat `key=value` run configuration.

use std::fmt::Display;
use std::str::FromStr;

use build2vec_core::ifc_graph::{RelationMapping, RelationRule, Strictness};
use build2vec_core::node2vec::WalkConfig;
use build2vec_core::sgns::TrainConfig;
use build2vec_core::space_grid::Neighborhood;
use build2vec_core::temporal::{FlattenMode, SnapshotConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
}

/// Every tunable of the pipeline. File paths are passed as command flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strict: bool,
    pub relations: Vec<RelationRule>,
    pub object_prefixes: Vec<String>,
    pub edge_weight: f64,
    pub cell_size: f64,
    pub neighborhood: Neighborhood,
    /// `None` means one cell size.
    pub sensor_radius: Option<f64>,
    pub anchor_radius: Option<f64>,
    pub link_space: bool,
    pub step: u64,
    pub occupant_radius: Option<f64>,
    pub max_gap: u64,
    pub flatten: FlattenMode,
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mapping = RelationMapping::default();
        let snapshot = SnapshotConfig::default();
        RunConfig {
            strict: false,
            relations: mapping.rules,
            object_prefixes: mapping.object_prefixes,
            edge_weight: mapping.default_weight,
            cell_size: 1.0,
            neighborhood: Neighborhood::Rook,
            sensor_radius: None,
            anchor_radius: None,
            link_space: true,
            step: snapshot.step,
            occupant_radius: snapshot.occupant_radius,
            max_gap: snapshot.max_gap,
            flatten: FlattenMode::Union,
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            k: 10,
        }
    }
}

fn parse<T>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: T::Err| ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: e.to_string(),
        })
}

fn parse_opt<T>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    if value.trim().is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn show_list<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "strict" => self.strict = parse(key, value)?,
            "relations" => self.relations = parse_list(key, value)?,
            "object_prefixes" => {
                self.object_prefixes = parse_list::<String>(key, value)?
                    .into_iter()
                    .map(|s| s.to_ascii_uppercase())
                    .collect()
            }
            "edge_weight" => self.edge_weight = parse(key, value)?,
            "cell_size" => self.cell_size = parse(key, value)?,
            "neighborhood" => self.neighborhood = parse(key, value)?,
            "sensor_radius" => self.sensor_radius = parse_opt(key, value)?,
            "anchor_radius" => self.anchor_radius = parse_opt(key, value)?,
            "link_space" => self.link_space = parse(key, value)?,
            "step" => self.step = parse(key, value)?,
            "occupant_radius" => self.occupant_radius = parse_opt(key, value)?,
            "max_gap" => self.max_gap = parse(key, value)?,
            "flatten" => self.flatten = parse(key, value)?,
            "p" => self.walk.p = parse(key, value)?,
            "q" => self.walk.q = parse(key, value)?,
            "walk_length" => self.walk.walk_length = parse(key, value)?,
            "walks_per_node" => self.walk.walks_per_node = parse(key, value)?,
            "alias_cap" => self.walk.alias_cap = parse(key, value)?,
            "seed" => {
                let seed = parse(key, value)?;
                self.walk.seed = seed;
                self.train.seed = seed;
            }
            "workers" => {
                let workers = parse(key, value)?;
                self.walk.workers = workers;
                self.train.workers = workers;
            }
            "dimension" => self.train.dimension = parse(key, value)?,
            "window" => self.train.window = parse(key, value)?,
            "negatives" => self.train.negatives = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "initial_lr" => self.train.initial_lr = parse(key, value)?,
            "min_lr" => self.train.min_lr = parse(key, value)?,
            "deterministic" => self.train.deterministic = parse(key, value)?,
            "shrink_window" => self.train.shrink_window = parse(key, value)?,
            "subsample" => self.train.subsample = parse_opt(key, value)?,
            "k" => self.k = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// All keys with their current values, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("strict", self.strict.to_string()),
            ("relations", show_list(&self.relations)),
            ("object_prefixes", self.object_prefixes.join(",")),
            ("edge_weight", self.edge_weight.to_string()),
            ("cell_size", self.cell_size.to_string()),
            ("neighborhood", self.neighborhood.to_string()),
            ("sensor_radius", show_opt(&self.sensor_radius)),
            ("anchor_radius", show_opt(&self.anchor_radius)),
            ("link_space", self.link_space.to_string()),
            ("step", self.step.to_string()),
            ("occupant_radius", show_opt(&self.occupant_radius)),
            ("max_gap", self.max_gap.to_string()),
            ("flatten", self.flatten.to_string()),
            ("p", self.walk.p.to_string()),
            ("q", self.walk.q.to_string()),
            ("walk_length", self.walk.walk_length.to_string()),
            ("walks_per_node", self.walk.walks_per_node.to_string()),
            ("alias_cap", self.walk.alias_cap.to_string()),
            ("seed", self.walk.seed.to_string()),
            ("workers", self.walk.workers.to_string()),
            ("dimension", self.train.dimension.to_string()),
            ("window", self.train.window.to_string()),
            ("negatives", self.train.negatives.to_string()),
            ("epochs", self.train.epochs.to_string()),
            ("initial_lr", self.train.initial_lr.to_string()),
            ("min_lr", self.train.min_lr.to_string()),
            ("deterministic", self.train.deterministic.to_string()),
            ("shrink_window", self.train.shrink_window.to_string()),
            ("subsample", show_opt(&self.train.subsample)),
            ("k", self.k.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Applies the settings of a config file on top of `self`. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn strictness(&self) -> Strictness {
        if self.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        }
    }

    pub fn mapping(&self) -> RelationMapping {
        RelationMapping {
            rules: self.relations.clone(),
            object_prefixes: self.object_prefixes.clone(),
            default_weight: self.edge_weight,
            ..RelationMapping::default()
        }
    }

    pub fn snapshot_config(&self) -> SnapshotConfig {
        SnapshotConfig {
            step: self.step,
            occupant_radius: self.occupant_radius,
            max_gap: self.max_gap,
        }
    }
}
