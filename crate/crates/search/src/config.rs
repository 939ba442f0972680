use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gasketlab_core::analysis::PropertyRecord;
use gasketlab_core::graph::DEFAULT_MAX_CANDIDATES;
use gasketlab_core::lattice::Ifs;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_TRANSLATION_RANGE: i64 = 10;
/// Neighborhood states explored per system before it is skipped as too
/// complex; admits every named fixture (the largest has 26 678 states).
pub const DEFAULT_MAX_NEIGHBORHOOD_STATES: usize = 30_000;
pub const DEFAULT_STEPS_PER_BATCH: u64 = 256;
/// Consecutive gate or OSC failures before the walk jumps to a fresh point.
pub const RESTART_AFTER_FAILURES: u32 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown filter {0:?} (expected dropDisjoint, dropIntervalDisconnected, capPerBoundaryDim=N, minProperNeighbors=K)")]
    UnknownFilter(String),
    #[error("filter {name} needs a non-negative integer argument, got {value:?}")]
    BadFilterArgument { name: String, value: String },
    #[error("translation range must be at least 1")]
    TranslationRange,
    #[error("steps per batch must be at least 1")]
    StepsPerBatch,
    #[error("maxNeighborhoodStates must be at least 1")]
    NeighborhoodStates,
    #[error("at least one walker is required")]
    Walkers,
    #[error("unknown score field {0:?}")]
    ScoreField(String),
    #[error("start system has {0} maps; the search walks three-map systems")]
    StartMapCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Filter {
    /// Drop systems whose pieces are pairwise disjoint.
    DropDisjoint,
    /// Drop disconnected systems that contain segments.
    DropIntervalDisconnected,
    /// Keep at most this many entries per boundary dimension rounded to 4 decimals.
    CapPerBoundaryDim(u32),
    MinProperNeighbors(u32),
}

impl Filter {
    /// Per-record predicate; the per-dimension cap needs catalog context.
    pub fn admits(&self, r: &PropertyRecord) -> bool {
        match *self {
            Filter::DropDisjoint => r.proper_nbs > 0,
            Filter::DropIntervalDisconnected => r.connected || !r.has_intervals,
            Filter::CapPerBoundaryDim(_) => true,
            Filter::MinProperNeighbors(k) => r.proper_nbs >= k as usize,
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::DropDisjoint => f.write_str("dropDisjoint"),
            Filter::DropIntervalDisconnected => f.write_str("dropIntervalDisconnected"),
            Filter::CapPerBoundaryDim(n) => write!(f, "capPerBoundaryDim={n}"),
            Filter::MinProperNeighbors(k) => write!(f, "minProperNeighbors={k}"),
        }
    }
}

impl FromStr for Filter {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arg) = match s.split_once(['=', ':']) {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<u32, ConfigError> {
            a.and_then(|v| v.parse().ok())
                .ok_or_else(|| ConfigError::BadFilterArgument {
                    name: name.to_string(),
                    value: a.unwrap_or("").to_string(),
                })
        };
        match name {
            "dropDisjoint" if arg.is_none() => Ok(Filter::DropDisjoint),
            "dropIntervalDisconnected" if arg.is_none() => Ok(Filter::DropIntervalDisconnected),
            "capPerBoundaryDim" => Ok(Filter::CapPerBoundaryDim(number(arg)?)),
            "minProperNeighbors" => Ok(Filter::MinProperNeighbors(number(arg)?)),
            _ => Err(ConfigError::UnknownFilter(s.to_string())),
        }
    }
}

impl Serialize for Filter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Filter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated filter list; empty input gives no filters.
pub fn parse_filters(s: &str) -> Result<Vec<Filter>, ConfigError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SearchConfig {
    pub seed: u64,
    pub translation_range: i64,
    /// Pins `q_0 = 1`, the quarter turn, for every visited system.
    pub fix_first_rotation: bool,
    pub max_candidates: usize,
    pub max_neighborhood_states: usize,
    pub filters: Vec<Filter>,
    pub steps_per_batch: u64,
    /// Total steps over all walkers; `None` runs until stopped.
    pub steps: Option<u64>,
    pub walkers: usize,
    /// Starting point; a random in-range point when absent.
    pub start: Option<Ifs>,
    /// Weights over numeric record fields for ranking finds.
    pub score_weights: BTreeMap<String, f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            translation_range: DEFAULT_TRANSLATION_RANGE,
            fix_first_rotation: true,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            max_neighborhood_states: DEFAULT_MAX_NEIGHBORHOOD_STATES,
            filters: Vec::new(),
            steps_per_batch: DEFAULT_STEPS_PER_BATCH,
            steps: None,
            walkers: 1,
            start: None,
            score_weights: BTreeMap::new(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.translation_range < 1 {
            return Err(ConfigError::TranslationRange);
        }
        if self.steps_per_batch == 0 {
            return Err(ConfigError::StepsPerBatch);
        }
        if self.max_neighborhood_states == 0 {
            return Err(ConfigError::NeighborhoodStates);
        }
        if self.walkers == 0 {
            return Err(ConfigError::Walkers);
        }
        if let Some(s) = &self.start {
            if s.len() != 3 {
                return Err(ConfigError::StartMapCount(s.len()));
            }
        }
        for k in self.score_weights.keys() {
            if !PropertyRecord::NUMERIC_FIELDS.contains(&k.as_str()) {
                return Err(ConfigError::ScoreField(k.clone()));
            }
        }
        Ok(())
    }

    pub fn score(&self, r: &PropertyRecord) -> f64 {
        self.score_weights
            .iter()
            .map(|(k, w)| w * r.numeric_field(k).unwrap_or(0.0))
            .sum()
    }

    pub fn dim_cap(&self) -> Option<u32> {
        self.filters.iter().find_map(|f| match f {
            Filter::CapPerBoundaryDim(n) => Some(*n),
            _ => None,
        })
    }
}
