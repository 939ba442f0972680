//! The random walk: mutate, gate, analyze, filter, deduplicate, append.
//!
//! Walkers advance in lockstep batches. Each walker runs its batch on its own
//! ChaCha8 stream without touching the catalog; the batch results are then
//! merged in walker order, so a run is reproducible from `(seed, config)`
//! regardless of thread scheduling.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use gasketlab_core::analysis::{analyze, AnalysisConfig, PropertyRecord};
use gasketlab_core::graph::GraphConfig;
use gasketlab_core::lattice::Ifs;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonical_key, CanonicalKey};
use crate::catalog::{default_tags, Catalog, CatalogEntry, CatalogError};
use crate::config::{ConfigError, SearchConfig, RESTART_AFTER_FAILURES};
use crate::gate::complexity_gate;
use crate::mutation::{apply_mutation, pin_first_rotation, random_mutation, random_point, Mutation};

/// Tolerance for the key-equality spot check on dimensions.
pub const INVARIANT_TOLERANCE: f64 = 1e-9;
/// Number of recent finds kept for status reports.
pub const RECENT_FINDS: usize = 20;
/// Per-walker memo of analyzed systems is cleared beyond this size.
const CACHE_LIMIT: usize = 200_000;

pub trait Clock: Send + Sync {
    /// RFC 3339 timestamp.
    fn now(&self) -> String;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
    }
}

/// Always returns the same instant; makes catalogs byte-reproducible.
pub struct FixedClock(pub String);

impl Default for FixedClock {
    fn default() -> Self {
        FixedClock("1970-01-01T00:00:00Z".to_string())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}

/// Progress counters, readable while the walk runs.
#[derive(Debug, Default)]
pub struct Counters {
    pub visited: AtomicU64,
    pub gated: AtomicU64,
    pub osc_fail: AtomicU64,
    pub analysis_errors: AtomicU64,
    pub analyzed: AtomicU64,
    pub filtered: AtomicU64,
    pub duplicates: AtomicU64,
    pub cataloged: AtomicU64,
    pub restarts: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CounterSnapshot {
    pub visited: u64,
    /// Skipped by the candidate gate or the neighborhood-state ceiling.
    pub gated: u64,
    pub osc_fail: u64,
    pub analysis_errors: u64,
    /// Full analyses run, excluding memo hits.
    pub analyzed: u64,
    pub filtered: u64,
    pub duplicates: u64,
    pub cataloged: u64,
    pub restarts: u64,
}

impl Counters {
    pub fn snapshot(&self) -> CounterSnapshot {
        let r = |a: &AtomicU64| a.load(Ordering::Relaxed);
        CounterSnapshot {
            visited: r(&self.visited),
            gated: r(&self.gated),
            osc_fail: r(&self.osc_fail),
            analysis_errors: r(&self.analysis_errors),
            analyzed: r(&self.analyzed),
            filtered: r(&self.filtered),
            duplicates: r(&self.duplicates),
            cataloged: r(&self.cataloged),
            restarts: r(&self.restarts),
        }
    }

    fn bump(a: &AtomicU64) {
        a.fetch_add(1, Ordering::Relaxed);
    }
}

/// Shared handles for a running search: counters, stop flag, clock and the
/// most recent finds.
pub struct SearchControl {
    pub counters: Counters,
    stop: AtomicBool,
    clock: Box<dyn Clock>,
    recent: Mutex<VecDeque<CatalogEntry>>,
}

impl SearchControl {
    pub fn new(clock: Box<dyn Clock>) -> Self {
        SearchControl {
            counters: Counters::default(),
            stop: AtomicBool::new(false),
            clock,
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn stop_requested(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Newest first.
    pub fn recent_finds(&self) -> Vec<CatalogEntry> {
        self.recent.lock().unwrap().iter().rev().cloned().collect()
    }

    fn record_find(&self, e: &CatalogEntry) {
        let mut r = self.recent.lock().unwrap();
        if r.len() == RECENT_FINDS {
            r.pop_front();
        }
        r.push_back(e.clone());
    }
}

impl Default for SearchControl {
    fn default() -> Self {
        SearchControl::new(Box::new(SystemClock))
    }
}

/// Walker state sufficient to resume exactly where a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WalkerCheckpoint {
    pub stream: u64,
    /// Position in the ChaCha8 keystream, in 32-bit words.
    pub word_pos: u128,
    pub current: Ifs,
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checkpoint {
    pub seed: u64,
    /// Steps completed across all walkers.
    pub steps: u64,
    pub walkers: Vec<WalkerCheckpoint>,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("checkpoint does not match the configuration: {0}")]
    Checkpoint(String),
    /// The catalog is consistent up to the failed line; resuming from the
    /// checkpoint replays the interrupted batch and skips what was written.
    #[error("catalog write failed: {source}")]
    Catalog {
        source: CatalogError,
        checkpoint: Box<Checkpoint>,
    },
    #[error("equivalent systems {existing} and {found} (key {key}) have different invariants")]
    InvariantMismatch {
        key: CanonicalKey,
        existing: Ifs,
        found: Ifs,
    },
}

enum Source {
    Random(ChaCha8Rng),
    Scripted(VecDeque<Mutation>),
}

struct Walker {
    stream: u64,
    source: Source,
    current: Ifs,
    failures: u32,
    memo: HashMap<Ifs, Option<PropertyRecord>>,
}

/// One OSC-satisfying system found by a walker, before catalog checks.
struct Find {
    ifs: Ifs,
    key: CanonicalKey,
    record: PropertyRecord,
}

impl Walker {
    fn checkpoint(&self) -> WalkerCheckpoint {
        let word_pos = match &self.source {
            Source::Random(rng) => rng.get_word_pos(),
            Source::Scripted(_) => 0,
        };
        WalkerCheckpoint {
            stream: self.stream,
            word_pos,
            current: self.current.clone(),
            failures: self.failures,
        }
    }

    /// Runs up to `steps` steps; returns the finds in step order and the
    /// number of steps taken. A scripted walker stops when its script ends.
    fn run_batch(&mut self, steps: u64, cfg: &SearchConfig, ctl: &SearchControl) -> (Vec<Find>, u64) {
        let acfg = AnalysisConfig {
            graph: GraphConfig {
                max_candidates: cfg.max_candidates,
                stop_on_identity: true,
                ..GraphConfig::default()
            },
            neighborhood_ceiling: cfg.max_neighborhood_states,
        };
        let c = &ctl.counters;
        let mut finds = Vec::new();
        let mut taken = 0;
        while taken < steps && !ctl.stop_requested() {
            let m = match &mut self.source {
                Source::Random(rng) => random_mutation(&self.current, cfg, rng),
                Source::Scripted(script) => match script.pop_front() {
                    Some(m) => m,
                    None => break,
                },
            };
            taken += 1;
            Counters::bump(&c.visited);
            // the walk always moves; failures only count toward a restart
            let next = apply_mutation(&self.current, m);
            self.current = next.clone();
            match self.evaluate(&next, cfg, &acfg, c) {
                Some(record) => {
                    self.failures = 0;
                    if cfg.filters.iter().all(|f| f.admits(&record)) {
                        finds.push(Find {
                            key: canonical_key(&next),
                            ifs: next,
                            record,
                        });
                    } else {
                        Counters::bump(&c.filtered);
                    }
                }
                None => {
                    self.failures += 1;
                    if self.failures >= RESTART_AFTER_FAILURES {
                        if let Source::Random(rng) = &mut self.source {
                            self.current = random_point(cfg, rng);
                            Counters::bump(&c.restarts);
                        }
                        self.failures = 0;
                    }
                }
            }
        }
        (finds, taken)
    }

    /// The record of an OSC-satisfying system, or `None` after counting why not.
    fn evaluate(
        &mut self,
        ifs: &Ifs,
        cfg: &SearchConfig,
        acfg: &AnalysisConfig,
        c: &Counters,
    ) -> Option<PropertyRecord> {
        if !complexity_gate(ifs, cfg.max_candidates).passed() {
            Counters::bump(&c.gated);
            return None;
        }
        let record = match self.memo.get(ifs) {
            Some(r) => r.clone(),
            None => {
                Counters::bump(&c.analyzed);
                let r = match analyze(ifs, acfg) {
                    Ok(a) if a.record.osc.is_satisfied() => Some(a.record),
                    Ok(_) => None,
                    // a state-ceiling overflow is a complexity skip like the gate
                    Err(e) if e.complexity().is_some() => {
                        Counters::bump(&c.gated);
                        return None;
                    }
                    Err(_) => {
                        Counters::bump(&c.analysis_errors);
                        return None;
                    }
                };
                if self.memo.len() >= CACHE_LIMIT {
                    self.memo.clear();
                }
                self.memo.insert(ifs.clone(), r.clone());
                r
            }
        };
        if record.is_none() {
            Counters::bump(&c.osc_fail);
        }
        record
    }
}

pub struct Search {
    cfg: SearchConfig,
    walkers: Vec<Walker>,
    steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchSummary {
    pub steps: u64,
    pub appended: u64,
    /// False when the step budget or script ran out; true on a stop request
    /// with budget left.
    pub stopped: bool,
}

impl Search {
    /// Walker `i` uses stream `i` of the ChaCha8 generator seeded by `cfg.seed`.
    pub fn new(cfg: SearchConfig) -> Result<Self, SearchError> {
        cfg.validate()?;
        let walkers = (0..cfg.walkers as u64)
            .map(|stream| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(stream);
                let current = match &cfg.start {
                    Some(s) => pin_first_rotation(s, &cfg),
                    None => random_point(&cfg, &mut rng),
                };
                Walker {
                    stream,
                    source: Source::Random(rng),
                    current,
                    failures: 0,
                    memo: HashMap::new(),
                }
            })
            .collect();
        Ok(Search {
            cfg,
            walkers,
            steps: 0,
        })
    }

    /// Continues from a checkpoint. The continuation matches an uninterrupted
    /// run whenever the interrupted run stopped on one of its batch boundaries.
    pub fn resume(cfg: SearchConfig, cp: &Checkpoint) -> Result<Self, SearchError> {
        cfg.validate()?;
        if cp.seed != cfg.seed || cp.walkers.len() != cfg.walkers {
            return Err(SearchError::Checkpoint(format!(
                "seed {} with {} walkers, config has seed {} with {}",
                cp.seed,
                cp.walkers.len(),
                cfg.seed,
                cfg.walkers
            )));
        }
        let walkers = cp
            .walkers
            .iter()
            .map(|w| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(w.stream);
                rng.set_word_pos(w.word_pos);
                Walker {
                    stream: w.stream,
                    source: Source::Random(rng),
                    current: w.current.clone(),
                    failures: w.failures,
                    memo: HashMap::new(),
                }
            })
            .collect();
        Ok(Search {
            cfg,
            walkers,
            steps: cp.steps,
        })
    }

    /// A single walker that applies `script` in order from `start` and never
    /// restarts; for replaying a known path.
    pub fn scripted(mut cfg: SearchConfig, start: Ifs, script: Vec<Mutation>) -> Result<Self, SearchError> {
        cfg.walkers = 1;
        cfg.steps = Some(script.len() as u64);
        cfg.validate()?;
        Ok(Search {
            walkers: vec![Walker {
                stream: 0,
                source: Source::Scripted(script.into()),
                current: start,
                failures: 0,
                memo: HashMap::new(),
            }],
            cfg,
            steps: 0,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn current_points(&self) -> Vec<Ifs> {
        self.walkers.iter().map(|w| w.current.clone()).collect()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.cfg.seed,
            steps: self.steps,
            walkers: self.walkers.iter().map(Walker::checkpoint).collect(),
        }
    }

    /// Steps for each walker in the next batch; the budget is spread so the
    /// total never overshoots `cfg.steps`.
    fn batch_plan(&self) -> Vec<u64> {
        let n = self.walkers.len() as u64;
        let per = self.cfg.steps_per_batch;
        match self.cfg.steps {
            None => vec![per; n as usize],
            Some(total) => {
                let left = total.saturating_sub(self.steps).min(per * n);
                (0..n).map(|i| left / n + u64::from(i < left % n)).collect()
            }
        }
    }

    /// Walks until the step budget is spent or a stop is requested.
    pub fn run(&mut self, catalog: &Mutex<Catalog>, ctl: &SearchControl) -> Result<SearchSummary, SearchError> {
        let mut appended = 0;
        loop {
            if ctl.stop_requested() {
                return Ok(SearchSummary {
                    steps: self.steps,
                    appended,
                    stopped: self.cfg.steps.is_none_or(|t| self.steps < t),
                });
            }
            let plan = self.batch_plan();
            if plan.iter().all(|&s| s == 0) {
                break;
            }
            let before = self.checkpoint();
            let cfg = &self.cfg;
            let results: Vec<(Vec<Find>, u64)> = self
                .walkers
                .par_iter_mut()
                .zip(plan.par_iter())
                .map(|(w, &s)| w.run_batch(s, cfg, ctl))
                .collect();
            let taken: u64 = results.iter().map(|r| r.1).sum();
            self.steps += taken;
            for (finds, _) in results {
                for f in finds {
                    match self.merge(f, catalog, ctl) {
                        Ok(true) => appended += 1,
                        Ok(false) => {}
                        Err(SearchError::Catalog { source, .. }) => {
                            return Err(SearchError::Catalog {
                                source,
                                checkpoint: Box::new(before),
                            })
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            if taken == 0 {
                break;
            }
        }
        Ok(SearchSummary {
            steps: self.steps,
            appended,
            stopped: false,
        })
    }

    fn merge(&self, f: Find, catalog: &Mutex<Catalog>, ctl: &SearchControl) -> Result<bool, SearchError> {
        let c = &ctl.counters;
        let mut cat = catalog.lock().unwrap();
        if let Some(existing) = cat.get_by_key(&f.key) {
            if !existing.properties.same_invariants(&f.record, INVARIANT_TOLERANCE) {
                return Err(SearchError::InvariantMismatch {
                    key: f.key,
                    existing: existing.ifs.clone(),
                    found: f.ifs,
                });
            }
            Counters::bump(&c.duplicates);
            return Ok(false);
        }
        if let Some(cap) = self.cfg.dim_cap() {
            if cat.bucket_count(f.record.boundary_dim) >= cap {
                Counters::bump(&c.filtered);
                return Ok(false);
            }
        }
        let entry = CatalogEntry {
            id: cat.next_id(),
            tags: default_tags(&f.record),
            ifs: f.ifs,
            canonical_key: f.key,
            properties: f.record,
            created_at: ctl.clock.now(),
        };
        cat.append(entry.clone()).map_err(|source| SearchError::Catalog {
            source,
            checkpoint: Box::new(self.checkpoint()),
        })?;
        Counters::bump(&c.cataloged);
        ctl.record_find(&entry);
        Ok(true)
    }
}
