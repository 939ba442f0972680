//! The single search session a service instance may run at a time.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use gasketlab_search::catalog::{Catalog, CatalogEntry};
use gasketlab_search::config::SearchConfig;
use gasketlab_search::engine::{Clock, CounterSnapshot, Search, SearchControl, SearchSummary};
use serde::Serialize;

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Idle,
    Running,
    Stopping,
}

struct Session {
    id: u64,
    config: SearchConfig,
    control: Arc<SearchControl>,
    started: Instant,
    finished: Arc<AtomicBool>,
    /// Wall time when the walk ended, frozen for the rate.
    elapsed_at_end: Arc<Mutex<Option<f64>>>,
    outcome: Arc<Mutex<Option<Result<SearchSummary, String>>>>,
    handle: Option<JoinHandle<()>>,
}

impl Session {
    fn state(&self) -> SessionState {
        if self.finished.load(Ordering::SeqCst) {
            SessionState::Idle
        } else if self.control.stop_requested() {
            SessionState::Stopping
        } else {
            SessionState::Running
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionStatus {
    pub session_id: Option<u64>,
    pub state: SessionState,
    pub config: Option<SearchConfig>,
    pub counters: CounterSnapshot,
    /// Visited systems per second of wall time.
    pub rate: f64,
    pub elapsed_seconds: f64,
    pub summary: Option<SearchSummary>,
    pub error: Option<String>,
    /// Newest first, at most twenty.
    pub last_finds: Vec<CatalogEntry>,
}

type ClockFactory = Box<dyn Fn() -> Box<dyn Clock> + Send + Sync>;

pub struct SessionManager {
    catalog: Arc<Mutex<Catalog>>,
    clock: ClockFactory,
    next_id: Mutex<u64>,
    current: Mutex<Option<Session>>,
}

impl SessionManager {
    pub fn new(catalog: Arc<Mutex<Catalog>>, clock: ClockFactory) -> Self {
        SessionManager {
            catalog,
            clock,
            next_id: Mutex::new(1),
            current: Mutex::new(None),
        }
    }

    /// Starts a walk on a background thread; refuses while one is active.
    pub fn start(&self, config: SearchConfig) -> Result<u64, ServiceError> {
        let mut current = self.current.lock().unwrap();
        if let Some(s) = current.as_ref() {
            if s.state() != SessionState::Idle {
                return Err(ServiceError::Conflict(s.id));
            }
        }
        let mut search = Search::new(config.clone())?;
        let id = {
            let mut n = self.next_id.lock().unwrap();
            let id = *n;
            *n += 1;
            id
        };
        let control = Arc::new(SearchControl::new((self.clock)()));
        let finished = Arc::new(AtomicBool::new(false));
        let outcome = Arc::new(Mutex::new(None));
        let elapsed_at_end = Arc::new(Mutex::new(None));
        let started = Instant::now();
        let handle = {
            let (catalog, control) = (self.catalog.clone(), control.clone());
            let (finished, outcome, elapsed_at_end) = (finished.clone(), outcome.clone(), elapsed_at_end.clone());
            std::thread::spawn(move || {
                let result = search.run(&catalog, &control).map_err(|e| e.to_string());
                *elapsed_at_end.lock().unwrap() = Some(started.elapsed().as_secs_f64());
                *outcome.lock().unwrap() = Some(result);
                finished.store(true, Ordering::SeqCst);
            })
        };
        if let Some(mut old) = current.take() {
            if let Some(h) = old.handle.take() {
                let _ = h.join();
            }
        }
        *current = Some(Session {
            id,
            config,
            control,
            started,
            finished,
            elapsed_at_end,
            outcome,
            handle: Some(handle),
        });
        Ok(id)
    }

    /// Requests a stop; the walk finishes its current step first.
    pub fn stop(&self) -> SessionStatus {
        if let Some(s) = self.current.lock().unwrap().as_ref() {
            s.control.request_stop();
        }
        self.status()
    }

    /// Blocks until the current walk has ended.
    pub fn wait(&self) -> SessionStatus {
        let handle = self.current.lock().unwrap().as_mut().and_then(|s| s.handle.take());
        if let Some(h) = handle {
            let _ = h.join();
        }
        self.status()
    }

    pub fn status(&self) -> SessionStatus {
        let current = self.current.lock().unwrap();
        let Some(s) = current.as_ref() else {
            return SessionStatus {
                session_id: None,
                state: SessionState::Idle,
                config: None,
                counters: CounterSnapshot::default(),
                rate: 0.0,
                elapsed_seconds: 0.0,
                summary: None,
                error: None,
                last_finds: Vec::new(),
            };
        };
        let counters = s.control.counters.snapshot();
        let elapsed = s
            .elapsed_at_end
            .lock()
            .unwrap()
            .unwrap_or_else(|| s.started.elapsed().as_secs_f64());
        let (summary, error) = match s.outcome.lock().unwrap().as_ref() {
            Some(Ok(summary)) => (Some(*summary), None),
            Some(Err(e)) => (None, Some(e.clone())),
            None => (None, None),
        };
        SessionStatus {
            session_id: Some(s.id),
            state: s.state(),
            config: Some(s.config.clone()),
            rate: if elapsed > 0.0 { counters.visited as f64 / elapsed } else { 0.0 },
            counters,
            elapsed_seconds: elapsed,
            summary,
            error,
            last_finds: s.control.recent_finds(),
        }
    }
}
