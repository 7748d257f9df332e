use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use susketch_core::{ClassPair, Level, LevelDocument};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Edit,
    TabView,
    PredictionShown,
    SuggestionShown,
    SuggestionApplied,
    Save,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub schema: u32,
    /// Milliseconds since the Unix epoch; never decreases within a session.
    pub timestamp: u64,
    pub session: Uuid,
    pub kind: EventKind,
    pub payload: Value,
}

/// A suggestion kept until it is applied or made stale by an edit.
#[derive(Debug, Clone)]
pub enum StoredSuggestion {
    Classes(ClassPair),
    Level(Box<Level>),
}

#[derive(Debug)]
pub struct SessionState {
    pub doc: LevelDocument,
    pub log: Vec<LogEvent>,
    pub suggestions: HashMap<Uuid, StoredSuggestion>,
    pub requests: u64,
    last_timestamp: u64,
}

#[derive(Debug)]
pub struct Session {
    pub id: Uuid,
    pub seed: u64,
    pub state: Mutex<SessionState>,
    /// Bumped on every change to the level or class pair.
    edits: AtomicU64,
    /// Bumped whenever a new powerup suggestion job starts.
    jobs: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    pub fn new(id: Uuid, seed: u64, doc: LevelDocument) -> Self {
        Self {
            id,
            seed,
            state: Mutex::new(SessionState {
                doc,
                log: Vec::new(),
                suggestions: HashMap::new(),
                requests: 0,
                last_timestamp: 0,
            }),
            edits: AtomicU64::new(0),
            jobs: AtomicU64::new(0),
        }
    }

    pub fn edit_version(&self) -> u64 {
        self.edits.load(Ordering::SeqCst)
    }

    pub fn job_version(&self) -> u64 {
        self.jobs.load(Ordering::SeqCst)
    }

    pub fn start_job(&self) -> u64 {
        self.jobs.fetch_add(1, Ordering::SeqCst) + 1
    }

    /// Records a change to the level or pair: in-flight jobs become stale
    /// and stored suggestions are dropped.
    pub fn mark_edited(&self, state: &mut SessionState) {
        self.edits.fetch_add(1, Ordering::SeqCst);
        state.suggestions.clear();
    }

    pub fn log(&self, state: &mut SessionState, kind: EventKind, payload: Value) {
        let timestamp = now_ms().max(state.last_timestamp);
        state.last_timestamp = timestamp;
        state.log.push(LogEvent {
            schema: SCHEMA_VERSION,
            timestamp,
            session: self.id,
            kind,
            payload,
        });
    }
}

/// Persistent form of a session.
#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema: u32,
    pub id: Uuid,
    pub seed: u64,
    pub document: String,
    pub log: Vec<LogEvent>,
}

impl Snapshot {
    pub fn of(session: &Session) -> Self {
        let state = session.state.lock();
        Self {
            schema: SCHEMA_VERSION,
            id: session.id,
            seed: session.seed,
            document: state.doc.serialize(),
            log: state.log.clone(),
        }
    }

    pub fn restore(self) -> Option<Session> {
        let doc = LevelDocument::parse(&self.document).ok()?;
        let session = Session::new(self.id, self.seed, doc);
        {
            let mut state = session.state.lock();
            state.last_timestamp = self.log.last().map_or(0, |e| e.timestamp);
            state.log = self.log;
        }
        Some(session)
    }
}

/// Counts per event kind, enough to summarise a session from its log alone.
pub fn summarize(log: &[LogEvent]) -> HashMap<EventKind, usize> {
    let mut out = HashMap::new();
    for e in log {
        *out.entry(e.kind).or_insert(0) += 1;
    }
    out
}
