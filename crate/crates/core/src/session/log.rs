//! On-disk session format: manifest, append-only event log and timings.

use crate::diagnostics::DiagnosticsConfig;
use crate::domain::Domain;
use crate::instancegen::Role;
use crate::programhost::{ExecStatus, Limits};
use crate::scoring::{InstanceCost, Score};
use crate::solvers::AcoConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA: &str = "ahd-session";
pub const LOG_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const ATTEMPTS_DIR: &str = "attempts";

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("evaluator budget exhausted ({used}/{budget} calls used)")]
    BudgetExhausted { used: usize, budget: usize },
    #[error("session is closed")]
    Closed,
    #[error("malformed session {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("dataset checksum {found} does not match the session's {expected}")]
    DatasetMismatch { expected: String, found: String },
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Diagnostic(#[from] crate::diagnostics::DiagnosticError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Identity of the design dataset a session is bound to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetBinding {
    pub role: Role,
    pub size: usize,
    pub count: usize,
    pub seed: u64,
    pub checksum: String,
}

/// Settings that determine evaluation results (thread count does not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSettings {
    pub seed: u64,
    pub repeats: usize,
    pub aco: Option<AcoConfig>,
    pub limits: Limits,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            repeats: 1,
            aco: None,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub schema: String,
    pub schema_version: u32,
    pub session_id: String,
    pub domain: Domain,
    pub budget: usize,
    pub reminder_threshold: usize,
    pub dataset: DatasetBinding,
    pub scoring: ScoringSettings,
    pub diagnostics: DiagnosticsConfig,
    pub seed_heuristic: Option<String>,
    /// Free-form tag, e.g. the strategy lane or round.
    pub label: Option<String>,
    /// Unix seconds. Kept out of the event log so logs replay byte-identically.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DiagnosticOutcome {
    Ok { text: String, metrics: Value },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        domain: Domain,
        budget: usize,
        dataset_checksum: String,
        seed_heuristic_sha256: Option<String>,
    },
    Attempt {
        attempt_id: u64,
        source_file: String,
        source_sha256: String,
        status: ExecStatus,
        message: Option<String>,
        failed_instance: Option<String>,
        score: Option<Score>,
        per_instance: Option<Vec<InstanceCost>>,
        is_best_so_far: bool,
        evaluator_calls_used: usize,
    },
    Rejected {
        reason: String,
        evaluator_calls_used: usize,
    },
    Diagnostic {
        tool: String,
        args: Value,
        #[serde(flatten)]
        outcome: DiagnosticOutcome,
        evaluator_calls_used: usize,
    },
    Closed {
        final_sha256: Option<String>,
        evaluator_calls_used: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingLine {
    pub attempt_id: u64,
    pub wall_time: f64,
}

pub(crate) fn append_line<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let mut line = serde_json::to_string(value).expect("log records serialize");
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(line.as_bytes()).map_err(io_err(path))
}

pub(crate) fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SessionError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SessionError::Malformed {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<SessionManifest, SessionError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: SessionManifest = serde_json::from_str(&text).map_err(|e| SessionError::Malformed {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if m.schema != MANIFEST_SCHEMA || m.schema_version != LOG_SCHEMA_VERSION {
        return Err(SessionError::Malformed {
            path,
            message: format!("unsupported schema {} v{}", m.schema, m.schema_version),
        });
    }
    Ok(m)
}

pub fn read_events(dir: &Path) -> Result<Vec<LogLine>, SessionError> {
    let path = dir.join(EVENTS_FILE);
    let lines: Vec<LogLine> = read_lines(&path)?;
    for (i, l) in lines.iter().enumerate() {
        if l.v != LOG_SCHEMA_VERSION || l.seq != i as u64 {
            return Err(SessionError::Malformed {
                path,
                message: format!("record {i} has version {} and seq {}", l.v, l.seq),
            });
        }
    }
    Ok(lines)
}

/// Manifest and events of a session directory, without binding a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub dir: PathBuf,
    pub manifest: SessionManifest,
    pub events: Vec<LogLine>,
}

impl SessionLog {
    pub fn read(dir: &Path) -> Result<Self, SessionError> {
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: read_manifest(dir)?,
            events: read_events(dir)?,
        })
    }

    pub fn evaluator_calls(&self) -> usize {
        self.events
            .iter()
            .filter(|l| matches!(l.event, SessionEvent::Attempt { .. }))
            .count()
    }

    /// Best attempt id after each attempt, recomputed from the scores.
    pub fn best_so_far_trace(&self) -> Vec<Option<u64>> {
        let mut best: Option<(u64, f64)> = None;
        let mut out = Vec::new();
        for l in &self.events {
            if let SessionEvent::Attempt {
                attempt_id,
                score: Some(s),
                status: ExecStatus::Ok,
                ..
            } = &l.event
            {
                if best.is_none_or(|(_, b)| s.normalized > b) {
                    best = Some((*attempt_id, s.normalized));
                }
            }
            if matches!(l.event, SessionEvent::Attempt { .. }) {
                out.push(best.map(|b| b.0));
            }
        }
        out
    }

    /// Per-instance costs of the best attempt.
    pub fn best_attempt(&self) -> Option<(u64, &Score, &[InstanceCost])> {
        let id = self.best_so_far_trace().last().copied().flatten()?;
        self.events.iter().find_map(|l| match &l.event {
            SessionEvent::Attempt {
                attempt_id,
                score: Some(s),
                per_instance: Some(p),
                ..
            } if *attempt_id == id => Some((id, s, p.as_slice())),
            _ => None,
        })
    }
}
