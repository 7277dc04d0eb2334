//! Persistent design sessions: attempts, evaluator-budget accounting,
//! best-so-far tracking and replayable logs.
//!
//! Layout under the workspace root:
//!
//! ```text
//! sessions/<session_id>/manifest.json      configuration, written once
//! sessions/<session_id>/events.jsonl       append-only event log
//! sessions/<session_id>/timings.jsonl      wall times (kept out of the event log)
//! sessions/<session_id>/attempts/attempt_0001.rhai
//! ```

mod log;

pub use log::{
    read_events, read_manifest, DatasetBinding, DiagnosticOutcome, LogLine, ScoringSettings, SessionError,
    SessionEvent, SessionLog, SessionManifest, TimingLine, ATTEMPTS_DIR, EVENTS_FILE, LOG_SCHEMA_VERSION,
    MANIFEST_FILE, MANIFEST_SCHEMA, TIMINGS_FILE,
};

use crate::diagnostics::{run_tool, DiagnosticsConfig, ToolOutput, ToolRequest};
use crate::domain::Domain;
use crate::instancegen::DesignSet;
use crate::programhost::{parse_program, ExecFailure, ExecStatus};
use crate::scoring::{score_program, InstanceCost, Score, ScoringConfig};
use log::{append_line, io_err, read_lines};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const DEFAULT_REMINDER_THRESHOLD: usize = 3;
pub const SESSIONS_DIR: &str = "sessions";

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub domain: Domain,
    pub budget: usize,
    pub reminder_threshold: usize,
    pub scoring: ScoringSettings,
    pub diagnostics: DiagnosticsConfig,
    pub seed_heuristic: Option<String>,
    pub label: Option<String>,
    /// Scoring threads; 0 uses the global pool. Does not affect results.
    pub jobs: usize,
}

impl SessionConfig {
    pub fn new(domain: Domain, budget: usize) -> Self {
        Self {
            domain,
            budget,
            reminder_threshold: DEFAULT_REMINDER_THRESHOLD,
            scoring: ScoringSettings::default(),
            diagnostics: DiagnosticsConfig::default(),
            seed_heuristic: None,
            label: None,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_id: u64,
    pub source: String,
    pub status: ExecStatus,
    pub message: Option<String>,
    pub failed_instance: Option<String>,
    pub score: Option<Score>,
    /// Present iff the status is ok.
    pub per_instance_costs: Option<Vec<InstanceCost>>,
    pub is_best_so_far: bool,
    pub wall_time: f64,
}

impl AttemptRecord {
    pub fn mean_objective(&self) -> Option<f64> {
        self.score.map(|s| s.raw_objective)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub record: AttemptRecord,
    pub feedback: String,
}

#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    manifest: SessionManifest,
    design: DesignSet,
    jobs: usize,
    attempts: Vec<AttemptRecord>,
    best: Option<usize>,
    closed: bool,
    next_seq: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn binding(design: &DesignSet) -> DatasetBinding {
    DatasetBinding {
        role: design.role,
        size: design.size,
        count: design.len(),
        seed: design.seed,
        checksum: design.checksum(),
    }
}

fn attempt_file(id: u64) -> String {
    format!("{ATTEMPTS_DIR}/attempt_{id:04}.rhai")
}

/// Appends one JSON line to `path`, creating the file.
pub(crate) fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    append_line(path, value)
}

pub fn sessions_root(workspace: &Path) -> PathBuf {
    workspace.join(SESSIONS_DIR)
}

impl Session {
    /// Creates `sessions/<domain>-<NNNN>` under `workspace` with the first
    /// free sequence number. Only design-role datasets are accepted.
    pub fn create(workspace: &Path, config: SessionConfig, design: DesignSet) -> Result<Self, SessionError> {
        if config.budget == 0 {
            return Err(SessionError::Config("budget must be at least 1".into()));
        }
        if design.domain != config.domain {
            return Err(SessionError::Config(format!(
                "dataset is for {}, session is for {}",
                design.domain, config.domain
            )));
        }
        if let Some(aco) = &config.scoring.aco {
            aco.validate().map_err(SessionError::Config)?;
        }
        let root = sessions_root(workspace);
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let (session_id, dir) = (1..)
            .map(|seq| {
                let id = format!("{}-{seq:04}", config.domain.tag());
                let dir = root.join(&id);
                (id, dir)
            })
            .find_map(|(id, dir)| match fs::create_dir(&dir) {
                Ok(()) => Some(Ok((id, dir))),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => None,
                Err(e) => Some(Err(io_err(&dir)(e))),
            })
            .expect("unbounded sequence")?;
        let attempts = dir.join(ATTEMPTS_DIR);
        fs::create_dir(&attempts).map_err(io_err(&attempts))?;

        let manifest = SessionManifest {
            schema: MANIFEST_SCHEMA.into(),
            schema_version: LOG_SCHEMA_VERSION,
            session_id: session_id.clone(),
            domain: config.domain,
            budget: config.budget,
            reminder_threshold: config.reminder_threshold,
            dataset: binding(&design),
            scoring: config.scoring,
            diagnostics: config.diagnostics,
            seed_heuristic: config.seed_heuristic,
            label: config.label,
            created_at: now_unix(),
        };
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;

        let mut session = Self {
            dir,
            manifest,
            design,
            jobs: config.jobs,
            attempts: Vec::new(),
            best: None,
            closed: false,
            next_seq: 0,
        };
        let seed_sha = session.manifest.seed_heuristic.as_deref().map(sha256_hex);
        session.log(SessionEvent::Created {
            session_id,
            domain: session.manifest.domain,
            budget: session.manifest.budget,
            dataset_checksum: session.manifest.dataset.checksum.clone(),
            seed_heuristic_sha256: seed_sha,
        })?;
        Ok(session)
    }

    /// Reopens a persisted session by replaying its event log. The design
    /// set must be the one the session was created with.
    pub fn load(workspace: &Path, session_id: &str, design: DesignSet, jobs: usize) -> Result<Self, SessionError> {
        let dir = sessions_root(workspace).join(session_id);
        if !dir.join(MANIFEST_FILE).is_file() {
            return Err(SessionError::UnknownSession(session_id.to_string()));
        }
        let log = SessionLog::read(&dir)?;
        let found = design.checksum();
        if found != log.manifest.dataset.checksum {
            return Err(SessionError::DatasetMismatch {
                expected: log.manifest.dataset.checksum.clone(),
                found,
            });
        }
        let timings: Vec<TimingLine> = read_lines(&dir.join(TIMINGS_FILE))?;
        let malformed = |message: String| SessionError::Malformed {
            path: dir.clone(),
            message,
        };
        let mut session = Self {
            dir: dir.clone(),
            manifest: log.manifest.clone(),
            design,
            jobs,
            attempts: Vec::new(),
            best: None,
            closed: false,
            next_seq: log.events.len() as u64,
        };
        for line in &log.events {
            match &line.event {
                SessionEvent::Attempt {
                    attempt_id,
                    source_file,
                    source_sha256,
                    status,
                    message,
                    failed_instance,
                    score,
                    per_instance,
                    is_best_so_far,
                    ..
                } => {
                    let path = dir.join(source_file);
                    let source = fs::read_to_string(&path).map_err(io_err(&path))?;
                    if &sha256_hex(&source) != source_sha256 {
                        return Err(malformed(format!("{source_file} does not match its logged hash")));
                    }
                    let record = AttemptRecord {
                        attempt_id: *attempt_id,
                        source,
                        status: *status,
                        message: message.clone(),
                        failed_instance: failed_instance.clone(),
                        score: *score,
                        per_instance_costs: per_instance.clone(),
                        is_best_so_far: false,
                        wall_time: timings
                            .iter()
                            .find(|t| t.attempt_id == *attempt_id)
                            .map_or(0.0, |t| t.wall_time),
                    };
                    let improved = session.push_attempt(record);
                    if improved != *is_best_so_far {
                        return Err(malformed(format!(
                            "attempt {attempt_id}: logged best-so-far flag disagrees with replay"
                        )));
                    }
                }
                SessionEvent::Closed { .. } => session.closed = true,
                _ => {}
            }
        }
        Ok(session)
    }

    fn log(&mut self, event: SessionEvent) -> Result<(), SessionError> {
        let line = LogLine {
            v: LOG_SCHEMA_VERSION,
            seq: self.next_seq,
            event,
        };
        append_line(&self.dir.join(EVENTS_FILE), &line)?;
        self.next_seq += 1;
        Ok(())
    }

    /// Appends a record and updates best-so-far; returns whether it improved.
    fn push_attempt(&mut self, mut record: AttemptRecord) -> bool {
        let improved = match (record.status, record.score) {
            (ExecStatus::Ok, Some(s)) => self
                .best()
                .and_then(|b| b.score)
                .is_none_or(|b| s.normalized > b.normalized),
            _ => false,
        };
        record.is_best_so_far = improved;
        self.attempts.push(record);
        if improved {
            self.best = Some(self.attempts.len() - 1);
        }
        improved
    }

    pub fn id(&self) -> &str {
        &self.manifest.session_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    pub fn domain(&self) -> Domain {
        self.manifest.domain
    }

    pub fn design(&self) -> &DesignSet {
        &self.design
    }

    pub fn seed_heuristic(&self) -> Option<&str> {
        self.manifest.seed_heuristic.as_deref()
    }

    pub fn budget(&self) -> usize {
        self.manifest.budget
    }

    pub fn evaluator_calls_used(&self) -> usize {
        self.attempts.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget() - self.evaluator_calls_used()
    }

    pub fn attempts(&self) -> &[AttemptRecord] {
        &self.attempts
    }

    pub fn best(&self) -> Option<&AttemptRecord> {
        self.best.map(|i| &self.attempts[i])
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn scoring_config(&self) -> ScoringConfig {
        let s = &self.manifest.scoring;
        ScoringConfig {
            aco: s.aco,
            limits: s.limits.clone(),
            seed: s.seed,
            repeats: s.repeats,
            jobs: self.jobs,
        }
    }

    /// Executes `source` on the design set. Every execution, failed or not,
    /// consumes one evaluator call.
    pub fn submit_candidate(&mut self, source: &str) -> Result<Submission, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        if self.remaining() == 0 {
            self.log(SessionEvent::Rejected {
                reason: "budget_exhausted".into(),
                evaluator_calls_used: self.evaluator_calls_used(),
            })?;
            return Err(SessionError::BudgetExhausted {
                used: self.evaluator_calls_used(),
                budget: self.budget(),
            });
        }
        let attempt_id = self.attempts.len() as u64 + 1;
        let started = Instant::now();
        let outcome = parse_program(source, self.domain())
            .map_err(|e| (None, ExecFailure::from(e)))
            .and_then(|p| {
                score_program(&p, &self.design, &self.scoring_config())
                    .map_err(|f| (Some(f.instance_id), f.failure))
            });
        let wall_time = started.elapsed().as_secs_f64();
        let record = match outcome {
            Ok(eval) => AttemptRecord {
                attempt_id,
                source: source.to_string(),
                status: ExecStatus::Ok,
                message: None,
                failed_instance: None,
                score: Some(eval.score),
                per_instance_costs: Some(eval.per_instance),
                is_best_so_far: false,
                wall_time,
            },
            Err((failed_instance, failure)) => AttemptRecord {
                attempt_id,
                source: source.to_string(),
                status: failure.status,
                message: Some(failure.message),
                failed_instance,
                score: None,
                per_instance_costs: None,
                is_best_so_far: false,
                wall_time,
            },
        };

        let file = attempt_file(attempt_id);
        let path = self.dir.join(&file);
        fs::write(&path, source).map_err(io_err(&path))?;
        append_line(&self.dir.join(TIMINGS_FILE), &TimingLine { attempt_id, wall_time })?;
        self.push_attempt(record);
        let record = self.attempts.last().expect("just pushed").clone();
        self.log(SessionEvent::Attempt {
            attempt_id,
            source_file: file,
            source_sha256: sha256_hex(source),
            status: record.status,
            message: record.message.clone(),
            failed_instance: record.failed_instance.clone(),
            score: record.score,
            per_instance: record.per_instance_costs.clone(),
            is_best_so_far: record.is_best_so_far,
            evaluator_calls_used: self.evaluator_calls_used(),
        })?;
        let feedback = self.feedback(&record);
        Ok(Submission { record, feedback })
    }

    fn feedback(&self, r: &AttemptRecord) -> String {
        let mut out = format!("Attempt {}: status {}.", r.attempt_id, r.status);
        match (r.score, &r.message) {
            (Some(s), _) => {
                out.push_str(&format!(
                    " Mean objective on the design set: {:.6} ({}).",
                    s.raw_objective,
                    s.direction.as_str()
                ));
                if r.is_best_so_far {
                    out.push_str(" New best so far.");
                } else if let Some(b) = self.best().and_then(|b| b.score.map(|s| (b.attempt_id, s))) {
                    out.push_str(&format!(" Best so far: attempt {} with {:.6}.", b.0, b.1.raw_objective));
                }
            }
            (None, Some(msg)) => {
                if let Some(inst) = &r.failed_instance {
                    out.push_str(&format!(" Failed on instance {inst}."));
                }
                out.push_str(&format!(" Error: {msg}"));
            }
            (None, None) => {}
        }
        out.push_str(&format!(
            "\nRemaining evaluator budget: {}/{}.",
            self.remaining(),
            self.budget()
        ));
        if let Some(rem) = self.budget_reminder() {
            out.push('\n');
            out.push_str(&rem);
        }
        out
    }

    /// A reminder once the remaining budget drops to the threshold.
    pub fn budget_reminder(&self) -> Option<String> {
        let left = self.remaining();
        if left == 0 {
            Some(
                "Evaluator budget exhausted. Stop exploring and submit your final answer now.".to_string(),
            )
        } else if left <= self.manifest.reminder_threshold {
            Some(format!(
                "Only {left} evaluator call(s) left. Stop further exploration and prepare your final answer."
            ))
        } else {
            None
        }
    }

    /// Runs a diagnostic tool. Never touches the evaluator budget; the call
    /// and its output (or error) are logged either way.
    pub fn diagnostic_call(&mut self, tool: &str, args: &Value) -> Result<ToolOutput, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        let history: Vec<(u64, &str)> = self
            .attempts
            .iter()
            .map(|a| (a.attempt_id, a.source.as_str()))
            .collect();
        let result = ToolRequest::parse(tool, args)
            .and_then(|req| run_tool(&req, &self.design, &history, &self.manifest.diagnostics));
        let outcome = match &result {
            Ok(out) => DiagnosticOutcome::Ok {
                text: out.text.clone(),
                metrics: out.metrics.clone(),
            },
            Err(e) => DiagnosticOutcome::Error { message: e.to_string() },
        };
        self.log(SessionEvent::Diagnostic {
            tool: tool.to_string(),
            args: args.clone(),
            outcome,
            evaluator_calls_used: self.evaluator_calls_used(),
        })?;
        Ok(result?)
    }

    /// Marks the session closed; further submissions and tool calls fail.
    pub fn close(&mut self, final_source: Option<&str>) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        self.log(SessionEvent::Closed {
            final_sha256: final_source.map(sha256_hex),
            evaluator_calls_used: self.evaluator_calls_used(),
        })?;
        self.closed = true;
        Ok(())
    }

    pub fn read_log(&self) -> Result<SessionLog, SessionError> {
        SessionLog::read(&self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate, Role};
    use crate::scoring::baseline_source;
    use serde_json::json;

    fn design(domain: Domain) -> DesignSet {
        DesignSet::new(generate(domain, Role::Design, 8, 3, 1).unwrap()).unwrap()
    }

    #[test]
    fn ids_are_distinct_and_sequential() {
        let ws = tempfile::tempdir().unwrap();
        let a = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 5), design(Domain::TspC)).unwrap();
        let b = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 5), design(Domain::TspC)).unwrap();
        assert_eq!(a.id(), "tsp_c-0001");
        assert_eq!(b.id(), "tsp_c-0002");
    }

    #[test]
    fn failures_consume_budget_and_best_tracks_improvements() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 4), design(Domain::TspC)).unwrap();
        let bad = s.submit_candidate("fn select_next_node(a, b, c, d) { throw \"x\"; }").unwrap();
        assert_eq!(bad.record.status, ExecStatus::RuntimeError);
        assert!(bad.record.per_instance_costs.is_none());
        assert_eq!(s.remaining(), 3);
        let first = "fn select_next_node(a, b, c, d) { c[c.len() - 1] }";
        let r1 = s.submit_candidate(first).unwrap();
        assert!(r1.record.is_best_so_far);
        let r2 = s.submit_candidate(baseline_source(Domain::TspC)).unwrap();
        let nn_better = r2.record.score.unwrap().normalized > r1.record.score.unwrap().normalized;
        assert_eq!(r2.record.is_best_so_far, nn_better);
        let dup = s.submit_candidate(first).unwrap();
        // equal score does not replace the earlier best
        assert!(!dup.record.is_best_so_far);
        assert!(dup.feedback.contains("Remaining evaluator budget: 0/4"));
        assert!(dup.feedback.contains("submit your final answer"));
        assert!(matches!(
            s.submit_candidate(first),
            Err(SessionError::BudgetExhausted { used: 4, budget: 4 })
        ));
        assert_eq!(s.evaluator_calls_used(), 4);
    }

    #[test]
    fn parse_errors_are_recorded() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspAco, 2), design(Domain::TspAco)).unwrap();
        let r = s.submit_candidate("fn heuristic(d) {").unwrap();
        assert_eq!(r.record.status, ExecStatus::ParseError);
        let r = s.submit_candidate("fn select_next_node(a, b, c, d) { 0 }").unwrap();
        assert_eq!(r.record.status, ExecStatus::ParseError);
        assert_eq!(s.remaining(), 0);
    }

    #[test]
    fn reminder_threshold() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 5), design(Domain::TspC)).unwrap();
        assert!(s.budget_reminder().is_none());
        s.submit_candidate(baseline_source(Domain::TspC)).unwrap();
        assert!(s.budget_reminder().is_none());
        s.submit_candidate(baseline_source(Domain::TspC)).unwrap();
        assert!(s.budget_reminder().unwrap().contains("Only 3"));
    }

    #[test]
    fn diagnostics_are_free_and_logged() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::CvrpC, 3), design(Domain::CvrpC)).unwrap();
        s.submit_candidate(baseline_source(Domain::CvrpC)).unwrap();
        let out = s
            .diagnostic_call("ast_novelty", &json!({"source": baseline_source(Domain::CvrpC)}))
            .unwrap();
        assert_eq!(out.metrics["novelty"], 0.0);
        assert!(s.diagnostic_call("shell", &json!({})).is_err());
        assert!(s.diagnostic_call("analyze_instances", &json!({"scope": "single_instance"})).is_err());
        assert_eq!(s.evaluator_calls_used(), 1);
        let log = s.read_log().unwrap();
        let errors = log
            .events
            .iter()
            .filter(|l| matches!(&l.event, SessionEvent::Diagnostic { outcome: DiagnosticOutcome::Error { .. }, .. }))
            .count();
        assert_eq!(errors, 2);
    }

    #[test]
    fn persist_load_round_trip() {
        let ws = tempfile::tempdir().unwrap();
        let d = design(Domain::TspC);
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 5), d.clone()).unwrap();
        s.submit_candidate("fn select_next_node(a, b, c, d) { c[0] }").unwrap();
        s.submit_candidate("oops(").unwrap();
        s.submit_candidate(baseline_source(Domain::TspC)).unwrap();
        s.diagnostic_call("analyze_instances", &json!({})).unwrap();
        let loaded = Session::load(ws.path(), s.id(), d.clone(), 0).unwrap();
        assert_eq!(loaded.attempts(), s.attempts());
        assert_eq!(loaded.best().map(|b| b.attempt_id), s.best().map(|b| b.attempt_id));
        assert_eq!(loaded.manifest(), s.manifest());
        let trace = s.read_log().unwrap().best_so_far_trace();
        let flags: Vec<Option<u64>> = s
            .attempts()
            .iter()
            .scan(None, |best, a| {
                if a.is_best_so_far {
                    *best = Some(a.attempt_id);
                }
                Some(*best)
            })
            .collect();
        assert_eq!(trace, flags);

        assert!(matches!(
            Session::load(ws.path(), "tsp_c-0099", d, 0),
            Err(SessionError::UnknownSession(_))
        ));
        let other = DesignSet::new(generate(Domain::TspC, Role::Design, 8, 3, 2).unwrap()).unwrap();
        assert!(matches!(
            Session::load(ws.path(), s.id(), other, 0),
            Err(SessionError::DatasetMismatch { .. })
        ));
    }

    #[test]
    fn closed_sessions_refuse_work() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 5), design(Domain::TspC)).unwrap();
        s.close(None).unwrap();
        assert!(matches!(s.submit_candidate("x"), Err(SessionError::Closed)));
        assert!(matches!(s.diagnostic_call("analyze_instances", &json!({})), Err(SessionError::Closed)));
        let loaded = Session::load(ws.path(), s.id(), design(Domain::TspC), 0).unwrap();
        assert!(loaded.is_closed());
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let ws = tempfile::tempdir().unwrap();
        assert!(Session::create(ws.path(), SessionConfig::new(Domain::TspAco, 5), design(Domain::TspC)).is_err());
    }
}
