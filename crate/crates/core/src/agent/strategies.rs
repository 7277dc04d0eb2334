//! Inference-scaling strategies over episodes: sequential refinement in one
//! shared-budget session, and parallel sampling over independent lanes.

use super::{
    evaluate_in_session, initial_code_for, reward_from, run_episode, AgentError, EpisodeOptions, Policy,
    PolicyError, RewardOutcome, Termination, Trajectory,
};
use crate::instancegen::DesignSet;
use crate::scoring::Score;
use crate::session::{sha256_hex, Session, SessionConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_SR_BUDGET: usize = 100;
pub const DEFAULT_SR_ROUNDS: usize = 10;
pub const DEFAULT_LANES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrConfig {
    /// Evaluator calls shared by all rounds.
    pub global_budget: usize,
    pub rounds: usize,
    pub max_turns: usize,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            global_budget: DEFAULT_SR_BUDGET,
            rounds: DEFAULT_SR_ROUNDS,
            max_turns: super::DEFAULT_MAX_TURNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrRound {
    pub round: usize,
    pub initial_sha256: String,
    pub calls_used: usize,
    pub termination: Option<Termination>,
    /// Set when the round's episode failed; later rounds still run.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrResult {
    pub session_id: String,
    pub rounds: Vec<SrRound>,
    /// The best evaluated heuristic of the session, else the last final answer.
    pub final_source: Option<String>,
    pub outcome: RewardOutcome,
    pub evaluator_calls_used: usize,
}

fn continuation_note(round: usize, rounds: usize, remaining: usize) -> String {
    format!(
        "This is refinement round {round} of {rounds}. The code above is the best heuristic found so far; \
improve on it. {remaining} evaluator calls remain for all remaining rounds."
    )
}

/// Runs up to `sr.rounds` episodes in one session whose budget is
/// `sr.global_budget`. Each round starts from the best heuristic so far.
/// Stops early when the budget is spent or a round ends without a final
/// answer. The session is closed with the result.
pub fn sequential_refinement(
    policy: &dyn Policy,
    workspace: &Path,
    mut config: SessionConfig,
    design: DesignSet,
    sr: &SrConfig,
) -> Result<SrResult, AgentError> {
    if sr.rounds == 0 || sr.global_budget == 0 {
        return Err(AgentError::Config("rounds and global budget must be at least 1".into()));
    }
    config.budget = sr.global_budget;
    let mut session = Session::create(workspace, config, design)?;
    let original = initial_code_for(&session, &EpisodeOptions::default());
    let mut rounds = Vec::new();
    let mut last_final = None;
    let mut start = original.clone();
    for round in 1..=sr.rounds {
        let opts = EpisodeOptions {
            max_turns: sr.max_turns,
            round,
            initial_code: Some(start.clone()),
            continuation_note: (round > 1).then(|| continuation_note(round, sr.rounds, session.remaining())),
        };
        let before = session.evaluator_calls_used();
        let result = run_episode(policy, &mut session, &opts);
        let mut entry = SrRound {
            round,
            initial_sha256: sha256_hex(&start),
            calls_used: session.evaluator_calls_used() - before,
            termination: None,
            error: None,
        };
        let proceed = match result {
            Ok(t) => {
                entry.termination = Some(t.termination);
                let fin = t.termination == Termination::Final;
                if fin {
                    last_final = t.final_source;
                }
                fin
            }
            // a dead endpoint will not recover by starting another round
            Err(AgentError::Policy(e @ PolicyError::Transport { .. })) => {
                entry.error = Some(e.to_string());
                false
            }
            Err(AgentError::Session(e)) => return Err(e.into()),
            Err(e) => {
                entry.error = Some(e.to_string());
                true
            }
        };
        rounds.push(entry);
        if !proceed || session.remaining() == 0 {
            break;
        }
        if let Some(b) = session.best() {
            start = b.source.clone();
        }
    }
    let final_source = session.best().map(|b| b.source.clone()).or(last_final);
    let baseline = evaluate_in_session(&session, &original).map_err(AgentError::Baseline)?;
    let outcome = reward_from(
        final_source.as_deref().map(|s| evaluate_in_session(&session, s)),
        baseline,
    );
    session.close(final_source.as_deref())?;
    Ok(SrResult {
        session_id: session.id().to_string(),
        rounds,
        final_source,
        outcome,
        evaluator_calls_used: session.evaluator_calls_used(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsConfig {
    pub lanes: usize,
    pub max_turns: usize,
}

impl Default for PsConfig {
    fn default() -> Self {
        Self {
            lanes: DEFAULT_LANES,
            max_turns: super::DEFAULT_MAX_TURNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSummary {
    pub lane: usize,
    pub session_id: String,
    pub termination: Option<Termination>,
    pub final_score: Option<Score>,
    pub reward: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsResult {
    pub lanes: Vec<LaneSummary>,
    pub selected_lane: usize,
    pub final_source: String,
    pub outcome: RewardOutcome,
}

/// Builds the policy for a lane.
pub type PolicyFactory<'a> = dyn Fn(usize) -> Result<Box<dyn Policy>, PolicyError> + Sync + 'a;

/// Lane with the best design-set score; ties go to the lowest lane.
pub fn select_lane(scores: &[Option<Score>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s.normalized > b) {
                best = Some((i, s.normalized));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Runs `ps.lanes` independent episodes, each in its own session with the
/// configured per-lane budget, and keeps the lane whose final answer scores
/// best on the design set. Lanes that fail or produce no valid final are
/// not eligible.
pub fn parallel_sampling(
    make_policy: &PolicyFactory<'_>,
    workspace: &Path,
    config: SessionConfig,
    design: DesignSet,
    ps: &PsConfig,
) -> Result<PsResult, AgentError> {
    if ps.lanes == 0 {
        return Err(AgentError::Config("at least one lane is required".into()));
    }
    // sessions are created in lane order so ids follow lanes deterministically
    let mut sessions = Vec::with_capacity(ps.lanes);
    for lane in 0..ps.lanes {
        let mut c = config.clone();
        c.label = Some(match &config.label {
            Some(l) => format!("{l}/lane{lane}"),
            None => format!("lane{lane}"),
        });
        sessions.push(Session::create(workspace, c, design.clone())?);
    }
    let opts = EpisodeOptions {
        max_turns: ps.max_turns,
        ..EpisodeOptions::default()
    };
    let results: Vec<Result<Trajectory, AgentError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sessions
            .iter_mut()
            .enumerate()
            .map(|(lane, session)| {
                let opts = &opts;
                scope.spawn(move || {
                    let policy = make_policy(lane)?;
                    let t = run_episode(policy.as_ref(), session, opts);
                    let fin = t.as_ref().ok().and_then(|t| t.final_source.clone());
                    session.close(fin.as_deref())?;
                    t
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("lane thread panicked")).collect()
    });

    let mut lanes = Vec::with_capacity(ps.lanes);
    let mut scores = Vec::with_capacity(ps.lanes);
    for (lane, (session, result)) in sessions.iter().zip(&results).enumerate() {
        let summary = match result {
            Ok(t) => LaneSummary {
                lane,
                session_id: session.id().to_string(),
                termination: Some(t.termination),
                final_score: t.outcome.final_score,
                reward: Some(t.outcome.reward),
                error: None,
            },
            Err(e) => LaneSummary {
                lane,
                session_id: session.id().to_string(),
                termination: None,
                final_score: None,
                reward: None,
                error: Some(e.to_string()),
            },
        };
        scores.push(summary.final_score);
        lanes.push(summary);
    }
    let selected_lane = select_lane(&scores).ok_or(AgentError::AllLanesFailed)?;
    let chosen = results
        .into_iter()
        .nth(selected_lane)
        .expect("lane exists")
        .expect("selected lane succeeded");
    Ok(PsResult {
        lanes,
        selected_lane,
        final_source: chosen.final_source.expect("scored lane has a final"),
        outcome: chosen.outcome,
    })
}
