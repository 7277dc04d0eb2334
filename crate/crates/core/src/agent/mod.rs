//! The multi-turn episode driver, reward, and inference-scaling strategies.

mod action;
mod policy;
mod prompts;
mod strategies;

pub use action::{first_fenced_block, parse_action, TurnAction, FINAL_MARKER, TOOL_CALL_CLOSE, TOOL_CALL_OPEN};
pub use policy::{
    extract_content, ChatMessage, Policy, PolicyError, RemoteConfig, RemotePolicy, Role, ScriptedPolicy,
    DEFAULT_API_KEY_ENV, SCRIPT_FILE, TURN_SEPARATOR,
};
pub use prompts::{
    algorithm_details, problem_info, render_prompts, MissingPlaceholder, ProblemInfo, PromptContext, SYSTEM_TEMPLATE,
    USER_TEMPLATE,
};
pub use strategies::{
    parallel_sampling, select_lane, sequential_refinement, LaneSummary, PolicyFactory, PsConfig, PsResult, SrConfig,
    SrResult, SrRound, DEFAULT_LANES, DEFAULT_SR_BUDGET, DEFAULT_SR_ROUNDS,
};

use crate::domain::Domain;
use crate::instancegen::DesignSet;
use crate::programhost::{parse_program, ExecFailure, ExecStatus};
use crate::scoring::{baseline_source, score_program, Score, ScoringConfig};
use crate::session::{sha256_hex, Session, SessionError};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_TURNS: usize = 40;
pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";

pub const NO_CODE_REWARD: f64 = -2.0;
pub const FAILURE_REWARD: f64 = -1.5;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Prompt(#[from] MissingPlaceholder),
    #[error("the reference heuristic fails on the design set: {0}")]
    Baseline(ExecFailure),
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("every lane failed")]
    AllLanesFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub max_turns: usize,
    pub round: usize,
    /// Overrides the session's seed as the code shown in the prompt.
    pub initial_code: Option<String>,
    /// Appended to the user prompt, e.g. the remaining budget of a continuation.
    pub continuation_note: Option<String>,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            round: 1,
            initial_code: None,
            continuation_note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub round: usize,
    pub turn: usize,
    /// Hash prefix of the conversation before the turn.
    pub state_digest: String,
    pub action: TurnAction,
    pub observation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Final,
    Horizon,
    PolicyExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalOrigin {
    Marker,
    /// No final answer; the best evaluated attempt stands in.
    BestAttempt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBranch {
    NoCode,
    ExecutionFailure,
    Improvement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub reward: f64,
    pub branch: RewardBranch,
    pub final_score: Option<Score>,
    pub baseline_score: Score,
    pub failure: Option<ExecFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub session_id: String,
    pub round: usize,
    pub initial_code: String,
    pub steps: Vec<TrajectoryStep>,
    pub termination: Termination,
    pub final_source: Option<String>,
    pub final_origin: Option<FinalOrigin>,
    /// The final answer is the initial code unchanged (discouraged, not refused).
    pub unchanged_seed: bool,
    pub outcome: RewardOutcome,
}

impl Trajectory {
    pub fn reward(&self) -> f64 {
        self.outcome.reward
    }
}

/// Scores `source` on the design set, outside any budget.
pub fn evaluate_source(
    source: &str,
    domain: Domain,
    design: &DesignSet,
    scoring: &ScoringConfig,
) -> Result<Score, ExecFailure> {
    let p = parse_program(source, domain)?;
    score_program(&p, design, scoring).map(|e| e.score).map_err(|f| f.failure)
}

/// Terminal reward from an already evaluated final answer.
pub fn reward_from(final_eval: Option<Result<Score, ExecFailure>>, baseline: Score) -> RewardOutcome {
    match final_eval {
        None => RewardOutcome {
            reward: NO_CODE_REWARD,
            branch: RewardBranch::NoCode,
            final_score: None,
            baseline_score: baseline,
            failure: None,
        },
        Some(Err(failure)) => RewardOutcome {
            reward: FAILURE_REWARD,
            branch: RewardBranch::ExecutionFailure,
            final_score: None,
            baseline_score: baseline,
            failure: Some(failure),
        },
        Some(Ok(score)) => RewardOutcome {
            reward: score.normalized - baseline.normalized,
            branch: RewardBranch::Improvement,
            final_score: Some(score),
            baseline_score: baseline,
            failure: None,
        },
    }
}

/// -2.0 without code, -1.5 when the final fails or is infeasible, else the
/// normalized design-set improvement over `baseline_source`.
pub fn compute_reward(
    final_source: Option<&str>,
    baseline_source: &str,
    domain: Domain,
    design: &DesignSet,
    scoring: &ScoringConfig,
) -> Result<RewardOutcome, AgentError> {
    let baseline = evaluate_source(baseline_source, domain, design, scoring).map_err(AgentError::Baseline)?;
    Ok(reward_from(
        final_source.map(|s| evaluate_source(s, domain, design, scoring)),
        baseline,
    ))
}

/// Reuses the session's record when `source` was already evaluated.
fn evaluate_in_session(session: &Session, source: &str) -> Result<Score, ExecFailure> {
    if let Some(a) = session.attempts().iter().find(|a| a.source == source) {
        return match (a.status, a.score) {
            (ExecStatus::Ok, Some(s)) => Ok(s),
            (status, _) => Err(ExecFailure::new(status, a.message.clone().unwrap_or_default())),
        };
    }
    evaluate_source(source, session.domain(), session.design(), &session.scoring_config())
}

fn digest(conversation: &[ChatMessage]) -> String {
    let text = serde_json::to_string(conversation).expect("messages serialize");
    sha256_hex(&text)[..16].to_string()
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TrajectoryLine<'a> {
    Start {
        round: usize,
        initial_sha256: String,
        baseline_objective: f64,
    },
    Step(&'a TrajectoryStep),
    End {
        round: usize,
        termination: Termination,
        final_sha256: Option<String>,
        final_origin: Option<FinalOrigin>,
        unchanged_seed: bool,
        reward: f64,
        branch: RewardBranch,
        evaluator_calls_used: usize,
    },
}

fn log_line(session: &Session, line: &TrajectoryLine) -> Result<(), AgentError> {
    crate::session::append_jsonl(&session.dir().join(TRAJECTORY_FILE), line)?;
    Ok(())
}

const RETRY_OBSERVATION: &str = "Reply with exactly one of: a tool call block, one fenced code block to evaluate, \
or the final marker followed by the complete program.";

/// The code shown to the agent as its starting point and used as the reward
/// baseline: the explicit override, else the session seed, else the domain
/// baseline.
pub fn initial_code_for(session: &Session, opts: &EpisodeOptions) -> String {
    opts.initial_code
        .clone()
        .or_else(|| session.seed_heuristic().map(str::to_string))
        .unwrap_or_else(|| baseline_source(session.domain()).to_string())
}

/// Runs one episode of at most `opts.max_turns` policy turns against an
/// open session. The session is left open.
pub fn run_episode(policy: &dyn Policy, session: &mut Session, opts: &EpisodeOptions) -> Result<Trajectory, AgentError> {
    if opts.max_turns == 0 {
        return Err(AgentError::Config("max_turns must be at least 1".into()));
    }
    let domain = session.domain();
    let initial_code = initial_code_for(session, opts);
    let baseline = evaluate_source(&initial_code, domain, session.design(), &session.scoring_config())
        .map_err(AgentError::Baseline)?;
    let ctx = PromptContext {
        initial_code: Some(initial_code.clone()),
        baseline_objective: Some(format!("{:.6}", baseline.raw_objective)),
        ..PromptContext::for_domain(domain)
    };
    let (system, mut user) = render_prompts(&ctx)?;
    if let Some(note) = &opts.continuation_note {
        user.push_str("\n\n");
        user.push_str(note);
    }
    user.push_str(&format!(
        "\n\nEvaluator budget: {} of {} calls remaining.",
        session.remaining(),
        session.budget()
    ));
    let mut conversation = vec![ChatMessage::new(Role::System, system), ChatMessage::new(Role::User, user)];
    log_line(
        session,
        &TrajectoryLine::Start {
            round: opts.round,
            initial_sha256: sha256_hex(&initial_code),
            baseline_objective: baseline.raw_objective,
        },
    )?;

    let mut steps = Vec::new();
    let mut termination = Termination::Horizon;
    let mut final_source = None;
    for turn in 1..=opts.max_turns {
        let state_digest = digest(&conversation);
        let reply = match policy.respond(&conversation) {
            Ok(r) => r,
            Err(PolicyError::Exhausted) => {
                termination = Termination::PolicyExhausted;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        conversation.push(ChatMessage::new(Role::Assistant, reply.clone()));
        let action = parse_action(&reply);
        let observation = match &action {
            TurnAction::Final { source } => {
                final_source = Some(source.clone());
                String::new()
            }
            TurnAction::Evaluate { source } => match session.submit_candidate(source) {
                Ok(sub) => sub.feedback,
                Err(e @ (SessionError::BudgetExhausted { .. } | SessionError::Closed)) => {
                    format!("Not evaluated: {e}. Submit your final answer with the final marker.")
                }
                Err(e) => return Err(e.into()),
            },
            TurnAction::ToolCall { name, args } => {
                let mut text = match session.diagnostic_call(name, args) {
                    Ok(out) => out.text,
                    Err(SessionError::Diagnostic(e)) => format!("Tool error: {e}"),
                    Err(e) => return Err(e.into()),
                };
                if let Some(r) = session.budget_reminder() {
                    text.push('\n');
                    text.push_str(&r);
                }
                text
            }
            TurnAction::Malformed { reason } => format!("Could not interpret your reply: {reason}. {RETRY_OBSERVATION}"),
        };
        let step = TrajectoryStep {
            round: opts.round,
            turn,
            state_digest,
            action,
            observation: observation.clone(),
        };
        log_line(session, &TrajectoryLine::Step(&step))?;
        steps.push(step);
        if final_source.is_some() {
            termination = Termination::Final;
            break;
        }
        conversation.push(ChatMessage::new(Role::User, observation));
    }

    let (final_source, final_origin) = match final_source {
        Some(s) => (Some(s), Some(FinalOrigin::Marker)),
        None => match session.best() {
            Some(b) => (Some(b.source.clone()), Some(FinalOrigin::BestAttempt)),
            None => (None, None),
        },
    };
    let unchanged_seed = final_source
        .as_deref()
        .is_some_and(|s| s.trim() == initial_code.trim());
    let outcome = reward_from(
        final_source.as_deref().map(|s| evaluate_in_session(session, s)),
        baseline,
    );
    log_line(
        session,
        &TrajectoryLine::End {
            round: opts.round,
            termination,
            final_sha256: final_source.as_deref().map(sha256_hex),
            final_origin,
            unchanged_seed,
            reward: outcome.reward,
            branch: outcome.branch,
            evaluator_calls_used: session.evaluator_calls_used(),
        },
    )?;
    Ok(Trajectory {
        session_id: session.id().to_string(),
        round: opts.round,
        initial_code,
        steps,
        termination,
        final_source,
        final_origin,
        unchanged_seed,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate, Role as DataRole};
    use crate::session::SessionConfig;

    fn session(ws: &std::path::Path, domain: Domain, budget: usize) -> Session {
        let design = DesignSet::new(generate(domain, DataRole::Design, 8, 2, 3).unwrap()).unwrap();
        Session::create(ws, SessionConfig::new(domain, budget), design).unwrap()
    }

    fn fenced(code: &str) -> String {
        format!("```rhai\n{code}\n```")
    }

    const FIRST: &str = "fn select_next_node(c, d, u, m) { u[0] }";

    #[test]
    fn scripted_episode_runs_to_final() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = session(ws.path(), Domain::TspC, 10);
        let policy = ScriptedPolicy::new(vec![
            fenced(FIRST),
            format!("<tool_call>{{\"name\": \"ast_novelty\", \"arguments\": {{\"source\": {:?}}}}}</tool_call>", FIRST),
            "hmm".into(),
            fenced(baseline_source(Domain::TspC)),
            format!("{FINAL_MARKER}\n{}", fenced(baseline_source(Domain::TspC))),
        ]);
        let t = run_episode(&policy, &mut s, &EpisodeOptions::default()).unwrap();
        assert_eq!(t.termination, Termination::Final);
        assert_eq!(t.steps.len(), 5);
        assert_eq!(s.evaluator_calls_used(), 2);
        assert!(t.steps[1].observation.contains("Novelty 0.000"));
        assert!(t.steps[2].observation.contains("Could not interpret"));
        // the final is the unchanged seed (the domain baseline here)
        assert!(t.unchanged_seed);
        assert_eq!(t.outcome.branch, RewardBranch::Improvement);
        assert_eq!(t.reward(), 0.0);
    }

    #[test]
    fn horizon_falls_back_to_best_attempt() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = session(ws.path(), Domain::TspC, 10);
        let policy = ScriptedPolicy::new(vec![fenced(FIRST); 5]);
        let opts = EpisodeOptions {
            max_turns: 3,
            ..EpisodeOptions::default()
        };
        let t = run_episode(&policy, &mut s, &opts).unwrap();
        assert_eq!(t.termination, Termination::Horizon);
        assert_eq!(t.steps.len(), 3);
        assert_eq!(t.final_origin, Some(FinalOrigin::BestAttempt));
        assert_eq!(t.final_source.as_deref(), Some(format!("{FIRST}\n").as_str()));
    }

    #[test]
    fn no_code_and_failure_branches() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = session(ws.path(), Domain::TspC, 10);
        let prose = ScriptedPolicy::new(vec!["I would use a greedy rule.".into()]);
        let t = run_episode(&prose, &mut s, &EpisodeOptions::default()).unwrap();
        assert_eq!(t.termination, Termination::PolicyExhausted);
        assert_eq!(t.reward(), NO_CODE_REWARD);

        let mut s = session(ws.path(), Domain::TspC, 10);
        let bad = ScriptedPolicy::new(vec![format!(
            "{FINAL_MARKER}\nfn select_next_node(c, d, u, m) {{ throw \"no\"; }}"
        )]);
        let t = run_episode(&bad, &mut s, &EpisodeOptions::default()).unwrap();
        assert_eq!(t.reward(), FAILURE_REWARD);
        assert_eq!(t.outcome.failure.as_ref().unwrap().status, ExecStatus::RuntimeError);
        assert_eq!(s.evaluator_calls_used(), 0);
    }

    #[test]
    fn budget_exhaustion_is_an_observation() {
        let ws = tempfile::tempdir().unwrap();
        let mut s = session(ws.path(), Domain::TspC, 1);
        let policy = ScriptedPolicy::new(vec![fenced(FIRST), fenced(FIRST)]);
        let t = run_episode(&policy, &mut s, &EpisodeOptions::default()).unwrap();
        assert!(t.steps[0].observation.contains("submit your final answer"));
        assert!(t.steps[1].observation.contains("Not evaluated"));
        assert_eq!(s.evaluator_calls_used(), 1);
    }

    #[test]
    fn reward_branches_from_scores() {
        let base = Score::new(10.0, crate::Direction::Minimize);
        assert_eq!(reward_from(None, base).reward, -2.0);
        assert_eq!(reward_from(Some(Err(ExecFailure::infeasible("x"))), base).reward, -1.5);
        let better = Score::new(9.5, crate::Direction::Minimize);
        assert_eq!(reward_from(Some(Ok(better)), base).reward, 0.5);
        let mx = Score::new(2.0, crate::Direction::Maximize);
        let mx2 = Score::new(2.25, crate::Direction::Maximize);
        assert_eq!(reward_from(Some(Ok(mx2)), mx).reward, 0.25);
    }
}
