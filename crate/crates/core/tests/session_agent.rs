mod common;

use ahd_core::agent::{
    parallel_sampling, reward_from, run_episode, sequential_refinement, EpisodeOptions, FinalOrigin, Policy,
    PolicyError, PsConfig, RewardBranch, ScriptedPolicy, SrConfig, Termination, FAILURE_REWARD, NO_CODE_REWARD,
    TRAJECTORY_FILE,
};
use ahd_core::programhost::{ExecFailure, ExecStatus};
use ahd_core::scoring::Score;
use ahd_core::session::{Session, SessionConfig, SessionError, SessionEvent, SessionLog, EVENTS_FILE};
use ahd_core::{Direction, Domain};
use common::*;
use serde_json::json;

#[test]
fn budget_counts_failures_and_ignores_diagnostics() {
    let ws = tempfile::tempdir().unwrap();
    let mut s = Session::create(ws.path(), SessionConfig::new(Domain::TspC, 30), design(Domain::TspC, 10, 2, 0))
        .unwrap();
    let mut diagnostics = 0;
    for k in 0..30 {
        let src = if k % 3 == 0 { OUT_OF_RANGE } else { NEAREST };
        let sub = s.submit_candidate(src).unwrap();
        assert_eq!(sub.record.attempt_id, k as u64 + 1);
        assert_eq!(s.evaluator_calls_used(), k + 1);
        for _ in 0..3 {
            if diagnostics == 100 {
                break;
            }
            let before = s.evaluator_calls_used();
            let (tool, args) = if diagnostics % 2 == 0 {
                ("analyze_instances", json!({"scope": "summary"}))
            } else {
                ("ast_novelty", json!({"source": NEAREST}))
            };
            s.diagnostic_call(tool, &args).unwrap();
            assert_eq!(s.evaluator_calls_used(), before);
            diagnostics += 1;
        }
    }
    while diagnostics < 100 {
        s.diagnostic_call("analyze_instances", &json!({"scope": "contrastive_pair"})).unwrap();
        diagnostics += 1;
    }
    assert_eq!(s.evaluator_calls_used(), 30);
    assert!(matches!(
        s.submit_candidate(NEAREST),
        Err(SessionError::BudgetExhausted { used: 30, budget: 30 })
    ));
    assert_eq!(s.attempts().len(), 30);
    assert_eq!(s.attempts().iter().filter(|a| a.status != ExecStatus::Ok).count(), 10);

    let log = SessionLog::read(s.dir()).unwrap();
    assert_eq!(log.evaluator_calls(), 30);
    let diag = log.events.iter().filter(|l| matches!(l.event, SessionEvent::Diagnostic { .. })).count();
    assert_eq!(diag, 100);
}

#[test]
fn diagnostic_errors_are_logged_without_cost() {
    let ws = tempfile::tempdir().unwrap();
    let mut s =
        Session::create(ws.path(), SessionConfig::new(Domain::TspC, 2), design(Domain::TspC, 10, 2, 0)).unwrap();
    assert!(s.diagnostic_call("no_such_tool", &json!({})).is_err());
    assert!(s.diagnostic_call("analyze_instances", &json!({"scope": "galaxy"})).is_err());
    assert_eq!(s.evaluator_calls_used(), 0);
    assert_eq!(s.remaining(), 2);
}

fn baseline_score() -> Score {
    Score::new(1.2, Direction::Minimize)
}

#[test]
fn reward_branches() {
    assert_eq!(reward_from(None, baseline_score()).reward, NO_CODE_REWARD);
    let failed = reward_from(Some(Err(ExecFailure::new(ExecStatus::RuntimeError, "boom"))), baseline_score());
    assert_eq!((failed.reward, failed.branch), (FAILURE_REWARD, RewardBranch::ExecutionFailure));
    let better = reward_from(Some(Ok(Score::new(0.9, Direction::Minimize))), baseline_score());
    assert!((better.reward - 0.3).abs() < 1e-12);
    let maximize = reward_from(
        Some(Ok(Score::new(5.0, Direction::Maximize))),
        Score::new(4.5, Direction::Maximize),
    );
    assert_eq!(maximize.reward, 0.5);
}

/// A session on the collinear design seeded with the index-order heuristic.
fn collinear_session(ws: &std::path::Path) -> Session {
    let config = SessionConfig {
        seed_heuristic: Some(INDEX_ORDER.to_string()),
        ..SessionConfig::new(Domain::TspC, 5)
    };
    Session::create(ws, config, collinear_design()).unwrap()
}

#[test]
fn scripted_improvement_earns_the_score_difference() {
    let ws = tempfile::tempdir().unwrap();
    let mut s = collinear_session(ws.path());
    let policy = script(&[eval_turn(NEAREST), final_turn(NEAREST)]);
    let t = run_episode(&policy, &mut s, &EpisodeOptions::default()).unwrap();
    assert_eq!(t.termination, Termination::Final);
    assert_eq!(t.outcome.branch, RewardBranch::Improvement);
    assert!((t.outcome.baseline_score.raw_objective - 1.5).abs() < 1e-12);
    assert!((t.outcome.final_score.unwrap().raw_objective - 1.2).abs() < 1e-12);
    assert!((t.reward() - 0.3).abs() < 1e-12);
}

#[test]
fn scripted_runtime_failure_costs_one_and_a_half() {
    let ws = tempfile::tempdir().unwrap();
    let mut s = collinear_session(ws.path());
    let t = run_episode(&script(&[final_turn(OUT_OF_RANGE)]), &mut s, &EpisodeOptions::default()).unwrap();
    assert_eq!(t.outcome.branch, RewardBranch::ExecutionFailure);
    assert_eq!(t.reward(), -1.5);
}

#[test]
fn scripted_episode_without_code_costs_two() {
    let ws = tempfile::tempdir().unwrap();
    let mut s = collinear_session(ws.path());
    let turns = ["I am not sure yet.".to_string(), "Still thinking.".to_string()];
    let t = run_episode(&script(&turns), &mut s, &EpisodeOptions::default()).unwrap();
    assert_eq!(t.termination, Termination::PolicyExhausted);
    assert_eq!(t.final_source, None);
    assert_eq!(t.reward(), -2.0);
}

#[test]
fn horizon_falls_back_to_the_best_attempt() {
    let ws = tempfile::tempdir().unwrap();
    let mut s = collinear_session(ws.path());
    let turns = [eval_turn(NEAREST), eval_turn(INDEX_ORDER), eval_turn(NEAREST)];
    let opts = EpisodeOptions {
        max_turns: 2,
        ..EpisodeOptions::default()
    };
    let t = run_episode(&script(&turns), &mut s, &opts).unwrap();
    assert_eq!(t.termination, Termination::Horizon);
    assert_eq!(t.final_origin, Some(FinalOrigin::BestAttempt));
    assert_eq!(t.final_source.as_deref(), Some(NEAREST));
    assert_eq!(s.evaluator_calls_used(), 2);
}

#[test]
fn demo_episode_replays_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, db) = (run_tsp_demo(a.path()), run_tsp_demo(b.path()));
    for file in [EVENTS_FILE, TRAJECTORY_FILE] {
        assert_eq!(std::fs::read(da.join(file)).unwrap(), std::fs::read(db.join(file)).unwrap(), "{file}");
    }
    let golden = std::fs::read_to_string(fixture("tsp_demo").join("events.sha256")).unwrap();
    assert_eq!(sha256_file(&da.join(EVENTS_FILE)), golden.trim());
}

#[test]
fn refinement_carries_the_best_and_conserves_calls() {
    let ws = tempfile::tempdir().unwrap();
    let policy = ScriptedPolicy::load(&fixture("sr_demo"), None).unwrap();
    let sr = SrConfig {
        global_budget: 100,
        rounds: 10,
        ..SrConfig::default()
    };
    let r = sequential_refinement(
        &policy,
        ws.path(),
        SessionConfig::new(Domain::TspC, 100),
        design(Domain::TspC, 12, 4, 2),
        &sr,
    )
    .unwrap();
    assert!(r.rounds.len() >= 2);
    assert_eq!(r.evaluator_calls_used, 100);
    assert_eq!(r.rounds.iter().map(|x| x.calls_used).sum::<usize>(), 100);

    let log = SessionLog::read(&ahd_core::session::sessions_root(ws.path()).join(&r.session_id)).unwrap();
    assert_eq!(log.evaluator_calls(), 100);
    // best attempt within round 1, by the log's own records
    let first = r.rounds[0].calls_used as u64;
    let mut best: Option<(f64, String)> = None;
    for line in &log.events {
        if let SessionEvent::Attempt {
            attempt_id,
            source_sha256,
            score: Some(s),
            ..
        } = &line.event
        {
            if *attempt_id <= first && best.as_ref().is_none_or(|b| s.raw_objective < b.0) {
                best = Some((s.raw_objective, source_sha256.clone()));
            }
        }
    }
    assert_eq!(r.rounds[1].initial_sha256, best.unwrap().1);
}

#[test]
fn parallel_sampling_keeps_the_lowest_objective() {
    let ws = tempfile::tempdir().unwrap();
    let dir = fixture("ps_demo");
    let factory = |lane: usize| -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(ScriptedPolicy::load(&dir, Some(lane))?))
    };
    let r = parallel_sampling(
        &factory,
        ws.path(),
        SessionConfig::new(Domain::TspC, 5),
        design(Domain::TspC, 20, 8, 3),
        &PsConfig {
            lanes: 5,
            ..PsConfig::default()
        },
    )
    .unwrap();
    let objectives: Vec<Option<f64>> = r.lanes.iter().map(|l| l.final_score.map(|s| s.raw_objective)).collect();
    assert!(objectives.iter().any(Option::is_none), "the broken lane has no score");
    let min = objectives.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(objectives[r.selected_lane], Some(min));
    assert_eq!(r.outcome.final_score.unwrap().raw_objective, min);
}
