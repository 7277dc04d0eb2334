//! `run-session`: one episode, sequential refinement, or parallel sampling.

use crate::config::{DatasetSource, PolicySpec, RunConfig, Strategy};
use crate::error::{io_error, CliError, CliResult};
use ahd_core::agent::{
    parallel_sampling, run_episode, sequential_refinement, EpisodeOptions, Policy, PolicyError, PsConfig,
    RemotePolicy, ScriptedPolicy, SrConfig,
};
use ahd_core::instancegen::{generate, load_dataset, DesignSet, Role};
use ahd_core::session::{Session, SessionConfig};
use serde_json::json;
use std::path::Path;

pub const FINAL_FILE: &str = "final.rhai";
pub const RESULT_FILE: &str = "result.json";

fn make_policy(spec: &PolicySpec, cfg: &RunConfig, lane: Option<usize>) -> Result<Box<dyn Policy>, PolicyError> {
    Ok(match spec {
        PolicySpec::Scripted(p) => Box::new(ScriptedPolicy::load(p, lane)?),
        PolicySpec::Remote => Box::new(RemotePolicy::new(cfg.remote.clone())),
    })
}

fn design_set(cfg: &RunConfig) -> CliResult<DesignSet> {
    let ds = match &cfg.dataset {
        DatasetSource::File(p) => load_dataset(p)?,
        DatasetSource::Generate { n, count, seed } => {
            generate(cfg.domain, Role::Design, *n, *count, *seed).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    if ds.domain != cfg.domain {
        return Err(CliError::Usage(format!(
            "dataset is for {} but the run is for {}",
            ds.domain, cfg.domain
        )));
    }
    DesignSet::new(ds).map_err(|e| CliError::Usage(format!("sessions need a design split, got {}", e.0.tag())))
}

fn session_config(cfg: &RunConfig) -> SessionConfig {
    SessionConfig {
        reminder_threshold: cfg.reminder_threshold,
        scoring: cfg.scoring.clone(),
        seed_heuristic: cfg.seed_heuristic.clone(),
        label: Some(format!("{:?}", cfg.strategy).to_lowercase()),
        jobs: cfg.jobs,
        ..SessionConfig::new(cfg.domain, cfg.budget)
    }
}

fn write(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_outputs(dir: &Path, final_source: Option<&str>, result: &serde_json::Value) -> CliResult {
    if let Some(s) = final_source {
        write(&dir.join(FINAL_FILE), s)?;
    }
    let mut text = serde_json::to_string_pretty(result).expect("json");
    text.push('\n');
    write(&dir.join(RESULT_FILE), &text)
}

fn fmt_objective(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "none".into())
}

pub fn run(cfg: RunConfig) -> CliResult {
    let design = design_set(&cfg)?;
    let sc = session_config(&cfg);
    std::fs::create_dir_all(&cfg.workspace).map_err(|e| io_error(&cfg.workspace, e))?;
    match cfg.strategy {
        Strategy::Single => {
            let policy = make_policy(&cfg.policy, &cfg, None).map_err(|e| CliError::from(ahd_core::agent::AgentError::from(e)))?;
            let mut session = Session::create(&cfg.workspace, sc, design)?;
            let opts = EpisodeOptions {
                max_turns: cfg.max_turns,
                ..EpisodeOptions::default()
            };
            let t = run_episode(policy.as_ref(), &mut session, &opts);
            let t = match t {
                Ok(t) => t,
                Err(e) => {
                    // keep the log consistent before reporting
                    let _ = session.close(None);
                    return Err(e.into());
                }
            };
            session.close(t.final_source.as_deref())?;
            let best = session.best().and_then(|b| b.mean_objective());
            let result = json!({
                "strategy": "single",
                "session_id": session.id(),
                "evaluator_calls_used": session.evaluator_calls_used(),
                "budget": session.budget(),
                "best_design_objective": best,
                "termination": t.termination,
                "final_origin": t.final_origin,
                "unchanged_seed": t.unchanged_seed,
                "reward": t.outcome,
            });
            write_outputs(session.dir(), t.final_source.as_deref(), &result)?;
            println!("session {}", session.id());
            println!("evaluator calls {}/{}", session.evaluator_calls_used(), session.budget());
            println!("best design objective {}", fmt_objective(best));
            println!("reward {:.6} ({:?})", t.reward(), t.outcome.branch);
            if t.unchanged_seed {
                println!("warning: the final answer is the initial code unchanged");
            }
            println!("final {}", session.dir().join(FINAL_FILE).display());
        }
        Strategy::Sr => {
            let policy = make_policy(&cfg.policy, &cfg, None).map_err(|e| CliError::from(ahd_core::agent::AgentError::from(e)))?;
            let sr = SrConfig {
                global_budget: cfg.budget,
                rounds: cfg.rounds,
                max_turns: cfg.max_turns,
            };
            let r = sequential_refinement(policy.as_ref(), &cfg.workspace, sc, design, &sr)?;
            let dir = ahd_core::session::sessions_root(&cfg.workspace).join(&r.session_id);
            let best = r.outcome.final_score.map(|s| s.raw_objective);
            let result = json!({"strategy": "sr", "result": r});
            write_outputs(&dir, r.final_source.as_deref(), &result)?;
            println!("session {}", r.session_id);
            println!("rounds {}", r.rounds.len());
            println!("evaluator calls {}/{}", r.evaluator_calls_used, cfg.budget);
            println!("best design objective {}", fmt_objective(best));
            println!("reward {:.6} ({:?})", r.outcome.reward, r.outcome.branch);
            println!("final {}", dir.join(FINAL_FILE).display());
        }
        Strategy::Ps => {
            let ps = PsConfig {
                lanes: cfg.lanes,
                max_turns: cfg.max_turns,
            };
            let factory = |lane: usize| make_policy(&cfg.policy, &cfg, Some(lane));
            let r = parallel_sampling(&factory, &cfg.workspace, sc, design, &ps)?;
            let root = ahd_core::session::sessions_root(&cfg.workspace);
            let chosen = &r.lanes[r.selected_lane];
            let dir = root.join(&chosen.session_id);
            let best = r.outcome.final_score.map(|s| s.raw_objective);
            let calls: usize = r
                .lanes
                .iter()
                .map(|l| {
                    ahd_core::session::SessionLog::read(&root.join(&l.session_id))
                        .map(|log| log.evaluator_calls())
                        .unwrap_or(0)
                })
                .sum();
            let result = json!({"strategy": "ps", "evaluator_calls_used": calls, "result": r});
            write_outputs(&dir, Some(&r.final_source), &result)?;
            for l in &r.lanes {
                let status = match (&l.error, l.final_score) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, Some(s)) => format!("objective {:.6}", s.raw_objective),
                    (None, None) => "no valid final".into(),
                };
                println!("lane {} session {} {}", l.lane, l.session_id, status);
            }
            println!("selected lane {}", r.selected_lane);
            println!("evaluator calls {}/{}", calls, cfg.budget * cfg.lanes);
            println!("best design objective {}", fmt_objective(best));
            println!("reward {:.6} ({:?})", r.outcome.reward, r.outcome.branch);
            println!("final {}", dir.join(FINAL_FILE).display());
        }
    }
    Ok(())
}
