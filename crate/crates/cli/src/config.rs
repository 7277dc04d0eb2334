//! Run configuration: flags override the config file, which overrides
//! built-in defaults.

use crate::error::{io_error, CliError, CliResult};
use ahd_core::agent::{RemoteConfig, DEFAULT_LANES, DEFAULT_MAX_TURNS, DEFAULT_SR_BUDGET, DEFAULT_SR_ROUNDS};
use ahd_core::instancegen::design_split;
use ahd_core::session::{ScoringSettings, DEFAULT_REMINDER_THRESHOLD};
use ahd_core::solvers::aco_defaults;
use ahd_core::{Backbone, Domain};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_BUDGET: usize = 30;
pub const DEFAULT_WORKSPACE: &str = "ahd_runs";
/// Read from a scripted-policy directory when no `--config` is given.
pub const FIXTURE_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Single,
    Sr,
    Ps,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringFile {
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
}

/// Partial override of the domain's colony parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcoFile {
    pub ants: Option<usize>,
    pub iterations: Option<usize>,
    pub decay: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteFile {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<usize>,
    pub backoff_ms: Option<u64>,
}

/// The on-disk form; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub domain: Option<String>,
    pub budget: Option<usize>,
    pub strategy: Option<Strategy>,
    pub rounds: Option<usize>,
    pub lanes: Option<usize>,
    pub max_turns: Option<usize>,
    pub reminder_threshold: Option<usize>,
    pub workspace: Option<PathBuf>,
    pub seed_heuristic: Option<PathBuf>,
    pub policy: Option<String>,
    #[serde(default)]
    pub dataset: DatasetFile,
    #[serde(default)]
    pub scoring: ScoringFile,
    #[serde(default)]
    pub aco: AcoFile,
    #[serde(default)]
    pub remote: RemoteFile,
}

impl ConfigFile {
    /// Parses `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        rebase(&mut cfg.workspace);
        rebase(&mut cfg.seed_heuristic);
        rebase(&mut cfg.dataset.path);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File(PathBuf),
    Generate { n: usize, count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Scripted(PathBuf),
    Remote,
}

impl PolicySpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        if s == "remote" {
            Ok(PolicySpec::Remote)
        } else if let Some(p) = s.strip_prefix("scripted:") {
            if p.is_empty() {
                return Err(CliError::Usage("scripted policy needs a path: scripted:<path>".into()));
            }
            Ok(PolicySpec::Scripted(PathBuf::from(p)))
        } else {
            Err(CliError::Usage(format!("unknown policy `{s}` (expected scripted:<path> or remote)")))
        }
    }
}

/// Values given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    pub domain: Option<String>,
    pub budget: Option<usize>,
    pub strategy: Option<Strategy>,
    pub rounds: Option<usize>,
    pub lanes: Option<usize>,
    pub max_turns: Option<usize>,
    pub workspace: Option<PathBuf>,
    pub seed_heuristic: Option<PathBuf>,
    pub policy: Option<String>,
    pub dataset: Option<PathBuf>,
    pub n: Option<usize>,
    pub count: Option<usize>,
    pub data_seed: Option<u64>,
    pub scoring_seed: Option<u64>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
}

/// A fully resolved and validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub budget: usize,
    pub strategy: Strategy,
    pub rounds: usize,
    pub lanes: usize,
    pub max_turns: usize,
    pub reminder_threshold: usize,
    pub workspace: PathBuf,
    pub seed_heuristic: Option<String>,
    pub policy: PolicySpec,
    pub dataset: DatasetSource,
    pub scoring: ScoringSettings,
    pub jobs: usize,
    pub remote: RemoteConfig,
}

fn positive(name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        Err(CliError::Usage(format!("{name} must be at least 1")))
    } else {
        Ok(v)
    }
}

impl RunConfig {
    pub fn resolve(flags: RunFlags, file: ConfigFile) -> CliResult<Self> {
        let domain_tag = flags
            .domain
            .or(file.domain)
            .ok_or_else(|| CliError::Usage("a domain is required (--domain or `domain` in the config)".into()))?;
        let domain: Domain = domain_tag.parse().map_err(|e: ahd_core::domain::UnknownDomain| CliError::Usage(e.to_string()))?;
        let strategy = flags.strategy.or(file.strategy).unwrap_or(Strategy::Single);
        let default_budget = if strategy == Strategy::Sr {
            DEFAULT_SR_BUDGET
        } else {
            DEFAULT_BUDGET
        };
        let budget = positive("budget", flags.budget.or(file.budget).unwrap_or(default_budget))?;
        let rounds = positive("rounds", flags.rounds.or(file.rounds).unwrap_or(DEFAULT_SR_ROUNDS))?;
        let lanes = positive("lanes", flags.lanes.or(file.lanes).unwrap_or(DEFAULT_LANES))?;
        let max_turns = positive("max-turns", flags.max_turns.or(file.max_turns).unwrap_or(DEFAULT_MAX_TURNS))?;
        let policy_text = flags
            .policy
            .or(file.policy)
            .ok_or_else(|| CliError::Usage("a policy is required (--policy scripted:<path> | remote)".into()))?;
        let policy = PolicySpec::parse(&policy_text)?;

        let seed_heuristic = match flags.seed_heuristic.or(file.seed_heuristic) {
            Some(p) => Some(std::fs::read_to_string(&p).map_err(|e| io_error(&p, e))?),
            None => None,
        };
        let dataset = match flags.dataset.or(file.dataset.path) {
            Some(p) => DatasetSource::File(p),
            None => {
                let (n, count) = design_split(domain);
                DatasetSource::Generate {
                    n: flags.n.or(file.dataset.n).unwrap_or(n),
                    count: flags.count.or(file.dataset.count).unwrap_or(count),
                    seed: flags.data_seed.or(file.dataset.seed).unwrap_or(0),
                }
            }
        };

        let aco = match domain.backbone() {
            Backbone::Constructive => {
                if file.aco != AcoFile::default() {
                    return Err(CliError::Usage(format!("[aco] overrides do not apply to {domain}")));
                }
                None
            }
            Backbone::Aco if file.aco == AcoFile::default() => None,
            Backbone::Aco => {
                let mut c = aco_defaults(domain).map_err(|e| CliError::Usage(e.to_string()))?;
                let o = &file.aco;
                c.ants = o.ants.unwrap_or(c.ants);
                c.iterations = o.iterations.unwrap_or(c.iterations);
                c.decay = o.decay.unwrap_or(c.decay);
                c.alpha = o.alpha.unwrap_or(c.alpha);
                c.beta = o.beta.unwrap_or(c.beta);
                c.validate().map_err(CliError::Usage)?;
                Some(c)
            }
        };
        let scoring = ScoringSettings {
            seed: flags.scoring_seed.or(file.scoring.seed).unwrap_or(0),
            repeats: positive("repeats", flags.repeats.or(file.scoring.repeats).unwrap_or(1))?,
            aco,
            ..ScoringSettings::default()
        };
        let jobs = flags.jobs.or(file.scoring.jobs).unwrap_or(0);

        let d = RemoteConfig::default();
        let r = file.remote;
        let remote = RemoteConfig {
            endpoint: flags.endpoint.or(r.endpoint).unwrap_or(d.endpoint),
            model: flags.model.or(r.model).unwrap_or(d.model),
            api_key_env: flags.api_key_env.or(r.api_key_env).unwrap_or(d.api_key_env),
            temperature: flags.temperature.or(r.temperature).unwrap_or(d.temperature),
            max_tokens: r.max_tokens.or(d.max_tokens),
            timeout_secs: r.timeout_secs.unwrap_or(d.timeout_secs),
            retries: r.retries.unwrap_or(d.retries),
            backoff_ms: r.backoff_ms.unwrap_or(d.backoff_ms),
        };

        Ok(Self {
            domain,
            budget,
            strategy,
            rounds,
            lanes,
            max_turns,
            reminder_threshold: file.reminder_threshold.unwrap_or(DEFAULT_REMINDER_THRESHOLD),
            workspace: flags
                .workspace
                .or(file.workspace)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE)),
            seed_heuristic,
            policy,
            dataset,
            scoring,
            jobs,
            remote,
        })
    }
}
