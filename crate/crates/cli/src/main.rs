mod commands;
mod config;
mod error;
mod report;
mod run_session;

use ahd_core::instancegen::Role;
use ahd_core::Domain;
use clap::{Parser, Subcommand};
use config::{ConfigFile, RunConfig, RunFlags, Strategy, FIXTURE_CONFIG};
use error::CliResult;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ahd", version, about = "Automatic heuristic design environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a dataset file and print its checksum.
    GenData {
        #[arg(long)]
        domain: Domain,
        #[arg(long, default_value = "design")]
        role: Role,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Root for the standard data/<domain>/<role>_<n>_<seed>.jsonl layout.
        #[arg(long, default_value = ".")]
        root: PathBuf,
        /// Explicit output file instead of the standard layout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a heuristic program on a dataset.
    Eval {
        #[arg(long)]
        program: Option<PathBuf>,
        /// Score the domain's baseline heuristic instead of a program file.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Reference optima; defaults to the committed file under --root if present.
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a design session with a policy.
    RunSession {
        /// scripted:<path> or remote
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        lanes: Option<usize>,
        #[arg(long)]
        max_turns: Option<usize>,
        #[arg(long)]
        workspace: Option<PathBuf>,
        #[arg(long)]
        seed_heuristic: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        data_seed: Option<u64>,
        #[arg(long)]
        scoring_seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        api_key_env: Option<String>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Compute exact optima for an oracle-sized dataset.
    MakeRefs {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize session directories or workspaces.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Root holding refs/ for gap computation.
        #[arg(long)]
        refs_root: Option<PathBuf>,
        /// Also write one JSON record per table row.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenData {
            domain,
            role,
            n,
            count,
            seed,
            root,
            out,
        } => commands::gen_data(commands::GenDataArgs {
            domain,
            role,
            n,
            count,
            seed,
            root,
            out,
        }),
        Command::Eval {
            program,
            baseline,
            dataset,
            repeats,
            seed,
            jobs,
            refs,
            root,
            json,
        } => commands::eval(commands::EvalArgs {
            program,
            baseline,
            dataset,
            repeats,
            seed,
            jobs,
            refs,
            root,
            json,
        }),
        Command::RunSession {
            policy,
            config,
            domain,
            budget,
            strategy,
            rounds,
            lanes,
            max_turns,
            workspace,
            seed_heuristic,
            dataset,
            n,
            count,
            data_seed,
            scoring_seed,
            repeats,
            jobs,
            endpoint,
            model,
            api_key_env,
            temperature,
        } => {
            // a scripted fixture directory may carry its own config
            let config = config.or_else(|| {
                let dir = PathBuf::from(policy.as_deref()?.strip_prefix("scripted:")?);
                let p = dir.join(FIXTURE_CONFIG);
                p.is_file().then_some(p)
            });
            let file = match &config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::default(),
            };
            let flags = RunFlags {
                domain,
                budget,
                strategy,
                rounds,
                lanes,
                max_turns,
                workspace,
                seed_heuristic,
                policy,
                dataset,
                n,
                count,
                data_seed,
                scoring_seed,
                repeats,
                jobs,
                endpoint,
                model,
                api_key_env,
                temperature,
            };
            run_session::run(RunConfig::resolve(flags, file)?)
        }
        Command::MakeRefs { dataset, root, out } => commands::make_refs(&dataset, &root, out),
        Command::Report { dirs, refs_root, jsonl } => report::report(&dirs, refs_root.as_deref(), jsonl.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
