//! Data generation, offline evaluation and reference optima.

use crate::error::{CliError, CliResult};
use ahd_core::instancegen::{dataset_path, generate, load_dataset, save_dataset, Dataset, Role};
use ahd_core::programhost::parse_program;
use ahd_core::scoring::{
    baseline_source, compute_references, load_references, references_path, save_references, score_program,
    GapReport, ReferenceFile, ReferenceSource, ScoringConfig,
};
use ahd_core::Domain;
use serde_json::json;
use std::path::{Path, PathBuf};

pub struct GenDataArgs {
    pub domain: Domain,
    pub role: Role,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub root: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn gen_data(a: GenDataArgs) -> CliResult {
    let ds = generate(a.domain, a.role, a.n, a.count, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let path = a
        .out
        .unwrap_or_else(|| dataset_path(&a.root, a.domain, a.role, a.n, a.seed));
    let checksum = save_dataset(&ds, &path)?;
    println!("{} {} instances sha256 {}", path.display(), ds.len(), checksum);
    Ok(())
}

pub struct EvalArgs {
    pub program: Option<PathBuf>,
    pub baseline: bool,
    pub dataset: PathBuf,
    pub repeats: usize,
    pub seed: u64,
    pub jobs: usize,
    pub refs: Option<PathBuf>,
    pub root: PathBuf,
    pub json: bool,
}

/// The explicit reference file, else the committed one for the dataset if
/// it exists and was computed on the same data.
fn find_references(ds: &Dataset, explicit: Option<&Path>, root: &Path) -> CliResult<Option<ReferenceFile>> {
    let refs = match explicit {
        Some(p) => load_references(p)?,
        None => {
            let p = references_path(root, ds.domain, ds.size, ds.seed);
            if !p.is_file() {
                return Ok(None);
            }
            match load_references(&p) {
                Ok(r) if r.dataset_checksum == ds.checksum() => r,
                _ => return Ok(None),
            }
        }
    };
    if refs.dataset_checksum != ds.checksum() {
        return Err(CliError::Usage("reference file was computed on a different dataset".into()));
    }
    Ok(Some(refs))
}

pub fn eval(a: EvalArgs) -> CliResult {
    let ds = load_dataset(&a.dataset)?;
    let source = match (&a.program, a.baseline) {
        (Some(p), false) => std::fs::read_to_string(p).map_err(|e| crate::error::io_error(p, e))?,
        (None, true) => baseline_source(ds.domain).to_string(),
        _ => return Err(CliError::Usage("give exactly one of --program or --baseline".into())),
    };
    if a.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let program = parse_program(&source, ds.domain).map_err(|e| CliError::Evaluation(format!("parse_error: {e}")))?;
    let cfg = ScoringConfig {
        seed: a.seed,
        repeats: a.repeats,
        jobs: a.jobs,
        ..ScoringConfig::default()
    };
    let eval = score_program(&program, &ds, &cfg).map_err(|f| {
        CliError::Evaluation(format!(
            "{} on instance {} (index {}): {}",
            f.failure.status.as_str(),
            f.instance_id,
            f.index,
            f.failure.message
        ))
    })?;
    let refs = find_references(&ds, a.refs.as_deref(), &a.root)?;
    let gaps = match &refs {
        Some(r) => {
            let optima = eval
                .per_instance
                .iter()
                .map(|c| {
                    r.optimum(&c.id)
                        .ok_or_else(|| CliError::Usage(format!("reference file has no entry for {}", c.id)))
                })
                .collect::<CliResult<Vec<f64>>>()?;
            Some(
                GapReport::new(&eval.objectives(), &optima, ds.domain.direction(), ReferenceSource::CommittedReference)
                    .map_err(|e| CliError::Evaluation(e.to_string()))?,
            )
        }
        None => None,
    };
    if a.json {
        let v = json!({
            "domain": ds.domain,
            "dataset_checksum": ds.checksum(),
            "repeats": a.repeats,
            "mean_objective": eval.score.raw_objective,
            "per_instance": eval.per_instance,
            "gaps": gaps,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        return Ok(());
    }
    println!("domain {}  instances {}  repeats {}", ds.domain, ds.len(), a.repeats);
    println!("mean objective {:.6}", eval.score.raw_objective);
    for (i, c) in eval.per_instance.iter().enumerate() {
        let mut line = format!("  {:<28} {:.6}", c.id, c.objective);
        if a.repeats > 1 {
            let reps: Vec<String> = c.per_repeat.iter().map(|x| format!("{x:.6}")).collect();
            line.push_str(&format!("  [{}]", reps.join(", ")));
        }
        if let Some(g) = &gaps {
            line.push_str(&format!("  gap {:.3}%", g.per_instance_gaps[i]));
        }
        println!("{line}");
    }
    if let Some(g) = &gaps {
        println!("mean gap {:.3}%  best gap {:.3}%", g.mean_gap, g.best_gap);
    }
    Ok(())
}

pub fn make_refs(dataset: &Path, root: &Path, out: Option<PathBuf>) -> CliResult {
    let ds = load_dataset(dataset)?;
    let refs = compute_references(&ds).map_err(|e| CliError::Usage(e.to_string()))?;
    let path = out.unwrap_or_else(|| references_path(root, ds.domain, ds.size, ds.seed));
    save_references(&refs, &path)?;
    println!("{} {} optima", path.display(), refs.entries.len());
    Ok(())
}
