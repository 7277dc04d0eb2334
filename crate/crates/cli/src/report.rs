//! `report`: per-run and per-domain summaries of session directories.

use crate::error::{io_error, CliError, CliResult};
use ahd_core::scoring::{load_references, references_path, GapReport, ReferenceSource};
use ahd_core::session::{sessions_root, SessionLog, MANIFEST_FILE};
use ahd_core::Domain;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub domain: Domain,
    pub session_id: String,
    pub evaluator_calls: usize,
    pub budget: usize,
    pub best_objective: Option<f64>,
    pub mean_gap: Option<f64>,
    pub best_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSummary {
    pub domain: Domain,
    pub runs: usize,
    pub mean_evaluator_calls: f64,
    pub mean_best_objective: Option<f64>,
    /// Mean over runs that have a gap.
    pub mean_gap: Option<f64>,
    pub best_gap: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Run(&'a RunRow),
    Domain(&'a DomainSummary),
}

/// A session directory, or every session under a workspace.
fn expand(dirs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for d in dirs {
        if d.join(MANIFEST_FILE).is_file() {
            out.push(d.clone());
            continue;
        }
        let root = sessions_root(d);
        if root.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(&root)
                .map_err(|e| io_error(&root, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(MANIFEST_FILE).is_file())
                .collect();
            found.sort();
            out.extend(found);
            continue;
        }
        return Err(CliError::Io(format!("{} is not a session directory or workspace", d.display())));
    }
    Ok(out)
}

fn run_row(dir: &Path, refs_root: Option<&Path>) -> CliResult<RunRow> {
    let log = SessionLog::read(dir)?;
    let m = &log.manifest;
    let best = log.best_attempt();
    let mut row = RunRow {
        domain: m.domain,
        session_id: m.session_id.clone(),
        evaluator_calls: log.evaluator_calls(),
        budget: m.budget,
        best_objective: best.map(|(_, s, _)| s.raw_objective),
        mean_gap: None,
        best_gap: None,
    };
    let (Some(root), Some((_, _, costs))) = (refs_root, best) else {
        return Ok(row);
    };
    let path = references_path(root, m.domain, m.dataset.size, m.dataset.seed);
    if !path.is_file() {
        return Ok(row);
    }
    let refs = load_references(&path)?;
    if refs.dataset_checksum != m.dataset.checksum {
        return Ok(row);
    }
    let optima: Option<Vec<f64>> = costs.iter().map(|c| refs.optimum(&c.id)).collect();
    let objectives: Vec<f64> = costs.iter().map(|c| c.objective).collect();
    if let Some(optima) = optima {
        if let Ok(g) = GapReport::new(&objectives, &optima, m.domain.direction(), ReferenceSource::CommittedReference) {
            row.mean_gap = Some(g.mean_gap);
            row.best_gap = Some(g.best_gap);
        }
    }
    Ok(row)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(rows: &[RunRow]) -> Vec<DomainSummary> {
    let mut groups: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.domain.tag()).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| DomainSummary {
            domain: g[0].domain,
            runs: g.len(),
            mean_evaluator_calls: g.iter().map(|r| r.evaluator_calls as f64).sum::<f64>() / g.len() as f64,
            mean_best_objective: mean(g.iter().filter_map(|r| r.best_objective)),
            mean_gap: mean(g.iter().filter_map(|r| r.mean_gap)),
            best_gap: g.iter().filter_map(|r| r.best_gap).reduce(f64::min),
        })
        .collect()
}

fn cell(v: Option<f64>, pct: bool) -> String {
    match (v, pct) {
        (Some(x), true) => format!("{x:.3}%"),
        (Some(x), false) => format!("{x:.6}"),
        (None, _) => "-".into(),
    }
}

pub fn render_table(rows: &[RunRow], summaries: &[DomainSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&format!("== {} ({}) ==\n", s.domain.display_name(), s.domain));
        out.push_str(&format!(
            "{:<16} {:>9} {:>14} {:>10} {:>10}\n",
            "session", "calls", "best obj", "mean gap", "best gap"
        ));
        for r in rows.iter().filter(|r| r.domain == s.domain) {
            out.push_str(&format!(
                "{:<16} {:>9} {:>14} {:>10} {:>10}\n",
                r.session_id,
                format!("{}/{}", r.evaluator_calls, r.budget),
                cell(r.best_objective, false),
                cell(r.mean_gap, true),
                cell(r.best_gap, true)
            ));
        }
        out.push_str(&format!(
            "{:<16} {:>9.1} {:>14} {:>10} {:>10}\n\n",
            format!("mean of {}", s.runs),
            s.mean_evaluator_calls,
            cell(s.mean_best_objective, false),
            cell(s.mean_gap, true),
            cell(s.best_gap, true)
        ));
    }
    out
}

pub fn report(dirs: &[PathBuf], refs_root: Option<&Path>, jsonl: Option<&Path>) -> CliResult {
    if dirs.is_empty() {
        return Err(CliError::Usage("at least one session directory is required".into()));
    }
    let sessions = expand(dirs)?;
    if sessions.is_empty() {
        return Err(CliError::Usage("no sessions found".into()));
    }
    let rows = sessions
        .iter()
        .map(|d| run_row(d, refs_root))
        .collect::<CliResult<Vec<_>>>()?;
    let summaries = summarize(&rows);
    print!("{}", render_table(&rows, &summaries));
    if let Some(path) = jsonl {
        let mut f = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
        let records = rows.iter().map(Record::Run).chain(summaries.iter().map(Record::Domain));
        for rec in records {
            let line = serde_json::to_string(&rec).expect("json");
            writeln!(f, "{line}").map_err(|e| io_error(path, e))?;
        }
    }
    Ok(())
}
