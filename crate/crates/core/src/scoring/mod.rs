//! Scores, gaps, evaluation of programs over datasets, baselines and exact oracles.

mod baselines;
mod oracles;
mod refs;

pub use baselines::{baseline_program, baseline_source};
pub use oracles::{
    exact_mkp, exact_op, exact_routing, exact_tsp, TooLarge, MKP_ORACLE_MAX, OP_ORACLE_MAX,
    ROUTING_ORACLE_MAX, TSP_ORACLE_MAX,
};
pub use refs::{
    compute_references, exact_optimum, load_references, references_path, save_references,
    ReferenceEntry, ReferenceFile, RefsError,
};

use crate::domain::{Backbone, Direction};
use crate::instancegen::Dataset;
use crate::programhost::{ExecFailure, HeuristicProgram, Limits, Sandbox};
use crate::solvers::{aco_defaults, solve, AcoConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub raw_objective: f64,
    /// Larger is better in every domain.
    pub normalized: f64,
    pub direction: Direction,
}

impl Score {
    pub fn new(raw_objective: f64, direction: Direction) -> Self {
        Self {
            raw_objective,
            normalized: direction.normalize(raw_objective),
            direction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("gap is undefined for a zero reference objective")]
pub struct ZeroReference;

/// Percentage gap of `f` from the reference `f_star`; positive means worse.
pub fn gap(f: f64, f_star: f64, direction: Direction) -> Result<f64, ZeroReference> {
    if f_star == 0.0 {
        return Err(ZeroReference);
    }
    let diff = match direction {
        Direction::Minimize => f - f_star,
        Direction::Maximize => f_star - f,
    };
    Ok(diff / f_star.abs() * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Oracle,
    CommittedReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub per_instance_gaps: Vec<f64>,
    /// Mean of the per-instance gaps.
    pub mean_gap: f64,
    pub best_gap: f64,
    pub reference_source: ReferenceSource,
}

impl GapReport {
    pub fn new(
        objectives: &[f64],
        references: &[f64],
        direction: Direction,
        reference_source: ReferenceSource,
    ) -> Result<Self, ZeroReference> {
        assert_eq!(objectives.len(), references.len(), "one reference per objective");
        let per_instance_gaps = objectives
            .iter()
            .zip(references)
            .map(|(&f, &r)| gap(f, r, direction))
            .collect::<Result<Vec<_>, _>>()?;
        let k = per_instance_gaps.len().max(1) as f64;
        let mean_gap = per_instance_gaps.iter().sum::<f64>() / k;
        let best_gap = per_instance_gaps.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            per_instance_gaps,
            mean_gap,
            best_gap,
            reference_source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    /// Overrides the domain's ACO defaults (the seed field is the base seed).
    pub aco: Option<AcoConfig>,
    pub limits: Limits,
    /// Base seed; repeat r uses `seed + r`.
    pub seed: u64,
    pub repeats: usize,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            aco: None,
            limits: Limits::default(),
            seed: 0,
            repeats: 1,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCost {
    pub id: String,
    /// Mean over repeats.
    pub objective: f64,
    pub per_repeat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub score: Score,
    pub per_instance: Vec<InstanceCost>,
}

impl Evaluation {
    pub fn objectives(&self) -> Vec<f64> {
        self.per_instance.iter().map(|c| c.objective).collect()
    }
}

/// A failed evaluation: the lowest-indexed failing instance and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("instance {index} (`{instance_id}`) failed with {}", failure)]
pub struct EvalFailure {
    pub index: usize,
    pub instance_id: String,
    pub failure: ExecFailure,
}

/// Runs `program` on every instance (and repeat) of `dataset`. Any failure
/// fails the whole evaluation; the reported failure is always the one with
/// the lowest instance index, so the outcome does not depend on scheduling.
pub fn score_program(
    program: &HeuristicProgram,
    dataset: &Dataset,
    config: &ScoringConfig,
) -> Result<Evaluation, EvalFailure> {
    let domain = program.domain();
    let backbone = domain.backbone();
    let repeats = match backbone {
        Backbone::Constructive => 1,
        Backbone::Aco => config.repeats.max(1),
    };
    let base_aco = match backbone {
        Backbone::Aco => config
            .aco
            .unwrap_or_else(|| aco_defaults(domain).expect("aco domain")),
        // unused by the constructive backbone
        Backbone::Constructive => AcoConfig {
            ants: 1,
            iterations: 1,
            decay: 1.0,
            alpha: 1.0,
            beta: 1.0,
            seed: 0,
        },
    };
    let tasks: Vec<(usize, usize)> = (0..dataset.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let first_failure = AtomicUsize::new(usize::MAX);

    let run = || -> Vec<Option<Result<f64, ExecFailure>>> {
        tasks
            .par_iter()
            .map_init(
                || Sandbox::new(config.limits.clone()),
                |sandbox, &(i, r)| {
                    if i > first_failure.load(Ordering::Relaxed) {
                        return None;
                    }
                    let aco = base_aco.with_seed(config.seed.wrapping_add(r as u64));
                    let out = solve(program, &dataset.instances[i], sandbox, &aco).map(|s| s.objective);
                    if out.is_err() {
                        first_failure.fetch_min(i, Ordering::Relaxed);
                    }
                    Some(out)
                },
            )
            .collect()
    };
    let results = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("thread pool")
            .install(run)
    } else {
        run()
    };

    let mut per_instance: Vec<InstanceCost> = dataset
        .instances
        .iter()
        .map(|inst| InstanceCost {
            id: inst.id().to_string(),
            objective: 0.0,
            per_repeat: Vec::with_capacity(repeats),
        })
        .collect();
    for (&(i, _), res) in tasks.iter().zip(results) {
        match res {
            Some(Ok(v)) => per_instance[i].per_repeat.push(v),
            Some(Err(failure)) if i == first_failure.load(Ordering::Relaxed) => {
                return Err(EvalFailure {
                    index: i,
                    instance_id: per_instance[i].id.clone(),
                    failure,
                });
            }
            _ => {}
        }
    }
    for c in per_instance.iter_mut() {
        c.objective = c.per_repeat.iter().sum::<f64>() / c.per_repeat.len() as f64;
    }
    let mean = per_instance.iter().map(|c| c.objective).sum::<f64>() / per_instance.len().max(1) as f64;
    Ok(Evaluation {
        score: Score::new(mean, domain.direction()),
        per_instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::instancegen::{generate, Role};
    use crate::programhost::{parse_program, ExecStatus};

    #[test]
    fn gap_examples() {
        let g = gap(9.586, 7.726, Direction::Minimize).unwrap();
        assert!((g - 24.075).abs() < 1e-3);
        assert_eq!(gap(5.0, 5.0, Direction::Minimize).unwrap(), 0.0);
        assert_eq!(gap(5.0, 5.0, Direction::Maximize).unwrap(), 0.0);
        assert_eq!(gap(8.0, 10.0, Direction::Maximize).unwrap(), 20.0);
        assert!(gap(1.0, 0.0, Direction::Minimize).is_err());
    }

    #[test]
    fn mean_of_gaps_differs_from_gap_of_means() {
        let objs = [2.0, 12.0];
        let refs = [1.0, 10.0];
        let rep = GapReport::new(&objs, &refs, Direction::Minimize, ReferenceSource::Oracle).unwrap();
        // per-instance gaps 100% and 20%
        assert_eq!(rep.mean_gap, 60.0);
        assert_eq!(rep.best_gap, 20.0);
        let of_means = gap(7.0, 5.5, Direction::Minimize).unwrap();
        assert!((rep.mean_gap - of_means).abs() > 1.0);
    }

    #[test]
    fn normalized_score_reverses_minimization() {
        let a = Score::new(3.0, Direction::Minimize);
        let b = Score::new(4.0, Direction::Minimize);
        assert!(a.normalized > b.normalized);
        assert_eq!(Score::new(2.5, Direction::Maximize).normalized, 2.5);
    }

    #[test]
    fn failure_on_one_instance_fails_the_evaluation() {
        let ds = generate(Domain::TspC, Role::Design, 8, 16, 4).unwrap();
        // throws only on the instance whose d(0, 3) matches instance 3's
        let bad_id = 3;
        let d03 = ds.instances[bad_id].coords().map(crate::instancegen::DistanceMatrix::from_coords).unwrap().get(0, 3);
        let src = format!("fn select_next_node(c, d, u, m) {{ if m[0][3] == {d03:?} {{ throw \"boom\"; }} u[0] }}");
        let p = parse_program(&src, Domain::TspC).unwrap();
        let err = score_program(&p, &ds, &ScoringConfig::default()).unwrap_err();
        assert_eq!(err.index, bad_id);
        assert_eq!(err.failure.status, ExecStatus::RuntimeError);
    }

    #[test]
    fn repeats_are_seed_derived_and_deterministic() {
        let ds = generate(Domain::TspAco, Role::Design, 10, 3, 2).unwrap();
        let cfg = ScoringConfig {
            aco: Some(AcoConfig {
                iterations: 5,
                ants: 5,
                ..aco_defaults(Domain::TspAco).unwrap()
            }),
            repeats: 3,
            seed: 17,
            ..ScoringConfig::default()
        };
        let p = baseline_program(Domain::TspAco);
        let a = score_program(&p, &ds, &cfg).unwrap();
        let b = score_program(&p, &ds, &ScoringConfig { jobs: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert!(a.per_instance.iter().all(|c| c.per_repeat.len() == 3));
        // repeat r is the single-repeat run seeded with base + r
        let single = score_program(
            &p,
            &ds,
            &ScoringConfig {
                repeats: 1,
                seed: 18,
                ..cfg.clone()
            },
        )
        .unwrap();
        for (c, s) in a.per_instance.iter().zip(&single.per_instance) {
            assert_eq!(c.per_repeat[1], s.objective);
        }
    }
}
