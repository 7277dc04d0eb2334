//! Ant colony optimization with a program-supplied desirability prior.
//!
//! Pheromone starts at 1 everywhere. Each iteration, every ant builds a
//! complete solution by sampling moves with probability proportional to
//! tau^alpha * eta^beta over the feasible moves. Then the pheromone
//! evaporates (tau <- rho * tau) and every ant deposits on what it used.

use super::{path_length, routes_cost, tour_length, Plan, Solution, SolveError};
use crate::domain::{Backbone, Direction, Domain};
use crate::instancegen::{Instance, KnapsackInstance, OrienteeringInstance, RoutingInstance, MKP_DIMS};
use crate::programhost::Desirability;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcoConfig {
    pub ants: usize,
    pub iterations: usize,
    pub decay: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl AcoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.ants == 0 || self.iterations == 0 {
            return Err("ants and iterations must be at least 1".into());
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

pub fn aco_defaults(domain: Domain) -> Result<AcoConfig, SolveError> {
    let (ants, iterations) = match domain {
        Domain::TspAco | Domain::CvrpAco => (30, 100),
        Domain::OpAco => (20, 50),
        Domain::MkpAco => (10, 50),
        other => return Err(SolveError::NotAco(other)),
    };
    Ok(AcoConfig {
        ants,
        iterations,
        decay: 0.9,
        alpha: 1.0,
        beta: 1.0,
        seed: 0,
    })
}

#[inline]
fn weight(tau: f64, eta: f64, alpha: f64, beta: f64) -> f64 {
    let t = if alpha == 1.0 { tau } else { tau.powf(alpha) };
    let e = if beta == 1.0 { eta } else { eta.powf(beta) };
    t * e
}

/// Transition distribution over one row. Returns the probabilities and
/// whether the degenerate fallback (uniform over feasible entries) was used.
pub fn aco_transition_probs(
    tau_row: &[f64],
    eta_row: &[f64],
    feasible: &[bool],
    alpha: f64,
    beta: f64,
) -> (Vec<f64>, bool) {
    assert_eq!(tau_row.len(), eta_row.len());
    assert_eq!(tau_row.len(), feasible.len());
    let w: Vec<f64> = (0..tau_row.len())
        .map(|j| if feasible[j] { weight(tau_row[j], eta_row[j], alpha, beta) } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        (w.iter().map(|x| x / total).collect(), false)
    } else {
        let k = feasible.iter().filter(|&&f| f).count();
        let p = feasible
            .iter()
            .map(|&f| if f { 1.0 / k as f64 } else { 0.0 })
            .collect();
        (p, true)
    }
}

/// Draws one candidate with probability proportional to `w[candidate]`.
fn sample(w: &[f64], candidates: &[usize], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!candidates.is_empty());
    let total: f64 = candidates.iter().map(|&j| w[j]).sum();
    if !(total > 0.0 && total.is_finite()) {
        return candidates[rng.random_range(0..candidates.len())];
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = candidates[0];
    for &j in candidates {
        if w[j] > 0.0 {
            acc += w[j];
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Partial state of a CVRP ant.
#[derive(Debug, Clone, Copy)]
pub struct CvrpAntState<'a> {
    pub current: usize,
    pub depot: usize,
    pub remaining: u32,
    pub demands: &'a [u32],
    pub served: &'a [bool],
}

/// Feasible next moves of a CVRP ant: unserved customers that fit, plus the
/// depot while customers remain and the ant is away from it. Empty means
/// every customer is served and the ant goes home.
pub fn construct_cvrp_aco_step_mask(state: &CvrpAntState<'_>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut unserved = false;
    for (c, &d) in state.demands.iter().enumerate() {
        if c == state.depot || state.served[c] {
            continue;
        }
        unserved = true;
        if d <= state.remaining {
            out.push(c);
        }
    }
    if unserved && state.current != state.depot {
        out.push(state.depot);
    }
    out
}

/// Pheromone deposited by one ant. Minimization domains deposit 1/cost;
/// maximization domains deposit objective/normalizer (total prize or value).
pub fn deposit_amount(domain: Domain, objective: f64, normalizer: f64) -> f64 {
    match domain.direction() {
        Direction::Minimize => 1.0 / objective,
        Direction::Maximize => objective / normalizer,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcoRun {
    pub best: Solution,
    /// Best objective so far after each iteration.
    pub trace: Vec<f64>,
}

fn ant_rng(seed: u64, iteration: usize, ant: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | ant as u64);
    rng
}

struct Ant {
    plan: Plan,
    /// Directed edges (or items) that receive this ant's deposit.
    used: Vec<(usize, usize)>,
    objective: f64,
}

fn tsp_ant(n: usize, w: &[f64], d: &crate::instancegen::DistanceMatrix, rng: &mut ChaCha8Rng) -> Ant {
    let start = rng.random_range(0..n);
    let mut candidates: Vec<usize> = (0..n).filter(|&j| j != start).collect();
    let mut tour = Vec::with_capacity(n);
    tour.push(start);
    while !candidates.is_empty() {
        let cur = *tour.last().unwrap();
        let next = sample(&w[cur * n..(cur + 1) * n], &candidates, rng);
        candidates.retain(|&j| j != next);
        tour.push(next);
    }
    let mut used = Vec::with_capacity(2 * n);
    for k in 0..n {
        let (a, b) = (tour[k], tour[(k + 1) % n]);
        used.push((a, b));
        used.push((b, a));
    }
    let objective = tour_length(d, &tour);
    Ant {
        plan: Plan::Tour(tour),
        used,
        objective,
    }
}

fn cvrp_ant(r: &RoutingInstance, w: &[f64], d: &crate::instancegen::DistanceMatrix, rng: &mut ChaCha8Rng) -> Ant {
    let n = r.base.n();
    let mut served = vec![false; n];
    let mut path = vec![r.depot];
    let mut remaining = r.capacity;
    loop {
        let cur = *path.last().unwrap();
        let mask = construct_cvrp_aco_step_mask(&CvrpAntState {
            current: cur,
            depot: r.depot,
            remaining,
            demands: &r.demands,
            served: &served,
        });
        if mask.is_empty() {
            if cur != r.depot {
                path.push(r.depot);
            }
            break;
        }
        let next = sample(&w[cur * n..(cur + 1) * n], &mask, rng);
        if next == r.depot {
            remaining = r.capacity;
        } else {
            served[next] = true;
            remaining -= r.demands[next];
        }
        path.push(next);
    }
    let routes: Vec<Vec<usize>> = path
        .split(|&v| v == r.depot)
        .filter(|s| !s.is_empty())
        .map(|s| s.to_vec())
        .collect();
    let used = path.windows(2).map(|e| (e[0], e[1])).collect();
    let objective = routes_cost(d, r.depot, &routes, false);
    Ant {
        plan: Plan::Routes(routes),
        used,
        objective,
    }
}

fn op_ant(o: &OrienteeringInstance, w: &[f64], d: &crate::instancegen::DistanceMatrix, rng: &mut ChaCha8Rng) -> Ant {
    let n = o.base.n();
    let mut visited = vec![false; n];
    visited[o.depot] = true;
    let mut path: Vec<usize> = Vec::new();
    let mut cur = o.depot;
    let mut len = 0.0;
    loop {
        let candidates: Vec<usize> = (0..n)
            .filter(|&j| !visited[j] && len + d.get(cur, j) + d.get(j, o.depot) <= o.max_length)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let next = sample(&w[cur * n..(cur + 1) * n], &candidates, rng);
        len += d.get(cur, next);
        visited[next] = true;
        path.push(next);
        cur = next;
    }
    let mut used = Vec::with_capacity(path.len() + 1);
    let mut prev = o.depot;
    for &c in &path {
        used.push((prev, c));
        prev = c;
    }
    used.push((prev, o.depot));
    let objective = path.iter().map(|&c| o.prizes[c]).sum();
    debug_assert!(path_length(d, o.depot, &path) <= o.max_length + 1e-9);
    Ant {
        plan: Plan::Path(path),
        used,
        objective,
    }
}

fn mkp_ant(k: &KnapsackInstance, w: &[f64], rng: &mut ChaCha8Rng) -> Ant {
    let n = k.n();
    let mut load = [0.0; MKP_DIMS];
    let mut taken = vec![false; n];
    let mut items = Vec::new();
    loop {
        let candidates: Vec<usize> = (0..n)
            .filter(|&j| !taken[j] && (0..MKP_DIMS).all(|m| load[m] + k.weights[j][m] <= k.capacities[m]))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let j = sample(w, &candidates, rng);
        taken[j] = true;
        for (m, l) in load.iter_mut().enumerate() {
            *l += k.weights[j][m];
        }
        items.push(j);
    }
    let used = items.iter().map(|&j| (0, j)).collect();
    let objective = items.iter().map(|&j| k.values[j]).sum();
    Ant {
        plan: Plan::Items(items),
        used,
        objective,
    }
}

pub fn aco_solve(
    domain: Domain,
    instance: &Instance,
    eta: &Desirability,
    config: &AcoConfig,
) -> Result<AcoRun, SolveError> {
    if domain.backbone() != Backbone::Aco {
        return Err(SolveError::NotAco(domain));
    }
    let wrong = || SolveError::WrongInstance {
        id: instance.id().to_string(),
        domain,
    };
    let n = instance.n();
    let (rows, normalizer) = match (domain, instance) {
        (Domain::TspAco, Instance::Euclidean(_)) | (Domain::CvrpAco, Instance::Routing(_)) => (n, 1.0),
        (Domain::OpAco, Instance::Orienteering(o)) => (n, o.total_prize()),
        (Domain::MkpAco, Instance::Knapsack(k)) => (1, k.total_value()),
        _ => return Err(wrong()),
    };
    let expected = rows * n;
    if eta.values.len() != expected {
        return Err(SolveError::EtaShape {
            got: eta.values.len(),
            expected,
        });
    }
    let dist = instance.coords().map(crate::instancegen::DistanceMatrix::from_coords);
    let direction = domain.direction();

    let mut tau = vec![1.0; expected];
    let mut w = vec![0.0; expected];
    let mut best: Option<(f64, Plan)> = None;
    let mut trace = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        for (wi, (&t, &e)) in w.iter_mut().zip(tau.iter().zip(&eta.values)) {
            *wi = weight(t, e, config.alpha, config.beta);
        }
        let ants: Vec<Ant> = (0..config.ants)
            .map(|a| {
                let mut rng = ant_rng(config.seed, it, a);
                match instance {
                    Instance::Euclidean(_) => tsp_ant(n, &w, dist.as_ref().unwrap(), &mut rng),
                    Instance::Routing(r) => cvrp_ant(r, &w, dist.as_ref().unwrap(), &mut rng),
                    Instance::Orienteering(o) => op_ant(o, &w, dist.as_ref().unwrap(), &mut rng),
                    Instance::Knapsack(k) => mkp_ant(k, &w, &mut rng),
                }
            })
            .collect();

        for t in tau.iter_mut() {
            *t *= config.decay;
        }
        for ant in &ants {
            let delta = deposit_amount(domain, ant.objective, normalizer);
            if delta.is_finite() {
                for &(i, j) in &ant.used {
                    tau[i * n + j] += delta;
                }
            }
        }
        for ant in ants {
            if best.as_ref().is_none_or(|(b, _)| direction.better(ant.objective, *b)) {
                best = Some((ant.objective, ant.plan));
            }
        }
        trace.push(best.as_ref().unwrap().0);
    }

    let (objective, plan) = best.expect("at least one iteration");
    Ok(AcoRun {
        best: Solution {
            domain,
            plan,
            objective,
            feasible: true,
        },
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate, Role};
    use crate::solvers::evaluate_plan;

    fn inverse_distance(inst: &Instance) -> Desirability {
        let d = crate::instancegen::DistanceMatrix::from_coords(inst.coords().unwrap());
        let n = d.len();
        let values = (0..n * n)
            .map(|k| if k / n == k % n { 1e-10 } else { 1.0 / d.get(k / n, k % n) })
            .collect();
        Desirability { n, values, clamped: 0 }
    }

    #[test]
    fn defaults_per_domain() {
        let t = aco_defaults(Domain::TspAco).unwrap();
        assert_eq!((t.ants, t.iterations, t.decay, t.alpha, t.beta), (30, 100, 0.9, 1.0, 1.0));
        let c = aco_defaults(Domain::CvrpAco).unwrap();
        assert_eq!((c.ants, c.iterations), (30, 100));
        let o = aco_defaults(Domain::OpAco).unwrap();
        assert_eq!((o.ants, o.iterations, o.decay), (20, 50, 0.9));
        let m = aco_defaults(Domain::MkpAco).unwrap();
        assert_eq!((m.ants, m.iterations, m.decay), (10, 50, 0.9));
        assert!(aco_defaults(Domain::TspC).is_err());
    }

    #[test]
    fn transition_probability_examples() {
        let (p, deg) = aco_transition_probs(&[1.0; 3], &[2.0, 1.0, 1.0], &[true; 3], 1.0, 1.0);
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
        assert!(!deg);
        let (p, _) = aco_transition_probs(&[3.0, 1.0, 7.0], &[2.0, 5.0, 1.0], &[true; 3], 0.0, 0.0);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let (p, _) = aco_transition_probs(&[1.0; 3], &[2.0, 1.0, 1.0], &[true, false, true], 1.0, 1.0);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let (p, deg) = aco_transition_probs(&[1.0; 3], &[0.0; 3], &[true, true, false], 1.0, 1.0);
        assert!(deg);
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn cvrp_mask_examples() {
        let demands = [0, 2, 5, 9];
        let served = [false; 4];
        let s = CvrpAntState {
            current: 3,
            depot: 0,
            remaining: 3,
            demands: &demands,
            served: &served,
        };
        assert_eq!(construct_cvrp_aco_step_mask(&s), vec![1, 0]);
        let s = CvrpAntState { remaining: 0, ..s };
        assert_eq!(construct_cvrp_aco_step_mask(&s), vec![0]);
        let all = [true; 4];
        let s = CvrpAntState {
            current: 0,
            served: &all,
            ..s
        };
        assert!(construct_cvrp_aco_step_mask(&s).is_empty());
    }

    #[test]
    fn mkp_deposit_rule() {
        assert!((deposit_amount(Domain::MkpAco, 10.0, 50.0) - 0.2).abs() < 1e-15);
        assert_eq!(deposit_amount(Domain::TspAco, 4.0, 1.0), 0.25);
    }

    #[test]
    fn all_domains_produce_feasible_solutions_and_monotone_traces() {
        for domain in [Domain::TspAco, Domain::CvrpAco, Domain::OpAco, Domain::MkpAco] {
            let ds = generate(domain, Role::Design, 12, 2, 9).unwrap();
            for inst in &ds.instances {
                let eta = match inst {
                    Instance::Knapsack(k) => Desirability {
                        n: k.n(),
                        values: k.values.clone(),
                        clamped: 0,
                    },
                    other => inverse_distance(other),
                };
                let cfg = AcoConfig {
                    iterations: 15,
                    ..aco_defaults(domain).unwrap()
                };
                let run = aco_solve(domain, inst, &eta, &cfg).unwrap();
                let obj = evaluate_plan(domain, inst, &run.best.plan).unwrap();
                assert!((obj - run.best.objective).abs() < 1e-9, "{domain}");
                for w in run.trace.windows(2) {
                    match domain.direction() {
                        Direction::Minimize => assert!(w[1] <= w[0]),
                        Direction::Maximize => assert!(w[1] >= w[0]),
                    }
                }
            }
        }
    }

    #[test]
    fn eta_shape_is_checked() {
        let ds = generate(Domain::TspAco, Role::Design, 5, 1, 1).unwrap();
        let eta = Desirability {
            n: 5,
            values: vec![1.0; 20],
            clamped: 0,
        };
        let cfg = aco_defaults(Domain::TspAco).unwrap();
        assert!(matches!(
            aco_solve(Domain::TspAco, &ds.instances[0], &eta, &cfg),
            Err(SolveError::EtaShape { .. })
        ));
    }
}
