//! Structural similarity of a candidate program to earlier attempts.

use crate::programhost::{parse_tree, NodeCategory, ProgramError, SyntaxTree, TreeSummary};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const RAW_WEIGHT: f64 = 0.25;
pub const SHAPE_WEIGHT: f64 = 0.50;
pub const NODE_WEIGHT: f64 = 0.25;
pub const DEFAULT_TOP_K: usize = 3;
/// Below this novelty the hint suggests revising before evaluation.
pub const DEFAULT_HINT_THRESHOLD: f64 = 0.15;

/// Matching-blocks similarity `2M / (len_a + len_b)`, where `M` is the total
/// size of the blocks found by recursively taking the longest common run.
/// Two empty sequences are identical.
pub fn sequence_ratio<T: Eq + std::hash::Hash>(a: &[T], b: &[T]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * matched_elements(a, b) as f64 / total as f64
}

fn matched_elements<T: Eq + std::hash::Hash>(a: &[T], b: &[T]) -> usize {
    let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, x) in b.iter().enumerate() {
        b2j.entry(x).or_default().push(j);
    }
    let mut matched = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        let (i, j, k) = longest_match(a, &b2j, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        matched += k;
        if alo < i && blo < j {
            stack.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            stack.push((i + k, ahi, j + k, bhi));
        }
    }
    matched
}

/// Longest common run within `a[alo..ahi]` and `b[blo..bhi]`; ties go to the
/// earliest start in `a`, then in `b`.
fn longest_match<T: Eq + std::hash::Hash>(
    a: &[T],
    b2j: &HashMap<&T, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut besti, mut bestj, mut bestk) = (alo, blo, 0);
    let mut run: HashMap<usize, usize> = HashMap::new();
    for (i, x) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut next = HashMap::new();
        if let Some(js) = b2j.get(x) {
            for &j in js {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = if j > 0 { run.get(&(j - 1)).copied().unwrap_or(0) } else { 0 } + 1;
                next.insert(j, k);
                if k > bestk {
                    (besti, bestj, bestk) = (i + 1 - k, j + 1 - k, k);
                }
            }
        }
        run = next;
    }
    (besti, bestj, bestk)
}

/// Cosine similarity of node-category count vectors.
pub fn node_similarity(a: &SyntaxTree, b: &SyntaxTree) -> f64 {
    let (ca, cb) = (a.category_counts(), b.category_counts());
    // exact for equal profiles, where the float quotient can round below 1
    if ca == cb {
        return 1.0;
    }
    let get = |m: &std::collections::BTreeMap<NodeCategory, usize>, c| *m.get(&c).unwrap_or(&0) as f64;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for c in NodeCategory::ALL {
        let (x, y) = (get(&ca, c), get(&cb, c));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 && nb == 0.0 {
        1.0
    } else if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
    }
}

pub fn combined_similarity(raw: f64, shape: f64, node: f64) -> f64 {
    RAW_WEIGHT * raw + SHAPE_WEIGHT * shape + NODE_WEIGHT * node
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub raw_sim: f64,
    pub shape_sim: f64,
    pub node_sim: f64,
    pub combined: f64,
}

pub fn tree_similarity(a: &SyntaxTree, b: &SyntaxTree) -> Similarity {
    let raw_sim = sequence_ratio(&a.raw_tokens(), &b.raw_tokens());
    let shape_sim = sequence_ratio(&a.shape_tokens(), &b.shape_tokens());
    let node_sim = node_similarity(a, b);
    Similarity {
        raw_sim,
        shape_sim,
        node_sim,
        combined: combined_similarity(raw_sim, shape_sim, node_sim),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyMatch {
    pub attempt_id: u64,
    #[serde(flatten)]
    pub similarity: Similarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNoveltyReport {
    /// Closest prior attempts, most similar first.
    pub matches: Vec<NoveltyMatch>,
    pub novelty: f64,
    pub candidate_summary: TreeSummary,
    pub hint: String,
    /// Prior attempts that could not be parsed and were skipped.
    pub skipped: Vec<u64>,
}

impl AstNoveltyReport {
    pub fn text(&self) -> String {
        let s = &self.candidate_summary;
        let mut out = format!(
            "Novelty {:.3}. Candidate: {} nodes, {} branches, {} loops, {} constants, {} calls.\n",
            self.novelty, s.nodes, s.branches, s.loops, s.constants, s.calls
        );
        for m in &self.matches {
            let sim = m.similarity;
            out.push_str(&format!(
                "  attempt {}: s={:.3} (raw {:.3}, shape {:.3}, node {:.3})\n",
                m.attempt_id, sim.combined, sim.raw_sim, sim.shape_sim, sim.node_sim
            ));
        }
        out.push_str(&self.hint);
        out.push('\n');
        out
    }
}

pub fn novelty_hint(novelty: f64, threshold: f64, history_len: usize) -> String {
    if history_len == 0 {
        "No prior attempts; structurally novel; evaluation reasonable.".to_string()
    } else if novelty < threshold {
        "Close to an earlier attempt; revise before evaluating.".to_string()
    } else {
        "Structurally novel; evaluation reasonable.".to_string()
    }
}

/// Compares `candidate` against every prior attempt `(id, source)`.
pub fn ast_novelty(
    history: &[(u64, &str)],
    candidate: &str,
    top_k: usize,
    hint_threshold: f64,
) -> Result<AstNoveltyReport, ProgramError> {
    let cand = parse_tree(candidate)?;
    let mut matches = Vec::new();
    let mut skipped = Vec::new();
    for &(id, source) in history {
        match parse_tree(source) {
            Ok(prior) => matches.push(NoveltyMatch {
                attempt_id: id,
                similarity: tree_similarity(&cand, &prior),
            }),
            Err(_) => skipped.push(id),
        }
    }
    matches.sort_by(|a, b| {
        b.similarity
            .combined
            .total_cmp(&a.similarity.combined)
            .then(a.attempt_id.cmp(&b.attempt_id))
    });
    let novelty = match matches.first() {
        Some(m) => (1.0 - m.similarity.combined).clamp(0.0, 1.0),
        None => 1.0,
    };
    let compared = matches.len();
    matches.truncate(top_k);
    Ok(AstNoveltyReport {
        matches,
        novelty,
        candidate_summary: cand.summary(),
        hint: novelty_hint(novelty, hint_threshold, compared),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "fn heuristic(d) { let n = d.len(); let e = zeros(n, n); for i in 0..n { e[i][i] = 1.0; } e }";
    const A_RENAMED: &str =
        "fn heuristic(dist) { let size = dist.len(); let out = zeros(size, size); for k in 0..size { out[k][k] = 7.5; } out }";
    const B: &str = "fn select_next_node(c, d, u, m) { if u.len() > 2 { return u[1]; } while false {} u[0] }";

    #[test]
    fn ratio_examples() {
        let a: Vec<char> = "abcd".chars().collect();
        let b: Vec<char> = "bcde".chars().collect();
        assert_eq!(sequence_ratio(&a, &b), 0.75);
        assert_eq!(sequence_ratio::<char>(&[], &[]), 1.0);
        assert_eq!(sequence_ratio(&a, &[]), 0.0);
        // recursion finds blocks on both sides of the longest run
        let x: Vec<char> = "qabxcd".chars().collect();
        let y: Vec<char> = "abycdq".chars().collect();
        assert_eq!(matched_elements(&x, &y), 4);
    }

    #[test]
    fn weights_reproduce_reference_value() {
        assert!((combined_similarity(0.8, 1.0, 1.0) - 0.95).abs() < 1e-12);
        assert_eq!(combined_similarity(1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn identical_and_empty_history() {
        let r = ast_novelty(&[(1, A)], A, 3, DEFAULT_HINT_THRESHOLD).unwrap();
        assert_eq!(r.matches[0].similarity.combined, 1.0);
        assert_eq!(r.novelty, 0.0);
        assert!(r.hint.contains("revise"));
        let r = ast_novelty(&[], A, 3, DEFAULT_HINT_THRESHOLD).unwrap();
        assert_eq!(r.novelty, 1.0);
        assert!(r.matches.is_empty());
    }

    #[test]
    fn rename_only_keeps_shape() {
        let r = ast_novelty(&[(4, A)], A_RENAMED, 3, DEFAULT_HINT_THRESHOLD).unwrap();
        let s = r.matches[0].similarity;
        assert_eq!(s.shape_sim, 1.0);
        assert_eq!(s.node_sim, 1.0);
        assert!(s.raw_sim < 1.0);
        assert!(s.combined >= 0.75);
    }

    #[test]
    fn matches_sorted_and_truncated() {
        let hist = [(1, B), (2, A), (3, "not valid ((("), (4, A_RENAMED)];
        let r = ast_novelty(&hist, A, 2, DEFAULT_HINT_THRESHOLD).unwrap();
        assert_eq!(r.matches.len(), 2);
        assert_eq!(r.matches[0].attempt_id, 2);
        assert_eq!(r.matches[1].attempt_id, 4);
        assert_eq!(r.skipped, vec![3]);
        assert!(ast_novelty(&hist, "fn (", 2, 0.15).is_err());
    }

    #[test]
    fn similarity_is_nearly_symmetric_and_bounded() {
        let progs = [A, A_RENAMED, B];
        for x in progs {
            for y in progs {
                let (tx, ty) = (parse_tree(x).unwrap(), parse_tree(y).unwrap());
                let (s1, s2) = (tree_similarity(&tx, &ty), tree_similarity(&ty, &tx));
                for v in [s1.raw_sim, s1.shape_sim, s1.node_sim, s1.combined] {
                    assert!((0.0..=1.0).contains(&v));
                }
                assert!((s1.combined - s2.combined).abs() <= 0.02);
            }
        }
    }
}
