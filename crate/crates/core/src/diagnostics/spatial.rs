//! Spatial point-pattern statistics of instance layouts.

use super::kdtree::KdTree;
use serde::{Deserialize, Serialize};

/// Minimum neighbourhood size (self included) for a density-core point.
pub const MIN_CLUSTER_NEIGHBORS: usize = 4;
/// Neighbours per node in the demand autocorrelation weights.
pub const MORAN_NEIGHBORS: usize = 5;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

/// std/mean, or `None` when the mean is zero.
pub(crate) fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    let m = mean(xs);
    (m != 0.0).then(|| std_dev(xs) / m.abs())
}

/// Percentile with linear interpolation between order statistics.
pub(crate) fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Distance from every point to its nearest other point.
pub fn nearest_neighbor_distances(coords: &[[f64; 2]]) -> Vec<f64> {
    let tree = KdTree::new(coords);
    (0..coords.len())
        .map(|i| tree.k_nearest(i, 1).first().map_or(0.0, |&(_, d)| d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnStats {
    pub nn_cv: f64,
    /// Mean NN distance over its expectation `0.5 / sqrt(n)` for a uniform
    /// layout on the unit square.
    pub nn_mean_normalized: f64,
    /// All points coincide; `nn_cv` is reported as 0.
    pub degenerate: bool,
}

pub fn nn_statistics(coords: &[[f64; 2]]) -> NnStats {
    assert!(coords.len() >= 2, "need at least two points");
    let d = nearest_neighbor_distances(coords);
    let m = mean(&d);
    let expected = 0.5 / (coords.len() as f64).sqrt();
    match coefficient_of_variation(&d) {
        Some(cv) => NnStats {
            nn_cv: cv,
            nn_mean_normalized: m / expected,
            degenerate: false,
        },
        None => NnStats {
            nn_cv: 0.0,
            nn_mean_normalized: 0.0,
            degenerate: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub n_clusters: usize,
    /// Mean silhouette of clustered points; present with two or more clusters.
    pub silhouette: Option<f64>,
    pub eps: f64,
    pub noise_points: usize,
    /// All points coincide.
    pub degenerate: bool,
}

/// Density clustering with radius `eps` (the 10th percentile of NN
/// distances). Returns per-point labels, `None` for noise.
pub fn density_clusters(coords: &[[f64; 2]], eps: f64) -> Vec<Option<usize>> {
    let n = coords.len();
    let tree = KdTree::new(coords);
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| tree.within(i, eps)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= MIN_CLUSTER_NEIGHBORS).collect();
    let mut labels = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

/// Mean silhouette over labelled points, `None` with fewer than two clusters.
pub fn silhouette(coords: &[[f64; 2]], labels: &[Option<usize>]) -> Option<f64> {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if k < 2 {
        return None;
    }
    let mut sizes = vec![0usize; k];
    for l in labels.iter().flatten() {
        sizes[*l] += 1;
    }
    let members: Vec<usize> = (0..coords.len()).filter(|&i| labels[i].is_some()).collect();
    let mut total = 0.0;
    for &i in &members {
        let li = labels[i].expect("labelled");
        let mut sums = vec![0.0; k];
        for &j in &members {
            if j != i {
                sums[labels[j].expect("labelled")] += super::dist(coords[i], coords[j]);
            }
        }
        // singleton clusters score 0
        if sizes[li] == 1 {
            continue;
        }
        let a = sums[li] / (sizes[li] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != li)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Some(total / members.len() as f64)
}

pub fn cluster_structure(coords: &[[f64; 2]]) -> ClusterStats {
    assert!(coords.len() >= 3, "need at least three points");
    let nn = nearest_neighbor_distances(coords);
    let eps = percentile(&nn, 10.0);
    let labels = density_clusters(coords, eps);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    ClusterStats {
        n_clusters,
        silhouette: silhouette(coords, &labels),
        eps,
        noise_points: labels.iter().filter(|l| l.is_none()).count(),
        degenerate: nn.iter().all(|&d| d == 0.0),
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Strict convex hull (collinear boundary points excluded), counter-clockwise.
pub fn convex_hull(coords: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = coords.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityHull {
    pub density_cv: f64,
    pub grid: usize,
    pub hull_fraction: f64,
    pub hull_area_ratio: f64,
    /// The layout has no area; `hull_area_ratio` is reported as 0.
    pub collinear: bool,
}

pub fn histogram_grid(n: usize) -> usize {
    (((n as f64).sqrt() / 2.0).floor() as usize).max(2)
}

pub fn density_and_hull(coords: &[[f64; 2]]) -> DensityHull {
    let n = coords.len();
    assert!(n >= 3, "need at least three points");
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in coords {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let g = histogram_grid(n);
    let bin = |v: f64, a: usize| -> usize {
        let w = hi[a] - lo[a];
        if w <= 0.0 {
            0
        } else {
            (((v - lo[a]) / w * g as f64).floor() as usize).min(g - 1)
        }
    };
    let mut counts = vec![0.0; g * g];
    for p in coords {
        counts[bin(p[0], 0) * g + bin(p[1], 1)] += 1.0;
    }
    let density_cv = coefficient_of_variation(&counts).unwrap_or(0.0);

    let hull = convex_hull(coords);
    let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let hull_area = if hull.len() >= 3 { polygon_area(&hull) } else { 0.0 };
    let collinear = hull_area <= 0.0 || box_area <= 0.0;
    DensityHull {
        density_cv,
        grid: g,
        hull_fraction: hull.len() as f64 / n as f64,
        hull_area_ratio: if collinear { 0.0 } else { hull_area / box_area },
        collinear,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandPattern {
    pub demand_cv: f64,
    pub morans_i: f64,
    /// Constant demands (or too few nodes): Moran's I is reported as 0.
    pub morans_undefined: bool,
}

/// Demand dispersion and spatial autocorrelation over customer nodes, with
/// binary weights linking each node to its `MORAN_NEIGHBORS` nearest others.
pub fn demand_pattern(coords: &[[f64; 2]], demands: &[f64]) -> DemandPattern {
    assert_eq!(coords.len(), demands.len());
    let n = coords.len();
    let demand_cv = coefficient_of_variation(demands).unwrap_or(0.0);
    let m = mean(demands);
    let z: Vec<f64> = demands.iter().map(|d| d - m).collect();
    let denom: f64 = z.iter().map(|v| v * v).sum();
    if n <= MORAN_NEIGHBORS || denom == 0.0 {
        return DemandPattern {
            demand_cv,
            morans_i: 0.0,
            morans_undefined: true,
        };
    }
    let tree = KdTree::new(coords);
    let mut cross_sum = 0.0;
    let mut weight_sum = 0.0;
    for i in 0..n {
        for (j, _) in tree.k_nearest(i, MORAN_NEIGHBORS) {
            cross_sum += z[i] * z[j];
            weight_sum += 1.0;
        }
    }
    DemandPattern {
        demand_cv,
        morans_i: n as f64 / weight_sum * cross_sum / denom,
        morans_undefined: false,
    }
}
