//! Per-instance features and the instance-analysis tool.

use super::spatial::{
    cluster_structure, coefficient_of_variation, demand_pattern, density_and_hull, mean, nn_statistics, std_dev,
};
use super::DiagnosticError;
use crate::instancegen::{DesignSet, Instance, KnapsackInstance, MKP_DIMS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFeatureSummary {
    pub nn_cv: f64,
    pub nn_mean_normalized: f64,
    pub n_clusters: usize,
    pub silhouette: Option<f64>,
    pub density_cv: f64,
    pub hull_fraction: f64,
    pub hull_area_ratio: f64,
    pub demand_cv: Option<f64>,
    pub demand_morans_i: Option<f64>,
    /// Degenerate-input notes, e.g. `morans_i_undefined`.
    pub flags: Vec<String>,
}

/// Features of a knapsack instance, which has no spatial layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackFeatures {
    pub n_items: usize,
    pub value_cv: f64,
    pub weight_cv: f64,
    /// Capacity over total item weight, averaged over constraints.
    pub tightness: f64,
    /// Pearson correlation between value and mean weight.
    pub value_weight_corr: f64,
    /// Mean Pearson correlation between pairs of weight columns.
    pub constraint_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFeatures {
    Spatial(InstanceFeatureSummary),
    Knapsack(KnapsackFeatures),
}

impl InstanceFeatures {
    /// Named numeric metrics in a fixed order; absent values are `None`.
    pub fn metrics(&self) -> Vec<(&'static str, Option<f64>)> {
        match self {
            InstanceFeatures::Spatial(s) => vec![
                ("nn_cv", Some(s.nn_cv)),
                ("nn_mean_normalized", Some(s.nn_mean_normalized)),
                ("n_clusters", Some(s.n_clusters as f64)),
                ("silhouette", s.silhouette),
                ("density_cv", Some(s.density_cv)),
                ("hull_fraction", Some(s.hull_fraction)),
                ("hull_area_ratio", Some(s.hull_area_ratio)),
                ("demand_cv", s.demand_cv),
                ("demand_morans_i", s.demand_morans_i),
            ],
            InstanceFeatures::Knapsack(k) => vec![
                ("n_items", Some(k.n_items as f64)),
                ("value_cv", Some(k.value_cv)),
                ("weight_cv", Some(k.weight_cv)),
                ("tightness", Some(k.tightness)),
                ("value_weight_corr", Some(k.value_weight_corr)),
                ("constraint_corr", Some(k.constraint_corr)),
            ],
        }
    }
}

/// Spatial features of a layout. `demands` are per-node demands with the
/// depot excluded from the demand statistics.
pub fn spatial_features(coords: &[[f64; 2]], demands: Option<(&[u32], usize)>) -> InstanceFeatureSummary {
    let mut flags = Vec::new();
    let nn = nn_statistics(coords);
    if nn.degenerate {
        flags.push("nn_degenerate".to_string());
    }
    let cl = cluster_structure(coords);
    if cl.degenerate {
        flags.push("clusters_degenerate".to_string());
    }
    let dh = density_and_hull(coords);
    if dh.collinear {
        flags.push("hull_collinear".to_string());
    }
    let (demand_cv, demand_morans_i) = match demands {
        Some((d, depot)) => {
            let customers: Vec<usize> = (0..coords.len()).filter(|&i| i != depot).collect();
            let pts: Vec<[f64; 2]> = customers.iter().map(|&i| coords[i]).collect();
            let vals: Vec<f64> = customers.iter().map(|&i| d[i] as f64).collect();
            let p = demand_pattern(&pts, &vals);
            if p.morans_undefined {
                flags.push("morans_i_undefined".to_string());
            }
            (Some(p.demand_cv), Some(p.morans_i))
        }
        None => (None, None),
    };
    InstanceFeatureSummary {
        nn_cv: nn.nn_cv,
        nn_mean_normalized: nn.nn_mean_normalized,
        n_clusters: cl.n_clusters,
        silhouette: cl.silhouette,
        density_cv: dh.density_cv,
        hull_fraction: dh.hull_fraction,
        hull_area_ratio: dh.hull_area_ratio,
        demand_cv,
        demand_morans_i,
        flags,
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

pub fn knapsack_features(k: &KnapsackInstance) -> KnapsackFeatures {
    let all_w: Vec<f64> = k.weights.iter().flat_map(|w| w.iter().copied()).collect();
    let cols: Vec<Vec<f64>> = (0..MKP_DIMS).map(|m| k.weights.iter().map(|w| w[m]).collect()).collect();
    let tightness = mean(
        &(0..MKP_DIMS)
            .map(|m| {
                let total: f64 = cols[m].iter().sum();
                if total > 0.0 { k.capacities[m] / total } else { 0.0 }
            })
            .collect::<Vec<_>>(),
    );
    let mean_w: Vec<f64> = k.weights.iter().map(|w| mean(w)).collect();
    let mut pairs = Vec::new();
    for a in 0..MKP_DIMS {
        for b in a + 1..MKP_DIMS {
            pairs.push(pearson(&cols[a], &cols[b]));
        }
    }
    KnapsackFeatures {
        n_items: k.n(),
        value_cv: coefficient_of_variation(&k.values).unwrap_or(0.0),
        weight_cv: coefficient_of_variation(&all_w).unwrap_or(0.0),
        tightness,
        value_weight_corr: pearson(&k.values, &mean_w),
        constraint_corr: mean(&pairs),
    }
}

pub fn instance_features(instance: &Instance) -> InstanceFeatures {
    match instance {
        Instance::Euclidean(e) => InstanceFeatures::Spatial(spatial_features(&e.coords, None)),
        Instance::Routing(r) => {
            InstanceFeatures::Spatial(spatial_features(&r.base.coords, Some((&r.demands, r.depot))))
        }
        Instance::Orienteering(o) => InstanceFeatures::Spatial(spatial_features(&o.base.coords, None)),
        Instance::Knapsack(k) => InstanceFeatures::Knapsack(knapsack_features(k)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "instance_id", rename_all = "snake_case")]
pub enum AnalysisScope {
    Summary,
    SingleInstance(String),
    ContrastivePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub name: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Instances where the metric is present.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGap {
    pub name: String,
    pub first: Option<f64>,
    pub second: Option<f64>,
    /// Absolute difference in standardized units.
    pub standardized_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum AnalysisResult {
    Summary {
        instances: usize,
        metrics: Vec<MetricStat>,
    },
    SingleInstance {
        instance_id: String,
        features: InstanceFeatures,
    },
    ContrastivePair {
        first: String,
        second: String,
        distance: f64,
        gaps: Vec<FeatureGap>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnalysis {
    pub text: String,
    pub result: AnalysisResult,
}

/// Features of every design instance, in dataset order.
pub fn design_features(design: &DesignSet) -> Vec<InstanceFeatures> {
    design.instances.par_iter().map(instance_features).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Gaps reported for a contrastive pair.
const TOP_GAPS: usize = 3;

pub fn analyze_instances(design: &DesignSet, scope: &AnalysisScope) -> Result<InstanceAnalysis, DiagnosticError> {
    let mut text = String::new();
    let result = match scope {
        AnalysisScope::SingleInstance(id) => {
            let inst = design
                .instance(id)
                .ok_or_else(|| DiagnosticError::UnknownInstance(id.clone()))?;
            let features = instance_features(inst);
            writeln!(text, "Instance {id} ({} nodes):", inst.n()).unwrap();
            for (name, v) in features.metrics() {
                writeln!(text, "  {name}: {}", fmt_opt(v)).unwrap();
            }
            if let InstanceFeatures::Spatial(s) = &features {
                if !s.flags.is_empty() {
                    writeln!(text, "  flags: {}", s.flags.join(", ")).unwrap();
                }
            }
            AnalysisResult::SingleInstance {
                instance_id: id.clone(),
                features,
            }
        }
        AnalysisScope::Summary => {
            let feats = design_features(design);
            let metrics = summarize(&feats);
            writeln!(text, "Design set: {} instances of {}.", feats.len(), design.domain.display_name()).unwrap();
            writeln!(text, "metric: mean [min, max]").unwrap();
            for m in &metrics {
                writeln!(text, "  {}: {:.4} [{:.4}, {:.4}]", m.name, m.mean, m.min, m.max).unwrap();
            }
            AnalysisResult::Summary {
                instances: feats.len(),
                metrics,
            }
        }
        AnalysisScope::ContrastivePair => {
            if design.len() < 2 {
                return Err(DiagnosticError::InvalidArgument(
                    "contrastive_pair needs at least two design instances".into(),
                ));
            }
            let feats = design_features(design);
            let z = standardize(&feats);
            let (mut bi, mut bj, mut best) = (0, 1, f64::NEG_INFINITY);
            for i in 0..z.len() {
                for j in i + 1..z.len() {
                    let d: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if d > best {
                        (bi, bj, best) = (i, j, d);
                    }
                }
            }
            let (mi, mj) = (feats[bi].metrics(), feats[bj].metrics());
            let mut gaps: Vec<FeatureGap> = mi
                .iter()
                .zip(&mj)
                .enumerate()
                .map(|(k, ((name, a), (_, b)))| FeatureGap {
                    name: name.to_string(),
                    first: *a,
                    second: *b,
                    standardized_gap: (z[bi][k] - z[bj][k]).abs(),
                })
                .collect();
            gaps.sort_by(|a, b| b.standardized_gap.total_cmp(&a.standardized_gap));
            gaps.truncate(TOP_GAPS);
            let (first, second) = (design.instances[bi].id().to_string(), design.instances[bj].id().to_string());
            writeln!(text, "Most dissimilar pair: {first} vs {second} (standardized distance {best:.3}).").unwrap();
            for g in &gaps {
                writeln!(
                    text,
                    "  {}: {} vs {} ({:.2} sd)",
                    g.name,
                    fmt_opt(g.first),
                    fmt_opt(g.second),
                    g.standardized_gap
                )
                .unwrap();
            }
            AnalysisResult::ContrastivePair {
                first,
                second,
                distance: best,
                gaps,
            }
        }
    };
    Ok(InstanceAnalysis { text, result })
}

pub fn summarize(feats: &[InstanceFeatures]) -> Vec<MetricStat> {
    let Some(first) = feats.first() else {
        return Vec::new();
    };
    let names: Vec<&str> = first.metrics().iter().map(|(n, _)| *n).collect();
    let table: Vec<Vec<Option<f64>>> = feats.iter().map(|f| f.metrics().into_iter().map(|(_, v)| v).collect()).collect();
    names
        .iter()
        .enumerate()
        .filter_map(|(k, name)| {
            let vals: Vec<f64> = table.iter().filter_map(|row| row[k]).collect();
            (!vals.is_empty()).then(|| MetricStat {
                name: name.to_string(),
                mean: mean(&vals),
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                count: vals.len(),
            })
        })
        .collect()
}

/// Z-scores per metric over the set; absent values and constant metrics map to 0.
fn standardize(feats: &[InstanceFeatures]) -> Vec<Vec<f64>> {
    let table: Vec<Vec<Option<f64>>> = feats.iter().map(|f| f.metrics().into_iter().map(|(_, v)| v).collect()).collect();
    let width = table[0].len();
    let mut out = vec![vec![0.0; width]; table.len()];
    for k in 0..width {
        let vals: Vec<f64> = table.iter().filter_map(|row| row[k]).collect();
        if vals.is_empty() {
            continue;
        }
        let (m, s) = (mean(&vals), std_dev(&vals));
        for (row, o) in table.iter().zip(out.iter_mut()) {
            if let (Some(v), true) = (row[k], s > 0.0) {
                o[k] = (v - m) / s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::instancegen::{generate, Role};

    fn design(domain: Domain, n: usize, count: usize) -> DesignSet {
        DesignSet::new(generate(domain, Role::Design, n, count, 1).unwrap()).unwrap()
    }

    #[test]
    fn summary_covers_every_metric() {
        let d = design(Domain::CvrpC, 50, 6);
        let a = analyze_instances(&d, &AnalysisScope::Summary).unwrap();
        let AnalysisResult::Summary { instances, metrics } = a.result else {
            panic!("wrong scope");
        };
        assert_eq!(instances, 6);
        let names: Vec<&str> = metrics.iter().map(|m| m.name.as_str()).collect();
        for want in ["nn_cv", "density_cv", "hull_fraction", "demand_cv", "demand_morans_i"] {
            assert!(names.contains(&want), "{want}");
        }
        for m in &metrics {
            assert!(m.min <= m.mean && m.mean <= m.max);
        }
        assert!(a.text.contains("demand_morans_i"));
    }

    #[test]
    fn demand_fields_only_for_demand_domains() {
        let d = design(Domain::TspC, 20, 2);
        let InstanceFeatures::Spatial(s) = instance_features(&d.instances[0]) else {
            panic!()
        };
        assert!(s.demand_cv.is_none() && s.demand_morans_i.is_none());
    }

    #[test]
    fn single_instance_and_unknown_id() {
        let d = design(Domain::OpAco, 20, 3);
        let id = d.instances[2].id().to_string();
        let a = analyze_instances(&d, &AnalysisScope::SingleInstance(id.clone())).unwrap();
        assert!(matches!(a.result, AnalysisResult::SingleInstance { instance_id, .. } if instance_id == id));
        assert!(matches!(
            analyze_instances(&d, &AnalysisScope::SingleInstance("nope".into())),
            Err(DiagnosticError::UnknownInstance(_))
        ));
    }

    #[test]
    fn contrastive_pair_is_the_farthest() {
        let d = design(Domain::TspC, 30, 5);
        let a = analyze_instances(&d, &AnalysisScope::ContrastivePair).unwrap();
        let AnalysisResult::ContrastivePair { distance, gaps, first, second } = a.result else {
            panic!()
        };
        assert_ne!(first, second);
        assert_eq!(gaps.len(), TOP_GAPS);
        assert!(gaps.windows(2).all(|w| w[0].standardized_gap >= w[1].standardized_gap));
        let z = standardize(&design_features(&d));
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                let dd: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!(dd <= distance + 1e-12);
            }
        }
    }

    #[test]
    fn knapsack_features_are_reported() {
        let d = design(Domain::MkpAco, 30, 3);
        let a = analyze_instances(&d, &AnalysisScope::Summary).unwrap();
        assert!(a.text.contains("tightness"));
        let InstanceFeatures::Knapsack(k) = instance_features(&d.instances[0]) else {
            panic!()
        };
        assert_eq!(k.n_items, 30);
        assert!(k.tightness > 0.0 && k.tightness < 1.0);
    }
}
