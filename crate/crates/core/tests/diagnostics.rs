mod common;

use ahd_core::diagnostics::{
    ast_novelty, combined_similarity, demand_pattern, density_and_hull, nn_statistics, spatial_features,
    tree_similarity, InstanceFeatureSummary, MORAN_NEIGHBORS,
};
use ahd_core::instancegen::Instance;
use ahd_core::programhost::parse_tree;
use ahd_core::Domain;
use common::*;

#[test]
fn identical_programs_have_full_similarity() {
    let t = parse_tree(NEAREST).unwrap();
    let s = tree_similarity(&t, &t);
    assert_eq!((s.raw_sim, s.shape_sim, s.node_sim, s.combined), (1.0, 1.0, 1.0, 1.0));
    let r = ast_novelty(&[(1, NEAREST)], NEAREST, 3, 0.15).unwrap();
    assert_eq!(r.novelty, 0.0);
}

#[test]
fn combined_weights() {
    assert!((combined_similarity(0.8, 1.0, 1.0) - 0.95).abs() < 1e-12);
    assert_eq!(combined_similarity(0.0, 0.0, 0.0), 0.0);
}

#[test]
fn renaming_keeps_shape() {
    let s = tree_similarity(&parse_tree(NEAREST).unwrap(), &parse_tree(RENAMED_NEAREST).unwrap());
    assert_eq!(s.shape_sim, 1.0);
    assert_eq!(s.node_sim, 1.0);
    assert!(s.raw_sim < 1.0);
    assert!(s.combined >= 0.75);
}

#[test]
fn empty_history_is_fully_novel() {
    let r = ast_novelty(&[], NEAREST, 3, 0.15).unwrap();
    assert_eq!(r.novelty, 1.0);
    assert!(r.matches.is_empty());
}

#[test]
fn unparsable_history_is_skipped() {
    let r = ast_novelty(&[(1, "fn broken( {"), (2, NEAREST)], RENAMED_NEAREST, 3, 0.15).unwrap();
    assert_eq!(r.skipped, vec![1]);
    assert_eq!(r.matches.len(), 1);
}

#[test]
fn regular_grid_has_uniform_spacing() {
    assert!(nn_statistics(&grid(10)).nn_cv < 0.01);
}

#[test]
fn hull_fractions() {
    let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    assert_eq!(density_and_hull(&square).hull_fraction, 1.0);
    let mut with_centre = square.to_vec();
    with_centre.push([0.5, 0.5]);
    assert_eq!(density_and_hull(&with_centre).hull_fraction, 0.8);
}

#[test]
fn constant_demands_leave_morans_i_undefined() {
    let pts = grid(4);
    let p = demand_pattern(&pts, &vec![7.0; pts.len()]);
    assert!(p.morans_undefined);
    assert_eq!(p.demand_cv, 0.0);
    let mut d = vec![3u32; pts.len()];
    d[0] = 0;
    let f = spatial_features(&pts, Some((&d, 0)));
    assert!(f.flags.iter().any(|x| x == "morans_i_undefined"));
}

#[test]
fn two_blocks_are_positively_autocorrelated() {
    let (pts, demands) = two_block_fixture();
    let p = demand_pattern(&pts, &demands);
    let reference = reference_morans_i(&pts, &demands, MORAN_NEIGHBORS);
    assert!((p.morans_i - reference).abs() < 1e-12, "{} vs {reference}", p.morans_i);
    assert!(p.morans_i > 0.3);
}

fn ratio_stats(f: &InstanceFeatureSummary) -> Vec<f64> {
    vec![
        f.nn_cv,
        f.n_clusters as f64,
        f.silhouette.unwrap_or(f64::NAN),
        f.density_cv,
        f.hull_fraction,
        f.hull_area_ratio,
        f.demand_cv.unwrap(),
        f.demand_morans_i.unwrap(),
    ]
}

#[test]
fn ratio_statistics_ignore_scale() {
    let ds = dataset(Domain::CvrpC, 40, 3, 5);
    for inst in &ds.instances {
        let Instance::Routing(r) = inst else { panic!() };
        let base = ratio_stats(&spatial_features(&r.base.coords, Some((&r.demands, r.depot))));
        for c in [0.001, 3.0, 250.0] {
            let scaled: Vec<[f64; 2]> = r.base.coords.iter().map(|p| [p[0] * c, p[1] * c]).collect();
            let s = ratio_stats(&spatial_features(&scaled, Some((&r.demands, r.depot))));
            for (a, b) in base.iter().zip(&s) {
                assert!(a == b || (a - b).abs() < 1e-9 || (a.is_nan() && b.is_nan()), "{base:?} vs {s:?}");
            }
        }
    }
}
