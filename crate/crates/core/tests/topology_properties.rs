use std::collections::BTreeSet;
use std::f64::consts::PI;

use proptest::prelude::*;

use knn_bandit::topology::{connected_components, hausdorff_distance, EpsilonGraph};
use knn_bandit::ContextPoint;

fn pts(raw: &[Vec<f64>]) -> Vec<ContextPoint> {
    raw.iter().map(|p| ContextPoint::new(p.clone()).unwrap()).collect()
}

fn planar(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 1..max)
}

/// Components as a set of sets of original indices.
fn partition(raw: &[Vec<f64>], r: f64) -> BTreeSet<BTreeSet<usize>> {
    let g = EpsilonGraph::build(&pts(raw), r).unwrap();
    let labels = g.component_labels();
    let count = labels.iter().max().map_or(0, |m| m + 1);
    (0..count)
        .map(|c| labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).collect())
        .collect()
}

/// Brute-force reachability oracle.
fn brute_partition(raw: &[Vec<f64>], r: f64) -> BTreeSet<BTreeSet<usize>> {
    let n = raw.len();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() <= r;
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            comp.insert(i);
            for j in 0..n {
                if !seen[j] && close(&raw[i], &raw[j]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.insert(comp);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn components_match_brute_force(raw in planar(60), r in 0.01..0.4f64) {
        prop_assert_eq!(partition(&raw, r), brute_partition(&raw, r));
    }

    #[test]
    fn permutation_only_relabels(raw in planar(50), r in 0.01..0.4f64) {
        let n = raw.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| raw[i].clone()).collect();
        let mapped: BTreeSet<BTreeSet<usize>> = partition(&shuffled, r)
            .into_iter()
            .map(|c| c.into_iter().map(|i| perm[i]).collect())
            .collect();
        prop_assert_eq!(mapped, partition(&raw, r));
    }

    #[test]
    fn count_is_nonincreasing_in_radius(raw in planar(60), r in 0.01..0.3f64, extra in 0.0..0.3f64) {
        let small = connected_components(&pts(&raw), r).unwrap().len();
        let large = connected_components(&pts(&raw), r + extra).unwrap().len();
        prop_assert!(large <= small);
        prop_assert!(small <= raw.len());
    }

    #[test]
    fn hausdorff_is_a_metric_on_finite_sets(a in planar(20), b in planar(20), c in planar(20)) {
        let (a, b, c) = (pts(&a), pts(&b), pts(&c));
        let ab = hausdorff_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff_distance(&b, &a).unwrap());
        prop_assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let ac = hausdorff_distance(&a, &c).unwrap();
        let cb = hausdorff_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}

fn disc(center: [f64; 2], radius: f64, rings: usize) -> Vec<Vec<f64>> {
    let mut out = vec![center.to_vec()];
    for ring in 1..=rings {
        let r = radius * ring as f64 / rings as f64;
        let m = 6 * ring;
        for i in 0..m {
            let a = 2.0 * PI * i as f64 / m as f64;
            out.push(vec![center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    out
}

#[test]
fn two_separated_discs() {
    let mut raw = disc([0.25, 0.5], 0.1, 10);
    let left = raw.len();
    raw.extend(disc([0.75, 0.5], 0.1, 10));
    // Ring spacing 0.01, gap between discs 0.3.
    let est = connected_components(&pts(&raw), 0.02).unwrap();
    assert_eq!(est.len(), 2);
    assert_eq!(est.components[0].len(), left);
    assert_eq!(connected_components(&pts(&raw), 0.31).unwrap().len(), 1);
    let d = hausdorff_distance(&est.components[0], &est.components[1]).unwrap();
    assert!((d - 0.5).abs() < 1e-12, "{d}");
}
