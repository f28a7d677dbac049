//! 2-means clustering of the root training set, majority-based assignment
//! of class labels to the two clusters, and per-class SSE ordering.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

/// Outcome of a 2-means run: two centroids, a {0,1} assignment per
/// instance, and the total sum of squared distances to assigned centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: [Vec<f64>; 2],
    pub assignment: Vec<u8>,
    pub total_sse: f64,
}

/// A node's label set split into an ordered left (positive) and right
/// (negative) side, each sorted ascending by per-label SSE.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPartition {
    pub left_labels: Vec<i32>,
    pub right_labels: Vec<i32>,
    pub sse_by_label: BTreeMap<i32, f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations with farthest-pair seeding: the first centroid is a
/// point drawn under the seed, the second is the point farthest from it.
/// An emptied cluster is reseeded with the point farthest from the
/// surviving centroid.
pub fn kmeans2(points: &[Vec<f64>], seed: u64) -> Result<ClusterResult> {
    kmeans2_trace(points, seed, KMEANS_MAX_ITER, KMEANS_TOL).map(|(r, _)| r)
}

/// As [`kmeans2`], additionally returning the SSE after every Lloyd
/// iteration (non-increasing by construction).
pub fn kmeans2_trace(
    points: &[Vec<f64>],
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(ClusterResult, Vec<f64>)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "2-means needs at least 2 points".into(),
        ));
    }
    let first = &points[0];
    if points.iter().all(|p| p == first) {
        return Err(Error::DegenerateClustering);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a_idx = rng.gen_range(0..n);
    let mut c0 = points[a_idx].clone();
    let b_idx = farthest_from(points, &c0);
    let mut c1 = points[b_idx].clone();

    let mut assignment = vec![0u8; n];
    let mut sse_history = Vec::new();
    let mut total_sse = 0.0;

    for _ in 0..max_iter {
        // Assign to the nearer centroid; ties go to cluster 0.
        total_sse = 0.0;
        for (i, p) in points.iter().enumerate() {
            let d0 = sq_dist(p, &c0);
            let d1 = sq_dist(p, &c1);
            if d1 < d0 {
                assignment[i] = 1;
                total_sse += d1;
            } else {
                assignment[i] = 0;
                total_sse += d0;
            }
        }

        // Repair an emptied cluster with the point farthest from the other.
        for cluster in [0u8, 1u8] {
            if assignment.iter().all(|&a| a != cluster) {
                let survivor = if cluster == 0 { &c1 } else { &c0 };
                let idx = farthest_from(points, survivor);
                let stolen = sq_dist(&points[idx], if cluster == 0 { &c0 } else { &c1 })
                    - sq_dist(&points[idx], survivor);
                assignment[idx] = cluster;
                total_sse += stolen;
            }
        }
        sse_history.push(total_sse);

        let next0 = mean_of(points, &assignment, 0);
        let next1 = mean_of(points, &assignment, 1);
        let movement = sq_dist(&next0, &c0).sqrt().max(sq_dist(&next1, &c1).sqrt());
        c0 = next0;
        c1 = next1;
        if movement < tol {
            break;
        }
    }

    // Final assignment against the settled centroids.
    total_sse = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d0 = sq_dist(p, &c0);
        let d1 = sq_dist(p, &c1);
        if d1 < d0 {
            assignment[i] = 1;
            total_sse += d1;
        } else {
            assignment[i] = 0;
            total_sse += d0;
        }
    }
    for cluster in [0u8, 1u8] {
        if assignment.iter().all(|&a| a != cluster) {
            let survivor = if cluster == 0 { &c1 } else { &c0 };
            let idx = farthest_from(points, survivor);
            total_sse += sq_dist(&points[idx], if cluster == 0 { &c0 } else { &c1 })
                - sq_dist(&points[idx], survivor);
            assignment[idx] = cluster;
        }
    }
    sse_history.push(total_sse);

    Ok((
        ClusterResult {
            centroids: [c0, c1],
            assignment,
            total_sse,
        },
        sse_history,
    ))
}

fn farthest_from(points: &[Vec<f64>], origin: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = sq_dist(p, origin);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>], assignment: &[u8], cluster: u8) -> Vec<f64> {
    let d = points[0].len();
    let mut sum = vec![0.0; d];
    let mut count = 0usize;
    for (p, &a) in points.iter().zip(assignment) {
        if a == cluster {
            for j in 0..d {
                sum[j] += p[j];
            }
            count += 1;
        }
    }
    if count > 0 {
        for s in sum.iter_mut() {
            *s /= count as f64;
        }
    }
    sum
}

/// Per-label sum of squared distances to one centroid, over the instances
/// of each label in `labels_in_node`.
pub fn per_class_sse(
    ds: &Dataset,
    labels_in_node: &[i32],
    centroid: &[f64],
) -> Result<BTreeMap<i32, f64>> {
    if centroid.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            got: centroid.len(),
        });
    }
    let mut sse: BTreeMap<i32, f64> = BTreeMap::new();
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for &l in labels_in_node {
        sse.insert(l, 0.0);
        counts.insert(l, 0);
    }
    for i in 0..ds.len() {
        let l = ds.label(i);
        if let Some(total) = sse.get_mut(&l) {
            *total += sq_dist(ds.feature(i), centroid);
            *counts.get_mut(&l).expect("counts mirror sse keys") += 1;
        }
    }
    for (&l, &count) in &counts {
        if count == 0 {
            return Err(Error::EmptyLabel(l));
        }
    }
    Ok(sse)
}

/// Assign each class label to the cluster holding the strict majority of
/// its instances (an exact 50/50 tie goes left), then order each side
/// ascending by SSE against that side's centroid, ties broken by label id.
/// If every label lands on one side, the label with the weakest majority
/// is moved across so both sides are nonempty.
pub fn majority_partition(ds: &Dataset, cr: &ClusterResult) -> Result<LabelPartition> {
    if ds.len() != cr.assignment.len() {
        return Err(Error::InvalidParameter(format!(
            "assignment length {} does not match dataset size {}",
            cr.assignment.len(),
            ds.len()
        )));
    }

    // counts[label] = (in cluster 0, in cluster 1)
    let mut counts: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for (i, &a) in cr.assignment.iter().enumerate() {
        let entry = counts.entry(ds.label(i)).or_insert((0, 0));
        if a == 0 {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }

    let mut left: Vec<i32> = Vec::new();
    let mut right: Vec<i32> = Vec::new();
    for (&label, &(c0, c1)) in &counts {
        if c0 >= c1 {
            left.push(label);
        } else {
            right.push(label);
        }
    }

    // Both sides must be nonempty whenever the node has two or more labels.
    if counts.len() >= 2 && (left.is_empty() || right.is_empty()) {
        let (full, empty) = if right.is_empty() {
            (&mut left, &mut right)
        } else {
            (&mut right, &mut left)
        };
        let weakest = *full
            .iter()
            .min_by(|&&a, &&b| {
                let ratio = |l: i32| {
                    let (c0, c1) = counts[&l];
                    c0.max(c1) as f64 / (c0 + c1) as f64
                };
                ratio(a)
                    .partial_cmp(&ratio(b))
                    .expect("ratios are finite")
                    .then(a.cmp(&b))
            })
            .expect("full side is nonempty");
        full.retain(|&l| l != weakest);
        empty.push(weakest);
    }

    let mut sse_by_label = per_class_sse(ds, &left, &cr.centroids[0])?;
    sse_by_label.append(&mut per_class_sse(ds, &right, &cr.centroids[1])?);

    let order = |side: &mut Vec<i32>| {
        side.sort_by(|&a, &b| {
            sse_by_label[&a]
                .partial_cmp(&sse_by_label[&b])
                .expect("SSE values are finite")
                .then(a.cmp(&b))
        });
    };
    order(&mut left);
    order(&mut right);

    Ok(LabelPartition {
        left_labels: left,
        right_labels: right,
        sse_by_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;

    #[test]
    fn two_obvious_blobs_recovered() {
        let points = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let cr = kmeans2(&points, 0).unwrap();
        assert_eq!(cr.assignment[0], cr.assignment[1]);
        assert_eq!(cr.assignment[2], cr.assignment[3]);
        assert_ne!(cr.assignment[0], cr.assignment[2]);

        let low = cr.assignment[0] as usize;
        assert!((cr.centroids[low][0] - 0.05).abs() < 1e-9);
        assert!((cr.centroids[1 - low][0] - 10.05).abs() < 1e-9);
    }

    #[test]
    fn sse_monotone_and_deterministic() {
        let ds = synth_blobs(4, 25, 3, 0.7, 13).unwrap();
        let (cr, history) = kmeans2_trace(ds.features(), 7, KMEANS_MAX_ITER, KMEANS_TOL).unwrap();
        for w in history.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "SSE increased across an iteration: {} -> {}",
                w[0],
                w[1]
            );
        }
        let (cr2, _) = kmeans2_trace(ds.features(), 7, KMEANS_MAX_ITER, KMEANS_TOL).unwrap();
        assert_eq!(cr, cr2);

        let expected: f64 = ds
            .features()
            .iter()
            .zip(&cr.assignment)
            .map(|(p, &a)| sq_dist(p, &cr.centroids[a as usize]))
            .sum();
        assert!((cr.total_sse - expected).abs() < 1e-9);
    }

    #[test]
    fn near_best_of_many_restarts() {
        let ds = synth_blobs(2, 25, 2, 1.0, 41).unwrap();
        let ours = kmeans2(ds.features(), 0).unwrap().total_sse;
        let best = (0..50)
            .map(|seed| kmeans2(ds.features(), seed).unwrap().total_sse)
            .fold(f64::INFINITY, f64::min);
        assert!(
            ours <= best * 1.05,
            "seed-0 SSE {ours} worse than 5% above best-of-50 {best}"
        );
    }

    #[test]
    fn identical_points_rejected() {
        let points = vec![vec![1.0, 2.0]; 5];
        assert!(matches!(
            kmeans2(&points, 0),
            Err(Error::DegenerateClustering)
        ));
        assert!(kmeans2(&points[..1], 0).is_err());
    }

    #[test]
    fn per_class_sse_examples() {
        // Single instance exactly at the centroid.
        let ds = Dataset::new(vec![vec![1.0, 1.0]], vec![5]).unwrap();
        let sse = per_class_sse(&ds, &[5], &[1.0, 1.0]).unwrap();
        assert_eq!(sse[&5], 0.0);

        // Distances 1 and 2 from the centroid: 1^2 + 2^2 = 5.
        let ds = Dataset::new(vec![vec![1.0], vec![2.0]], vec![3, 3]).unwrap();
        let sse = per_class_sse(&ds, &[3], &[0.0]).unwrap();
        assert!((sse[&3] - 5.0).abs() < 1e-12);

        assert!(matches!(
            per_class_sse(&ds, &[9], &[0.0]),
            Err(Error::EmptyLabel(9))
        ));
        assert!(per_class_sse(&ds, &[3], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn per_class_sse_sums_to_cluster_sse() {
        let ds = synth_blobs(3, 15, 2, 0.4, 19).unwrap();
        let cr = kmeans2(ds.features(), 2).unwrap();
        let part = majority_partition(&ds, &cr).unwrap();

        // When every member of a cluster carries a label assigned to that
        // cluster, the per-label SSEs of the side sum to the cluster's SSE.
        for (side, cluster) in [(&part.left_labels, 0u8), (&part.right_labels, 1u8)] {
            let members: Vec<usize> = (0..ds.len())
                .filter(|&i| cr.assignment[i] == cluster)
                .collect();
            if members
                .iter()
                .all(|&i| side.contains(&ds.label(i)))
                && side
                    .iter()
                    .all(|&l| (0..ds.len()).filter(|&i| ds.label(i) == l).all(|i| cr.assignment[i] == cluster))
            {
                let cluster_sse: f64 = members
                    .iter()
                    .map(|&i| sq_dist(ds.feature(i), &cr.centroids[cluster as usize]))
                    .sum();
                let label_sum: f64 = side.iter().map(|&l| part.sse_by_label[&l]).sum();
                assert!((cluster_sse - label_sum).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn majority_rule_and_tie_rule() {
        // Label 10: 8 of 10 in cluster 0. Label 20: 5 of 10 in each (tie).
        // Label 30: all in cluster 1.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut assignment = Vec::new();
        for i in 0..10 {
            features.push(vec![i as f64 * 0.01]);
            labels.push(10);
            assignment.push(if i < 8 { 0u8 } else { 1u8 });
        }
        for i in 0..10 {
            features.push(vec![1.0 + i as f64 * 0.01]);
            labels.push(20);
            assignment.push(if i < 5 { 0u8 } else { 1u8 });
        }
        for i in 0..4 {
            features.push(vec![10.0 + i as f64 * 0.01]);
            labels.push(30);
            assignment.push(1u8);
        }
        let ds = Dataset::new(features, labels).unwrap();
        let cr = ClusterResult {
            centroids: [vec![0.0], vec![10.0]],
            assignment,
            total_sse: 0.0,
        };
        let part = majority_partition(&ds, &cr).unwrap();
        assert!(part.left_labels.contains(&10));
        assert!(part.left_labels.contains(&20), "50/50 tie goes left");
        assert_eq!(part.right_labels, vec![30]);
    }

    #[test]
    fn kmeans_isolates_far_label() {
        // Two nearby blobs and one far blob: 2-means separates the far one.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            features.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            labels.push(1);
            features.push(vec![1.0 + 0.01 * i as f64, 0.0]);
            labels.push(2);
            features.push(vec![50.0 + 0.01 * i as f64, 0.0]);
            labels.push(3);
        }
        let ds = Dataset::new(features, labels).unwrap();
        let cr = kmeans2(ds.features(), 3).unwrap();
        let part = majority_partition(&ds, &cr).unwrap();
        let (solo, pair) = if part.left_labels.len() == 1 {
            (&part.left_labels, &part.right_labels)
        } else {
            (&part.right_labels, &part.left_labels)
        };
        assert_eq!(solo, &vec![3]);
        assert_eq!(pair.len(), 2);
    }

    #[test]
    fn all_on_one_side_repair() {
        // Force both labels into cluster 0 by construction.
        let ds = Dataset::new(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3]],
            vec![1, 1, 2, 2],
        )
        .unwrap();
        let cr = ClusterResult {
            centroids: [vec![0.15], vec![99.0]],
            assignment: vec![0, 0, 0, 0],
            total_sse: 0.0,
        };
        let part = majority_partition(&ds, &cr).unwrap();
        assert_eq!(part.left_labels.len() + part.right_labels.len(), 2);
        assert!(!part.left_labels.is_empty());
        assert!(!part.right_labels.is_empty());
    }

    #[test]
    fn sides_sorted_by_sse_ascending() {
        let ds = synth_blobs(5, 12, 2, 0.5, 29).unwrap();
        let cr = kmeans2(ds.features(), 4).unwrap();
        let part = majority_partition(&ds, &cr).unwrap();
        for side in [&part.left_labels, &part.right_labels] {
            for w in side.windows(2) {
                assert!(part.sse_by_label[&w[0]] <= part.sse_by_label[&w[1]]);
            }
        }
        let mut all: Vec<i32> = part
            .left_labels
            .iter()
            .chain(&part.right_labels)
            .copied()
            .collect();
        all.sort();
        let mut alphabet = ds.label_alphabet().to_vec();
        alphabet.sort();
        assert_eq!(all, alphabet);
    }
}
