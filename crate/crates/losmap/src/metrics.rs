//! Evaluation metrics: normal similarity, point-cloud distance metrics, and
//! dynamic-label classification scores, plus the k-NN PCA normal baseline.

use rayon::prelude::*;

use crate::field::{DynamicMask, PointLabel};
use crate::geom::Vec3;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// kd-tree
// ---------------------------------------------------------------------------

/// Static kd-tree over points for nearest-neighbor queries.
pub struct KdTree<'a> {
    points: &'a [Vec3],
    /// Point indices in in-order layout; nodes split at the median.
    order: Vec<u32>,
    splits: Vec<(f64, u8)>, // per subtree root slot: (coordinate, axis)
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut splits = vec![(0.0, 3u8); points.len()];
        if !points.is_empty() {
            Self::build_range(points, &mut order, &mut splits, 0);
        }
        KdTree {
            points,
            order,
            splits,
        }
    }

    fn build_range(points: &[Vec3], order: &mut [u32], splits: &mut [(f64, u8)], offset: usize) {
        let n = order.len();
        if n <= 1 {
            return;
        }
        // Split on the widest axis of the subtree's bounding box.
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &i in order.iter() {
            min = min.inf(&points[i as usize]);
            max = max.sup(&points[i as usize]);
        }
        let extent = max - min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = n / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis]
                .partial_cmp(&points[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        splits[offset + mid] = (points[order[mid] as usize][axis], axis as u8);
        // `splits` stays the full array, indexed by global slot; `order` is
        // the subtree's slice starting at `offset`.
        let (lo, hi) = order.split_at_mut(mid);
        Self::build_range(points, lo, splits, offset);
        Self::build_range(points, &mut hi[1..], splits, offset + mid + 1);
    }

    /// Nearest neighbor: (index, squared distance).
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.order.len(), 0, q, &mut best);
        Some(best)
    }

    fn search(&self, lo: usize, hi: usize, _depth: usize, q: &Vec3, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let d2 = (self.points[idx] - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        if hi - lo == 1 {
            return;
        }
        let (split, axis) = self.splits[mid];
        if axis == 3 {
            // Leaf-ish degenerate split: scan both sides.
            self.search(lo, mid, 0, q, best);
            self.search(mid + 1, hi, 0, q, best);
            return;
        }
        let delta = q[axis as usize] - split;
        let (first_lo, first_hi, second_lo, second_hi) = if delta < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.search(first_lo, first_hi, 0, q, best);
        if delta * delta <= best.1 {
            self.search(second_lo, second_hi, 0, q, best);
        }
    }

    /// Indices of the k nearest neighbors of `q`, closest first.
    pub fn k_nearest(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        if self.points.is_empty() || k == 0 {
            return Vec::new();
        }
        // Max-heap of (d2, idx) capped at k.
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_search(0, self.order.len(), q, k, &mut heap);
        heap.sort_by(|a, b| a.partial_cmp(b).unwrap());
        heap.into_iter().map(|(d2, i)| (i, d2)).collect()
    }

    fn knn_search(&self, lo: usize, hi: usize, q: &Vec3, k: usize, heap: &mut Vec<(f64, usize)>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let d2 = (self.points[idx] - q).norm_squared();
        if heap.len() < k {
            heap.push((d2, idx));
            heap.sort_by(|a, b| b.partial_cmp(a).unwrap()); // descending: [0] is worst
        } else if d2 < heap[0].0 {
            heap[0] = (d2, idx);
            heap.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        if hi - lo == 1 {
            return;
        }
        let (split, axis) = self.splits[mid];
        if axis == 3 {
            self.knn_search(lo, mid, q, k, heap);
            self.knn_search(mid + 1, hi, q, k, heap);
            return;
        }
        let delta = q[axis as usize] - split;
        let (first_lo, first_hi, second_lo, second_hi) = if delta < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.knn_search(first_lo, first_hi, q, k, heap);
        let worst = if heap.len() < k {
            f64::INFINITY
        } else {
            heap[0].0
        };
        if delta * delta <= worst {
            self.knn_search(second_lo, second_hi, q, k, heap);
        }
    }
}

/// Brute-force nearest neighbor; oracle for the kd-tree.
pub fn brute_force_nearest(points: &[Vec3], q: &Vec3) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - q).norm_squared()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
}

// ---------------------------------------------------------------------------
// Normal similarity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NormalSimilarity {
    /// Mean |cos| over valid points.
    pub mean_cosine: f64,
    /// Per-point |cos|, `None` where the estimate is null or masked out.
    pub per_point: Vec<Option<f64>>,
    pub valid_count: usize,
}

/// Sign-agnostic cosine similarity between estimated and ground-truth
/// normals. Points with a null estimate, or excluded by `mask`, are skipped.
pub fn normal_similarity(
    est: &[Option<Vec3>],
    gt: &[Vec3],
    mask: Option<&[bool]>,
) -> Result<NormalSimilarity> {
    if est.len() != gt.len() {
        return Err(Error::Metrics(format!(
            "normal count mismatch: {} vs {}",
            est.len(),
            gt.len()
        )));
    }
    if let Some(m) = mask {
        if m.len() != gt.len() {
            return Err(Error::Metrics("mask length mismatch".into()));
        }
    }
    let mut per_point = Vec::with_capacity(est.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..est.len() {
        let keep = mask.map_or(true, |m| m[i]);
        let cos = match (keep, est[i]) {
            (true, Some(n)) => {
                let g = gt[i];
                let denom = n.norm() * g.norm();
                if denom < 1e-12 {
                    None
                } else {
                    Some((n.dot(&g) / denom).abs().min(1.0))
                }
            }
            _ => None,
        };
        if let Some(c) = cos {
            sum += c;
            count += 1;
        }
        per_point.push(cos);
    }
    if count == 0 {
        return Err(Error::Metrics("no valid points for normal similarity".into()));
    }
    Ok(NormalSimilarity {
        mean_cosine: sum / count as f64,
        per_point,
        valid_count: count,
    })
}

/// k-NN PCA normal estimation: the eigenvector of the neighborhood
/// covariance with the smallest eigenvalue. The classical baseline.
pub fn pca_normals(points: &[Vec3], k: usize) -> Vec<Option<Vec3>> {
    let tree = KdTree::build(points);
    points
        .par_iter()
        .map(|p| {
            let nn = tree.k_nearest(p, k.min(points.len()));
            if nn.len() < 3 {
                return None;
            }
            let mut mean = Vec3::zeros();
            for (i, _) in &nn {
                mean += points[*i];
            }
            mean /= nn.len() as f64;
            let mut cov = nalgebra::Matrix3::<f64>::zeros();
            for (i, _) in &nn {
                let d = points[*i] - mean;
                cov += d * d.transpose();
            }
            let eig = nalgebra::SymmetricEigen::new(cov);
            let mut min_i = 0;
            for i in 1..3 {
                if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
                    min_i = i;
                }
            }
            let n = eig.eigenvectors.column(min_i).into_owned();
            let norm = n.norm();
            if norm < 1e-12 {
                None
            } else {
                Some(n / norm)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cloud metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CloudMetrics {
    /// RMSE of recon→gt nearest-neighbor distances, meters.
    pub rmse: f64,
    /// Mean of the two directed average NN distances, meters.
    pub avg_hausdorff: f64,
    /// Percent of recon samples within τ of the ground truth.
    pub precision: f64,
    /// Percent of ground-truth samples within τ of the reconstruction.
    pub recall: f64,
    pub f1: f64,
    /// 95th percentile (nearest-rank) of recon→gt NN distance, meters.
    pub acc95: f64,
}

fn directed_nn_distances(from: &[Vec3], to_tree: &KdTree) -> Vec<f64> {
    from.par_iter()
        .map(|p| to_tree.nearest(p).unwrap().1.sqrt())
        .collect()
}

/// Point-to-point reconstruction metrics at distance threshold `tau`.
pub fn cloud_metrics(recon: &[Vec3], gt: &[Vec3], tau: f64) -> Result<CloudMetrics> {
    if recon.is_empty() || gt.is_empty() {
        return Err(Error::Metrics("cloud metrics need non-empty inputs".into()));
    }
    let gt_tree = KdTree::build(gt);
    let recon_tree = KdTree::build(recon);
    let d_rg = directed_nn_distances(recon, &gt_tree);
    let d_gr = directed_nn_distances(gt, &recon_tree);

    let rmse = (d_rg.iter().map(|d| d * d).sum::<f64>() / d_rg.len() as f64).sqrt();
    let avg_rg = d_rg.iter().sum::<f64>() / d_rg.len() as f64;
    let avg_gr = d_gr.iter().sum::<f64>() / d_gr.len() as f64;
    let avg_hausdorff = 0.5 * (avg_rg + avg_gr);

    let precision = 100.0 * d_rg.iter().filter(|&&d| d <= tau).count() as f64 / d_rg.len() as f64;
    let recall = 100.0 * d_gr.iter().filter(|&&d| d <= tau).count() as f64 / d_gr.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    let mut sorted = d_rg;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let acc95 = sorted[rank - 1];

    Ok(CloudMetrics {
        rmse,
        avg_hausdorff,
        precision,
        recall,
        f1,
        acc95,
    })
}

// ---------------------------------------------------------------------------
// Dynamic-label metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct DynamicMetrics {
    /// Percent; `dynamic` is the positive class.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    /// Points excluded because the detector had never observed their voxel.
    pub unobserved: usize,
}

/// Binary classification scores of a detected mask against ground-truth
/// labels; unobserved points are excluded.
pub fn dynamic_metrics(mask: &DynamicMask, gt_dynamic: &[bool]) -> Result<DynamicMetrics> {
    if mask.labels.len() != gt_dynamic.len() {
        return Err(Error::Metrics(format!(
            "label count mismatch: {} vs {}",
            mask.labels.len(),
            gt_dynamic.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    let mut unobserved = 0usize;
    for (label, &gt) in mask.labels.iter().zip(gt_dynamic) {
        match label {
            PointLabel::Unobserved => unobserved += 1,
            PointLabel::Dynamic if gt => tp += 1,
            PointLabel::Dynamic => fp += 1,
            PointLabel::Static if gt => fne += 1,
            PointLabel::Static => {}
        }
    }
    let precision = if tp + fp > 0 {
        100.0 * tp as f64 / (tp + fp) as f64
    } else {
        100.0
    };
    let recall = if tp + fne > 0 {
        100.0 * tp as f64 / (tp + fne) as f64
    } else {
        100.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DynamicMetrics {
        precision,
        recall,
        f1,
        true_positive: tp,
        false_positive: fp,
        false_negative: fne,
        unobserved,
    })
}

/// Accumulates per-frame dynamic counts into pooled metrics.
#[derive(Debug, Clone, Copy, Default)]
pub struct DynamicCounts {
    pub tp: usize,
    pub fp: usize,
    pub fne: usize,
    pub tn: usize,
    pub unobserved: usize,
}

impl DynamicCounts {
    pub fn add(&mut self, mask: &DynamicMask, gt_dynamic: &[bool]) {
        for (label, &gt) in mask.labels.iter().zip(gt_dynamic) {
            match label {
                PointLabel::Unobserved => self.unobserved += 1,
                PointLabel::Dynamic if gt => self.tp += 1,
                PointLabel::Dynamic => self.fp += 1,
                PointLabel::Static if gt => self.fne += 1,
                PointLabel::Static => self.tn += 1,
            }
        }
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            100.0
        } else {
            100.0 * self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fne == 0 {
            100.0
        } else {
            100.0 * self.tp as f64 / (self.tp + self.fne) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                )
            })
            .collect()
    }

    #[test]
    fn kd_tree_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cloud = random_cloud(&mut rng, 5000, 10.0);
        let tree = KdTree::build(&cloud);
        for _ in 0..2000 {
            let q = Vec3::new(
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
            );
            let got = tree.nearest(&q).unwrap();
            let want = brute_force_nearest(&cloud, &q).unwrap();
            assert_eq!(got.1, want.1, "squared distances differ");
            assert_eq!(got.0, want.0);
        }
    }

    #[test]
    fn knn_returns_sorted_true_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let cloud = random_cloud(&mut rng, 800, 5.0);
        let tree = KdTree::build(&cloud);
        for _ in 0..100 {
            let q = cloud[rng.random_range(0..cloud.len())];
            let got = tree.k_nearest(&q, 10);
            assert_eq!(got.len(), 10);
            let mut all: Vec<(usize, f64)> = cloud
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm_squared()))
                .collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let got_d: Vec<f64> = got.iter().map(|(_, d)| *d).collect();
            let want_d: Vec<f64> = all[..10].iter().map(|(_, d)| *d).collect();
            assert_eq!(got_d, want_d);
        }
    }

    #[test]
    fn identical_normals_score_one() {
        let gt: Vec<Vec3> = vec![Vec3::x(), Vec3::y(), Vec3::z()];
        let est: Vec<Option<Vec3>> = gt.iter().map(|n| Some(-n)).collect(); // sign-agnostic
        let r = normal_similarity(&est, &gt, None).unwrap();
        assert_eq!(r.mean_cosine, 1.0);

        let orth: Vec<Option<Vec3>> = vec![Some(Vec3::y()), Some(Vec3::z()), Some(Vec3::x())];
        let r = normal_similarity(&orth, &gt, None).unwrap();
        assert_eq!(r.mean_cosine, 0.0);

        let none: Vec<Option<Vec3>> = vec![None; 3];
        assert!(normal_similarity(&none, &gt, None).is_err());
    }

    #[test]
    fn pca_recovers_plane_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pts: Vec<Vec3> = (0..400)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-0.001..0.001),
                )
            })
            .collect();
        let normals = pca_normals(&pts, 10);
        for n in normals.iter().flatten() {
            assert!(n.z.abs() > 0.99, "pca normal {n:?}");
        }
    }

    #[test]
    fn identical_clouds_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let cloud = random_cloud(&mut rng, 500, 5.0);
        let m = cloud_metrics(&cloud, &cloud, 0.2).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.precision, 100.0);
        assert_eq!(m.recall, 100.0);
        assert_eq!(m.f1, 100.0);
        assert_eq!(m.acc95, 0.0);
    }

    #[test]
    fn shifted_cloud_zero_precision() {
        // Sparse grid shifted by 2τ: every NN distance is exactly 2τ > τ.
        let tau = 0.2;
        let mut gt = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                gt.push(Vec3::new(i as f64, j as f64, 0.0));
            }
        }
        let recon: Vec<Vec3> = gt.iter().map(|p| p + Vec3::new(0.0, 0.0, 2.0 * tau)).collect();
        let m = cloud_metrics(&recon, &gt, tau).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn subset_cloud_full_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        // Dense ground truth on a grid; recon keeps a random half.
        let mut gt = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                gt.push(Vec3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0));
            }
        }
        let recon: Vec<Vec3> = gt.iter().copied().filter(|_| rng.random::<bool>()).collect();
        let m = cloud_metrics(&recon, &gt, 0.2).unwrap();
        assert_eq!(m.precision, 100.0);
        assert!(m.recall > 99.0, "recall {}", m.recall);
    }

    #[test]
    fn hausdorff_symmetric_under_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let a = random_cloud(&mut rng, 200, 3.0);
        let b = random_cloud(&mut rng, 250, 3.0);
        let m1 = cloud_metrics(&a, &b, 0.2).unwrap();
        let m2 = cloud_metrics(&b, &a, 0.2).unwrap();
        assert!((m1.avg_hausdorff - m2.avg_hausdorff).abs() < 1e-12);
        // Precision and recall swap roles.
        assert!((m1.precision - m2.recall).abs() < 1e-9);
    }

    #[test]
    fn metrics_rigid_invariant() {
        use nalgebra::UnitQuaternion;
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a = random_cloud(&mut rng, 300, 3.0);
        let b = random_cloud(&mut rng, 300, 3.0);
        let m1 = cloud_metrics(&a, &b, 0.2).unwrap();
        let rot = UnitQuaternion::from_scaled_axis(Vec3::new(0.3, -0.2, 0.9));
        let t = Vec3::new(4.0, -2.0, 7.0);
        let ar: Vec<Vec3> = a.iter().map(|p| rot * p + t).collect();
        let br: Vec<Vec3> = b.iter().map(|p| rot * p + t).collect();
        let m2 = cloud_metrics(&ar, &br, 0.2).unwrap();
        assert!((m1.rmse - m2.rmse).abs() < 1e-9);
        assert!((m1.avg_hausdorff - m2.avg_hausdorff).abs() < 1e-9);
        assert_eq!(m1.precision, m2.precision);
    }

    #[test]
    fn dynamic_metrics_basics() {
        let mask = DynamicMask {
            frame_id: 0,
            labels: vec![
                PointLabel::Dynamic,
                PointLabel::Dynamic,
                PointLabel::Static,
                PointLabel::Unobserved,
            ],
        };
        let gt = vec![true, false, true, true];
        let m = dynamic_metrics(&mask, &gt).unwrap();
        assert_eq!(m.true_positive, 1);
        assert_eq!(m.false_positive, 1);
        assert_eq!(m.false_negative, 1);
        assert_eq!(m.unobserved, 1);
        assert_eq!(m.precision, 50.0);
        assert_eq!(m.recall, 50.0);

        // Perfect mask.
        let mask = DynamicMask {
            frame_id: 0,
            labels: vec![PointLabel::Dynamic, PointLabel::Static],
        };
        let m = dynamic_metrics(&mask, &[true, false]).unwrap();
        assert_eq!(m.precision, 100.0);
        assert_eq!(m.recall, 100.0);

        // All-static prediction with dynamic ground truth: zero recall.
        let mask = DynamicMask {
            frame_id: 0,
            labels: vec![PointLabel::Static, PointLabel::Static],
        };
        let m = dynamic_metrics(&mask, &[true, true]).unwrap();
        assert_eq!(m.recall, 0.0);
    }
}
