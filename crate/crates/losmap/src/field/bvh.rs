//! Bounding-volume hierarchy for nearest ray–triangle intersection.
//!
//! Built per frame over the mesh's surface faces; queried once per voxel
//! center by the line-of-sight field. Binned SAH construction, ordered
//! traversal with early-out against the current best hit.

use crate::geom::{Aabb, Vec3};

/// Minimum ray parameter: hits closer than this are treated as self-hits.
const T_MIN: f64 = 1e-9;
const LEAF_SIZE: usize = 4;
const BINS: usize = 16;

#[derive(Clone, Copy)]
struct Tri {
    a: Vec3,
    e1: Vec3,
    e2: Vec3,
}

#[derive(Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot, `count` > 0. Internal: left child index
    /// (right child is `first + 1`), `count` == 0.
    first: u32,
    count: u32,
}

pub struct BvhIndex {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    /// Caller-provided id per triangle, in traversal slot order.
    ids: Vec<u32>,
}

/// Möller–Trumbore; returns the ray parameter of the intersection.
#[inline]
fn ray_triangle(origin: Vec3, dir: Vec3, tri: &Tri) -> Option<f64> {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri.a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > T_MIN).then_some(t)
}

impl BvhIndex {
    /// Builds the hierarchy from `(triangle, id)` pairs. An empty input is
    /// allowed; every query then misses.
    pub fn build(triangles: impl IntoIterator<Item = ([Vec3; 3], u32)>) -> Self {
        let mut tris = Vec::new();
        let mut ids = Vec::new();
        let mut bounds = Vec::new();
        let mut centroids = Vec::new();
        for (t, id) in triangles {
            tris.push(Tri {
                a: t[0],
                e1: t[1] - t[0],
                e2: t[2] - t[0],
            });
            ids.push(id);
            bounds.push(Aabb::of_points(&t));
            centroids.push((t[0] + t[1] + t[2]) / 3.0);
        }
        let mut bvh = BvhIndex {
            nodes: Vec::new(),
            tris,
            ids,
        };
        if bvh.tris.is_empty() {
            return bvh;
        }
        let mut order: Vec<u32> = (0..bvh.tris.len() as u32).collect();
        bvh.nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: order.len() as u32,
        });
        bvh.split(0, &mut order, &bounds, &centroids);
        // Reorder triangle storage to the final slot order.
        bvh.tris = order.iter().map(|&i| bvh.tris[i as usize]).collect();
        bvh.ids = order.iter().map(|&i| bvh.ids[i as usize]).collect();
        bvh
    }

    /// Convenience constructor over a frame mesh's surface faces; triangle
    /// ids are indices into `mesh.faces`. Positions stay sensor-local.
    pub fn from_mesh(mesh: &crate::mesh::FrameMesh) -> Self {
        Self::build(
            mesh.faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.is_surface())
                .map(|(i, f)| (mesh.face_positions(f), i as u32)),
        )
    }

    fn split(&mut self, node: usize, order: &mut [u32], bounds: &[Aabb], centroids: &[Vec3]) {
        // `order` here is the sub-slice owned by `node`.
        let first = self.nodes[node].first as usize;
        let count = self.nodes[node].count as usize;
        let slice = &mut order[..];
        debug_assert_eq!(slice.len(), count);

        let mut node_bounds = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &t in slice.iter() {
            node_bounds.merge(&bounds[t as usize]);
            centroid_bounds.grow(centroids[t as usize]);
        }
        self.nodes[node].bounds = node_bounds;
        if count <= LEAF_SIZE {
            return;
        }

        let extent = centroid_bounds.max - centroid_bounds.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let width = extent[axis];
        if width <= 1e-300 {
            return; // all centroids coincide on the split axis
        }

        // Binned SAH along the chosen axis.
        let mut bin_count = [0usize; BINS];
        let mut bin_bounds = [Aabb::empty(); BINS];
        let scale = BINS as f64 / width;
        let bin_of = |c: f64| (((c - centroid_bounds.min[axis]) * scale) as usize).min(BINS - 1);
        for &t in slice.iter() {
            let b = bin_of(centroids[t as usize][axis]);
            bin_count[b] += 1;
            bin_bounds[b].merge(&bounds[t as usize]);
        }
        let mut best_cost = f64::INFINITY;
        let mut best_split = usize::MAX;
        for split in 1..BINS {
            let mut left = Aabb::empty();
            let mut right = Aabb::empty();
            let mut n_left = 0usize;
            for b in 0..split {
                left.merge(&bin_bounds[b]);
                n_left += bin_count[b];
            }
            for b in split..BINS {
                right.merge(&bin_bounds[b]);
            }
            let n_right = count - n_left;
            if n_left == 0 || n_right == 0 {
                continue;
            }
            let cost =
                left.surface_area() * n_left as f64 + right.surface_area() * n_right as f64;
            if cost < best_cost {
                best_cost = cost;
                best_split = split;
            }
        }
        if best_split == usize::MAX {
            // Everything landed in one bin; fall back to a median split.
            slice.sort_unstable_by(|&x, &y| {
                centroids[x as usize][axis]
                    .partial_cmp(&centroids[y as usize][axis])
                    .unwrap()
                    .then(x.cmp(&y))
            });
            let mid = count / 2;
            self.push_children(node, first, mid, count, order, bounds, centroids);
            return;
        }

        // In-place partition by bin index.
        let mut i = 0usize;
        let mut j = count;
        while i < j {
            if bin_of(centroids[slice[i] as usize][axis]) < best_split {
                i += 1;
            } else {
                j -= 1;
                slice.swap(i, j);
            }
        }
        let mid = i;
        self.push_children(node, first, mid, count, order, bounds, centroids);
    }

    #[allow(clippy::too_many_arguments)]
    fn push_children(
        &mut self,
        node: usize,
        first: usize,
        mid: usize,
        count: usize,
        order: &mut [u32],
        bounds: &[Aabb],
        centroids: &[Vec3],
    ) {
        let left = self.nodes.len();
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            first: first as u32,
            count: mid as u32,
        });
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            first: (first + mid) as u32,
            count: (count - mid) as u32,
        });
        self.nodes[node].first = left as u32;
        self.nodes[node].count = 0;
        let (lo, hi) = order.split_at_mut(mid);
        self.split(left, lo, bounds, centroids);
        self.split(left + 1, hi, bounds, centroids);
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Root bounding box, if any triangles exist.
    pub fn root_bounds(&self) -> Option<Aabb> {
        (!self.nodes.is_empty()).then(|| self.nodes[0].bounds)
    }

    /// Elevation range (radians) of directions from the origin that can
    /// possibly reach the root box. Every point of the box has an elevation
    /// inside this interval, and a ray from the origin shares the elevation
    /// of the points it passes through, so pruning by this range never
    /// drops a hit.
    pub fn root_elevation_range(&self) -> Option<(f64, f64)> {
        let b = self.root_bounds()?;
        let corners_xy = [
            (b.min.x, b.min.y),
            (b.min.x, b.max.y),
            (b.max.x, b.min.y),
            (b.max.x, b.max.y),
        ];
        let max_xy = corners_xy
            .iter()
            .map(|&(x, y)| (x * x + y * y).sqrt())
            .fold(0.0f64, f64::max);
        let dx = if b.min.x > 0.0 {
            b.min.x
        } else if b.max.x < 0.0 {
            -b.max.x
        } else {
            0.0
        };
        let dy = if b.min.y > 0.0 {
            b.min.y
        } else if b.max.y < 0.0 {
            -b.max.y
        } else {
            0.0
        };
        let min_xy = (dx * dx + dy * dy).sqrt();
        let sup = b.max.z.atan2(if b.max.z >= 0.0 { min_xy } else { max_xy });
        let inf = b.min.z.atan2(if b.min.z >= 0.0 { max_xy } else { min_xy });
        Some((inf - 1e-9, sup + 1e-9))
    }

    /// Nearest intersection along the ray, or `None` on a miss.
    pub fn nearest_hit(&self, origin: Vec3, dir: Vec3) -> Option<(f64, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best_t = f64::INFINITY;
        let mut best_id = u32::MAX;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            if node.bounds.ray_entry(origin, inv_dir, best_t).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.first as usize;
                for slot in first..first + node.count as usize {
                    if let Some(t) = ray_triangle(origin, dir, &self.tris[slot]) {
                        if t < best_t {
                            best_t = t;
                            best_id = self.ids[slot];
                        }
                    }
                }
            } else {
                let c0 = node.first as usize;
                let e0 = self.nodes[c0].bounds.ray_entry(origin, inv_dir, best_t);
                let e1 = self.nodes[c0 + 1].bounds.ray_entry(origin, inv_dir, best_t);
                // Push the farther child first so the nearer is popped first.
                match (e0, e1) {
                    (Some(t0), Some(t1)) => {
                        let (near, far) = if t0 <= t1 { (c0, c0 + 1) } else { (c0 + 1, c0) };
                        stack.push(far as u32);
                        stack.push(near as u32);
                    }
                    (Some(_), None) => stack.push(c0 as u32),
                    (None, Some(_)) => stack.push((c0 + 1) as u32),
                    (None, None) => {}
                }
            }
        }
        (best_id != u32::MAX).then_some((best_t, best_id))
    }
}

/// Exhaustive nearest-hit over raw triangles; the reference the BVH is
/// checked against.
pub fn brute_force_nearest_hit(
    triangles: &[([Vec3; 3], u32)],
    origin: Vec3,
    dir: Vec3,
) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    for (t, id) in triangles {
        let tri = Tri {
            a: t[0],
            e1: t[1] - t[0],
            e2: t[2] - t[0],
        };
        if let Some(hit_t) = ray_triangle(origin, dir, &tri) {
            if best.map_or(true, |(bt, _)| hit_t < bt) {
                best = Some((hit_t, *id));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tris(rng: &mut ChaCha8Rng, n: usize) -> Vec<([Vec3; 3], u32)> {
        (0..n)
            .map(|i| {
                let c = Vec3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                );
                let mut off = || {
                    Vec3::new(
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                    )
                };
                ([c + off(), c + off(), c + off()], i as u32)
            })
            .collect()
    }

    #[test]
    fn single_triangle_hit_and_miss() {
        let tri = (
            [
                Vec3::new(5.0, -1.0, -1.0),
                Vec3::new(5.0, 1.0, -1.0),
                Vec3::new(5.0, 0.0, 1.0),
            ],
            7u32,
        );
        let bvh = BvhIndex::build([tri]);
        let hit = bvh.nearest_hit(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.0 - 5.0).abs() < 1e-12);
        assert_eq!(hit.1, 7);
        assert!(bvh.nearest_hit(Vec3::zeros(), Vec3::new(-1.0, 0.0, 0.0)).is_none());
        assert!(bvh.nearest_hit(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn empty_bvh_misses() {
        let bvh = BvhIndex::build(std::iter::empty());
        assert!(bvh.nearest_hit(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)).is_none());
        assert!(bvh.root_elevation_range().is_none());
    }

    #[test]
    fn matches_brute_force_on_random_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let tris = random_tris(&mut rng, 2000);
        let bvh = BvhIndex::build(tris.iter().copied());
        let mut hits = 0;
        for _ in 0..2000 {
            let origin = Vec3::new(
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
            );
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let got = bvh.nearest_hit(origin, dir);
            let want = brute_force_nearest_hit(&tris, origin, dir);
            match (got, want) {
                (None, None) => {}
                (Some((t1, id1)), Some((t2, id2))) => {
                    assert_eq!(id1, id2);
                    assert_eq!(t1, t2);
                    hits += 1;
                }
                other => panic!("bvh {:?} vs brute force {:?}", other.0, other.1),
            }
        }
        assert!(hits > 100, "test too weak, only {hits} hits");
    }

    #[test]
    fn elevation_range_brackets_box_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tris = random_tris(&mut rng, 50);
        let bvh = BvhIndex::build(tris.iter().copied());
        let (lo, hi) = bvh.root_elevation_range().unwrap();
        let b = bvh.root_bounds().unwrap();
        for _ in 0..2000 {
            let p = Vec3::new(
                rng.random_range(b.min.x..=b.max.x),
                rng.random_range(b.min.y..=b.max.y),
                rng.random_range(b.min.z..=b.max.z),
            );
            let e = crate::geom::elevation(&p);
            assert!(e >= lo && e <= hi, "elevation {e} outside [{lo}, {hi}]");
        }
    }
}
