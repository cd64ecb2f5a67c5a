//! 3D convex hull (quickhull) with thick-plane robustness, plus a brute-force
//! reference implementation used as a test oracle.
//!
//! Output is deterministic for a fixed input ordering: ties in extreme- and
//! farthest-point selection are broken by lowest point index, and faces are
//! emitted in creation order.

use std::collections::HashMap;

use crate::geom::{triangle_cross, Aabb, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HullError {
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate input at the extent stage: all points coincident within epsilon")]
    Coincident,
    #[error("degenerate input at the line stage: all points collinear within epsilon")]
    Collinear,
    #[error("degenerate input at the plane stage: all points coplanar within epsilon")]
    Coplanar,
    #[error("numerical failure while expanding the hull: {0}")]
    Numerical(&'static str),
}

/// Triangulated convex hull. Faces index into the *original* input slice and
/// wind counter-clockwise seen from outside; normals are unit and outward.
#[derive(Debug, Clone)]
pub struct HullMesh {
    /// Sorted indices of the input points that lie on the hull.
    pub vertex_indices: Vec<usize>,
    pub faces: Vec<[usize; 3]>,
    pub face_normals: Vec<Vec3>,
}

/// Scale-aware default plane tolerance: 1e-7 of the bounding-box diagonal.
pub fn default_epsilon(points: &[Vec3]) -> f64 {
    let diag = Aabb::of_points(points).diagonal();
    (1e-7 * diag).max(1e-14)
}

const NO_FACE: u32 = u32::MAX;

struct Face {
    verts: [u32; 3],
    normal: Vec3,
    offset: f64,
    /// adj[i] is the face sharing edge (verts[i], verts[i+1]).
    adj: [u32; 3],
    outside: Vec<u32>,
    far: u32,
    far_dist: f64,
    alive: bool,
    mark: u32,
}

struct QuickHull<'a> {
    points: &'a [Vec3],
    eps: f64,
    faces: Vec<Face>,
    pending: Vec<u32>,
    epoch: u32,
}

impl<'a> QuickHull<'a> {
    fn dist(&self, f: &Face, p: u32) -> f64 {
        f.normal.dot(&self.points[p as usize]) - f.offset
    }

    fn make_face(&mut self, a: u32, b: u32, c: u32) -> Result<u32, HullError> {
        let pa = self.points[a as usize];
        let cross = triangle_cross(pa, self.points[b as usize], self.points[c as usize]);
        let norm = cross.norm();
        if !(norm > 0.0) {
            return Err(HullError::Numerical("exactly degenerate hull face"));
        }
        let normal = cross / norm;
        let id = self.faces.len() as u32;
        self.faces.push(Face {
            verts: [a, b, c],
            normal,
            offset: normal.dot(&pa),
            adj: [NO_FACE; 3],
            outside: Vec::new(),
            far: 0,
            far_dist: f64::NEG_INFINITY,
            alive: true,
            mark: 0,
        });
        Ok(id)
    }

    /// Pushes `p` into the outside set of whichever of `candidates` sees it
    /// farthest (strictly beyond epsilon). Returns false if every candidate
    /// face has it on or behind its plane.
    fn assign_point(&mut self, p: u32, candidates: &[u32]) -> bool {
        let mut best = NO_FACE;
        let mut best_dist = self.eps;
        for &fid in candidates {
            let f = &self.faces[fid as usize];
            if !f.alive {
                continue;
            }
            let d = self.dist(f, p);
            if d > best_dist {
                best_dist = d;
                best = fid;
            }
        }
        if best == NO_FACE {
            return false;
        }
        let f = &mut self.faces[best as usize];
        f.outside.push(p);
        if best_dist > f.far_dist {
            f.far_dist = best_dist;
            f.far = p;
        }
        true
    }

    fn initial_simplex(&mut self) -> Result<[u32; 4], HullError> {
        let pts = self.points;
        let n = pts.len();

        // Axis extremes; lowest index wins ties via strict comparisons.
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for i in 1..n {
            for a in 0..3 {
                if pts[i][a] < pts[lo[a]][a] {
                    lo[a] = i;
                }
                if pts[i][a] > pts[hi[a]][a] {
                    hi[a] = i;
                }
            }
        }
        let mut extremes: Vec<usize> = lo.iter().chain(hi.iter()).copied().collect();
        extremes.sort_unstable();
        extremes.dedup();
        if extremes.len() < 2 {
            return Err(HullError::Coincident);
        }

        let mut e0 = 0usize;
        let mut e1 = 0usize;
        let mut best = -1.0f64;
        for (ii, &i) in extremes.iter().enumerate() {
            for &j in extremes.iter().skip(ii + 1) {
                let d = (pts[i] - pts[j]).norm_squared();
                if d > best {
                    best = d;
                    e0 = i;
                    e1 = j;
                }
            }
        }
        if !(best > self.eps * self.eps) {
            return Err(HullError::Coincident);
        }

        // Farthest from the line (e0, e1).
        let dir = (pts[e1] - pts[e0]).normalize();
        let mut e2 = usize::MAX;
        let mut best = self.eps;
        for i in 0..n {
            let v = pts[i] - pts[e0];
            let d = (v - dir * v.dot(&dir)).norm();
            if d > best {
                best = d;
                e2 = i;
            }
        }
        if e2 == usize::MAX {
            return Err(HullError::Collinear);
        }

        // Farthest from the plane (e0, e1, e2).
        let normal = triangle_cross(pts[e0], pts[e1], pts[e2]).normalize();
        let offset = normal.dot(&pts[e0]);
        let mut e3 = usize::MAX;
        let mut best = self.eps;
        for i in 0..n {
            let d = (normal.dot(&pts[i]) - offset).abs();
            if d > best {
                best = d;
                e3 = i;
            }
        }
        if e3 == usize::MAX {
            return Err(HullError::Coplanar);
        }

        // Orient so e3 lies behind (e0, e1, e2).
        if normal.dot(&pts[e3]) - offset > 0.0 {
            std::mem::swap(&mut e1, &mut e2);
        }
        Ok([e0 as u32, e1 as u32, e2 as u32, e3 as u32])
    }

    fn link_all(&mut self, fids: &[u32]) -> Result<(), HullError> {
        let mut edges: HashMap<(u32, u32), (u32, u8)> = HashMap::new();
        for &fid in fids {
            let verts = self.faces[fid as usize].verts;
            for k in 0..3 {
                edges.insert((verts[k], verts[(k + 1) % 3]), (fid, k as u8));
            }
        }
        for (&(u, v), &(fid, slot)) in &edges {
            let (twin, _) = edges
                .get(&(v, u))
                .ok_or(HullError::Numerical("open edge in face fan"))?;
            self.faces[fid as usize].adj[slot as usize] = *twin;
        }
        Ok(())
    }

    fn run(mut self) -> Result<HullMesh, HullError> {
        let [a, b, c, d] = self.initial_simplex()?;
        // Four outward faces of the tetrahedron (d is behind (a, b, c)).
        let f0 = self.make_face(a, b, c)?;
        let f1 = self.make_face(a, c, d)?;
        let f2 = self.make_face(c, b, d)?;
        let f3 = self.make_face(b, a, d)?;
        self.link_all(&[f0, f1, f2, f3])?;

        let initial = [f0, f1, f2, f3];
        for p in 0..self.points.len() as u32 {
            if p == a || p == b || p == c || p == d {
                continue;
            }
            self.assign_point(p, &initial);
        }
        for fid in initial {
            if !self.faces[fid as usize].outside.is_empty() {
                self.pending.push(fid);
            }
        }

        let mut visible: Vec<u32> = Vec::new();
        let mut horizon: Vec<(u32, u32, u32, u8)> = Vec::new(); // (u, v, outer face, outer slot)
        let mut bfs: Vec<u32> = Vec::new();
        let mut orphans: Vec<u32> = Vec::new();
        let mut new_faces: Vec<u32> = Vec::new();

        while let Some(fid) = self.pending.pop() {
            {
                let f = &self.faces[fid as usize];
                if !f.alive || f.outside.is_empty() {
                    continue;
                }
            }
            let apex = self.faces[fid as usize].far;

            // Faces visible from the apex, found by flood fill across edges.
            self.epoch += 1;
            let epoch = self.epoch;
            visible.clear();
            horizon.clear();
            bfs.clear();
            bfs.push(fid);
            self.faces[fid as usize].mark = epoch;
            while let Some(g) = bfs.pop() {
                visible.push(g);
                for k in 0..3 {
                    let nb = self.faces[g as usize].adj[k];
                    if self.faces[nb as usize].mark == epoch {
                        continue;
                    }
                    let nb_face = &self.faces[nb as usize];
                    if self.dist(nb_face, apex) > self.eps {
                        self.faces[nb as usize].mark = epoch;
                        bfs.push(nb);
                    } else {
                        // Edge (u, v) of the visible face g is on the horizon.
                        let verts = self.faces[g as usize].verts;
                        let (u, v) = (verts[k], verts[(k + 1) % 3]);
                        let nb_verts = self.faces[nb as usize].verts;
                        let slot = (0..3)
                            .find(|&s| nb_verts[s] == v && nb_verts[(s + 1) % 3] == u)
                            .ok_or(HullError::Numerical("adjacency desync"))?;
                        horizon.push((u, v, nb, slot as u8));
                    }
                }
            }

            orphans.clear();
            for &g in &visible {
                let f = &mut self.faces[g as usize];
                f.alive = false;
                orphans.append(&mut f.outside);
            }

            // One new face per horizon edge, keeping the outward winding.
            new_faces.clear();
            for &(u, v, outer, outer_slot) in &horizon {
                let nf = self.make_face(u, v, apex)?;
                self.faces[nf as usize].adj[0] = outer;
                self.faces[outer as usize].adj[outer_slot as usize] = nf;
                new_faces.push(nf);
            }
            // The horizon of an edge-connected visible region is a vertex-
            // disjoint cycle; link consecutive new faces by scanning it
            // (it is small, so linear search beats hashing).
            for i in 0..horizon.len() {
                let (u, v, _, _) = horizon[i];
                let mut next = NO_FACE;
                let mut prev = NO_FACE;
                for j in 0..horizon.len() {
                    if horizon[j].0 == v {
                        if next != NO_FACE {
                            return Err(HullError::Numerical("pinched horizon loop"));
                        }
                        next = new_faces[j];
                    }
                    if horizon[j].1 == u {
                        if prev != NO_FACE {
                            return Err(HullError::Numerical("pinched horizon loop"));
                        }
                        prev = new_faces[j];
                    }
                }
                if next == NO_FACE || prev == NO_FACE {
                    return Err(HullError::Numerical("broken horizon loop"));
                }
                let nf = new_faces[i] as usize;
                self.faces[nf].adj[1] = next; // edge (v, apex)
                self.faces[nf].adj[2] = prev; // edge (apex, u)
            }

            // Ascending index order keeps farthest-point ties deterministic.
            orphans.sort_unstable();
            for &p in &orphans {
                if p == apex {
                    continue;
                }
                self.assign_point(p, &new_faces);
            }
            for &nf in &new_faces {
                if !self.faces[nf as usize].outside.is_empty() {
                    self.pending.push(nf);
                }
            }
        }

        let mut faces = Vec::new();
        let mut face_normals = Vec::new();
        let mut verts: Vec<usize> = Vec::new();
        for f in &self.faces {
            if f.alive {
                faces.push([
                    f.verts[0] as usize,
                    f.verts[1] as usize,
                    f.verts[2] as usize,
                ]);
                face_normals.push(f.normal);
                verts.extend(f.verts.iter().map(|&v| v as usize));
            }
        }
        verts.sort_unstable();
        verts.dedup();
        Ok(HullMesh {
            vertex_indices: verts,
            faces,
            face_normals,
        })
    }
}

/// Computes the convex hull of `points` with plane tolerance `epsilon`
/// (see [`default_epsilon`]). Requires at least four points not all coplanar.
pub fn quickhull(points: &[Vec3], epsilon: f64) -> Result<HullMesh, HullError> {
    if points.len() < 4 {
        return Err(HullError::TooFewPoints(points.len()));
    }
    QuickHull {
        points,
        eps: epsilon.max(1e-14),
        faces: Vec::new(),
        pending: Vec::new(),
        epoch: 0,
    }
    .run()
}

/// Enclosed volume of a hull as the signed sum of origin tetrahedra.
pub fn hull_volume(hull: &HullMesh, points: &[Vec3]) -> f64 {
    let mut vol = 0.0;
    for f in &hull.faces {
        let (a, b, c) = (points[f[0]], points[f[1]], points[f[2]]);
        vol += a.dot(&b.cross(&c));
    }
    vol / 6.0
}

/// Largest signed distance of any input point in front of any hull face;
/// at most `epsilon` for a correct hull.
pub fn max_plane_violation(hull: &HullMesh, points: &[Vec3]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (f, n) in hull.faces.iter().zip(&hull.face_normals) {
        let offset = n.dot(&points[f[0]]);
        for p in points {
            worst = worst.max(n.dot(p) - offset);
        }
    }
    worst
}

/// Brute-force hull vertex set: a triangle supports the hull iff every other
/// point lies on one side of its plane. O(n⁴) — test oracle only, kept
/// independent of the quickhull implementation above.
pub fn brute_force_hull_vertices(points: &[Vec3], epsilon: f64) -> Vec<usize> {
    let n = points.len();
    let mut on_hull = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let cross = triangle_cross(points[i], points[j], points[k]);
                let norm = cross.norm();
                if norm <= f64::MIN_POSITIVE {
                    continue;
                }
                let normal = cross / norm;
                let offset = normal.dot(&points[i]);
                let mut above = false;
                let mut below = false;
                for (m, p) in points.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let d = normal.dot(p) - offset;
                    if d > epsilon {
                        above = true;
                    } else if d < -epsilon {
                        below = true;
                    }
                    if above && below {
                        break;
                    }
                }
                if !(above && below) {
                    on_hull[i] = true;
                    on_hull[j] = true;
                    on_hull[k] = true;
                }
            }
        }
    }
    (0..n).filter(|&i| on_hull[i]).collect()
}

/// V − E + F over a triangle soup; 2 for a closed genus-0 surface.
pub fn euler_characteristic(faces: &[[usize; 3]]) -> i64 {
    use std::collections::HashSet;
    let mut verts: HashSet<usize> = HashSet::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for f in faces {
        for k in 0..3 {
            verts.insert(f[k]);
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    verts.len() as i64 - edges.len() as i64 + faces.len() as i64
}

/// True when every undirected edge is shared by exactly two faces.
pub fn edges_closed(faces: &[[usize; 3]]) -> bool {
    let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    counts.values().all(|&c| c == 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Vec3> {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p = Vec3::new(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            );
            if p.norm() <= radius {
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn tetrahedron_is_own_hull() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        assert_eq!(hull.faces.len(), 4);
        assert_eq!(hull.vertex_indices, vec![0, 1, 2, 3]);
        assert!((hull_volume(&hull, &pts) - 1.0 / 6.0).abs() < 1e-9);
        assert!(edges_closed(&hull.faces));
    }

    #[test]
    fn unit_cube_hull() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        assert_eq!(hull.faces.len(), 12);
        assert_eq!(hull.vertex_indices.len(), 8);
        assert!((hull_volume(&hull, &pts) - 1.0).abs() < 1e-9);
        assert_eq!(euler_characteristic(&hull.faces), 2);
    }

    #[test]
    fn degenerate_inputs_name_their_stage() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(
            quickhull(&[p, p, p, p], 1e-9).unwrap_err(),
            HullError::Coincident
        );
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(quickhull(&line, 1e-9).unwrap_err(), HullError::Collinear);
        let plane: Vec<Vec3> = (0..6)
            .map(|i| Vec3::new((i % 3) as f64, (i / 3) as f64, 0.0))
            .collect();
        assert_eq!(quickhull(&plane, 1e-9).unwrap_err(), HullError::Coplanar);
        assert_eq!(
            quickhull(&line[..3], 1e-9).unwrap_err(),
            HullError::TooFewPoints(3)
        );
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pts = random_ball(&mut rng, 50, 1.0);
            let eps = default_epsilon(&pts);
            let hull = quickhull(&pts, eps).unwrap();
            let oracle = brute_force_hull_vertices(&pts, eps);
            assert_eq!(hull.vertex_indices, oracle);
            assert!(max_plane_violation(&hull, &pts) <= eps);
            assert_eq!(euler_characteristic(&hull.faces), 2);
            assert!(edges_closed(&hull.faces));
        }
    }

    #[test]
    fn interior_point_does_not_change_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = random_ball(&mut rng, 30, 1.0);
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        pts.push(Vec3::new(0.01, -0.02, 0.005)); // deep inside the ball
        let hull2 = quickhull(&pts, default_epsilon(&pts)).unwrap();
        assert_eq!(hull.faces, hull2.faces);
    }

    #[test]
    fn scaling_scales_volume_cubically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_ball(&mut rng, 40, 2.0);
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        let v1 = hull_volume(&hull, &pts);
        for s in [0.5, 3.0, 17.0] {
            let scaled: Vec<Vec3> = pts.iter().map(|p| p * s).collect();
            let hull_s = quickhull(&scaled, default_epsilon(&scaled)).unwrap();
            let v2 = hull_volume(&hull_s, &scaled);
            assert!(
                ((v2 / (s * s * s) - v1) / v1).abs() < 1e-6,
                "scale {s}: {v2} vs {v1}"
            );
        }
    }

    #[test]
    fn volume_dominates_any_four_point_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_ball(&mut rng, 25, 1.0);
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        let v = hull_volume(&hull, &pts);
        for _ in 0..200 {
            let mut ids = [0usize; 4];
            for slot in &mut ids {
                *slot = rng.random_range(0..pts.len());
            }
            let sub: Vec<Vec3> = ids.iter().map(|&i| pts[i]).collect();
            if let Ok(sub_hull) = quickhull(&sub, default_epsilon(&sub)) {
                assert!(hull_volume(&sub_hull, &sub) <= v + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = random_ball(&mut rng, 200, 1.0);
        let h1 = quickhull(&pts, default_epsilon(&pts)).unwrap();
        let h2 = quickhull(&pts, default_epsilon(&pts)).unwrap();
        assert_eq!(h1.faces, h2.faces);
        assert_eq!(h1.vertex_indices, h2.vertex_indices);
    }

    #[test]
    fn outward_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_ball(&mut rng, 60, 1.0);
        let hull = quickhull(&pts, default_epsilon(&pts)).unwrap();
        let centroid: Vec3 = hull
            .vertex_indices
            .iter()
            .map(|&i| pts[i])
            .sum::<Vec3>()
            / hull.vertex_indices.len() as f64;
        for (f, n) in hull.faces.iter().zip(&hull.face_normals) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(&(pts[f[0]] - centroid)) > 0.0);
        }
    }
}
