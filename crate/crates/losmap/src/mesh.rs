//! Single-frame boundary meshing.
//!
//! A sweep's points are radially inverted about the sensor with a mirror
//! kernel, so that the convex hull of the inverted set (plus the viewpoint)
//! yields the mesh connectivity of the visible surface. Points are
//! partitioned into azimuthal pie-slice sectors that are meshed in parallel;
//! each sector plus the viewpoint forms a closed solid. Faces nearly
//! coplanar with the viewing rays (including the artificial sector walls)
//! carry no physical surface and are culled by a confidence weight; the
//! same weights drive the per-point normal estimate.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;

use crate::geom::{azimuth, triangle_cross, Pose, Vec3};
use crate::hull::{self, HullError};
use crate::scan::{io, ScanFrame};
use crate::{Error, Result};

/// Face vertex slot referring to the synthetic viewpoint vertex (the sensor
/// position) rather than a frame point.
pub const VIEWPOINT: usize = usize::MAX;

/// Parameters of the inversion/meshing stage.
#[derive(Debug, Clone, Copy)]
pub struct GhprParams {
    /// Mirror-kernel scale γ > 1.
    pub gamma: f64,
    /// Azimuthal width θ of one sector; 2π/θ is rounded to a whole count.
    pub sector_angle: f64,
    /// Faces with confidence weight below this (and not touching the
    /// viewpoint) are culled as pseudo surfaces.
    pub w_min: f64,
}

impl Default for GhprParams {
    fn default() -> Self {
        GhprParams {
            gamma: 10f64.powf(3.7),
            sector_angle: TAU / 12.0,
            w_min: 0.05,
        }
    }
}

impl GhprParams {
    pub fn new(gamma: f64, sector_angle: f64, w_min: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Parameter(format!("gamma must be > 1, got {gamma}")));
        }
        if !(sector_angle > 0.0 && sector_angle <= TAU) {
            return Err(Error::Parameter(format!(
                "sector_angle must be in (0, 2π], got {sector_angle}"
            )));
        }
        if !(0.0..=1.0).contains(&w_min) {
            return Err(Error::Parameter(format!(
                "w_min must be in [0, 1], got {w_min}"
            )));
        }
        let count = (TAU / sector_angle).round().max(1.0);
        Ok(GhprParams {
            gamma,
            sector_angle: TAU / count,
            w_min,
        })
    }

    pub fn sector_count(&self) -> usize {
        (TAU / self.sector_angle).round() as usize
    }
}

/// One triangle of a frame mesh. Vertices index the frame's points;
/// [`VIEWPOINT`] refers to the sensor vertex at the sensor-local origin.
#[derive(Debug, Clone, Copy)]
pub struct MeshFace {
    pub vertices: [usize; 3],
    /// Unit normal oriented toward the viewpoint.
    pub normal: Vec3,
    /// Confidence weight in [0, 1]: cosine between the normal and the
    /// direction from the face centroid to the viewpoint.
    pub weight: f64,
    pub sector: u32,
    pub viewpoint_incident: bool,
    /// Pseudo surface dropped from the usable mesh (kept here for
    /// diagnostics and watertightness checks).
    pub culled: bool,
}

impl MeshFace {
    /// Part of the usable surface: retained and not incident to the sensor.
    pub fn is_surface(&self) -> bool {
        !self.culled && !self.viewpoint_incident
    }
}

/// Triangle mesh over one frame's points with confidence weights and
/// per-point normals. Everything is sensor-local; `pose` maps to world.
#[derive(Debug, Clone)]
pub struct FrameMesh {
    pub frame_id: u64,
    pub pose: Pose,
    pub points: Vec<Vec3>,
    /// All faces produced by sector hulls, culled ones included (flagged).
    pub faces: Vec<MeshFace>,
    /// Unit normal per point; `None` when no retained face touches it.
    pub point_normals: Vec<Option<Vec3>>,
    /// Which sectors produced a hull.
    pub meshed_sectors: Vec<bool>,
    pub sector_angle: f64,
}

impl FrameMesh {
    /// Faces forming the physical surface estimate (retained, no viewpoint).
    pub fn surface_faces(&self) -> impl Iterator<Item = &MeshFace> {
        self.faces.iter().filter(|f| f.is_surface())
    }

    /// Retained faces including the viewpoint cone (the closed solid).
    pub fn retained_faces(&self) -> impl Iterator<Item = &MeshFace> {
        self.faces.iter().filter(|f| !f.culled)
    }

    /// Sensor-local vertex positions of a face.
    pub fn face_positions(&self, face: &MeshFace) -> [Vec3; 3] {
        face.vertices.map(|v| {
            if v == VIEWPOINT {
                Vec3::zeros()
            } else {
                self.points[v]
            }
        })
    }

    /// True if the sector covering azimuth `az` (sensor frame) was meshed.
    pub fn sector_covered(&self, az: f64) -> bool {
        let idx = sector_of_azimuth(az, self.sector_angle, self.meshed_sectors.len());
        self.meshed_sectors[idx]
    }
}

/// Mirror-kernel inversion: p ↦ (γ·M − ‖p‖) · p/‖p‖ with M the largest
/// input norm. Near points map far and far points near along the same ray.
pub fn ghpr_invert(points: &[Vec3], gamma: f64) -> Result<Vec<Vec3>> {
    let max_norm = max_norm_checked(points)?;
    Ok(points
        .iter()
        .map(|p| invert_one(*p, gamma, max_norm))
        .collect())
}

fn max_norm_checked(points: &[Vec3]) -> Result<f64> {
    let mut max_norm = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let r = p.norm();
        if r <= 0.0 {
            return Err(Error::ZeroNormPoint { index: i });
        }
        max_norm = max_norm.max(r);
    }
    Ok(max_norm)
}

#[inline]
fn invert_one(p: Vec3, gamma: f64, max_norm: f64) -> Vec3 {
    let r = p.norm();
    p * ((gamma * max_norm - r) / r)
}

fn sector_of_azimuth(az: f64, sector_angle: f64, count: usize) -> usize {
    ((az / sector_angle) as usize).min(count - 1)
}

/// Assigns each point to the azimuthal sector containing it. Sectors are
/// half-open bins `[i·θ, (i+1)·θ)` over [0, 2π); their union is all indices.
pub fn partition_sectors(points: &[Vec3], sector_angle: f64) -> Vec<Vec<usize>> {
    let count = (TAU / sector_angle).round().max(1.0) as usize;
    let width = TAU / count as f64;
    let mut sectors = vec![Vec::new(); count];
    for (i, p) in points.iter().enumerate() {
        sectors[sector_of_azimuth(azimuth(p), width, count)].push(i);
    }
    sectors
}

/// Meshes one sector: inverts its points, hulls them together with the
/// viewpoint, and maps hull faces back to frame point indices. `max_norm`
/// must be the whole frame's maximum norm so that the inversion is identical
/// across partition granularities.
pub fn mesh_sector(
    points: &[Vec3],
    sector: &[usize],
    sector_id: u32,
    params: &GhprParams,
    max_norm: f64,
) -> std::result::Result<Vec<MeshFace>, HullError> {
    if sector.len() < 3 {
        return Err(HullError::TooFewPoints(sector.len() + 1));
    }
    let mut inverted: Vec<Vec3> = Vec::with_capacity(sector.len() + 1);
    for &i in sector {
        inverted.push(invert_one(points[i], params.gamma, max_norm));
    }
    let viewpoint_local = inverted.len();
    inverted.push(Vec3::zeros());

    let hull = hull::quickhull(&inverted, hull::default_epsilon(&inverted))?;

    let mut faces = Vec::with_capacity(hull.faces.len());
    for hull_face in &hull.faces {
        let vertices = hull_face.map(|v| {
            if v == viewpoint_local {
                VIEWPOINT
            } else {
                sector[v]
            }
        });
        let viewpoint_incident = vertices.contains(&VIEWPOINT);
        let pos = vertices.map(|v| if v == VIEWPOINT { Vec3::zeros() } else { points[v] });

        let cross = triangle_cross(pos[0], pos[1], pos[2]);
        let area2 = cross.norm();
        let max_edge2 = (pos[1] - pos[0])
            .norm_squared()
            .max((pos[2] - pos[1]).norm_squared())
            .max((pos[0] - pos[2]).norm_squared());
        let centroid = (pos[0] + pos[1] + pos[2]) / 3.0;
        let to_viewpoint = -centroid;
        let dist = to_viewpoint.norm();

        // Slivers from (near-)collinear points have no meaningful normal;
        // the relative test keeps culling scale-invariant.
        let (normal, weight, degenerate) = if area2 > 1e-12 * max_edge2 && dist > 1e-300 {
            let mut n = cross / area2;
            let mut w = n.dot(&to_viewpoint) / dist;
            if w < 0.0 {
                n = -n;
                w = -w;
            }
            (n, w.min(1.0), false)
        } else {
            // Zero-area triangle in the original space; keep the face for
            // edge closure but never use it as surface.
            (to_viewpoint / dist.max(1e-300), 0.0, true)
        };

        let (weight, culled) = if viewpoint_incident {
            (0.0, false)
        } else {
            (weight, degenerate || weight < params.w_min)
        };

        faces.push(MeshFace {
            vertices,
            normal,
            weight,
            sector: sector_id,
            viewpoint_incident,
            culled,
        });
    }
    Ok(faces)
}

/// Weighted point normals: for each point, the confidence-weighted average
/// of the normals of its adjacent surface faces, normalized. Points with no
/// retained adjacent face (or a vanishing weighted sum) get `None`.
pub fn estimate_normals(point_count: usize, faces: &[MeshFace]) -> Vec<Option<Vec3>> {
    let mut sums = vec![Vec3::zeros(); point_count];
    let mut touched = vec![false; point_count];
    for face in faces.iter().filter(|f| f.is_surface()) {
        for &v in &face.vertices {
            sums[v] += face.normal * face.weight;
            touched[v] = true;
        }
    }
    sums.into_iter()
        .zip(touched)
        .map(|(s, t)| {
            if !t {
                return None;
            }
            let n = s.norm();
            if n < 1e-12 {
                None
            } else {
                Some(s / n)
            }
        })
        .collect()
}

/// Full single-frame meshing: partition into sectors, hull each sector in
/// parallel, merge, and estimate point normals. Sectors with fewer than
/// three points or degenerate hulls are skipped (reported via
/// `meshed_sectors`); an entirely degenerate frame is an error.
pub fn build_frame_mesh(frame: &ScanFrame, params: &GhprParams) -> Result<FrameMesh> {
    if frame.points.is_empty() {
        return Err(Error::EmptyMesh {
            frame_id: frame.frame_id,
        });
    }
    let max_norm = max_norm_checked(&frame.points)?;
    let sectors = partition_sectors(&frame.points, params.sector_angle);

    let results: Vec<std::result::Result<Vec<MeshFace>, HullError>> = sectors
        .par_iter()
        .enumerate()
        .map(|(s, sector)| mesh_sector(&frame.points, sector, s as u32, params, max_norm))
        .collect();

    let mut faces = Vec::new();
    let mut meshed = vec![false; sectors.len()];
    for (s, result) in results.into_iter().enumerate() {
        match result {
            Ok(sector_faces) => {
                faces.extend(sector_faces);
                meshed[s] = true;
            }
            Err(HullError::TooFewPoints(n)) if n <= 3 => {
                // Empty or near-empty azimuth range; not worth a warning.
                log::debug!("frame {}: sector {s} has too few points", frame.frame_id);
            }
            Err(e) => {
                log::warn!("frame {}: sector {s} skipped: {e}", frame.frame_id);
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh {
            frame_id: frame.frame_id,
        });
    }
    let point_normals = estimate_normals(frame.points.len(), &faces);
    Ok(FrameMesh {
        frame_id: frame.frame_id,
        pose: frame.pose,
        points: frame.points.clone(),
        faces,
        point_normals,
        meshed_sectors: meshed,
        sector_angle: TAU / sectors.len() as f64,
    })
}

/// Mesh export formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Ply,
    Obj,
}

/// Writes the frame mesh in world coordinates with per-vertex normals.
/// Viewpoint-incident faces are excluded unless `include_viewpoint_faces`.
pub fn export_mesh(
    mesh: &FrameMesh,
    path: &Path,
    format: MeshFormat,
    include_viewpoint_faces: bool,
) -> Result<()> {
    let mut vertices: Vec<Vec3> = mesh.points.iter().map(|p| mesh.pose.to_world(*p)).collect();
    let mut normals: Vec<Vec3> = mesh
        .point_normals
        .iter()
        .map(|n| n.map(|n| mesh.pose.dir_to_world(n)).unwrap_or_else(Vec3::zeros))
        .collect();
    let viewpoint_id = vertices.len();
    let mut need_viewpoint = false;

    let mut faces = Vec::new();
    for face in mesh.retained_faces() {
        if face.viewpoint_incident && !include_viewpoint_faces {
            continue;
        }
        let f = face.vertices.map(|v| {
            if v == VIEWPOINT {
                need_viewpoint = true;
                viewpoint_id
            } else {
                v
            }
        });
        faces.push(f);
    }
    if need_viewpoint {
        vertices.push(mesh.pose.position);
        normals.push(Vec3::zeros());
    }
    match format {
        MeshFormat::Ply => io::write_ply_mesh(path, &vertices, Some(&normals), &faces, true),
        MeshFormat::Obj => io::write_obj_mesh(path, &vertices, Some(&normals), &faces),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::edges_closed;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn invert_matches_formula() {
        // γ=2, points at 10 and 5 along x: M=10, radii map to 10 and 15.
        let pts = vec![Vec3::new(10.0, 0.0, 0.0), Vec3::new(5.0, 0.0, 0.0)];
        let inv = ghpr_invert(&pts, 2.0).unwrap();
        assert_relative_eq!(inv[0], Vec3::new(10.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(inv[1], Vec3::new(15.0, 0.0, 0.0), epsilon = 1e-12);

        // Single point: the max-norm point maps onto radius (γ−1)·M.
        let inv = ghpr_invert(&[Vec3::new(0.0, 0.0, 7.0)], 2.0).unwrap();
        assert_relative_eq!(inv[0], Vec3::new(0.0, 0.0, 7.0), epsilon = 1e-12);
    }

    #[test]
    fn invert_rejects_zero_norm() {
        let r = ghpr_invert(&[Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()], 2.0);
        assert!(matches!(r, Err(Error::ZeroNormPoint { index: 1 })));
    }

    #[test]
    fn invert_preserves_rays_and_reverses_radial_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| {
                let dir = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                )
                .normalize();
                dir * rng.random_range(1.0..60.0)
            })
            .collect();
        let inv = ghpr_invert(&pts, 10f64.powf(3.7)).unwrap();
        for (p, q) in pts.iter().zip(&inv) {
            assert!(p.cross(q).norm() < 1e-6 * q.norm(), "ray direction changed");
            assert!(p.dot(q) > 0.0);
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let before = pts[i].norm() < pts[j].norm();
                let after = inv[i].norm() > inv[j].norm();
                assert_eq!(before, after, "order reversal violated at ({i}, {j})");
            }
        }
    }

    #[test]
    fn twelve_sectors_by_default() {
        let params = GhprParams::default();
        assert_eq!(params.sector_count(), 12);
        // Boundary convention: a point infinitesimally below azimuth 0 wraps
        // to the last sector, exactly 0 goes to sector 0.
        let pts = vec![Vec3::new(1.0, 1e-9, 0.0), Vec3::new(1.0, -1e-9, 0.0)];
        let sectors = partition_sectors(&pts, params.sector_angle);
        assert!(sectors[0].contains(&0));
        assert!(sectors[11].contains(&1));
    }

    #[test]
    fn sectors_partition_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec3> = (0..100_000)
            .map(|_| {
                let az = rng.random_range(0.0..TAU);
                Vec3::new(az.cos() * 5.0, az.sin() * 5.0, rng.random_range(-1.0..1.0))
            })
            .collect();
        let sectors = partition_sectors(&pts, TAU / 12.0);
        assert_eq!(sectors.len(), 12);
        let total: usize = sectors.iter().map(|s| s.len()).sum();
        assert_eq!(total, pts.len());
        for s in &sectors {
            let frac = s.len() as f64 / pts.len() as f64;
            assert!((frac - 1.0 / 12.0).abs() < 0.02);
        }
    }

    #[test]
    fn simplex_sector_has_one_real_face() {
        // Three points plus the viewpoint form a tetrahedron after inversion:
        // three viewpoint-incident faces and one real face.
        let pts = vec![
            Vec3::new(5.0, 0.2, 0.0),
            Vec3::new(5.0, 1.0, 0.8),
            Vec3::new(5.2, 0.6, -0.5),
        ];
        let params = GhprParams::default();
        let faces = mesh_sector(&pts, &[0, 1, 2], 0, &params, 5.2).unwrap();
        assert_eq!(faces.len(), 4);
        assert_eq!(faces.iter().filter(|f| f.viewpoint_incident).count(), 3);
        assert_eq!(faces.iter().filter(|f| f.is_surface()).count(), 1);
    }

    #[test]
    fn facing_wall_faces_have_high_weight() {
        // A flat wall patch at x = 8 m facing the sensor.
        let mut points = Vec::new();
        for iy in -20..=20 {
            for iz in -8..=8 {
                points.push(Vec3::new(8.0, iy as f64 * 0.05, iz as f64 * 0.12));
            }
        }
        let frame = ScanFrame::new(0, 0.0, Pose::identity(), points).unwrap();
        let mesh = build_frame_mesh(&frame, &GhprParams::default()).unwrap();
        let surface: Vec<&MeshFace> = mesh.surface_faces().collect();
        assert!(!surface.is_empty());
        for f in &surface {
            assert!(
                f.weight >= 0.9,
                "face weight {} below 0.9 for a frontal wall",
                f.weight
            );
        }
    }

    #[test]
    fn grazing_wall_is_culled() {
        // A wall tilted to 2° from the viewing rays has weight ≈ cos 88° ≈
        // 0.035 < 0.05 everywhere, so every face of it is culled.
        let mut points = Vec::new();
        // Plane containing rays at ~grazing: normal nearly perpendicular to
        // the ray direction (1,0,0): rotate wall normal 88° away.
        let theta: f64 = 88f64.to_radians();
        let normal = Vec3::new(theta.cos(), theta.sin(), 0.0);
        // Build a grid on the plane through (8, 0, 0).
        let u = Vec3::new(-normal.y, normal.x, 0.0);
        let v = Vec3::new(0.0, 0.0, 1.0);
        for iu in -30..=30 {
            for iv in -6..=6 {
                let p = Vec3::new(8.0, 0.0, 0.0) + u * (iu as f64 * 0.08) + v * (iv as f64 * 0.15);
                points.push(p);
            }
        }
        let frame = ScanFrame::new(0, 0.0, Pose::identity(), points).unwrap();
        let mesh = build_frame_mesh(&frame, &GhprParams::default()).unwrap();
        let lit: Vec<&MeshFace> = mesh
            .faces
            .iter()
            .filter(|f| !f.viewpoint_incident && !f.culled && f.weight > 0.05)
            .collect();
        assert!(
            lit.is_empty(),
            "{} grazing faces survived the cull",
            lit.len()
        );
    }

    #[test]
    fn sector_meshes_are_edge_closed_pre_cull() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut points = Vec::new();
        for _ in 0..3000 {
            let az = rng.random_range(0.0..TAU);
            let el = rng.random_range(-0.25..0.25f64);
            let r = rng.random_range(3.0..25.0);
            points.push(Vec3::new(
                r * el.cos() * az.cos(),
                r * el.cos() * az.sin(),
                r * el.sin(),
            ));
        }
        let frame = ScanFrame::new(0, 0.0, Pose::identity(), points).unwrap();
        let mesh = build_frame_mesh(&frame, &GhprParams::default()).unwrap();
        for s in 0..mesh.meshed_sectors.len() {
            if !mesh.meshed_sectors[s] {
                continue;
            }
            let faces: Vec<[usize; 3]> = mesh
                .faces
                .iter()
                .filter(|f| f.sector == s as u32)
                .map(|f| f.vertices)
                .collect();
            assert!(edges_closed(&faces), "sector {s} pre-cull mesh not closed");
        }
        // Orientation rule holds for every face.
        for f in &mesh.faces {
            let pos = mesh.face_positions(f);
            let c = (pos[0] + pos[1] + pos[2]) / 3.0;
            assert!(f.normal.dot(&-c) >= -1e-9);
        }
        // All point normals unit or absent.
        for n in mesh.point_normals.iter().flatten() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_sector_tolerated() {
        // Points only in a 90° wedge; the other sectors are empty.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut points = Vec::new();
        for _ in 0..500 {
            let az = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let r = rng.random_range(2.0..10.0);
            points.push(Vec3::new(r * az.cos(), r * az.sin(), rng.random_range(-1.0..1.0)));
        }
        let frame = ScanFrame::new(0, 0.0, Pose::identity(), points).unwrap();
        let mesh = build_frame_mesh(&frame, &GhprParams::default()).unwrap();
        assert!(mesh.meshed_sectors.iter().any(|&m| m));
        assert!(mesh.meshed_sectors.iter().any(|&m| !m));
        assert!(!mesh.faces.is_empty());
    }

    #[test]
    fn weighted_normal_average() {
        // Two faces sharing point 0 with orthogonal normals and equal
        // weights: the point normal is the normalized sum.
        let faces = vec![
            MeshFace {
                vertices: [0, 1, 2],
                normal: Vec3::new(1.0, 0.0, 0.0),
                weight: 1.0,
                sector: 0,
                viewpoint_incident: false,
                culled: false,
            },
            MeshFace {
                vertices: [0, 2, 3],
                normal: Vec3::new(0.0, 1.0, 0.0),
                weight: 1.0,
                sector: 0,
                viewpoint_incident: false,
                culled: false,
            },
        ];
        let normals = estimate_normals(4, &faces);
        let expect = Vec3::new(1.0, 1.0, 0.0) / 2f64.sqrt();
        assert_relative_eq!(normals[0].unwrap(), expect, epsilon = 1e-12);
        // Constant-normal neighborhood reproduces the normal exactly.
        assert_relative_eq!(normals[1].unwrap(), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn null_normal_for_unreferenced_points() {
        let faces = vec![MeshFace {
            vertices: [0, 1, 2],
            normal: Vec3::new(0.0, 0.0, 1.0),
            weight: 0.5,
            sector: 0,
            viewpoint_incident: false,
            culled: false,
        }];
        let normals = estimate_normals(5, &faces);
        assert!(normals[3].is_none());
        assert!(normals[4].is_none());
        assert!(normals[0].is_some());
    }

    #[test]
    fn culling_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut points = Vec::new();
        for _ in 0..800 {
            let az = rng.random_range(0.0..TAU);
            let r = rng.random_range(4.0..20.0);
            points.push(Vec3::new(
                r * az.cos(),
                r * az.sin(),
                rng.random_range(-2.0..2.0),
            ));
        }
        let params = GhprParams::default();
        let frame = ScanFrame::new(0, 0.0, Pose::identity(), points.clone()).unwrap();
        let mesh = build_frame_mesh(&frame, &params).unwrap();
        let scaled: Vec<Vec3> = points.iter().map(|p| p * 7.5).collect();
        let frame_s = ScanFrame::new(0, 0.0, Pose::identity(), scaled).unwrap();
        let mesh_s = build_frame_mesh(&frame_s, &params).unwrap();
        assert_eq!(mesh.faces.len(), mesh_s.faces.len());
        for (a, b) in mesh.faces.iter().zip(&mesh_s.faces) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.culled, b.culled, "culling changed under scaling");
        }
    }
}
