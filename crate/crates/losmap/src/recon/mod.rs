//! Static-scene reconstruction: mean-plane TSDF integration of static
//! points and marching-cubes extraction of the zero level set.
//!
//! Each voxel tracks the running mean position and mean normal of the
//! static points that fell within the truncation distance of its center;
//! the voxel's signed distance is the distance of the voxel center to the
//! plane through the mean point with the mean normal, clamped to ±τ.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::field::{voxel_center, voxel_of, DynamicMask, PointLabel, VoxelKey};
use crate::geom::{triangle_cross, Vec3};
use crate::mesh::MeshFormat;
use crate::scan::{io, ScanFrame};
use crate::{Error, Result};

mod tables;

#[derive(Debug, Clone, Default)]
pub struct TsdfVoxel {
    pub sdf: f64,
    pub weight: f64,
    pub point_count: u64,
    point_sum: Vec3,
    normal_sum: Vec3,
}

impl TsdfVoxel {
    pub fn mean_point(&self) -> Vec3 {
        self.point_sum / self.point_count as f64
    }

    /// Unit mean normal; `None` if the accumulated normals cancel out.
    pub fn mean_normal(&self) -> Option<Vec3> {
        let n = self.normal_sum.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self.normal_sum / n)
        }
    }
}

/// Sparse voxel signed-distance storage for the fused static scene.
#[derive(Debug, Clone)]
pub struct TsdfGrid {
    pub l_vox: f64,
    /// Truncation distance τ; also the integration neighborhood radius.
    pub truncation: f64,
    voxels: HashMap<VoxelKey, TsdfVoxel>,
}

impl TsdfGrid {
    pub fn new(l_vox: f64, truncation: f64) -> Result<Self> {
        if !(l_vox > 0.0 && truncation > 0.0) {
            return Err(Error::Parameter(
                "voxel size and truncation must be positive".into(),
            ));
        }
        Ok(TsdfGrid {
            l_vox,
            truncation,
            voxels: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn get(&self, k: &VoxelKey) -> Option<&TsdfVoxel> {
        self.voxels.get(k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &TsdfVoxel)> {
        self.voxels.iter()
    }

    /// Integrates one frame: every static-labeled point with a valid normal
    /// and within `update_radius` of the sensor contributes its world
    /// position and world normal to all voxels whose centers lie within τ.
    /// Dynamic, unobserved, and null-normal points contribute nothing.
    pub fn integrate(
        &mut self,
        frame: &ScanFrame,
        normals: &[Option<Vec3>],
        mask: &DynamicMask,
        update_radius: f64,
    ) {
        assert_eq!(normals.len(), frame.points.len());
        assert_eq!(mask.labels.len(), frame.points.len());
        let reach = (self.truncation / self.l_vox).ceil() as i32;
        for (i, p) in frame.points.iter().enumerate() {
            if mask.labels[i] != PointLabel::Static {
                continue;
            }
            let n_local = match normals[i] {
                Some(n) => n,
                None => continue,
            };
            if p.norm() > update_radius {
                continue;
            }
            let p_world = frame.to_world(*p);
            let n_world = frame.pose.dir_to_world(n_local);
            let base = voxel_of(&p_world, self.l_vox);
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    for dk in -reach..=reach {
                        let key = [base[0] + di, base[1] + dj, base[2] + dk];
                        let center = voxel_center(key, self.l_vox);
                        if (center - p_world).norm() > self.truncation {
                            continue;
                        }
                        let v = self.voxels.entry(key).or_default();
                        v.point_sum += p_world;
                        v.normal_sum += n_world;
                        v.point_count += 1;
                        v.weight += 1.0;
                        if let Some(mean_n) = v.mean_normal() {
                            let d = mean_n.dot(&(center - v.mean_point()));
                            v.sdf = d.clamp(-self.truncation, self.truncation);
                        }
                    }
                }
            }
        }
    }

    /// Writes the grid as CSV rows `i,j,k,sdf,weight`, sorted by key.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<(&VoxelKey, &TsdfVoxel)> = self.voxels.iter().collect();
        rows.sort_unstable_by_key(|(k, _)| **k);
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "i,j,k,sdf,weight").map_err(|e| Error::io(path, e))?;
        for (k, v) in rows {
            writeln!(w, "{},{},{},{},{}", k[0], k[1], k[2], v.sdf, v.weight)
                .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Extracted world-frame surface.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Per-vertex normals: area-weighted average of incident face normals.
    pub normals: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn export(&self, path: &Path, format: MeshFormat) -> Result<()> {
        match format {
            MeshFormat::Ply => {
                io::write_ply_mesh(path, &self.vertices, Some(&self.normals), &self.faces, true)
            }
            MeshFormat::Obj => io::write_obj_mesh(path, &self.vertices, Some(&self.normals), &self.faces),
        }
    }

    /// Deterministic surface sampling: each triangle is covered by a
    /// barycentric grid fine enough that sample spacing stays below
    /// `spacing`. Used when comparing the mesh against reference surfaces.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vec3> {
        let mut samples = Vec::new();
        for f in &self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            let max_edge = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let n = (max_edge / spacing).ceil().max(1.0) as usize;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let u = i as f64 / n as f64;
                    let v = j as f64 / n as f64;
                    samples.push(a + (b - a) * u + (c - a) * v);
                }
            }
        }
        samples
    }
}

/// Corner offsets of a marching-cubes cell in the classic numbering.
const CORNERS: [[i32; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Cell edges as corner pairs, matching [`tables::TRIANGLE_TABLE`].
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Marching cubes over the dual grid of voxel centers. Only cells whose
/// eight corner voxels all carry weight are polygonized; vertices are
/// deduplicated across cells and zero-area triangles are dropped.
pub fn extract_mesh(grid: &TsdfGrid) -> TriangleMesh {
    let mut keys: Vec<VoxelKey> = grid.iter().map(|(k, _)| *k).collect();
    keys.sort_unstable();

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // One shared vertex per crossed cell edge, keyed by (low corner, axis).
    let mut edge_vertex: HashMap<(VoxelKey, u8), usize> = HashMap::new();

    for base in keys {
        let mut corner_keys = [[0i32; 3]; 8];
        let mut values = [0.0f64; 8];
        let mut complete = true;
        for (c, off) in CORNERS.iter().enumerate() {
            let key = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
            corner_keys[c] = key;
            match grid.get(&key) {
                Some(v) if v.weight > 0.0 => values[c] = v.sdf,
                _ => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        let mut cube_index = 0usize;
        for (c, v) in values.iter().enumerate() {
            if *v < 0.0 {
                cube_index |= 1 << c;
            }
        }
        if cube_index == 0 || cube_index == 255 {
            continue;
        }

        let mut cell_verts = [usize::MAX; 12];
        let tri_row = &tables::TRIANGLE_TABLE[cube_index];
        let mut used = [false; 12];
        let mut i = 0;
        while i < 16 && tri_row[i] >= 0 {
            used[tri_row[i] as usize] = true;
            i += 1;
        }
        for (e, pair) in EDGES.iter().enumerate() {
            if !used[e] {
                continue;
            }
            let (c0, c1) = (pair[0], pair[1]);
            let k0 = corner_keys[c0];
            let k1 = corner_keys[c1];
            let axis = (0..3).find(|&a| k0[a] != k1[a]).unwrap() as u8;
            let low = if k0[axis as usize] < k1[axis as usize] {
                k0
            } else {
                k1
            };
            let id = *edge_vertex.entry((low, axis)).or_insert_with(|| {
                let (v0, v1) = (values[c0], values[c1]);
                let p0 = voxel_center(k0, grid.l_vox);
                let p1 = voxel_center(k1, grid.l_vox);
                let t = if (v1 - v0).abs() < 1e-300 {
                    0.5
                } else {
                    (0.0 - v0) / (v1 - v0)
                };
                vertices.push(p0 + (p1 - p0) * t.clamp(0.0, 1.0));
                vertices.len() - 1
            });
            cell_verts[e] = id;
        }

        let mut i = 0;
        while i < 16 && tri_row[i] >= 0 {
            let tri = [
                cell_verts[tri_row[i] as usize],
                cell_verts[tri_row[i + 1] as usize],
                cell_verts[tri_row[i + 2] as usize],
            ];
            faces.push(tri);
            i += 3;
        }
    }

    // Drop degenerate triangles (zero-crossing exactly at a corner collapses
    // an edge) and compute area-weighted vertex normals from the rest.
    let mut kept = Vec::with_capacity(faces.len());
    let mut normals = vec![Vec3::zeros(); vertices.len()];
    for f in faces {
        let cross = triangle_cross(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if cross.norm() * 0.5 <= 1e-12 {
            continue;
        }
        for &v in &f {
            normals[v] += cross;
        }
        kept.push(f);
    }
    for n in &mut normals {
        let norm = n.norm();
        if norm > 1e-300 {
            *n /= norm;
        }
    }
    TriangleMesh {
        vertices,
        normals,
        faces: kept,
    }
}
