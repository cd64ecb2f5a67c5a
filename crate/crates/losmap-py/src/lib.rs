//! Python bindings for the losmap toolkit.
//!
//! Exposes the main operations — mirror-kernel inversion, convex hulls,
//! single-frame boundary meshing, the incremental pipeline (line-of-sight
//! field + moving-object labels + TSDF static mesh), the scan simulator,
//! and the evaluation metrics — over plain lists and tuples.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use losmap::field::{self, Occupancy, PointLabel};
use losmap::geom::{Pose, Vec3};
use losmap::hull;
use losmap::mesh::{self, GhprParams, VIEWPOINT};
use losmap::metrics;
use losmap::pipeline;
use losmap::scan::{ScanFrame, Trajectory};
use losmap::sim;
use losmap::PipelineConfig;

type Triple = (f64, f64, f64);

fn err(e: losmap::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_vec3s(points: &[Triple]) -> Vec<Vec3> {
    points.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect()
}

fn from_vec3(v: &Vec3) -> Triple {
    (v.x, v.y, v.z)
}

fn pose_from_tuple(p: (f64, f64, f64, f64, f64, f64, f64)) -> PyResult<Pose> {
    Pose::from_parts(Vec3::new(p.0, p.1, p.2), p.3, p.4, p.5, p.6).map_err(err)
}

/// Mirror-kernel radial inversion about the origin.
#[pyfunction]
fn invert(points: Vec<Triple>, gamma: f64) -> PyResult<Vec<Triple>> {
    let inverted = mesh::ghpr_invert(&to_vec3s(&points), gamma).map_err(err)?;
    Ok(inverted.iter().map(from_vec3).collect())
}

/// Convex hull: returns (hull vertex indices, triangular faces).
#[pyfunction]
fn convex_hull(points: Vec<Triple>) -> PyResult<(Vec<usize>, Vec<(usize, usize, usize)>)> {
    let pts = to_vec3s(&points);
    let h = hull::quickhull(&pts, hull::default_epsilon(&pts))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((
        h.vertex_indices,
        h.faces.iter().map(|f| (f[0], f[1], f[2])).collect(),
    ))
}

/// A single-frame boundary mesh.
#[pyclass]
struct FrameMesh {
    inner: mesh::FrameMesh,
}

#[pymethods]
impl FrameMesh {
    /// Retained surface faces as point-index triples; the synthetic
    /// viewpoint vertex is reported as -1.
    fn faces(&self) -> Vec<(i64, i64, i64)> {
        let idx = |v: usize| if v == VIEWPOINT { -1 } else { v as i64 };
        self.inner
            .retained_faces()
            .map(|f| (idx(f.vertices[0]), idx(f.vertices[1]), idx(f.vertices[2])))
            .collect()
    }

    /// Per-point unit normals (None where no retained face touches a point).
    fn point_normals(&self) -> Vec<Option<Triple>> {
        self.inner
            .point_normals
            .iter()
            .map(|n| n.map(|n| from_vec3(&n)))
            .collect()
    }

    /// Confidence weight of each retained face.
    fn face_weights(&self) -> Vec<f64> {
        self.inner.retained_faces().map(|f| f.weight).collect()
    }

    fn surface_face_count(&self) -> usize {
        self.inner.surface_faces().count()
    }

    fn culled_face_count(&self) -> usize {
        self.inner.faces.iter().filter(|f| f.culled).count()
    }
}

/// Meshes one sensor-local point cloud (identity pose).
#[pyfunction]
#[pyo3(signature = (points, gamma=None, sector_angle=None, w_min=None))]
fn mesh_frame(
    points: Vec<Triple>,
    gamma: Option<f64>,
    sector_angle: Option<f64>,
    w_min: Option<f64>,
) -> PyResult<FrameMesh> {
    let defaults = GhprParams::default();
    let params = GhprParams::new(
        gamma.unwrap_or(defaults.gamma),
        sector_angle.unwrap_or(defaults.sector_angle),
        w_min.unwrap_or(defaults.w_min),
    )
    .map_err(err)?;
    let frame = ScanFrame::new(0, 0.0, Pose::identity(), to_vec3s(&points)).map_err(err)?;
    let inner = mesh::build_frame_mesh(&frame, &params).map_err(err)?;
    Ok(FrameMesh { inner })
}

/// The incremental mapping pipeline: feed posed frames, read back dynamic
/// labels, free-space queries, and the fused static mesh.
#[pyclass]
struct Pipeline {
    inner: pipeline::Pipeline,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (l_vox=None, update_radius=None, gamma=None, sector_angle=None, w_min=None, tsdf_truncation=None))]
    fn new(
        l_vox: Option<f64>,
        update_radius: Option<f64>,
        gamma: Option<f64>,
        sector_angle: Option<f64>,
        w_min: Option<f64>,
        tsdf_truncation: Option<f64>,
    ) -> PyResult<Self> {
        let mut config = PipelineConfig::default();
        if let Some(v) = l_vox {
            config.field.l_vox = v;
            config.tsdf_truncation = 1.5 * v;
        }
        if let Some(v) = update_radius {
            config.field.update_radius = v;
        }
        if let Some(v) = gamma {
            config.ghpr.gamma = v;
        }
        if let Some(v) = sector_angle {
            config.ghpr.sector_angle = v;
        }
        if let Some(v) = w_min {
            config.ghpr.w_min = v;
        }
        if let Some(v) = tsdf_truncation {
            config.tsdf_truncation = v;
        }
        Ok(Pipeline {
            inner: pipeline::Pipeline::new(config).map_err(err)?,
        })
    }

    /// Processes one frame; `pose` is (tx, ty, tz, qx, qy, qz, qw).
    /// Returns {"labels": [0|1|2, ...], "mesh_ms", "field_ms", "total_ms",
    /// "surface_faces"}.
    fn process_frame<'py>(
        &mut self,
        py: Python<'py>,
        timestamp: f64,
        pose: (f64, f64, f64, f64, f64, f64, f64),
        points: Vec<Triple>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let frame_id = self.inner.frames_processed();
        let frame = ScanFrame::new(frame_id, timestamp, pose_from_tuple(pose)?, to_vec3s(&points))
            .map_err(err)?;
        let out = self.inner.process_frame(&frame).map_err(err)?;
        let dict = PyDict::new(py);
        dict.set_item(
            "labels",
            out.mask.labels.iter().map(|&l| l as u8).collect::<Vec<u8>>(),
        )?;
        dict.set_item("mesh_ms", out.timing.mesh_ms)?;
        dict.set_item("field_ms", out.timing.field_ms)?;
        dict.set_item("total_ms", out.timing.total_ms)?;
        dict.set_item("surface_faces", out.mesh.surface_faces().count())?;
        Ok(dict)
    }

    /// Free-space state of a world position: "free", "occupied", "unknown".
    fn is_free(&self, x: f64, y: f64, z: f64) -> &'static str {
        match self.inner.field.is_free(&Vec3::new(x, y, z)) {
            Occupancy::Free => "free",
            Occupancy::Occupied => "occupied",
            Occupancy::Unknown => "unknown",
        }
    }

    fn field_voxel_count(&self) -> usize {
        self.inner.field.len()
    }

    fn export_field_csv(&self, path: &str) -> PyResult<()> {
        field::export_field_csv(&self.inner.field, Path::new(path)).map_err(err)
    }

    /// Extracts the fused static mesh: (vertices, faces).
    fn static_mesh(&self) -> (Vec<Triple>, Vec<(usize, usize, usize)>) {
        let m = self.inner.static_mesh();
        (
            m.vertices.iter().map(from_vec3).collect(),
            m.faces.iter().map(|f| (f[0], f[1], f[2])).collect(),
        )
    }
}

/// Simulates a scan sequence; scene/scanner/trajectory are the text-file
/// contents (see the repository README for the grammars). Returns one dict
/// per frame with sensor-local points and exact ground truth.
#[pyfunction]
#[pyo3(signature = (scene, traj, frames, seed, scanner=None))]
fn simulate<'py>(
    py: Python<'py>,
    scene: &str,
    traj: &str,
    frames: usize,
    seed: u64,
    scanner: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let scene = sim::parse_scene_str(scene, Path::new("<scene>")).map_err(err)?;
    let scanner = match scanner {
        Some(s) => sim::parse_scanner_str(s, Path::new("<scanner>")).map_err(err)?,
        None => sim::ScannerSpec::default(),
    };
    let mut samples = Vec::new();
    for (ln, line) in traj.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = t
            .split_whitespace()
            .filter_map(|s| s.parse().ok())
            .collect();
        if cols.len() != 8 {
            return Err(PyValueError::new_err(format!(
                "trajectory line {}: expected 8 fields",
                ln + 1
            )));
        }
        let pose = Pose::from_parts(
            Vec3::new(cols[1], cols[2], cols[3]),
            cols[4],
            cols[5],
            cols[6],
            cols[7],
        )
        .map_err(err)?;
        samples.push((cols[0], pose));
    }
    let trajectory = Trajectory::new(samples).map_err(err)?;
    let sim_frames = sim::simulate(&scene, &scanner, &trajectory, frames, seed).map_err(err)?;

    sim_frames
        .iter()
        .map(|f| {
            let dict = PyDict::new(py);
            dict.set_item("timestamp", f.frame.timestamp)?;
            let q = f.frame.pose.rotation.quaternion();
            dict.set_item(
                "pose",
                (
                    f.frame.pose.position.x,
                    f.frame.pose.position.y,
                    f.frame.pose.position.z,
                    q.i,
                    q.j,
                    q.k,
                    q.w,
                ),
            )?;
            dict.set_item(
                "points",
                f.frame.points.iter().map(from_vec3).collect::<Vec<_>>(),
            )?;
            dict.set_item(
                "gt_normals",
                f.gt_normals.iter().map(from_vec3).collect::<Vec<_>>(),
            )?;
            dict.set_item("gt_dynamic", f.gt_dynamic.clone())?;
            Ok(dict)
        })
        .collect()
}

/// Point-cloud reconstruction metrics at threshold `tau`.
#[pyfunction]
fn cloud_metrics<'py>(
    py: Python<'py>,
    recon: Vec<Triple>,
    gt: Vec<Triple>,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::cloud_metrics(&to_vec3s(&recon), &to_vec3s(&gt), tau).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("rmse", m.rmse)?;
    dict.set_item("avg_hausdorff", m.avg_hausdorff)?;
    dict.set_item("precision", m.precision)?;
    dict.set_item("recall", m.recall)?;
    dict.set_item("f1", m.f1)?;
    dict.set_item("acc95", m.acc95)?;
    Ok(dict)
}

/// Mean |cos| between estimated normals (None allowed) and ground truth.
#[pyfunction]
fn normal_similarity(est: Vec<Option<Triple>>, gt: Vec<Triple>) -> PyResult<f64> {
    let est: Vec<Option<Vec3>> = est
        .iter()
        .map(|n| n.map(|(x, y, z)| Vec3::new(x, y, z)))
        .collect();
    let r = metrics::normal_similarity(&est, &to_vec3s(&gt), None).map_err(err)?;
    Ok(r.mean_cosine)
}

/// k-NN PCA normal baseline.
#[pyfunction]
fn pca_normals(points: Vec<Triple>, k: usize) -> Vec<Option<Triple>> {
    metrics::pca_normals(&to_vec3s(&points), k)
        .iter()
        .map(|n| n.map(|n| from_vec3(&n)))
        .collect()
}

/// Per-point labels from a detected mask: 0 static, 1 dynamic, 2 unobserved.
#[pyfunction]
fn dynamic_metrics<'py>(
    py: Python<'py>,
    labels: Vec<u8>,
    gt_dynamic: Vec<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    let mask = field::DynamicMask {
        frame_id: 0,
        labels: labels
            .iter()
            .map(|&v| PointLabel::from_u8(v).ok_or_else(|| PyValueError::new_err("bad label")))
            .collect::<PyResult<_>>()?,
    };
    let m = metrics::dynamic_metrics(&mask, &gt_dynamic).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("precision", m.precision)?;
    dict.set_item("recall", m.recall)?;
    dict.set_item("f1", m.f1)?;
    dict.set_item("unobserved", m.unobserved)?;
    Ok(dict)
}

#[pymodule(name = "losmap")]
fn pymodule(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(convex_hull, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_frame, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(cloud_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(normal_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(pca_normals, m)?)?;
    m.add_function(wrap_pyfunction!(dynamic_metrics, m)?)?;
    m.add_class::<FrameMesh>()?;
    m.add_class::<Pipeline>()?;
    Ok(())
}
