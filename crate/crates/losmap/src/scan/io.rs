//! Readers and writers for point clouds (PLY, XYZ, KITTI bin), TUM
//! trajectories, and per-frame timestamp files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::geom::{Pose, Vec3};
use crate::scan::{IngestOptions, ScanFrame, Trajectory};
use crate::{Error, Result};

/// On-disk point cloud encodings supported at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ply,
    Xyz,
    KittiBin,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Ply => "ply",
            CloudFormat::Xyz => "xyz",
            CloudFormat::KittiBin => "bin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ply" => Some(CloudFormat::Ply),
            "xyz" => Some(CloudFormat::Xyz),
            "kitti_bin" | "bin" => Some(CloudFormat::KittiBin),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone)]
struct PlyProperty {
    name: String,
    ty: String,
    list_count_ty: Option<String>,
}

fn ply_scalar_size(ty: &str) -> Option<usize> {
    match ty {
        "char" | "uchar" | "int8" | "uint8" => Some(1),
        "short" | "ushort" | "int16" | "uint16" => Some(2),
        "int" | "uint" | "int32" | "uint32" | "float" | "float32" => Some(4),
        "double" | "float64" => Some(8),
        _ => None,
    }
}

/// Writes points as a PLY file with `x y z` float32 properties. The frame
/// timestamp, when given, is stored in a `comment timestamp <t>` header line.
pub fn write_ply_points(
    path: &Path,
    points: &[Vec3],
    timestamp: Option<f64>,
    binary: bool,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let fmt = if binary {
        "binary_little_endian"
    } else {
        "ascii"
    };
    let mut header = format!("ply\nformat {fmt} 1.0\n");
    if let Some(t) = timestamp {
        header.push_str(&format!("comment timestamp {t}\n"));
    }
    header.push_str(&format!(
        "element vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    ));
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    if binary {
        let mut buf = Vec::with_capacity(points.len() * 12);
        for p in points {
            buf.extend_from_slice(&(p.x as f32).to_le_bytes());
            buf.extend_from_slice(&(p.y as f32).to_le_bytes());
            buf.extend_from_slice(&(p.z as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    } else {
        for p in points {
            writeln!(w, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a PLY vertex cloud (ascii or binary little-endian). Returns the
/// points and the timestamp comment if one is present.
pub fn read_ply_points(path: &Path) -> Result<(Vec<Vec3>, Option<f64>)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // Header is always ascii lines terminated by "end_header".
    let mut line_start = 0usize;
    let mut line_no = 0usize;
    let mut encoding = None;
    let mut timestamp = None;
    let mut elements: Vec<(String, usize, Vec<PlyProperty>)> = Vec::new();
    let mut body_start = None;

    while line_start < data.len() {
        line_no += 1;
        let rel_end = data[line_start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| line_start + i)
            .unwrap_or(data.len());
        let raw = &data[line_start..rel_end];
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(path, line_no, "header is not valid utf-8"))?
            .trim_end_matches('\r')
            .trim();
        let next = rel_end + 1;

        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") | None => {}
            Some("format") => {
                encoding = match tok.next() {
                    Some("ascii") => Some(PlyEncoding::Ascii),
                    Some("binary_little_endian") => Some(PlyEncoding::BinaryLe),
                    other => {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("unsupported ply format {other:?}"),
                        ))
                    }
                };
            }
            Some("comment") => {
                let rest: Vec<&str> = tok.collect();
                if rest.len() == 2 && rest[0] == "timestamp" {
                    timestamp = rest[1].parse::<f64>().ok();
                }
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(path, line_no, "element missing name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, line_no, "element missing count"))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, line_no, "property before element"))?;
                let first = tok
                    .next()
                    .ok_or_else(|| Error::parse(path, line_no, "property missing type"))?;
                if first == "list" {
                    let count_ty = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "list missing count type"))?;
                    let ty = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "list missing value type"))?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "list missing name"))?;
                    elem.2.push(PlyProperty {
                        name: name.to_string(),
                        ty: ty.to_string(),
                        list_count_ty: Some(count_ty.to_string()),
                    });
                } else {
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "property missing name"))?;
                    elem.2.push(PlyProperty {
                        name: name.to_string(),
                        ty: first.to_string(),
                        list_count_ty: None,
                    });
                }
            }
            Some("end_header") => {
                body_start = Some(next);
                break;
            }
            Some(other) => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unexpected header keyword {other:?}"),
                ));
            }
        }
        line_start = next;
    }

    let body_start =
        body_start.ok_or_else(|| Error::parse(path, line_no, "missing end_header"))?;
    let encoding =
        encoding.ok_or_else(|| Error::parse(path, line_no, "missing format declaration"))?;

    let mut points = Vec::new();
    match encoding {
        PlyEncoding::BinaryLe => {
            let mut offset = body_start;
            for (name, count, props) in &elements {
                if name == "vertex" {
                    let mut xyz = [None; 3];
                    let mut record_size = 0usize;
                    for p in props {
                        if p.list_count_ty.is_some() {
                            return Err(Error::parse(
                                path,
                                line_no,
                                "list property in vertex element is unsupported",
                            ));
                        }
                        let size = ply_scalar_size(&p.ty).ok_or_else(|| {
                            Error::parse(path, line_no, format!("unknown type {}", p.ty))
                        })?;
                        for (k, axis) in ["x", "y", "z"].iter().enumerate() {
                            if p.name == *axis {
                                if p.ty != "float" && p.ty != "float32" {
                                    return Err(Error::parse(
                                        path,
                                        line_no,
                                        format!("binary vertex {} must be float32, got {}", axis, p.ty),
                                    ));
                                }
                                xyz[k] = Some(record_size);
                            }
                        }
                        record_size += size;
                    }
                    let (ox, oy, oz) = match xyz {
                        [Some(a), Some(b), Some(c)] => (a, b, c),
                        _ => {
                            return Err(Error::parse(path, line_no, "vertex element lacks x/y/z"))
                        }
                    };
                    let need = record_size * count;
                    if data.len() < offset + need {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!(
                                "binary body truncated at byte {} (need {} bytes)",
                                data.len(),
                                offset + need
                            ),
                        ));
                    }
                    points.reserve(*count);
                    for i in 0..*count {
                        let base = offset + i * record_size;
                        let read_f32 = |o: usize| {
                            f32::from_le_bytes(data[base + o..base + o + 4].try_into().unwrap())
                        };
                        points.push(Vec3::new(
                            read_f32(ox) as f64,
                            read_f32(oy) as f64,
                            read_f32(oz) as f64,
                        ));
                    }
                    offset += need;
                } else {
                    // Skip a foreign element record by record.
                    for _ in 0..*count {
                        for p in props {
                            let vsize = ply_scalar_size(&p.ty).unwrap_or(0);
                            if let Some(cty) = &p.list_count_ty {
                                let csize = ply_scalar_size(cty).unwrap_or(0);
                                if data.len() < offset + csize {
                                    return Err(Error::parse(path, line_no, "truncated list"));
                                }
                                let mut n = 0usize;
                                for b in data[offset..offset + csize].iter().rev() {
                                    n = (n << 8) | *b as usize;
                                }
                                offset += csize + n * vsize;
                            } else {
                                offset += vsize;
                            }
                        }
                    }
                }
            }
        }
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(&data[body_start..])
                .map_err(|_| Error::parse(path, line_no, "ascii body is not valid utf-8"))?;
            let mut lines = text.lines();
            let mut body_line = line_no;
            for (name, count, props) in &elements {
                if name == "vertex" {
                    let mut xyz = [None; 3];
                    for (i, p) in props.iter().enumerate() {
                        for (k, axis) in ["x", "y", "z"].iter().enumerate() {
                            if p.name == *axis {
                                xyz[k] = Some(i);
                            }
                        }
                    }
                    let (ix, iy, iz) = match xyz {
                        [Some(a), Some(b), Some(c)] => (a, b, c),
                        _ => {
                            return Err(Error::parse(path, line_no, "vertex element lacks x/y/z"))
                        }
                    };
                    for _ in 0..*count {
                        body_line += 1;
                        let line = lines.next().ok_or_else(|| {
                            Error::parse(path, body_line, "unexpected end of vertex data")
                        })?;
                        let cols: Vec<&str> = line.split_whitespace().collect();
                        if cols.len() < props.len() {
                            return Err(Error::parse(
                                path,
                                body_line,
                                format!("expected {} columns, got {}", props.len(), cols.len()),
                            ));
                        }
                        let get = |i: usize| -> Result<f64> {
                            cols[i].parse::<f64>().map_err(|_| {
                                Error::parse(path, body_line, format!("bad number {:?}", cols[i]))
                            })
                        };
                        points.push(Vec3::new(get(ix)?, get(iy)?, get(iz)?));
                    }
                } else {
                    for _ in 0..*count {
                        body_line += 1;
                        lines.next();
                    }
                }
            }
        }
    }
    Ok((points, timestamp))
}

/// Writes a triangle mesh as PLY with per-vertex normals.
pub fn write_ply_mesh(
    path: &Path,
    vertices: &[Vec3],
    normals: Option<&[Vec3]>,
    faces: &[[usize; 3]],
    binary: bool,
) -> Result<()> {
    if let Some(n) = normals {
        assert_eq!(n.len(), vertices.len());
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let fmt = if binary {
        "binary_little_endian"
    } else {
        "ascii"
    };
    let mut header = format!("ply\nformat {fmt} 1.0\nelement vertex {}\n", vertices.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    header.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        faces.len()
    ));
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    if binary {
        let mut buf = Vec::new();
        for (i, v) in vertices.iter().enumerate() {
            for c in [v.x, v.y, v.z] {
                buf.extend_from_slice(&(c as f32).to_le_bytes());
            }
            if let Some(ns) = normals {
                for c in [ns[i].x, ns[i].y, ns[i].z] {
                    buf.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
        }
        for f in faces {
            buf.push(3u8);
            for &v in f {
                buf.extend_from_slice(&(v as i32).to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    } else {
        for (i, v) in vertices.iter().enumerate() {
            write!(w, "{} {} {}", v.x as f32, v.y as f32, v.z as f32)
                .map_err(|e| Error::io(path, e))?;
            if let Some(ns) = normals {
                write!(w, " {} {} {}", ns[i].x as f32, ns[i].y as f32, ns[i].z as f32)
                    .map_err(|e| Error::io(path, e))?;
            }
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        for f in faces {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2]).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a triangle mesh as Wavefront OBJ (1-based indices).
pub fn write_obj_mesh(
    path: &Path,
    vertices: &[Vec3],
    normals: Option<&[Vec3]>,
    faces: &[[usize; 3]],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z).map_err(|e| Error::io(path, e))?;
    }
    if let Some(ns) = normals {
        for n in ns {
            writeln!(w, "vn {} {} {}", n.x, n.y, n.z).map_err(|e| Error::io(path, e))?;
        }
        for f in faces {
            writeln!(
                w,
                "f {}//{} {}//{} {}//{}",
                f[0] + 1,
                f[0] + 1,
                f[1] + 1,
                f[1] + 1,
                f[2] + 1,
                f[2] + 1
            )
            .map_err(|e| Error::io(path, e))?;
        }
    } else {
        for f in faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// XYZ / KITTI
// ---------------------------------------------------------------------------

pub fn write_xyz_points(path: &Path, points: &[Vec3]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_xyz_points(path: &Path) -> Result<Vec<Vec3>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next = |field: &str| -> Result<f64> {
            it.next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, i + 1, format!("bad or missing {field}")))
        };
        points.push(Vec3::new(next("x")?, next("y")?, next("z")?));
    }
    Ok(points)
}

/// KITTI velodyne format: flat little-endian f32 records (x, y, z, intensity).
pub fn read_kitti_bin(path: &Path) -> Result<Vec<Vec3>> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    if data.len() % 16 != 0 {
        return Err(Error::parse(
            path,
            0,
            format!("length {} is not a multiple of 16-byte records", data.len()),
        ));
    }
    let mut points = Vec::with_capacity(data.len() / 16);
    for rec in data.chunks_exact(16) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        points.push(Vec3::new(f(0), f(4), f(8))); // intensity discarded
    }
    Ok(points)
}

pub fn write_kitti_bin(path: &Path, points: &[Vec3]) -> Result<()> {
    let mut buf = Vec::with_capacity(points.len() * 16);
    for p in points {
        for c in [p.x, p.y, p.z, 0.0] {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Trajectory (TUM convention) and per-frame timestamps
// ---------------------------------------------------------------------------

/// Reads a TUM-style trajectory: `timestamp tx ty tz qx qy qz qw` per line.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, i + 1, "non-numeric trajectory field"))?;
        if cols.len() != 8 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 8 fields (t tx ty tz qx qy qz qw), got {}", cols.len()),
            ));
        }
        let pose = Pose::from_parts(
            Vec3::new(cols[1], cols[2], cols[3]),
            cols[4],
            cols[5],
            cols[6],
            cols[7],
        )?;
        samples.push((cols[0], pose));
    }
    Trajectory::new(samples)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (t, p) in traj.samples() {
        let q = p.rotation.quaternion();
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            t, p.position.x, p.position.y, p.position.z, q.i, q.j, q.k, q.w
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_times(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut times = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        times.push(
            t.parse::<f64>()
                .map_err(|_| Error::parse(path, i + 1, "bad timestamp"))?,
        );
    }
    Ok(times)
}

pub fn write_times(path: &Path, times: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in times {
        writeln!(w, "{t}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Frame loading
// ---------------------------------------------------------------------------

/// Reads points from a single file of any supported format; used by `eval`.
pub fn read_points_auto(path: &Path) -> Result<Vec<Vec3>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => Ok(read_ply_points(path)?.0),
        Some("bin") => read_kitti_bin(path),
        _ => read_xyz_points(path),
    }
}

fn cloud_files(cloud_path: &Path, format: CloudFormat) -> Result<Vec<PathBuf>> {
    if cloud_path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(cloud_path)
            .map_err(|e| Error::io(cloud_path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e == format.extension())
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Parameter(format!(
                "no .{} files in {}",
                format.extension(),
                cloud_path.display()
            )));
        }
        Ok(files)
    } else if cloud_path.is_file() {
        Ok(vec![cloud_path.to_path_buf()])
    } else {
        Err(Error::io(
            cloud_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

/// Loads a frame sequence: clouds from `cloud_path` (file or directory),
/// poses from a TUM trajectory, one [`ScanFrame`] per cloud.
///
/// Frame timestamps come from, in order of preference: a `times.txt` next to
/// the clouds, a `comment timestamp` header (PLY only), or — when the cloud
/// and trajectory counts match exactly — pairing by index. Each frame is then
/// associated to the nearest trajectory pose, which must lie within
/// `opts.pose_tolerance` seconds. Points outside `[min_range, max_range]`
/// are dropped; points are kept in sensor-local coordinates.
pub fn load_frames(
    cloud_path: &Path,
    traj_path: &Path,
    format: CloudFormat,
    opts: &IngestOptions,
) -> Result<Vec<ScanFrame>> {
    let traj = read_trajectory(traj_path)?;
    let files = cloud_files(cloud_path, format)?;

    let times_file = if cloud_path.is_dir() {
        cloud_path.join("times.txt")
    } else {
        cloud_path.with_file_name("times.txt")
    };
    let side_times = if times_file.is_file() {
        Some(read_times(&times_file)?)
    } else {
        None
    };
    if let Some(ts) = &side_times {
        if ts.len() < files.len() {
            return Err(Error::Parameter(format!(
                "{}: {} timestamps for {} cloud files",
                times_file.display(),
                ts.len(),
                files.len()
            )));
        }
    }

    let mut frames = Vec::with_capacity(files.len());
    for (i, file) in files.iter().enumerate() {
        let (raw_points, ply_time) = match format {
            CloudFormat::Ply => read_ply_points(file)?,
            CloudFormat::Xyz => (read_xyz_points(file)?, None),
            CloudFormat::KittiBin => (read_kitti_bin(file)?, None),
        };
        let timestamp = match (&side_times, ply_time) {
            (Some(ts), _) => ts[i],
            (None, Some(t)) => t,
            (None, None) if files.len() == traj.samples().len() => traj.samples()[i].0,
            (None, None) => {
                return Err(Error::Parameter(format!(
                    "{}: no timestamp source (times.txt, ply comment, or 1:1 trajectory)",
                    file.display()
                )))
            }
        };
        let (nearest_t, pose) = traj.nearest(timestamp);
        if (nearest_t - timestamp).abs() > opts.pose_tolerance {
            return Err(Error::PoseAssociation {
                frame_id: i as u64,
                timestamp,
                nearest: nearest_t,
                tolerance: opts.pose_tolerance,
            });
        }
        let points: Vec<Vec3> = raw_points
            .into_iter()
            .filter(|p| {
                let r = p.norm();
                r.is_finite() && r >= opts.min_range && r <= opts.max_range
            })
            .collect();
        frames.push(ScanFrame::new(i as u64, timestamp, pose, points)?);
    }
    Ok(frames)
}
