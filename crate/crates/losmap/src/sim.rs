//! Synthetic ring-pattern LiDAR over parametric scenes.
//!
//! Primitives are intersected analytically (no mesh discretization), so the
//! returned ground-truth normals and dynamic labels are exact and fully
//! independent of the hull/BVH code they are used to verify.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::geom::{Pose, Vec3};
use crate::scan::{ScanFrame, Trajectory};
use crate::{Error, Result};

const T_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Solid axis-box (local frame) with half extents; an obstacle.
    Box { half: Vec3 },
    /// Same geometry as a box but treated as a hollow shell: the sensor is
    /// allowed inside (the walls of a scanned room).
    Room { half: Vec3 },
    Sphere { radius: f64 },
    /// Capped cylinder along the local z axis.
    Cylinder { radius: f64, half_height: f64 },
    /// Infinite plane z = 0 in the local frame.
    Plane,
}

#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub shape: Shape,
    pub pose: Pose,
}

impl Primitive {
    /// Nearest intersection of a world ray with the primitive surface:
    /// `(t, outward surface normal in world frame)`.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3)> {
        let o = self.pose.to_local(origin);
        let d = self.pose.dir_to_local(dir);
        let (t, n_local) = match self.shape {
            Shape::Box { half } | Shape::Room { half } => box_intersect(o, d, half)?,
            Shape::Sphere { radius } => sphere_intersect(o, d, radius)?,
            Shape::Cylinder {
                radius,
                half_height,
            } => cylinder_intersect(o, d, radius, half_height)?,
            Shape::Plane => {
                if d.z.abs() < 1e-300 {
                    return None;
                }
                let t = -o.z / d.z;
                if t <= T_EPS {
                    return None;
                }
                (t, Vec3::z())
            }
        };
        Some((t, self.pose.dir_to_world(n_local)))
    }

    /// Solid-interior test; rooms, planes and shells contain nothing.
    pub fn contains(&self, p: Vec3) -> bool {
        let q = self.pose.to_local(p);
        match self.shape {
            Shape::Box { half } => {
                q.x.abs() <= half.x && q.y.abs() <= half.y && q.z.abs() <= half.z
            }
            Shape::Sphere { radius } => q.norm() <= radius,
            Shape::Cylinder {
                radius,
                half_height,
            } => q.xy().norm() <= radius && q.z.abs() <= half_height,
            Shape::Room { .. } | Shape::Plane => false,
        }
    }

    /// Unsigned distance from a world point to the primitive surface.
    pub fn surface_distance(&self, p: Vec3) -> f64 {
        let q = self.pose.to_local(p);
        match self.shape {
            Shape::Box { half } | Shape::Room { half } => {
                let d = Vec3::new(q.x.abs() - half.x, q.y.abs() - half.y, q.z.abs() - half.z);
                let outside = Vec3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
                let inside = d.x.max(d.y).max(d.z).min(0.0);
                (outside + inside).abs()
            }
            Shape::Sphere { radius } => (q.norm() - radius).abs(),
            Shape::Cylinder {
                radius,
                half_height,
            } => {
                let dr = q.xy().norm() - radius;
                let dz = q.z.abs() - half_height;
                let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                let inside = dr.max(dz).min(0.0);
                (outside + inside).abs()
            }
            Shape::Plane => q.z.abs(),
        }
    }

    /// Regular sampling of the surface in world coordinates; the ground
    /// truth for cloud metrics. Planes are sampled on a 30 m disc.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vec3> {
        let mut local = Vec::new();
        match self.shape {
            Shape::Box { half } | Shape::Room { half } => {
                for axis in 0..3 {
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    let nu = (2.0 * half[u] / spacing).ceil() as i64;
                    let nv = (2.0 * half[v] / spacing).ceil() as i64;
                    for side in [-1.0, 1.0] {
                        for iu in 0..=nu {
                            for iv in 0..=nv {
                                let mut p = Vec3::zeros();
                                p[axis] = side * half[axis];
                                p[u] = -half[u] + 2.0 * half[u] * iu as f64 / nu as f64;
                                p[v] = -half[v] + 2.0 * half[v] * iv as f64 / nv as f64;
                                local.push(p);
                            }
                        }
                    }
                }
            }
            Shape::Sphere { radius } => {
                let count =
                    ((4.0 * std::f64::consts::PI * radius * radius) / (spacing * spacing)).ceil()
                        as usize;
                let phi = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for i in 0..count.max(16) {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count.max(16) as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = phi * i as f64;
                    local.push(Vec3::new(r * a.cos(), r * a.sin(), z) * radius);
                }
            }
            Shape::Cylinder {
                radius,
                half_height,
            } => {
                let n_az = ((TAU * radius) / spacing).ceil().max(8.0) as i64;
                let n_z = ((2.0 * half_height) / spacing).ceil().max(1.0) as i64;
                for iz in 0..=n_z {
                    let z = -half_height + 2.0 * half_height * iz as f64 / n_z as f64;
                    for ia in 0..n_az {
                        let a = TAU * ia as f64 / n_az as f64;
                        local.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
                    }
                }
                let n_r = (radius / spacing).ceil().max(1.0) as i64;
                for iz in [-half_height, half_height] {
                    for ir in 0..=n_r {
                        let r = radius * ir as f64 / n_r as f64;
                        let n_az = ((TAU * r) / spacing).ceil().max(1.0) as i64;
                        for ia in 0..n_az {
                            let a = TAU * ia as f64 / n_az as f64;
                            local.push(Vec3::new(r * a.cos(), r * a.sin(), iz));
                        }
                    }
                }
            }
            Shape::Plane => {
                let r = 30.0;
                let n = (2.0 * r / spacing).ceil() as i64;
                for ix in 0..=n {
                    for iy in 0..=n {
                        let x = -r + 2.0 * r * ix as f64 / n as f64;
                        let y = -r + 2.0 * r * iy as f64 / n as f64;
                        if x * x + y * y <= r * r {
                            local.push(Vec3::new(x, y, 0.0));
                        }
                    }
                }
            }
        }
        local.into_iter().map(|p| self.pose.to_world(p)).collect()
    }
}

fn box_intersect(o: Vec3, d: Vec3, half: Vec3) -> Option<(f64, Vec3)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for a in 0..3 {
        if d[a].abs() < 1e-300 {
            if o[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let t1 = (-half[a] - o[a]) * inv;
        let t2 = (half[a] - o[a]) * inv;
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_enter = t_enter.max(near);
        t_exit = t_exit.min(far);
        if t_enter > t_exit {
            return None;
        }
    }
    let t = if t_enter > T_EPS {
        t_enter
    } else if t_exit > T_EPS {
        t_exit
    } else {
        return None;
    };
    // Outward normal from the dominant axis of the hit point.
    let hit = o + d * t;
    let mut axis = 0;
    let mut best = f64::NEG_INFINITY;
    for a in 0..3 {
        let closeness = hit[a].abs() - half[a];
        if closeness > best {
            best = closeness;
            axis = a;
        }
    }
    let mut n = Vec3::zeros();
    n[axis] = hit[axis].signum();
    Some((t, n))
}

fn sphere_intersect(o: Vec3, d: Vec3, radius: f64) -> Option<(f64, Vec3)> {
    let b = o.dot(&d);
    let c = o.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if -b - sq > T_EPS {
        -b - sq
    } else if -b + sq > T_EPS {
        -b + sq
    } else {
        return None;
    };
    let n = (o + d * t) / radius;
    Some((t, n))
}

fn cylinder_intersect(o: Vec3, d: Vec3, radius: f64, half_height: f64) -> Option<(f64, Vec3)> {
    let mut best: Option<(f64, Vec3)> = None;
    let mut consider = |t: f64, n: Vec3| {
        if t > T_EPS && best.map_or(true, |(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };
    // Lateral surface.
    let a2 = d.x * d.x + d.y * d.y;
    if a2 > 1e-300 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - radius * radius;
        let disc = b * b - a2 * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a2, (-b + sq) / a2] {
                let z = o.z + d.z * t;
                if z.abs() <= half_height {
                    let hit = o + d * t;
                    consider(t, Vec3::new(hit.x / radius, hit.y / radius, 0.0));
                }
            }
        }
    }
    // Caps.
    if d.z.abs() > 1e-300 {
        for cap in [-half_height, half_height] {
            let t = (cap - o.z) / d.z;
            let hit = o + d * t;
            if hit.xy().norm_squared() <= radius * radius {
                consider(t, Vec3::new(0.0, 0.0, cap.signum()));
            }
        }
    }
    best
}

/// A primitive following a waypoint trajectory; position is interpolated
/// linearly and orientation by slerp, holding the end poses outside the
/// waypoint span.
#[derive(Debug, Clone)]
pub struct Mover {
    pub shape: Shape,
    pub waypoints: Trajectory,
}

impl Mover {
    pub fn at(&self, t: f64) -> Primitive {
        Primitive {
            shape: self.shape,
            pose: self.waypoints.pose_at(t),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SceneSpec {
    pub statics: Vec<Primitive>,
    pub movers: Vec<Mover>,
}

/// Ring-pattern scanner model.
#[derive(Debug, Clone, Copy)]
pub struct ScannerSpec {
    pub ring_count: usize,
    pub vfov_min_deg: f64,
    pub vfov_max_deg: f64,
    pub horiz_res_deg: f64,
    pub rate_hz: f64,
    /// Gaussian range noise σ in meters, applied along the beam.
    pub sigma: f64,
    pub max_range: f64,
}

impl Default for ScannerSpec {
    fn default() -> Self {
        ScannerSpec {
            ring_count: 16,
            vfov_min_deg: -15.0,
            vfov_max_deg: 15.0,
            horiz_res_deg: 0.2,
            rate_hz: 10.0,
            sigma: 0.01,
            max_range: 100.0,
        }
    }
}

impl ScannerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ring_count < 2 {
            return Err(Error::Scene("ring_count must be at least 2".into()));
        }
        if !(self.vfov_max_deg > self.vfov_min_deg) {
            return Err(Error::Scene("vertical fov must be a nonempty range".into()));
        }
        if !(self.horiz_res_deg > 0.0 && self.rate_hz > 0.0 && self.max_range > 0.0) {
            return Err(Error::Scene(
                "horiz_res_deg, rate_hz, and max_range must be positive".into(),
            ));
        }
        if self.sigma < 0.0 {
            return Err(Error::Scene("sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn azimuth_steps(&self) -> usize {
        (360.0 / self.horiz_res_deg).round() as usize
    }

    /// Evenly spaced ring elevations across the vertical fov, radians.
    pub fn ring_elevations(&self) -> Vec<f64> {
        let n = self.ring_count;
        (0..n)
            .map(|r| {
                let f = r as f64 / (n - 1) as f64;
                (self.vfov_min_deg + f * (self.vfov_max_deg - self.vfov_min_deg)).to_radians()
            })
            .collect()
    }
}

/// One simulated sweep plus exact ground truth (all sensor-local).
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub frame: ScanFrame,
    /// Unit surface normal at each hit, oriented toward the sensor.
    pub gt_normals: Vec<Vec3>,
    /// True where the hit primitive is a mover.
    pub gt_dynamic: Vec<bool>,
}

/// Simulates `frames` sweeps at the scanner rate along the trajectory.
/// Deterministic for a fixed seed (each frame uses its own RNG stream, so
/// frames are generated in parallel without affecting the output).
pub fn simulate(
    scene: &SceneSpec,
    scanner: &ScannerSpec,
    traj: &Trajectory,
    frames: usize,
    seed: u64,
) -> Result<Vec<SimFrame>> {
    scanner.validate()?;
    if frames == 0 {
        return Ok(Vec::new());
    }
    let t_last = traj.start_time() + (frames - 1) as f64 / scanner.rate_hz;
    if t_last > traj.end_time() + 1e-9 {
        return Err(Error::Scene(format!(
            "trajectory ends at t={} but frame {} needs t={}",
            traj.end_time(),
            frames - 1,
            t_last
        )));
    }
    let elevations = scanner.ring_elevations();
    let n_az = scanner.azimuth_steps();

    (0..frames)
        .into_par_iter()
        .map(|i| {
            let t = traj.start_time() + i as f64 / scanner.rate_hz;
            let pose = traj.pose_at(t);

            let mut prims: Vec<(Primitive, bool)> =
                scene.statics.iter().map(|p| (*p, false)).collect();
            prims.extend(scene.movers.iter().map(|m| (m.at(t), true)));

            for (p, _) in &prims {
                if p.contains(pose.position) {
                    return Err(Error::Scene(format!(
                        "sensor at t={t} is inside a {:?}",
                        std::mem::discriminant(&p.shape)
                    )));
                }
            }

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let noise = Normal::new(0.0, scanner.sigma.max(0.0)).expect("valid sigma");

            let mut points = Vec::new();
            let mut gt_normals = Vec::new();
            let mut gt_dynamic = Vec::new();
            for &elev in &elevations {
                let (se, ce) = elev.sin_cos();
                for j in 0..n_az {
                    let az = TAU * j as f64 / n_az as f64;
                    let (sa, ca) = az.sin_cos();
                    let dir_local = Vec3::new(ce * ca, ce * sa, se);
                    let dir_world = pose.dir_to_world(dir_local);

                    let mut best: Option<(f64, Vec3, bool)> = None;
                    for (p, is_mover) in &prims {
                        if let Some((t_hit, n)) = p.intersect(pose.position, dir_world) {
                            if t_hit <= scanner.max_range
                                && best.map_or(true, |(bt, _, _)| t_hit < bt)
                            {
                                best = Some((t_hit, n, *is_mover));
                            }
                        }
                    }
                    let (t_hit, n_world, is_mover) = match best {
                        Some(b) => b,
                        None => continue, // miss: no return
                    };
                    let range = if scanner.sigma > 0.0 {
                        (t_hit + noise.sample(&mut rng)).max(1e-3)
                    } else {
                        t_hit
                    };
                    points.push(dir_local * range);
                    let mut n_local = pose.dir_to_local(n_world);
                    if n_local.dot(&dir_local) > 0.0 {
                        n_local = -n_local;
                    }
                    gt_normals.push(n_local);
                    gt_dynamic.push(is_mover);
                }
            }
            Ok(SimFrame {
                frame: ScanFrame::new(i as u64, t, pose, points)?,
                gt_normals,
                gt_dynamic,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scene / scanner text files
// ---------------------------------------------------------------------------

fn parse_floats(path: &Path, line_no: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("bad number {t:?}")))
        })
        .collect()
}

fn pose_from_tail(path: &Path, line_no: usize, center: Vec3, rest: &[f64]) -> Result<Pose> {
    match rest.len() {
        0 => Ok(Pose::new(center, UnitQuaternion::identity())),
        4 => Pose::from_parts(center, rest[0], rest[1], rest[2], rest[3]),
        n => Err(Error::parse(
            path,
            line_no,
            format!("expected 0 or 4 quaternion components, got {n}"),
        )),
    }
}

fn shape_from_tokens(
    path: &Path,
    line_no: usize,
    kind: &str,
    nums: &[f64],
) -> Result<(Shape, usize)> {
    // Returns the shape and how many numbers it consumed.
    match kind {
        "box" | "room" => {
            if nums.len() < 3 {
                return Err(Error::parse(path, line_no, "box/room needs sx sy sz"));
            }
            let half = Vec3::new(nums[0] / 2.0, nums[1] / 2.0, nums[2] / 2.0);
            let shape = if kind == "box" {
                Shape::Box { half }
            } else {
                Shape::Room { half }
            };
            Ok((shape, 3))
        }
        "sphere" => {
            if nums.is_empty() {
                return Err(Error::parse(path, line_no, "sphere needs a radius"));
            }
            Ok((Shape::Sphere { radius: nums[0] }, 1))
        }
        "cylinder" => {
            if nums.len() < 2 {
                return Err(Error::parse(path, line_no, "cylinder needs r h"));
            }
            Ok((
                Shape::Cylinder {
                    radius: nums[0],
                    half_height: nums[1] / 2.0,
                },
                2,
            ))
        }
        other => Err(Error::parse(
            path,
            line_no,
            format!("unknown primitive {other:?}"),
        )),
    }
}

/// Parses a scene description. One primitive per line:
///
/// ```text
/// room  cx cy cz sx sy sz [qx qy qz qw]   # hollow shell, sensor may be inside
/// box   cx cy cz sx sy sz [qx qy qz qw]   # solid obstacle
/// sphere cx cy cz r
/// cylinder cx cy cz r h [qx qy qz qw]
/// plane px py pz nx ny nz                  # infinite plane through p with normal n
/// mover <shape> <shape params> waypoints t,x,y,z[,qx,qy,qz,qw] ...
/// ```
///
/// Mover shapes omit the center (it comes from the waypoints): `mover sphere
/// 0.5 waypoints 2,-6,0,1 4,6,0,1` sends a half-meter sphere across the
/// scene between t=2s and t=4s, dwelling at the endpoints outside that span.
pub fn parse_scene_str(text: &str, path: &Path) -> Result<SceneSpec> {
    let mut scene = SceneSpec::default();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "plane" => {
                let nums = parse_floats(path, line_no, &toks[1..])?;
                if nums.len() != 6 {
                    return Err(Error::parse(path, line_no, "plane needs px py pz nx ny nz"));
                }
                let n = Vec3::new(nums[3], nums[4], nums[5]);
                if n.norm() < 1e-12 {
                    return Err(Error::parse(path, line_no, "plane normal is zero"));
                }
                let rot = UnitQuaternion::rotation_between(&Vec3::z(), &n.normalize())
                    .unwrap_or_else(|| {
                        UnitQuaternion::from_axis_angle(
                            &nalgebra::Unit::new_normalize(Vec3::x()),
                            std::f64::consts::PI,
                        )
                    });
                scene.statics.push(Primitive {
                    shape: Shape::Plane,
                    pose: Pose::new(Vec3::new(nums[0], nums[1], nums[2]), rot),
                });
            }
            "mover" => {
                if toks.len() < 3 {
                    return Err(Error::parse(path, line_no, "mover needs a shape"));
                }
                let wp_pos = toks
                    .iter()
                    .position(|&t| t == "waypoints")
                    .ok_or_else(|| Error::parse(path, line_no, "mover needs waypoints"))?;
                let nums = parse_floats(path, line_no, &toks[2..wp_pos])?;
                let (shape, used) = shape_from_tokens(path, line_no, toks[1], &nums)?;
                if used != nums.len() {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "mover shapes take no center (it comes from the waypoints)",
                    ));
                }
                let mut samples = Vec::new();
                for wp in &toks[wp_pos + 1..] {
                    let vals: Vec<&str> = wp.split(',').collect();
                    let nums = parse_floats(path, line_no, &vals)?;
                    let pose = match nums.len() {
                        4 => Pose::new(
                            Vec3::new(nums[1], nums[2], nums[3]),
                            UnitQuaternion::identity(),
                        ),
                        8 => Pose::from_parts(
                            Vec3::new(nums[1], nums[2], nums[3]),
                            nums[4],
                            nums[5],
                            nums[6],
                            nums[7],
                        )?,
                        n => {
                            return Err(Error::parse(
                                path,
                                line_no,
                                format!("waypoint needs 4 or 8 values, got {n}"),
                            ))
                        }
                    };
                    samples.push((nums[0], pose));
                }
                let waypoints = Trajectory::new(samples)
                    .map_err(|e| Error::parse(path, line_no, format!("waypoints: {e}")))?;
                scene.movers.push(Mover { shape, waypoints });
            }
            kind => {
                let nums = parse_floats(path, line_no, &toks[1..])?;
                if nums.len() < 3 {
                    return Err(Error::parse(path, line_no, "primitive needs a center"));
                }
                let center = Vec3::new(nums[0], nums[1], nums[2]);
                let (shape, used) = shape_from_tokens(path, line_no, kind, &nums[3..])?;
                let pose = pose_from_tail(path, line_no, center, &nums[3 + used..])?;
                scene.statics.push(Primitive { shape, pose });
            }
        }
    }
    if scene.statics.is_empty() && scene.movers.is_empty() {
        return Err(Error::Scene(format!("{}: empty scene", path.display())));
    }
    Ok(scene)
}

pub fn read_scene(path: &Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_str(&text, path)
}

/// Parses a scanner description: `key = value` lines with keys ring_count,
/// vfov_min_deg, vfov_max_deg, horiz_res_deg, rate_hz, sigma, max_range.
/// Unknown keys are an error.
pub fn parse_scanner_str(text: &str, path: &Path) -> Result<ScannerSpec> {
    let mut spec = ScannerSpec::default();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no, "expected key = value"))?;
        let key = key.trim();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad value for {key}")))?;
        match key {
            "ring_count" => spec.ring_count = value as usize,
            "vfov_min_deg" => spec.vfov_min_deg = value,
            "vfov_max_deg" => spec.vfov_max_deg = value,
            "horiz_res_deg" => spec.horiz_res_deg = value,
            "rate_hz" => spec.rate_hz = value,
            "sigma" => spec.sigma = value,
            "max_range" => spec.max_range = value,
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unknown scanner key {other:?}"),
                ))
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn read_scanner(path: &Path) -> Result<ScannerSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scanner_str(&text, path)
}
