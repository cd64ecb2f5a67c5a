//! Shared geometric primitives: vectors, poses, boxes, triangles.

use nalgebra::{Quaternion, UnitQuaternion};

use crate::{Error, Result};

/// All geometry is double-precision metric, world or sensor-local frame.
pub type Vec3 = nalgebra::Vector3<f64>;

/// A rigid transform: world-from-sensor rotation plus sensor position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Pose { position, rotation }
    }

    /// Builds a pose from raw TUM-order quaternion components (qx qy qz qw).
    /// The quaternion is normalized; a near-zero norm is rejected.
    pub fn from_parts(position: Vec3, qx: f64, qy: f64, qz: f64, qw: f64) -> Result<Self> {
        let q = Quaternion::new(qw, qx, qy, qz);
        if !q.norm().is_finite() || q.norm() < 1e-9 {
            return Err(Error::Parameter(format!(
                "quaternion ({qx}, {qy}, {qz}, {qw}) is not normalizable"
            )));
        }
        Ok(Pose {
            position,
            rotation: UnitQuaternion::from_quaternion(q),
        })
    }

    /// Sensor-local point to world frame.
    pub fn to_world(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.position
    }

    /// World point to sensor-local frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.position)
    }

    /// Rotates a direction into the world frame (no translation).
    pub fn dir_to_world(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }

    /// Rotates a world direction into the sensor frame.
    pub fn dir_to_local(&self, d: Vec3) -> Vec3 {
        self.rotation.inverse() * d
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.inf(&p);
        self.max = self.max.sup(&p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn diagonal(&self) -> f64 {
        if self.min.x > self.max.x {
            return 0.0;
        }
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        if self.min.x > self.max.x {
            return 0.0;
        }
        let d = self.max - self.min;
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test for a ray from `origin` along `dir` (not necessarily unit).
    /// Returns the entry parameter if the ray intersects within `t_max`.
    pub fn ray_entry(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.min[a] - origin[a]) * inv_dir[a];
            let tb = (self.max[a] - origin[a]) * inv_dir[a];
            let (near, far) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Unnormalized normal of a triangle (cross of two edges; |n| = 2·area).
pub fn triangle_cross(a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * triangle_cross(a, b, c).norm()
}

/// Azimuth of a point wrapped to [0, 2π).
pub fn azimuth(p: &Vec3) -> f64 {
    let a = p.y.atan2(p.x);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Elevation angle above the sensor's horizontal plane, in radians.
pub fn elevation(p: &Vec3) -> f64 {
    p.z.atan2(p.xy().norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn world_local_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let pose = Pose::new(
                Vec3::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                ),
                UnitQuaternion::from_scaled_axis(axis),
            );
            let p = Vec3::new(
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
            );
            let back = pose.to_local(pose.to_world(p));
            assert!((back - p).norm() <= 1e-9, "round trip error {}", (back - p).norm());
        }
    }

    #[test]
    fn to_world_identity_and_translation() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::identity().to_world(p), p);

        let pose = Pose::new(Vec3::new(10.0, 0.0, 0.0), UnitQuaternion::identity());
        assert_eq!(pose.to_world(Vec3::new(1.0, 0.0, 0.0)), Vec3::new(11.0, 0.0, 0.0));
    }

    #[test]
    fn azimuth_wraps() {
        assert_relative_eq!(azimuth(&Vec3::new(1.0, 0.0, 0.0)), 0.0);
        assert_relative_eq!(azimuth(&Vec3::new(0.0, 1.0, 0.0)), std::f64::consts::FRAC_PI_2);
        assert!(azimuth(&Vec3::new(1.0, -1e-9, 0.0)) > 6.28);
    }

    #[test]
    fn aabb_ray_entry() {
        let b = Aabb {
            min: Vec3::new(1.0, -1.0, -1.0),
            max: Vec3::new(2.0, 1.0, 1.0),
        };
        let dir = Vec3::new(1.0, 0.0, 0.0);
        let inv = dir.map(|v| 1.0 / v);
        let t = b.ray_entry(Vec3::zeros(), inv, f64::INFINITY);
        assert_relative_eq!(t.unwrap(), 1.0);
        assert!(b
            .ray_entry(Vec3::zeros(), Vec3::new(-1.0, f64::INFINITY, f64::INFINITY), f64::INFINITY)
            .is_none());
    }
}
