//! Scan frames, trajectories, and ingestion from disk.

use crate::geom::{Pose, Vec3};
use crate::{Error, Result};

pub mod io;

/// Points below this sensor-range never survive ingestion; a point this close
/// to the sensor cannot be radially inverted.
pub const MIN_POINT_NORM: f64 = 1e-6;

/// One LiDAR sweep: sensor pose plus points in sensor-local coordinates.
#[derive(Debug, Clone)]
pub struct ScanFrame {
    pub frame_id: u64,
    /// Seconds; used for pose association.
    pub timestamp: f64,
    pub pose: Pose,
    /// Sensor-local coordinates, all with norm > [`MIN_POINT_NORM`].
    pub points: Vec<Vec3>,
}

impl ScanFrame {
    /// Builds a frame, rejecting non-finite points and points coincident with
    /// the sensor.
    pub fn new(frame_id: u64, timestamp: f64, pose: Pose, points: Vec<Vec3>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::Parameter(format!(
                    "frame {frame_id}: point {i} has non-finite coordinates"
                )));
            }
            if p.norm() <= MIN_POINT_NORM {
                return Err(Error::ZeroNormPoint { index: i });
            }
        }
        Ok(ScanFrame {
            frame_id,
            timestamp,
            pose,
            points,
        })
    }

    /// Sensor-local point to world frame.
    pub fn to_world(&self, p: Vec3) -> Vec3 {
        self.pose.to_world(p)
    }

    /// World point to this frame's sensor-local frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.pose.to_local(p)
    }
}

/// A time-ordered sequence of sensor poses.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<(f64, Pose)>,
}

impl Trajectory {
    /// Timestamps must be strictly increasing.
    pub fn new(samples: Vec<(f64, Pose)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Parameter("trajectory has no samples".into()));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Parameter(format!(
                    "trajectory timestamps not strictly increasing at t={}",
                    w[1].0
                )));
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose)] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Nearest sample by timestamp.
    pub fn nearest(&self, t: f64) -> (f64, Pose) {
        let idx = self
            .samples
            .partition_point(|(ts, _)| *ts < t)
            .min(self.samples.len() - 1);
        let right = self.samples[idx];
        if idx == 0 {
            return right;
        }
        let left = self.samples[idx - 1];
        if (t - left.0).abs() <= (right.0 - t).abs() {
            left
        } else {
            right
        }
    }

    /// Pose at time `t`: linear position interpolation plus quaternion slerp
    /// between the bracketing samples. Clamps outside the covered span.
    pub fn pose_at(&self, t: f64) -> Pose {
        if t <= self.start_time() {
            return self.samples[0].1;
        }
        if t >= self.end_time() {
            return self.samples[self.samples.len() - 1].1;
        }
        let idx = self.samples.partition_point(|(ts, _)| *ts <= t);
        let (t0, p0) = self.samples[idx - 1];
        let (t1, p1) = self.samples[idx];
        let s = (t - t0) / (t1 - t0);
        Pose::new(
            p0.position + (p1.position - p0.position) * s,
            p0.rotation.slerp(&p1.rotation, s),
        )
    }
}

/// Range gates and the pose association window applied while loading frames.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub min_range: f64,
    pub max_range: f64,
    /// Maximum |frame time − pose time| for nearest-timestamp association.
    pub pose_tolerance: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_range: 0.5,
            max_range: 120.0,
            pose_tolerance: 0.05,
        }
    }
}
