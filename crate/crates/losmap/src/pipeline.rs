//! Per-frame orchestration: mesh → per-frame field d^t → moving-object
//! detection → fusion → TSDF integration, with stage timing.
//!
//! Detection runs strictly against the pre-fusion field state so the frame
//! being judged cannot contaminate its own reference; d^t is then fused
//! unconditionally (a mover legitimately occupies its voxels now and the
//! averaging re-frees them once it leaves).

use std::time::Instant;

use crate::config::PipelineConfig;
use crate::field::{compute_frame_field, detect_dynamic, BvhIndex, DynamicMask, LoSField};
use crate::mesh::{build_frame_mesh, FrameMesh};
use crate::recon::{extract_mesh, TriangleMesh, TsdfGrid};
use crate::scan::ScanFrame;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct FrameTiming {
    pub frame_id: u64,
    /// Sector meshing + normal estimation.
    pub mesh_ms: f64,
    /// BVH build, per-voxel ray casts, detection, fusion.
    pub field_ms: f64,
    /// Everything including TSDF integration.
    pub total_ms: f64,
}

pub struct FrameOutput {
    pub mesh: FrameMesh,
    pub mask: DynamicMask,
    pub timing: FrameTiming,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub field: LoSField,
    pub tsdf: TsdfGrid,
    frames_processed: u64,
}

impl Pipeline {
    pub fn new(mut config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            field: LoSField::new(config.field)?,
            tsdf: TsdfGrid::new(config.field.l_vox, config.tsdf_truncation)?,
            config,
            frames_processed: 0,
        })
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    /// Runs the full per-frame phase sequence on one sweep.
    pub fn process_frame(&mut self, frame: &ScanFrame) -> Result<FrameOutput> {
        let t0 = Instant::now();
        let mesh = build_frame_mesh(frame, &self.config.ghpr)?;
        let t_mesh = Instant::now();

        let bvh = BvhIndex::from_mesh(&mesh);
        let d_t = compute_frame_field(frame, &mesh, &bvh, &self.field.params);
        let mask = detect_dynamic(&self.field, frame, &d_t);
        self.field.fuse_frame(&d_t, frame.frame_id);
        let t_field = Instant::now();

        self.tsdf.integrate(
            frame,
            &mesh.point_normals,
            &mask,
            self.config.field.update_radius,
        );
        let t_total = Instant::now();

        self.frames_processed += 1;
        Ok(FrameOutput {
            mesh,
            mask,
            timing: FrameTiming {
                frame_id: frame.frame_id,
                mesh_ms: (t_mesh - t0).as_secs_f64() * 1e3,
                field_ms: (t_field - t_mesh).as_secs_f64() * 1e3,
                total_ms: (t_total - t0).as_secs_f64() * 1e3,
            },
        })
    }

    /// Extracts the fused static-scene surface.
    pub fn static_mesh(&self) -> TriangleMesh {
        extract_mesh(&self.tsdf)
    }
}
