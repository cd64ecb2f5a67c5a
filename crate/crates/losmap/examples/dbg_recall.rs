use losmap::geom::{Pose, Vec3};
use losmap::metrics::cloud_metrics;
use losmap::pipeline::Pipeline;
use losmap::scan::Trajectory;
use losmap::sim::{simulate, Primitive, ScannerSpec, SceneSpec, Shape};
use losmap::PipelineConfig;
use nalgebra::UnitQuaternion;

fn yaw_pose(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
    Pose::new(Vec3::new(x, y, z), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw))
}

fn main() {
    let room = Primitive {
        shape: Shape::Room { half: Vec3::new(5.12, 5.12, 1.625) },
        pose: Pose::new(Vec3::new(0.0, 0.0, 1.495), UnitQuaternion::identity()),
    };
    let scene = SceneSpec { statics: vec![room], movers: vec![] };
    let scanner = ScannerSpec {
        ring_count: 32, vfov_min_deg: -60.0, vfov_max_deg: 60.0, horiz_res_deg: 0.4,
        ..ScannerSpec::default()
    };
    let mut samples = Vec::new();
    for i in 0..=122 {
        let t = i as f64 * 0.1;
        let ang = t / 10.0 * std::f64::consts::TAU;
        samples.push((t, yaw_pose(3.2 * ang.cos(), 1.9 * ang.sin(), 1.5, ang)));
    }
    let traj = Trajectory::new(samples).unwrap();
    let frames = simulate(&scene, &scanner, &traj, 100, 777).unwrap();
    let gt = room.sample_surface(0.1);

    for tau in [0.75, 0.5, 0.45, 0.4] {
        let mut config = PipelineConfig::default();
        config.tsdf_truncation = tau;
        let mut pipe = Pipeline::new(config).unwrap();
        for sf in &frames {
            pipe.process_frame(&sf.frame).unwrap();
        }
        let mesh = pipe.static_mesh();
        let recon = mesh.sample_surface(0.1);
        let m = cloud_metrics(&recon, &gt, 0.2).unwrap();
        println!("tau={tau}: precision {:.2}% recall {:.2}% acc95 {:.3} rmse {:.4} verts {}",
            m.precision, m.recall, m.acc95, m.rmse, mesh.vertices.len());
    }
}
