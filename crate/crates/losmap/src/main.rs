//! `losmap` command line: synthetic scan generation, the full per-frame
//! pipeline, and metric evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use losmap::field::{self, PointLabel};
use losmap::geom::Vec3;
use losmap::mesh::{export_mesh, MeshFormat};
use losmap::metrics;
use losmap::pipeline::Pipeline;
use losmap::scan::{io, IngestOptions};
use losmap::sim;
use losmap::{Error, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "losmap",
    about = "LiDAR boundary meshing, line-of-sight free-space fields, moving-object \
             removal, and static-scene reconstruction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloudFormatArg {
    Ply,
    Xyz,
    KittiBin,
}

impl From<CloudFormatArg> for io::CloudFormat {
    fn from(v: CloudFormatArg) -> Self {
        match v {
            CloudFormatArg::Ply => io::CloudFormat::Ply,
            CloudFormatArg::Xyz => io::CloudFormat::Xyz,
            CloudFormatArg::KittiBin => io::CloudFormat::KittiBin,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scan sequence over a scene, writing binary PLY frames,
    /// the trajectory, per-frame timestamps, and exact ground truth
    /// (normals + dynamic labels). Deterministic per seed.
    Simulate {
        /// Scene description file (see README for the grammar).
        #[arg(long)]
        scene: PathBuf,
        /// Scanner description file (`key = value`); omit for defaults.
        #[arg(long)]
        scanner: Option<PathBuf>,
        /// Sensor trajectory (TUM format). It must span the simulated time.
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Number of frames at the scanner rate, starting at the trajectory
        /// start time.
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over a frame sequence:
    /// mesh → d^t → detect dynamics → fuse → integrate.
    Run {
        /// Frame clouds: a directory of files or a single file.
        #[arg(long)]
        frames: PathBuf,
        /// TUM trajectory file.
        #[arg(long)]
        traj: PathBuf,
        /// Pipeline config (`key = value`); omit for defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Cloud format of the input frames.
        #[arg(long, value_enum, default_value = "ply")]
        format: CloudFormatArg,
        /// Export each frame's boundary mesh (world frame, PLY).
        #[arg(long)]
        mesh_per_frame: bool,
        /// Export each frame's estimated point normals.
        #[arg(long)]
        dump_normals: bool,
        /// Dump a field snapshot every N frames.
        #[arg(long, value_name = "N")]
        dump_field_every: Option<usize>,
    },
    /// Evaluate reconstruction and detection quality.
    Eval {
        /// Reconstructed cloud or mesh vertices (ply/xyz/bin).
        #[arg(long)]
        recon: PathBuf,
        /// Ground-truth cloud.
        #[arg(long)]
        gt: PathBuf,
        /// Estimated per-point normals file ("nx ny nz" lines).
        #[arg(long)]
        est_normals: Option<PathBuf>,
        /// Ground-truth normals file; required with --est-normals.
        #[arg(long)]
        gt_normals: Option<PathBuf>,
        /// Detected mask file (0 static / 1 dynamic / 2 unobserved).
        #[arg(long)]
        est_masks: Option<PathBuf>,
        /// Ground-truth labels file (0 static / 1 dynamic).
        #[arg(long)]
        gt_masks: Option<PathBuf>,
        /// Distance threshold τ_m (meters) for precision/recall.
        #[arg(long, default_value_t = 0.2)]
        tau_m: f64,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_normals(path: &Path, normals: &[Option<Vec3>]) -> losmap::Result<()> {
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    for n in normals {
        match n {
            Some(n) => writeln!(w, "{} {} {}", n.x, n.y, n.z),
            None => writeln!(w, "nan nan nan"),
        }
        .map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
    }
    Ok(())
}

fn read_normals(path: &Path) -> losmap::Result<Vec<Option<Vec3>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut out = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        if vals.len() != 3 {
            return Err(Error::Parameter(format!(
                "{}: normals need 3 columns",
                path.display()
            )));
        }
        if vals.iter().any(|v| v.is_nan()) {
            out.push(None);
        } else {
            out.push(Some(Vec3::new(vals[0], vals[1], vals[2])));
        }
    }
    Ok(out)
}

fn read_bool_labels(path: &Path) -> losmap::Result<Vec<bool>> {
    let labels = field::read_mask(path)?;
    Ok(labels.iter().map(|&l| l == PointLabel::Dynamic).collect())
}

fn cmd_simulate(
    scene: &Path,
    scanner: Option<&Path>,
    traj: &Path,
    seed: u64,
    frames: usize,
    out: &Path,
) -> losmap::Result<()> {
    let scene = sim::read_scene(scene)?;
    let scanner = match scanner {
        Some(p) => sim::read_scanner(p)?,
        None => sim::ScannerSpec::default(),
    };
    let trajectory = io::read_trajectory(traj)?;
    let sim_frames = sim::simulate(&scene, &scanner, &trajectory, frames, seed)?;

    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;
    let mut times = Vec::new();
    let mut poses = Vec::new();
    for f in &sim_frames {
        let id = f.frame.frame_id;
        io::write_ply_points(
            &out.join(format!("frame_{id:06}.ply")),
            &f.frame.points,
            Some(f.frame.timestamp),
            true,
        )?;
        write_normals(
            &out.join(format!("normals_{id:06}.txt")),
            &f.gt_normals.iter().map(|n| Some(*n)).collect::<Vec<_>>(),
        )?;
        let labels = field::DynamicMask {
            frame_id: id,
            labels: f
                .gt_dynamic
                .iter()
                .map(|&d| if d { PointLabel::Dynamic } else { PointLabel::Static })
                .collect(),
        };
        field::write_mask(&out.join(format!("labels_{id:06}.txt")), &labels)?;
        times.push(f.frame.timestamp);
        poses.push((f.frame.timestamp, f.frame.pose));
    }
    io::write_times(&out.join("times.txt"), &times)?;
    io::write_trajectory(&out.join("trajectory.txt"), &losmap::Trajectory::new(poses)?)?;
    log::info!("wrote {} frames to {}", sim_frames.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    frames_path: &Path,
    traj: &Path,
    config: Option<&Path>,
    out: &Path,
    format: io::CloudFormat,
    mesh_per_frame: bool,
    dump_normals: bool,
    dump_field_every: Option<usize>,
) -> losmap::Result<()> {
    let config = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let frames = io::load_frames(frames_path, traj, format, &IngestOptions::default())?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;

    let mut pipe = Pipeline::new(config)?;
    let timing_path = out.join("timing.csv");
    let mut timing = BufWriter::new(File::create(&timing_path).map_err(|e| Error::Io {
        path: timing_path.clone(),
        source: e,
    })?);
    writeln!(timing, "frame_id,mesh_ms,field_ms,total_ms").ok();

    for frame in &frames {
        let id = frame.frame_id;
        match pipe.process_frame(frame) {
            Ok(output) => {
                field::write_mask(&out.join(format!("mask_{id:06}.txt")), &output.mask)?;
                if mesh_per_frame {
                    export_mesh(
                        &output.mesh,
                        &out.join(format!("mesh_{id:06}.ply")),
                        MeshFormat::Ply,
                        false,
                    )?;
                }
                if dump_normals {
                    write_normals(
                        &out.join(format!("normals_{id:06}.txt")),
                        &output.mesh.point_normals,
                    )?;
                }
                writeln!(
                    timing,
                    "{},{:.3},{:.3},{:.3}",
                    id, output.timing.mesh_ms, output.timing.field_ms, output.timing.total_ms
                )
                .ok();
            }
            Err(e) => {
                // A bad frame must not kill the stream; log and move on.
                log::warn!("frame {id} failed: {e}");
                writeln!(timing, "{id},nan,nan,nan").ok();
            }
        }
        if let Some(n) = dump_field_every {
            if n > 0 && (id + 1) % n as u64 == 0 {
                field::export_field_csv(&pipe.field, &out.join(format!("field_{id:06}.csv")))?;
            }
        }
    }
    timing.flush().ok();

    field::export_field_csv(&pipe.field, &out.join("field.csv"))?;
    pipe.tsdf.export_csv(&out.join("tsdf.csv"))?;
    let static_mesh = pipe.static_mesh();
    static_mesh.export(&out.join("static_mesh.ply"), MeshFormat::Ply)?;
    log::info!(
        "processed {} frames; static mesh: {} vertices, {} faces",
        frames.len(),
        static_mesh.vertices.len(),
        static_mesh.faces.len()
    );
    Ok(())
}

fn cmd_eval(
    recon: &Path,
    gt: &Path,
    est_normals: Option<&Path>,
    gt_normals: Option<&Path>,
    est_masks: Option<&Path>,
    gt_masks: Option<&Path>,
    tau_m: f64,
    out: Option<&Path>,
) -> losmap::Result<()> {
    let recon_pts = io::read_points_auto(recon)?;
    let gt_pts = io::read_points_auto(gt)?;
    let m = metrics::cloud_metrics(&recon_pts, &gt_pts, tau_m)?;

    let mut report = String::new();
    report.push_str(&format!("tau_m = {tau_m}\n"));
    report.push_str(&format!("rmse = {}\n", m.rmse));
    report.push_str(&format!("avg_hausdorff = {}\n", m.avg_hausdorff));
    report.push_str(&format!("precision = {}\n", m.precision));
    report.push_str(&format!("recall = {}\n", m.recall));
    report.push_str(&format!("f1 = {}\n", m.f1));
    report.push_str(&format!("acc95 = {}\n", m.acc95));

    match (est_normals, gt_normals) {
        (Some(est), Some(gt)) => {
            let est = read_normals(est)?;
            let gt: Vec<Vec3> = read_normals(gt)?
                .into_iter()
                .map(|n| n.unwrap_or_else(Vec3::zeros))
                .collect();
            let sim = metrics::normal_similarity(&est, &gt, None)?;
            report.push_str(&format!("normal_mean_cosine = {}\n", sim.mean_cosine));
            report.push_str(&format!("normal_valid_points = {}\n", sim.valid_count));
        }
        (None, None) => {}
        _ => {
            return Err(Error::Parameter(
                "--est-normals and --gt-normals must be given together".into(),
            ))
        }
    }

    match (est_masks, gt_masks) {
        (Some(est), Some(gt)) => {
            let mask = field::DynamicMask {
                frame_id: 0,
                labels: field::read_mask(est)?,
            };
            let gt = read_bool_labels(gt)?;
            let d = metrics::dynamic_metrics(&mask, &gt)?;
            report.push_str(&format!("dynamic_precision = {}\n", d.precision));
            report.push_str(&format!("dynamic_recall = {}\n", d.recall));
            report.push_str(&format!("dynamic_f1 = {}\n", d.f1));
            report.push_str(&format!("dynamic_unobserved = {}\n", d.unobserved));
        }
        (None, None) => {}
        _ => {
            return Err(Error::Parameter(
                "--est-masks and --gt-masks must be given together".into(),
            ))
        }
    }

    print!("{report}");
    if let Some(path) = out {
        std::fs::write(path, &report).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            scene,
            scanner,
            traj,
            seed,
            frames,
            out,
        } => cmd_simulate(scene, scanner.as_deref(), traj, *seed, *frames, out),
        Command::Run {
            frames,
            traj,
            config,
            out,
            format,
            mesh_per_frame,
            dump_normals,
            dump_field_every,
        } => cmd_run(
            frames,
            traj,
            config.as_deref(),
            out,
            (*format).into(),
            *mesh_per_frame,
            *dump_normals,
            *dump_field_every,
        ),
        Command::Eval {
            recon,
            gt,
            est_normals,
            gt_normals,
            est_masks,
            gt_masks,
            tau_m,
            out,
        } => cmd_eval(
            recon,
            gt,
            est_normals.as_deref(),
            gt_normals.as_deref(),
            est_masks.as_deref(),
            gt_masks.as_deref(),
            *tau_m,
            out.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
