use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use worldkit::pipeline::commands::{
    cmd_align, cmd_compose, cmd_pack, cmd_parse_scene, cmd_plan, cmd_rope_analysis, cmd_synth_frames, cmd_synth_scene,
};
use worldkit::pipeline::config::PipelineConfig;
use worldkit::pipeline::synth::SceneKind;
use worldkit::planner::Mode;
use worldkit::Result;

#[derive(Parser)]
#[command(
    name = "worldkit",
    version,
    about = "Panoramic scene parsing, trajectory planning, depth alignment and TSDF meshing"
)]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the panoramic point cloud, mesh and navigation mesh from a scene bundle.
    ParseScene { scene: PathBuf },
    /// Plan camera trajectories over parse-scene outputs.
    Plan { parsed: PathBuf },
    /// Align frame depths to the panorama and expand the point cloud.
    Align { parsed: PathBuf, frames: PathBuf },
    /// Fuse aligned depths into a mesh and score re-renderings.
    Compose { aligned: PathBuf },
    /// Write a synthetic scene bundle, or synthetic frames along planned trajectories.
    SynthScene {
        #[arg(long)]
        kind: SceneKind,
        /// trajectories.json from `plan`; renders frames instead of a panorama bundle.
        #[arg(long)]
        frames_from: Option<PathBuf>,
        /// Sequence whose frames receive a gross disparity error.
        #[arg(long, requires = "frames_from")]
        corrupt_sequence: Option<usize>,
    },
    /// Numeric utilities.
    Utils {
        #[command(subcommand)]
        command: Utils,
    },
}

#[derive(Subcommand)]
enum Utils {
    /// Pairwise center-patch encoding similarities across square grid sizes, as CSV.
    RopeAnalysis {
        #[arg(long, value_delimiter = ',', default_values_t = [8u32, 12, 16, 24, 32, 48, 64])]
        sizes: Vec<u32>,
    },
    /// First-fit-decreasing packing of a JSON sample manifest.
    Pack { request: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| worldkit::Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::SynthScene {
            kind,
            frames_from: None,
            ..
        } => {
            let m = cmd_synth_scene(kind, &cfg, out)?;
            println!("synth-scene {kind}: {} files in {}", m.files.len(), out.display());
        }
        Command::SynthScene {
            kind,
            frames_from: Some(t),
            corrupt_sequence,
        } => {
            let m = cmd_synth_frames(kind, &t, corrupt_sequence, &cfg, out)?;
            println!(
                "synth-scene {kind} frames: {} files in {}",
                m.files.len(),
                out.display()
            );
        }
        Command::ParseScene { scene } => {
            let (_, s) = cmd_parse_scene(&scene, &cfg, out)?;
            println!(
                "parse-scene: {} points, {} faces, {} cells in {} components",
                s.points, s.faces, s.cells, s.components
            );
        }
        Command::Plan { parsed } => {
            let (_, set) = cmd_plan(&parsed, &cfg, out)?;
            println!("{:<12} {:>5} {:>4}", "mode", "count", "cap");
            for m in Mode::ALL {
                println!("{:<12} {:>5} {:>4}", m.name(), set.count(m), cfg.planner.caps.get(m));
            }
            println!("{:<12} {:>5} {:>4}", "total", set.len(), cfg.planner.caps.total);
        }
        Command::Align { parsed, frames } => {
            let (_, s) = cmd_align(&parsed, &frames, &cfg, out)?;
            println!(
                "align: {} frames, {} flagged, discarded sequences {:?}, {} expanded points",
                s.frames, s.flagged, s.discarded_sequences, s.expanded_points
            );
        }
        Command::Compose { aligned } => {
            let (_, m) = cmd_compose(&aligned, &cfg, out)?;
            println!(
                "compose: {} vertices, {} faces, mean photometric {:?}, mean geometric {:?}",
                m.vertices, m.faces, m.mean_photometric, m.mean_geometric
            );
        }
        Command::Utils {
            command: Utils::RopeAnalysis { sizes },
        } => {
            cmd_rope_analysis(&sizes, &cfg, out)?;
            println!("utils rope-analysis: {}", out.join("rope_similarity.csv").display());
        }
        Command::Utils {
            command: Utils::Pack { request },
        } => {
            let (_, r) = cmd_pack(&request, &cfg, out)?;
            println!("utils pack: {} bins under {} tokens", r.bins.len(), r.max_tokens);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
