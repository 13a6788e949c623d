use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use courtpose::eval::{ComparisonPlane, DEFAULT_CM_PER_PX};
use courtpose::pose::DEFAULT_VMAX;
use courtpose::tracker::DEFAULT_MAX_DISP;

use crate::CliError;

pub const DEFAULT_MAX_REPROJ_PX: f64 = 3.0;
pub const DEFAULT_PX_PER_M: f64 = 40.0;

#[derive(Debug, Parser)]
#[command(name = "courtpose", version, about = "Court-plane player positioning and 3D pose repair")]
pub struct Cli {
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the camera-to-court homography from point correspondences.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Calibrate(CalibrateArgs),
    /// Filter and associate detections into two court-plane tracks.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Track(TrackArgs),
    /// Flag outlier pose frames and refill them from keyframes.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    RepairPoses(RepairArgs),
    /// Compare tracks with ground truth.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Evaluate(EvaluateArgs),
    /// Generate a synthetic scene with ground truth.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Synth(SynthArgs),
    /// Draw both trajectories on a top-view court.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Render(RenderArgs),
    /// Run every stage in sequence.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Correspondences, one `cam_x cam_y world_x world_y` per line.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub detections: PathBuf,
    /// Court polygon in camera pixels, one `x y` vertex per line.
    #[arg(long)]
    pub court: PathBuf,
    /// Homography JSON written by `calibrate`.
    #[arg(long)]
    pub homography: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest foot-point jump per frame, pixels.
    #[arg(long, default_value_t = DEFAULT_MAX_DISP)]
    pub max_disp: f64,
    /// Refuse calibrations whose camera reprojection max exceeds this, pixels.
    #[arg(long, default_value_t = DEFAULT_MAX_REPROJ_PX)]
    pub max_reproj_px: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RepairArgs {
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest plausible keypoint displacement per frame, pose units.
    #[arg(long, default_value_t = DEFAULT_VMAX)]
    pub vmax: f64,
    /// Also write `features_<player>.csv` into this directory.
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    /// Ground truth CSV `frame,player,world_x,world_y` in court meters.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// topview, world or camera.
    #[arg(long, default_value = "topview")]
    pub plane: ComparisonPlane,
    /// Needed for the camera plane.
    #[arg(long)]
    pub homography: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CM_PER_PX)]
    pub cm_per_px: f64,
    /// Also write an error-versus-frame plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scene configuration JSON; defaults are used when absent.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Overrides the scene's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Top-view scale, pixels per meter.
    #[arg(long, default_value_t = DEFAULT_PX_PER_M)]
    pub px_per_m: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Synthesize the inputs from this scene first.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Seed for the synthetic scene; on its own, synthesizes the default scene.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub court: Option<PathBuf>,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub poses: Option<PathBuf>,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_DISP)]
    pub max_disp: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_REPROJ_PX)]
    pub max_reproj_px: f64,
    #[arg(long, default_value_t = DEFAULT_VMAX)]
    pub vmax: f64,
    #[arg(long, default_value = "topview")]
    pub plane: ComparisonPlane,
    #[arg(long, default_value_t = DEFAULT_CM_PER_PX)]
    pub cm_per_px: f64,
    #[arg(long, default_value_t = DEFAULT_PX_PER_M)]
    pub px_per_m: f64,
}

/// Splices the flags of a `--config` file in front of the user's own flags,
/// so that later (command-line) occurrences override them.
pub fn expand_config(argv: &[String]) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it.next().ok_or_else(|| CliError::usage("--config needs a file"))?;
            config = Some(path.clone());
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = config else {
        return Ok(argv.to_vec());
    };
    let text = crate::read_input(std::path::Path::new(&path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{path}: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(CliError::usage(format!("{path}: expected a JSON object")));
    };
    // program name, then subcommand, then config flags, then the rest
    let sub = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 2).unwrap_or(rest.len());
    let command = Cli::command();
    let known = |name: &str, sub: Option<&str>| {
        command
            .get_subcommands()
            .filter(|c| sub.is_none_or(|s| c.get_name() == s))
            .any(|c| c.get_arguments().any(|a| a.get_long() == Some(name)))
    };
    let sub_name = rest.get(sub - 1).map(String::as_str).filter(|_| sub >= 2);
    let mut flags = Vec::new();
    for (key, v) in map {
        let long = key.replace('_', "-");
        if !known(&long, None) {
            return Err(CliError::usage(format!("{path}: unknown option {key:?}")));
        }
        // a shared file may hold options for other subcommands
        if !known(&long, sub_name) {
            continue;
        }
        let flag = format!("--{long}");
        match v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => flags.push(flag),
            serde_json::Value::String(s) => flags.push(format!("{flag}={s}")),
            serde_json::Value::Number(n) => flags.push(format!("{flag}={n}")),
            _ => return Err(CliError::usage(format!("{path}: value of {key:?} must be a string, number or boolean"))),
        }
    }
    let mut out: Vec<String> = rest[..sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&rest[sub..]);
    Ok(out)
}
