mod bench;
mod commands;
mod run;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evrep::dea::{Fusion, Pooling};
use evrep::devox::{DevMode, DevoxError, VoxelDims, DEFAULT_BINS};
use evrep::ingest::{IngestError, LabelMode, PolarityFormat, DEFAULT_MIN_POINTS, DEFAULT_WINDOW_COUNT};
use evrep::pose::PoseError;
use evrep::raster::{RasterError, DEFAULT_SAMPLE_POINTS, DEFAULT_SLICES};
use evrep::synth::SynthError;
use evrep::tensor::TensorError;

#[derive(Parser)]
#[command(
    name = "evrep",
    version,
    about = "Event-camera representations: rasterized point clouds, tri-plane voxels, fusion and pose codecs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between event CSV (`t_us,x,y,p`) and EVT1; direction follows the input.
    Convert(ConvertArgs),
    /// Cut an EVT1 stream into fixed-count windows and label each one.
    Window(WindowArgs),
    /// Rasterize a window (or a directory of windows) into RPC1 point clouds.
    Rasterize(RasterizeArgs),
    /// Project a window (or a directory of windows) onto DEV1 tri-planes.
    Voxelize(VoxelizeArgs),
    /// Fuse hw/th/wt plane features into one TEN1 tensor.
    Dea(DeaArgs),
    /// Encode a joints CSV as SimDR heat-vectors or 2D heatmaps (TEN1).
    EncodeLabels(EncodeLabelsArgs),
    /// Mean and per-joint position error between two joints CSVs.
    EvalMpjpe(EvalArgs),
    /// Generate a deterministic synthetic corpus.
    Synth(SynthArgs),
    /// Time each representation stage and report events/s and latency.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    ZeroOne,
    Signed,
}

impl From<PolarityArg> for PolarityFormat {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::ZeroOne => PolarityFormat::ZeroOne,
            PolarityArg::Signed => PolarityFormat::Signed,
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    /// Input file, `-` for stdin.
    input: PathBuf,
    /// Output file, `-` for stdout.
    #[arg(short, long)]
    output: PathBuf,
    /// Polarity encoding of the CSV side.
    #[arg(long, value_enum, default_value = "zero-one")]
    polarity: PolarityArg,
    /// Sensor width when reading CSV.
    #[arg(long, default_value_t = 346)]
    width: u16,
    /// Sensor height when reading CSV.
    #[arg(long, default_value_t = 260)]
    height: u16,
    /// Stable-sort CSV events by time before writing EVT1.
    #[arg(long)]
    sort: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelModeArg {
    Mean,
    Last,
}

impl From<LabelModeArg> for LabelMode {
    fn from(m: LabelModeArg) -> Self {
        match m {
            LabelModeArg::Mean => LabelMode::Mean,
            LabelModeArg::Last => LabelMode::Last,
        }
    }
}

#[derive(Args)]
struct WindowArgs {
    /// EVT1 event stream.
    events: PathBuf,
    /// Label track CSV (`t_us,joint_id,u,v[,w]`).
    labels: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Events per window.
    #[arg(long, default_value_t = DEFAULT_WINDOW_COUNT, value_parser = positive)]
    count: usize,
    #[arg(long, value_enum, default_value = "mean")]
    label_mode: LabelModeArg,
    /// Windows with fewer events are dropped.
    #[arg(long, default_value_t = DEFAULT_MIN_POINTS)]
    min_points: usize,
}

#[derive(Args)]
struct RasterizeArgs {
    /// EVT1 window file or a directory of them; `-` for stdin.
    input: PathBuf,
    /// Output file or directory; `-` for stdout.
    #[arg(short, long)]
    output: PathBuf,
    /// Time slices per window.
    #[arg(long, default_value_t = DEFAULT_SLICES as u16, value_parser = clap::value_parser!(u16).range(1..))]
    k: u16,
    /// Points per sampled cloud.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS, value_parser = positive)]
    sample_n: usize,
    /// Keep every rasterized point instead of sampling.
    #[arg(long, conflicts_with = "sample_n")]
    no_sample: bool,
    #[arg(long, env = "EVREP_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DevModeArg {
    Count,
    PolaritySum,
    TwoChannel,
}

impl From<DevModeArg> for DevMode {
    fn from(m: DevModeArg) -> Self {
        match m {
            DevModeArg::Count => DevMode::Count,
            DevModeArg::PolaritySum => DevMode::PolaritySum,
            DevModeArg::TwoChannel => DevMode::TwoChannel,
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    Ok((positive(w.trim())?, positive(h.trim())?))
}

fn parse_dims(s: &str) -> Result<VoxelDims, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let dims = match parts.as_slice() {
        [n] => VoxelDims::cube(*n),
        [h, w, t] => VoxelDims::new(*h, *w, *t),
        _ => return Err("expected N or HxWxT".into()),
    };
    dims.map_err(|e| e.to_string())
}

#[derive(Args)]
struct VoxelizeArgs {
    /// EVT1 window file or a directory of them; `-` for stdin.
    input: PathBuf,
    /// Output file or directory; `-` for stdout.
    #[arg(short, long)]
    output: PathBuf,
    /// Grid size, `N` for a cube or `HxWxT`.
    #[arg(long, default_value_t = VoxelDims::cube(DEFAULT_BINS).unwrap(), value_parser = parse_dims)]
    dims: VoxelDims,
    #[arg(long, value_enum, default_value = "two-channel")]
    mode: DevModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingArg {
    Avg,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Dea,
    Add,
    Concat,
}

#[derive(Args)]
struct DeaArgs {
    /// Either three TEN1 files (hw, th, wt) or one DEV1 file.
    #[arg(num_args = 1..=3, required = true)]
    inputs: Vec<PathBuf>,
    /// Output TEN1 file, `-` for stdout.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "avg")]
    pooling: PoolingArg,
    #[arg(long, value_enum, default_value = "dea")]
    fusion: FusionArg,
}

impl DeaArgs {
    fn pooling(&self) -> Pooling {
        match self.pooling {
            PoolingArg::Avg => Pooling::Avg,
            PoolingArg::Max => Pooling::Max,
        }
    }

    fn fusion(&self) -> Fusion {
        match self.fusion {
            FusionArg::Dea => Fusion::Dea,
            FusionArg::Add => Fusion::Add,
            FusionArg::Concat => Fusion::Concat,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodecArg {
    Simdr,
    Heatmap,
}

#[derive(Args)]
struct EncodeLabelsArgs {
    /// Joints CSV (`joint_id,u,v`).
    input: PathBuf,
    /// Output TEN1 file, `-` for stdout.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "simdr")]
    codec: CodecArg,
    /// Gaussian width; 8 for simdr and 2 for heatmap when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    /// Axis length along u; 346 for simdr and 64 for heatmap when omitted.
    #[arg(long)]
    width: Option<usize>,
    /// Axis length along v; 260 for simdr and 64 for heatmap when omitted.
    #[arg(long)]
    height: Option<usize>,
    /// Frame size `WxH` the joints are given in; coordinates are rescaled onto the codec grid.
    #[arg(long, value_parser = parse_size)]
    source: Option<(usize, usize)>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted joints CSV.
    pred: PathBuf,
    /// Ground-truth joints CSV.
    gt: PathBuf,
    /// Also write the report to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output corpus directory.
    #[arg(short, long)]
    output: PathBuf,
    /// JSON file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sequences: Option<usize>,
    #[arg(long)]
    width: Option<u16>,
    #[arg(long)]
    height: Option<u16>,
    /// Contrast threshold on log intensity.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    frame_period_us: Option<u64>,
    /// Uniform background noise rate per pixel.
    #[arg(long)]
    noise_rate_hz: Option<f64>,
    #[arg(long, env = "EVREP_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// EVT1 stream to draw the benchmark window from; a seeded random window otherwise.
    input: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Events per window.
    #[arg(long, default_value_t = DEFAULT_WINDOW_COUNT, value_parser = positive)]
    count: usize,
    /// Timed repetitions per stage.
    #[arg(long, default_value_t = 50, value_parser = positive)]
    iterations: usize,
    #[arg(long, default_value_t = DEFAULT_SLICES as u16, value_parser = clap::value_parser!(u16).range(1..))]
    k: u16,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS, value_parser = positive)]
    sample_n: usize,
    #[arg(long, default_value_t = VoxelDims::cube(DEFAULT_BINS).unwrap(), value_parser = parse_dims)]
    dims: VoxelDims,
    #[arg(long, env = "EVREP_SEED", default_value_t = 0)]
    seed: u64,
}

/// A flag combination that parses but cannot be honoured.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        let io = cause.is::<io::Error>()
            || matches!(cause.downcast_ref(), Some(IngestError::Io(_)))
            || matches!(cause.downcast_ref(), Some(RasterError::Io(_)))
            || matches!(cause.downcast_ref(), Some(DevoxError::Io(_)))
            || matches!(cause.downcast_ref(), Some(TensorError::Io(_)))
            || matches!(cause.downcast_ref(), Some(PoseError::Io(_)))
            || matches!(cause.downcast_ref(), Some(SynthError::Io(_)));
        if io {
            return EXIT_IO;
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Window(a) => commands::window(a),
        Command::Rasterize(a) => commands::rasterize(a),
        Command::Voxelize(a) => commands::voxelize(a),
        Command::Dea(a) => commands::dea(a),
        Command::EncodeLabels(a) => commands::encode_labels(a),
        Command::EvalMpjpe(a) => commands::eval_mpjpe(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => bench::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            let class = match code {
                EXIT_USAGE => "usage",
                EXIT_IO => "io",
                _ => "data",
            };
            eprintln!("evrep: {class} error: {err:#}");
            ExitCode::from(code)
        }
    }
}
