use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpmqir_core::ansatz::AnsatzKind;
use mpmqir_core::dataio::DatasetKind;
use mpmqir_core::optimize::{GradientMethod, Init, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "mpmqir", version, about = "Variational-circuit image codec", args_override_self = true)]
pub struct Cli {
    /// key=value file whose entries are applied as flags before the command line's own
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for gradient evaluation, channels and sweep cells
    #[arg(long, global = true, env = "MPMQIR_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

pub const SUBCOMMANDS: [&str; 7] = [
    "compress",
    "decompress",
    "evaluate",
    "sweep",
    "compare",
    "info",
    "replay",
];

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a circuit per channel and write the checkpoint, report and trace
    Compress(CompressArgs),
    /// Rebuild an image from a checkpoint
    Decompress(DecompressArgs),
    /// Compare two PGM/PPM images
    Evaluate(EvaluateArgs),
    /// Train over images × layer counts × seeds and tabulate PCR against quality
    Sweep(SweepArgs),
    /// Train several ansatz families at a shared parameter budget
    Compare(CompareArgs),
    /// Print checkpoint geometry without decoding the image
    Info(InfoArgs),
    /// Re-run the command recorded in a run manifest
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnsatzArg {
    Mpm,
    Qcnn,
    Qae,
}

impl From<AnsatzArg> for AnsatzKind {
    fn from(a: AnsatzArg) -> Self {
        match a {
            AnsatzArg::Mpm => AnsatzKind::Mpm,
            AnsatzArg::Qcnn => AnsatzKind::Qcnn,
            AnsatzArg::Qae => AnsatzKind::Qae,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Mnist,
    FashionMnist,
    Cifar10,
    Raw,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Mnist => DatasetKind::Mnist,
            DatasetArg::FashionMnist => DatasetKind::FashionMnist,
            DatasetArg::Cifar10 => DatasetKind::Cifar10,
            DatasetArg::Raw => DatasetKind::Raw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GradientArg {
    Shift,
    Adjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Normal,
}

/// Optimizer settings shared by every training command.
#[derive(Clone, Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    pub init: InitArg,
    /// Standard deviation for `--init normal`
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub log_every: u64,
    /// Stop once the reconstruction reaches this PSNR (dB)
    #[arg(long)]
    pub target_psnr: Option<f64>,
    #[arg(long, value_enum, default_value_t = GradientArg::Shift)]
    pub gradient: GradientArg,
}

impl TrainArgs {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps as usize,
            learning_rate: self.lr,
            adam_beta1: self.beta1,
            adam_beta2: self.beta2,
            adam_eps: self.adam_eps,
            seed,
            init: match self.init {
                InitArg::Uniform => Init::UniformTwoPi,
                InitArg::Normal => Init::SmallNormal {
                    scale: self.init_scale,
                },
            },
            log_every: self.log_every as usize,
            target_psnr_db: self.target_psnr,
            gradient: match self.gradient {
                GradientArg::Shift => GradientMethod::Shift,
                GradientArg::Adjoint => GradientMethod::Adjoint,
            },
        }
    }
}

/// `WxH` target size for area downsampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

pub fn parse_size(s: &str) -> Result<Size, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("invalid dimension '{v}'"))
    };
    Ok(Size {
        width: parse(w)?,
        height: parse(h)?,
    })
}

#[derive(Clone, Debug, Args)]
pub struct CompressArgs {
    /// PGM/PPM image, or a dataset file together with --dataset
    pub input: PathBuf,
    /// Dataset container format; defaults to raw PGM/PPM
    #[arg(long, value_enum, default_value_t = DatasetArg::Raw)]
    pub dataset: DatasetArg,
    /// Record number inside the dataset file
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Area-downsample to WxH before training
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<Size>,
    #[arg(long, value_enum, default_value_t = AnsatzArg::Mpm)]
    pub ansatz: AnsatzArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..65536))]
    pub layers: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint path; report, trace and manifest are written next to it
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct DecompressArgs {
    pub model: PathBuf,
    /// Output image; PGM for one channel, PPM for three
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub recon: PathBuf,
    /// Checkpoint whose parameter count supplies the PCR field
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the JSON report to this path
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Images to train on.
#[derive(Clone, Debug, Args)]
pub struct BatchSource {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    /// Dataset file
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub indices: Vec<usize>,
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<Size>,
    #[arg(long, value_delimiter = ',', default_value = "42")]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: BatchSource,
    #[arg(long, value_enum, default_value_t = AnsatzArg::Mpm)]
    pub ansatz: AnsatzArg,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub layers_list: Vec<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    /// CSV output path
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: BatchSource,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mpm,qcnn,qae")]
    pub methods: Vec<AnsatzArg>,
    /// Parameter budget as a fraction of the pixel count
    #[arg(long)]
    pub match_pcr: f64,
    #[command(flatten)]
    pub train: TrainArgs,
    /// CSV output path; the JSON summary goes next to it
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct InfoArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
