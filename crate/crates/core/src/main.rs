use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cs3d::augment::SizeStats;
use cs3d::edgehead::RotationMode;
use cs3d::harness::{self, AugmentOp, Codec, HistOptions};
use cs3d::io::config::RunConfig;
use cs3d::metrics::{CsAbsMatching, DifficultyFilter};

#[derive(Parser, Debug)]
#[command(name = "cs3d", version, about = "Closer-surface aware 3D detection evaluation and codec tools")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, env = "CS3D_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// AP table (BEV, 3D, CS-BEV, CS-ABS) as CSV.
    Eval(EvalArgs),
    /// Closer-surfaces gap distribution difference between two prediction sets.
    Hist(HistArgs),
    /// Heatmap and regression targets for one frame.
    Targets(TargetsArgs),
    /// Boxes from a target tensor.
    Decode(DecodeArgs),
    /// Refinement residuals.
    #[command(subcommand)]
    Edgehead(EdgeheadCmd),
    /// Multi-scale gated block.
    #[command(subcommand)]
    Msgm(MsgmCmd),
    /// Object size augmentation.
    #[command(subcommand)]
    Augment(AugmentCmd),
}

#[derive(Args, Debug)]
struct EvalOverrides {
    /// Class to evaluate.
    #[arg(long = "class")]
    class: Option<String>,
    #[arg(long, value_enum)]
    difficulty: Option<DifficultyArg>,
    #[arg(long, value_enum)]
    cs_abs_matching: Option<CsAbsArg>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Ground-truth frames (may also hold predictions).
    #[arg(long)]
    gt: PathBuf,
    /// Prediction frames, joined to the ground truth by frame id.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Penalty ratio; repeat for a sweep.
    #[arg(long, num_args = 1..)]
    alpha: Vec<f64>,
    #[command(flatten)]
    overrides: EvalOverrides,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HistArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 2.0)]
    hi: f64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    overrides: EvalOverrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TargetsArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Frame to encode (first frame when absent).
    #[arg(long)]
    frame_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 0.1)]
    score_thresh: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum EdgeheadCmd {
    /// Residuals from predictions (anchors) to their best-overlap ground truth.
    Encode {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, value_enum, default_value_t = CodecArg::Edgehead)]
        codec: CodecArg,
        #[arg(long, value_enum, default_value_t = RotationArg::Set)]
        rotation: RotationArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refines anchors with a residual file.
    Apply {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        residuals: PathBuf,
        #[arg(long, value_enum, default_value_t = RotationArg::Set)]
        rotation: RotationArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum MsgmCmd {
    /// Seeded random parameters.
    Init {
        #[arg(long)]
        in_channels: usize,
        #[arg(long)]
        out_channels: usize,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward pass over a `features` tensor.
    Forward {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum AugmentCmd {
    /// Random object scaling.
    Ros {
        #[arg(long)]
        input: PathBuf,
        /// Fixed factors `l,w,h`; otherwise drawn from the configured range.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f64>>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical normalization toward target mean sizes.
    Sn {
        #[arg(long)]
        input: PathBuf,
        /// Target mean `l,w,h`.
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<f64>,
        /// Source mean `l,w,h`; computed from the input when absent.
        #[arg(long, value_delimiter = ',')]
        source: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DifficultyArg {
    Easy,
    Moderate,
    Hard,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CsAbsArg {
    Score,
    BevGated,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CodecArg {
    Edgehead,
    Control,
    Standard,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RotationArg {
    Set,
    Add,
    None,
}

impl From<RotationArg> for RotationMode {
    fn from(r: RotationArg) -> Self {
        match r {
            RotationArg::Set => RotationMode::SetToTarget,
            RotationArg::Add => RotationMode::AddTarget,
            RotationArg::None => RotationMode::Disabled,
        }
    }
}

impl From<CodecArg> for Codec {
    fn from(c: CodecArg) -> Self {
        match c {
            CodecArg::Edgehead => Codec::Edgehead,
            CodecArg::Control => Codec::Control,
            CodecArg::Standard => Codec::Standard,
        }
    }
}

enum Failure {
    Usage(String),
    Data(cs3d::Error),
}

impl From<cs3d::Error> for Failure {
    fn from(e: cs3d::Error) -> Self {
        Failure::Data(e)
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &EvalOverrides) {
    if let Some(c) = &o.class {
        cfg.eval.class_filter = c.clone();
    }
    if let Some(d) = o.difficulty {
        cfg.eval.difficulty_filter = match d {
            DifficultyArg::Easy => DifficultyFilter::Easy,
            DifficultyArg::Moderate => DifficultyFilter::Moderate,
            DifficultyArg::Hard => DifficultyFilter::Hard,
            DifficultyArg::All => DifficultyFilter::All,
        };
    }
    if let Some(m) = o.cs_abs_matching {
        cfg.eval.cs_abs_matching = match m {
            CsAbsArg::Score => CsAbsMatching::Score,
            CsAbsArg::BevGated => CsAbsMatching::BevGated,
        };
    }
}

fn triple(v: &[f64], flag: &str) -> Result<[f64; 3], Failure> {
    <[f64; 3]>::try_from(v).map_err(|_| Failure::Usage(format!("--{flag} takes three comma-separated values")))
}

fn stats(v: &[f64], flag: &str) -> Result<SizeStats, Failure> {
    let [l, w, h] = triple(v, flag)?;
    SizeStats::new(l, w, h).map_err(Failure::Data)
}

fn emit(out: &Option<PathBuf>, csv: &str) -> Result<(), Failure> {
    if out.is_none() {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(csv.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| Failure::Usage(format!("stdout: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Eval(a) => {
            apply_overrides(&mut cfg, &a.overrides);
            let (report, csv) = harness::with_threads(cli.threads, || {
                harness::run_eval(&a.gt, a.pred.as_deref(), &cfg.eval, &a.alpha, a.out.as_deref())
            })??;
            log::info!("{:?}", report.counts);
            emit(&a.out, &csv)
        }
        Command::Hist(a) => {
            apply_overrides(&mut cfg, &a.overrides);
            if let Some(alpha) = a.alpha {
                cfg.eval.alpha = alpha;
            }
            let opts = HistOptions {
                lo: a.lo,
                hi: a.hi,
                bins: a.bins,
            };
            let (report, csv) = harness::with_threads(cli.threads, || {
                harness::run_hist(&a.gt, &a.pred_a, &a.pred_b, &cfg.eval, opts, a.out.as_deref())
            })??;
            if report.hist_flagged {
                eprintln!("warning: an input has no matched gaps in [{}, {}]", a.lo, a.hi);
            }
            emit(&a.out, &csv)
        }
        Command::Targets(a) => {
            let grid = cfg.grid_config()?;
            let rep = harness::run_targets(&a.frames, a.frame_id.as_deref(), &cfg.classes, &grid, &a.out)?;
            log::info!("{rep:?}");
            Ok(())
        }
        Command::Decode(a) => {
            if a.top_k == 0 {
                return Err(Failure::Usage("--top-k must be >= 1".into()));
            }
            let grid = cfg.grid_config()?;
            let rep = harness::run_decode(&a.targets, &grid, a.top_k, a.score_thresh, &a.out)?;
            log::info!("{rep:?}");
            Ok(())
        }
        Command::Edgehead(EdgeheadCmd::Encode {
            frames,
            codec,
            rotation,
            out,
        }) => {
            harness::run_edgehead_encode(&frames, codec.into(), rotation.into(), &out)?;
            Ok(())
        }
        Command::Edgehead(EdgeheadCmd::Apply {
            frames,
            residuals,
            rotation,
            out,
        }) => {
            harness::run_edgehead_apply(&frames, &residuals, rotation.into(), &out)?;
            Ok(())
        }
        Command::Msgm(MsgmCmd::Init {
            in_channels,
            out_channels,
            scale,
            out,
        }) => {
            harness::run_msgm_init(in_channels, out_channels, cli.seed, scale, &out)?;
            Ok(())
        }
        Command::Msgm(MsgmCmd::Forward { params, input, out }) => {
            harness::run_msgm_forward(&params, &input, &out)?;
            Ok(())
        }
        Command::Augment(AugmentCmd::Ros {
            input,
            factors,
            lo,
            hi,
            out,
        }) => {
            let op = match (factors, lo, hi) {
                (Some(f), None, None) => AugmentOp::RosFixed(triple(&f, "factors")?),
                (None, lo, hi) => AugmentOp::RosRandom {
                    lo: lo.unwrap_or(cfg.augment.ros_range[0]),
                    hi: hi.unwrap_or(cfg.augment.ros_range[1]),
                    seed: cli.seed,
                },
                _ => return Err(Failure::Usage("--factors excludes --lo/--hi".into())),
            };
            harness::run_augment(&input, &cfg.classes, &op, &out)?;
            Ok(())
        }
        Command::Augment(AugmentCmd::Sn {
            input,
            target,
            source,
            out,
        }) => {
            let op = AugmentOp::Sn {
                source: source.as_deref().map(|v| stats(v, "source")).transpose()?,
                target: stats(&target, "target")?,
            };
            harness::run_augment(&input, &cfg.classes, &op, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
