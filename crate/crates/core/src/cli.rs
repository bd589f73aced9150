//! The `rangenull` command line.
//!
//! Machine-readable JSON goes to stdout, one-line diagnostics to stderr.
//! Exit codes: 0 success, 2 usage error, 3 input contract violation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{detect_format, load_any, save_as, save_png, write_raw, FileFormat};
use crate::linop::{generic_pd, LinearOperator};
use crate::metrics::{compare, error_map, DEFAULT_ERROR_GAIN};
use crate::pooling::{pd_combine, verify_consistency};
use crate::protocol::{run_bench, run_table1, BenchOp, Precision, Table1Config};
use crate::resample::{predict_raw, resample, Filter, PredictMethod, ResampleSpec};
use crate::restore::{
    color_to_gray, cs_build, gray_to_color, gray_to_color_listing, BlockSenseOp, ColorMeanOp,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rangenull",
    version,
    about = "Consistent super-resolution by range-null space decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Downsample (or upsample) an image with a resampling filter.
    Degrade(DegradeArgs),
    /// Pooling-based decomposition of a raw prediction against an LR image.
    Pd(PdArgs),
    /// Consistency report of an SR result against its LR input.
    Verify(VerifyArgs),
    /// Render an amplified error map between two images.
    Errmap(ErrmapArgs),
    /// Time an operation on seeded random tensors.
    Bench(BenchArgs),
    /// Consistency and timing protocol over seeded random images.
    Table1(Table1Args),
    /// Channel-mean colorization operator.
    Colorize {
        #[command(subcommand)]
        command: ColorizeCommand,
    },
    /// Block compressed sensing operator.
    Cs {
        #[command(subcommand)]
        command: CsCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    Box,
    Bilinear,
    Bicubic,
}

impl From<FilterArg> for Filter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Box => Filter::Box,
            FilterArg::Bilinear => Filter::Bilinear,
            FilterArg::Bicubic => Filter::Bicubic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Down,
    Up,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Written in the same format as the input.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    scale: usize,
    #[arg(long, value_enum, default_value = "bicubic")]
    filter: FilterArg,
    #[arg(long)]
    antialias: bool,
    #[arg(long, value_enum, default_value = "down")]
    direction: DirectionArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PredictorArg {
    Nearest,
    Bilinear,
    Bicubic,
    External,
}

#[derive(Debug, Args)]
struct PdArgs {
    /// Low-resolution input (PNG or PDT1).
    #[arg(long)]
    lr: PathBuf,
    /// Exact PDT1 output.
    #[arg(long)]
    output: PathBuf,
    /// Optional quantized 8-bit PNG copy.
    #[arg(long)]
    png: Option<PathBuf>,
    #[arg(long)]
    scale: usize,
    #[arg(long, value_enum, default_value = "bicubic")]
    predictor: PredictorArg,
    /// Raw prediction file; implies the external predictor.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    lr: PathBuf,
    #[arg(long)]
    sr: PathBuf,
    #[arg(long)]
    scale: usize,
    /// Quantize the SR image to 8 bits before checking.
    #[arg(long)]
    quantize: bool,
}

#[derive(Debug, Args)]
struct ErrmapArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    sr: PathBuf,
    /// RGB PNG output.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ERROR_GAIN)]
    gain: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchOpArg {
    Pd,
    GenericPd,
    PoolDown,
    PoolUp,
    Highfreq,
}

impl From<BenchOpArg> for BenchOp {
    fn from(op: BenchOpArg) -> Self {
        match op {
            BenchOpArg::Pd => BenchOp::Pd,
            BenchOpArg::GenericPd => BenchOp::GenericPd,
            BenchOpArg::PoolDown => BenchOp::PoolDown,
            BenchOpArg::PoolUp => BenchOp::PoolUp,
            BenchOpArg::Highfreq => BenchOp::Highfreq,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "pd")]
    op: BenchOpArg,
    #[arg(long, default_value_t = 1024)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    scale: usize,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, env = "RANGENULL_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F64,
    F32,
}

#[derive(Debug, Args)]
struct Table1Args {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    scale: usize,
    #[arg(long, env = "RANGENULL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "f64")]
    precision: PrecisionArg,
    /// Process images on all cores; numbers are unchanged.
    #[arg(long)]
    parallel: bool,
    /// Leave the timing field out so output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Subcommand)]
enum ColorizeCommand {
    /// Color image to per-pixel channel mean.
    Gray {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Gray image back to color through the pseudo-inverse.
    Color {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Use the 1/3-scaled back-projection instead of the pseudo-inverse.
        #[arg(long)]
        listing: bool,
    },
    /// Consistent colorization: gray observation plus raw color prediction.
    Pd {
        #[arg(long)]
        gray: PathBuf,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        listing: bool,
    },
}

#[derive(Debug, Subcommand)]
enum CsCommand {
    /// Generate sampling rows and write them as PDM1.
    Build {
        #[arg(long, default_value_t = crate::restore::DEFAULT_BLOCK)]
        block: usize,
        #[arg(long)]
        ratio: f64,
        #[arg(long, env = "RANGENULL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Measure an image; writes a PDT1 tensor with channels * q channels.
    Measure {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Back-project measurements through the pseudo-inverse.
    Pinv {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Consistent reconstruction from measurements plus a raw prediction.
    Pd {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// `.png` gets PNG, anything else PDT1.
fn format_for(path: &Path) -> FileFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => FileFormat::Png,
        _ => FileFormat::Raw,
    }
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let line = serde_json::to_string(value).expect("reports serialize");
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Degrade(a) => {
            let format = detect_format(&a.input)?;
            let x = load_any(&a.input)?;
            let spec = match a.direction {
                DirectionArg::Down => ResampleSpec::down(a.filter.into(), a.scale, a.antialias),
                DirectionArg::Up => ResampleSpec::up(a.filter.into(), a.scale),
            };
            save_as(&resample(&x, &spec)?, &a.output, format)
        }
        Command::Pd(a) => {
            let y = load_any(&a.lr)?;
            let method = match (a.predictor, &a.raw) {
                (_, Some(_)) | (PredictorArg::External, None) => PredictMethod::External,
                (PredictorArg::Nearest, None) => PredictMethod::Nearest,
                (PredictorArg::Bilinear, None) => PredictMethod::Bilinear,
                (PredictorArg::Bicubic, None) => PredictMethod::Bicubic,
            };
            let raw = predict_raw(&y, method, a.scale, a.raw.as_deref())?;
            let x_hat = pd_combine(&y, &raw, a.scale)?;
            write_raw(&x_hat, &a.output)?;
            emit(out, &verify_consistency(&y, &x_hat, a.scale)?)?;
            if let Some(png) = &a.png {
                save_png(&x_hat, png)?;
                let report = verify_consistency(&y, &x_hat.quantize(), a.scale)?;
                emit(out, &serde_json::json!({ "quantized": report }))?;
            }
            Ok(())
        }
        Command::Verify(a) => {
            let y = load_any(&a.lr)?;
            let mut sr = load_any(&a.sr)?;
            if a.quantize {
                sr = sr.quantize();
            }
            emit(out, &verify_consistency(&y, &sr, a.scale)?)
        }
        Command::Errmap(a) => {
            let gt = load_any(&a.gt)?;
            let sr = load_any(&a.sr)?;
            save_png(&error_map(&gt, &sr, a.gain)?, &a.output)?;
            emit(out, &compare(&gt, &sr)?)
        }
        Command::Bench(a) => emit(
            out,
            &run_bench(a.op.into(), a.size, a.scale, a.iterations, a.seed)?,
        ),
        Command::Table1(a) => {
            let cfg = Table1Config {
                count: a.count,
                size: a.size,
                scale: a.scale,
                seed: a.seed,
                precision: match a.precision {
                    PrecisionArg::F64 => Precision::F64,
                    PrecisionArg::F32 => Precision::F32,
                },
                parallel: a.parallel,
            };
            emit(out, &run_table1(&cfg, !a.no_timing)?)
        }
        Command::Colorize { command } => colorize(command, out),
        Command::Cs { command } => cs(command, out),
    }
}

fn colorize(command: ColorizeCommand, out: &mut dyn Write) -> Result<()> {
    match command {
        ColorizeCommand::Gray { input, output } => save_as(
            &color_to_gray(&load_any(&input)?)?,
            &output,
            format_for(&output),
        ),
        ColorizeCommand::Color {
            input,
            output,
            listing,
        } => {
            let g = load_any(&input)?;
            let c = if listing {
                gray_to_color_listing(&g)?
            } else {
                gray_to_color(&g)?
            };
            save_as(&c, &output, format_for(&output))
        }
        ColorizeCommand::Pd {
            gray,
            raw,
            output,
            listing,
        } => {
            let y = load_any(&gray)?;
            let x_raw = load_any(&raw)?;
            let op = if listing {
                ColorMeanOp::with_listing_pinv(y.height(), y.width())
            } else {
                ColorMeanOp::new(y.height(), y.width())
            };
            let x_hat = generic_pd(&op, &y, &x_raw)?;
            save_as(&x_hat, &output, format_for(&output))?;
            emit(out, &compare(&y, &op.forward(&x_hat)?)?)
        }
    }
}

fn cs(command: CsCommand, out: &mut dyn Write) -> Result<()> {
    match command {
        CsCommand::Build {
            block,
            ratio,
            seed,
            output,
        } => {
            let op = cs_build(block, ratio, seed)?;
            op.save(&output)?;
            emit(
                out,
                &serde_json::json!({
                    "block": op.block(),
                    "q": op.q(),
                    "seed": op.seed(),
                    "orthonormality_error": op.orthonormality_error(),
                }),
            )
        }
        CsCommand::Measure { op, input, output } => {
            let op = BlockSenseOp::load(&op)?;
            write_raw(&op.measure(&load_any(&input)?)?, &output)
        }
        CsCommand::Pinv { op, input, output } => {
            let op = BlockSenseOp::load(&op)?;
            let x = op.back_project(&load_any(&input)?)?;
            save_as(&x, &output, format_for(&output))
        }
        CsCommand::Pd {
            op,
            measurements,
            raw,
            output,
        } => {
            let op = BlockSenseOp::load(&op)?;
            let y = load_any(&measurements)?;
            let x_raw = load_any(&raw)?;
            let lin = op.on_shape(x_raw.shape())?;
            let x_hat = generic_pd(&lin, &y, &x_raw)?;
            write_raw(&x_hat, &output)?;
            emit(out, &compare(&y, &lin.forward(&x_hat)?)?)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "rangenull: {e}");
            EXIT_CONTRACT
        }
    }
}
