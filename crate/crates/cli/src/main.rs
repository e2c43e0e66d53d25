//! `meshdft` command-line front end.
//!
//! ```text
//! meshdft transform --algo fft --dims 8x8x8 --shape 2x2x2 --gen random --seed 7 \
//!     --output out.bin --report report.json
//! meshdft scaling --algo kdft --mode strong --dims 64 --sweep 2,4,8 --report scaling.json
//! ```
//!
//! Exit status is 0 on success, 2 for invalid input or configuration and 3
//! for an internal protocol error in the simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshdft::bench::{
    cmd_scaling, cmd_transform, exit_code, Algorithm, Generator, InputSpec, RunConfig, Sampling, ScalingConfig,
    ScalingMode,
};
use meshdft::{ComputationShape, Error, PrecisionMode, Result};

#[derive(Parser)]
#[command(name = "meshdft", version, about = "Parallel DFT over a simulated core mesh")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one forward transform and write the result and a ledger report.
    Transform(TransformArgs),
    /// Run a strong or weak scaling sweep and write CSV and JSON reports.
    Scaling(ScalingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Uniform,
    Nonuniform,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "kdft", value_parser = parse_algo)]
    algo: Algorithm,
    #[arg(long, default_value = "f64", value_parser = parse_precision)]
    precision: PrecisionMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Host threads driving the simulator. Never changes any output.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    common: Common,
    /// Extents, e.g. `64`, `32x32` or `16,16,16`.
    #[arg(long, value_parser = parse_dims)]
    dims: Dims,
    /// Cores per dimension, e.g. `2x2x2`.
    #[arg(long, default_value = "1", value_parser = parse_shape)]
    shape: ComputationShape,
    #[arg(long, value_enum, default_value = "uniform")]
    sampling: SamplingArg,
    /// JSON sample points, one list per dimension (nonuniform sampling).
    #[arg(long)]
    points_file: Option<PathBuf>,
    /// Input tensor file (with a `<file>.json` header).
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,
    /// Synthetic input: delta, constant, tone:K or random.
    #[arg(long, value_parser = parse_gen)]
    gen: Option<Generator>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "strong", value_parser = parse_mode)]
    mode: ScalingMode,
    /// Fixed extents in strong mode.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    /// Fixed shape in weak mode.
    #[arg(long, default_value = "1", value_parser = parse_shape)]
    shape: ComputationShape,
    /// `;`-separated shapes (strong) or extents (weak), e.g. `2;4;8` or `32;64`.
    #[arg(long)]
    sweep: String,
    #[arg(long, default_value = "random", value_parser = parse_gen)]
    gen: Generator,
    /// JSON report path.
    #[arg(long)]
    report: PathBuf,
    /// CSV report path; defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_algo(s: &str) -> Result<Algorithm> {
    s.parse()
}

fn parse_precision(s: &str) -> Result<PrecisionMode> {
    s.parse()
}

fn parse_shape(s: &str) -> Result<ComputationShape> {
    s.parse()
}

fn parse_gen(s: &str) -> Result<Generator> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<ScalingMode> {
    s.parse()
}

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims> {
    s.split([',', 'x'])
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Dims)
        .map_err(|_| Error::Argument(format!("cannot parse dims '{s}'")))
}

fn transform(args: TransformArgs) -> Result<()> {
    let sampling = match (args.sampling, args.points_file) {
        (SamplingArg::Uniform, None) => Sampling::Uniform,
        (SamplingArg::Nonuniform, Some(p)) => Sampling::Nonuniform(p),
        (SamplingArg::Uniform, Some(_)) => {
            return Err(Error::Argument("--points-file needs --sampling nonuniform".into()))
        }
        (SamplingArg::Nonuniform, None) => {
            return Err(Error::Argument("--sampling nonuniform needs --points-file".into()))
        }
    };
    let input = match (args.input, args.gen) {
        (Some(p), _) => InputSpec::File(p),
        (None, Some(g)) => InputSpec::Gen(g),
        (None, None) => return Err(Error::Argument("one of --input or --gen is required".into())),
    };
    let config = RunConfig {
        precision: args.common.precision,
        sampling,
        input,
        seed: args.common.seed,
        output: args.output,
        report: args.report,
        workers: args.common.workers,
        ..RunConfig::new(args.common.algo, &args.dims.0, args.shape)
    };
    let outcome = cmd_transform(&config)?;
    let l = outcome.report.ledger;
    println!(
        "{} {:?} on {} cores: permutes {}, all_to_all {}, bytes {}, einsum flops {}, local fft flops {}",
        config.algorithm,
        config.dims,
        config.shape.num_cores(),
        l.permute_count,
        l.all_to_all_count,
        l.bytes_moved,
        l.einsum_flops,
        l.local_fft_flops
    );
    Ok(())
}

fn scaling(args: ScalingArgs) -> Result<()> {
    let points: Vec<&str> = args.sweep.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut config = match args.mode {
        ScalingMode::Strong => {
            let dims = args.dims.ok_or_else(|| Error::Argument("strong mode needs --dims".into()))?;
            let shapes = points.iter().map(|p| p.parse()).collect::<Result<Vec<ComputationShape>>>()?;
            ScalingConfig::strong(args.common.algo, &dims.0, shapes)
        }
        ScalingMode::Weak => {
            let dims = points.iter().map(|p| parse_dims(p).map(|d| d.0)).collect::<Result<Vec<_>>>()?;
            ScalingConfig::weak(args.common.algo, args.shape, dims)
        }
    };
    config.precision = args.common.precision;
    config.generator = args.gen;
    config.seed = args.common.seed;
    config.workers = args.common.workers;
    let csv = args.csv.unwrap_or_else(|| args.report.with_extension("csv"));
    let report = cmd_scaling(&config, &csv, &args.report)?;
    for row in report.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: skipped dims {} shape {}: {}", row.dims, row.shape, row.message);
    }
    print!("{}", report.to_csv()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Transform(a) => transform(a),
        Command::Scaling(a) => scaling(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
