use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use uncoreset::cli::{cmd_bench, cmd_build, cmd_verify, RunConfig};
use uncoreset::coresets::{CoresetKind, Method};
use uncoreset::ranges::FamilyKind;

#[derive(Parser)]
#[command(
    name = "uncoreset",
    version,
    about = "Coresets for range queries over uncertain point sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap the worker thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Re,
    Rc,
    Rq,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sample,
    Discrepancy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Halfline,
    Interval,
    Rect,
}

#[derive(Args)]
struct CommonArgs {
    /// Coreset guarantee to target
    #[arg(long, value_enum, default_value = "re")]
    kind: KindArg,
    /// Range family
    #[arg(long, value_enum, default_value = "halfline")]
    family: FamilyArg,
    /// Point dimension
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Error tolerance in (0, 1)
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Vertical tolerance for quantile coresets, in (0, 1/2)
    #[arg(long, default_value_t = 0.1)]
    eps_prime: f64,
    /// Sampling failure probability
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Sampling size multiplier
    #[arg(long, default_value_t = 1.0)]
    c_samp: f64,
    /// Reduction size multiplier
    #[arg(long, default_value_t = 1.0)]
    c_size: f64,
    /// Coloring quality target multiplier
    #[arg(long, default_value_t = 4.0)]
    c_disc: f64,
    /// Partition size multiplier (default 4 * (beta + 2))
    #[arg(long)]
    c_part: Option<f64>,
    /// Coloring cost exponent
    #[arg(long, default_value_t = 2)]
    beta: u32,
    /// Random seed (UNCORESET_SEED overrides)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rectangle verification cover budget
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build a coreset file plus a JSON metadata sidecar
    Build {
        #[command(flatten)]
        common: CommonArgs,
        /// Construction method
        #[arg(long, value_enum, default_value = "discrepancy")]
        method: MethodArg,
        /// Input points (.jsonl or .csv)
        input: PathBuf,
        /// Output coreset path (same format as input)
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Measure a coreset's exact errors against its original
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Original points
        input: PathBuf,
        /// Coreset points
        coreset: PathBuf,
        /// Report path (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep eps values and methods, emitting a CSV table
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated eps values
        #[arg(long, value_delimiter = ',')]
        eps_list: Vec<f64>,
        /// Comma-separated methods (default: both)
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodArg>,
        /// Input points
        input: PathBuf,
        /// CSV output path (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn to_config(common: &CommonArgs) -> RunConfig {
    RunConfig {
        kind: match common.kind {
            KindArg::Re => CoresetKind::Re,
            KindArg::Rc => CoresetKind::Rc,
            KindArg::Rq => CoresetKind::Rq,
        },
        family: match common.family {
            FamilyArg::Halfline => FamilyKind::HalfLine,
            FamilyArg::Interval => FamilyKind::Interval,
            FamilyArg::Rect => FamilyKind::Rect,
        },
        dim: common.dim,
        eps: common.eps,
        eps_prime: common.eps_prime,
        delta: common.delta,
        c_samp: common.c_samp,
        c_size: common.c_size,
        c_disc: common.c_disc,
        c_part: common.c_part,
        beta: common.beta,
        seed: common.seed,
        budget: common.budget,
        ..RunConfig::default()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Build { common, method, input, output } => {
            let mut cfg = to_config(common);
            cfg.method = match method {
                MethodArg::Sample => Method::Sample,
                MethodArg::Discrepancy => Method::Discrepancy,
            };
            cfg.input = input.clone();
            cfg.output = Some(output.clone());
            cmd_build(&cfg)
        }
        Command::Verify { common, input, coreset, output } => {
            let mut cfg = to_config(common);
            cfg.input = input.clone();
            cfg.coreset = Some(coreset.clone());
            cfg.output = output.clone();
            cmd_verify(&cfg)
        }
        Command::Bench { common, eps_list, methods, input, output } => {
            let mut cfg = to_config(common);
            cfg.input = input.clone();
            cfg.output = output.clone();
            cfg.eps_list = eps_list.clone();
            cfg.methods = methods
                .iter()
                .map(|m| match m {
                    MethodArg::Sample => Method::Sample,
                    MethodArg::Discrepancy => Method::Discrepancy,
                })
                .collect();
            cmd_bench(&cfg)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
