//! `boxlab`: exact non-signaling box calculus from the command line.
//!
//! Exit codes: 0 success, 1 a check failed, 2 unreadable input or bad
//! arguments, 3 invalid box, 4 any other failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{CliError, Session};

#[derive(Parser)]
#[command(name = "boxlab", version, about = "Exact non-signaling box calculus")]
struct Cli {
    /// Write a run manifest here (defaults to `<out>.manifest.json` when
    /// the command has an `--out` file).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Non-locality cost of a box, with a verified certificate.
    Cost(CostArgs),
    /// Discrimination bound for one ensemble of isotropic boxes.
    Bound(BoundArgs),
    /// Universal bounds over all k-subsets of the eight PR-type labels.
    Sweep(SweepArgs),
    /// Distinguish two bipartite boxes.
    Distinguish(DistinguishArgs),
    /// Enumerate vertex sets as JSON lines.
    Vertices(VerticesArgs),
    /// Apply a box transformation.
    Transform(TransformArgs),
    /// Run a certification suite.
    Verify(VerifyArgs),
    /// Inspect, validate or build boxes.
    #[command(subcommand)]
    Box(BoxCommand),
}

#[derive(Args)]
pub struct CostArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// det16, det256, lrns576, det or lrns; det by default.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub emit_cert: Option<PathBuf>,
    /// Solve the explicit program (table and vertex weights as variables).
    #[arg(long)]
    pub explicit: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormulaArg {
    Theorem1,
    CorollaryAlpha,
    CorollaryMaxflags,
}

#[derive(Args)]
pub struct BoundArgs {
    /// Comma-separated labels, e.g. 000,001,010,100.
    #[arg(long)]
    pub labels: String,
    /// 1, aq, or a rational.
    #[arg(long, default_value = "1")]
    pub alpha: String,
    /// Flag parameters for theorem1, comma-separated; all 1 by default.
    #[arg(long)]
    pub betas: Option<String>,
    /// Prior weights, comma-separated; equal by default.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, value_enum, default_value = "corollary-maxflags")]
    pub formula: FormulaArg,
    #[arg(long, default_value = "det256")]
    pub model: String,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    Min,
    Max,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "1")]
    pub alpha: String,
    #[arg(long, default_value = "det256")]
    pub model: String,
    /// CSV file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate reported on standard output when the table goes to a file.
    #[arg(long, value_enum, default_value = "min")]
    pub aggregate: AggregateArg,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DistinguishMode {
    Perfect,
    Conclusive,
    Helstrom,
}

#[derive(Args)]
pub struct DistinguishArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value = "helstrom")]
    pub mode: DistinguishMode,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    #[value(name = "2222")]
    TwoByTwo,
    Abcd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VertexKindArg {
    Local,
    Ns,
    Lrns,
}

#[derive(Args)]
pub struct VerticesArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum)]
    pub kind: VertexKindArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TransformOp {
    Twirl,
    ORot,
    Compare,
}

#[derive(Args)]
pub struct TransformArgs {
    #[arg(long, value_enum)]
    pub op: TransformOp,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Label of the rotation for o-rot.
    #[arg(long)]
    pub label: Option<String>,
    /// Measurement `i,j` for compare.
    #[arg(long)]
    pub measure: Option<String>,
    /// Outcome classes for compare as JSON, e.g. [[[0,1],[1,0]],[[0,0],[1,1]]].
    #[arg(long)]
    pub partition: Option<String>,
    /// Acted subsystems `i,j` on a larger layout; the first two otherwise.
    #[arg(long)]
    pub acted: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Clp,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "clp")]
    pub suite: SuiteArg,
    /// comparing, control-o, twirl, trace, or a negative control: swap,
    /// signaling-copy, asymmetric-flag.
    #[arg(long)]
    pub op: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cases that also run the cost LP in the locality check.
    #[arg(long, default_value_t = 25)]
    pub lp_cases: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum BoxCommand {
    /// Print a box as a table with decimals.
    Show {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check normalization, non-negativity and full no-signaling.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Build a catalog box: pr, apr, brst:RST, iso:RST:ALPHA, flag:J:N,
    /// bin:L1,L2,...[@ALPHA].
    Make {
        #[arg(long)]
        family: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("BOXLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("BOXLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    // The binary path varies between machines; the manifest keeps the name.
    let command = std::iter::once("boxlab".to_string())
        .chain(std::env::args().skip(1))
        .collect();
    let mut session = Session::new(command, cli.manifest);
    let result = match cli.command {
        Command::Cost(args) => commands::cost(&mut session, args),
        Command::Bound(args) => commands::bound(&mut session, args),
        Command::Sweep(args) => commands::sweep(&mut session, args),
        Command::Distinguish(args) => commands::distinguish(&mut session, args),
        Command::Vertices(args) => commands::vertices(&mut session, args),
        Command::Transform(args) => commands::transform(&mut session, args),
        Command::Verify(args) => commands::verify(&mut session, args),
        Command::Box(cmd) => commands::box_command(&mut session, cmd),
    };
    session.finish()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("boxlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
