mod casestudy;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "twtl",
    version,
    about = "Time Window Temporal Logic checker and robustness monitor"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula, print its canonical form and horizon
    Parse(ParseArgs),
    /// Boolean verdict plus rho and eta of a trace
    Check(CheckArgs),
    /// Robustness rho of a trace
    Rho(EvalArgs),
    /// AGM robustness eta of a trace
    Eta(EvalArgs),
    /// Replay a trace through the interval monitors
    Monitor(MonitorArgs),
    /// Write and evaluate the reach-avoid case study
    Casestudy(CaseStudyArgs),
    /// Compare library and reference evaluators on one trace
    #[command(hide = true)]
    Oracle(EvalArgs),
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub struct FormulaSource {
    /// Formula file
    #[arg(long, short = 'f')]
    pub formula: Option<PathBuf>,
    /// Formula text given inline
    #[arg(long, short = 'e')]
    pub expr: Option<String>,
}

#[derive(Args)]
pub struct ParseArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    /// Predicate config used to check atom references
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
}

#[derive(Args, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    /// Trace CSV with a `time` column followed by signal columns
    #[arg(long, short = 't')]
    pub trace: PathBuf,
    /// Predicate and normalization bounds config (JSON)
    #[arg(long, short = 'c')]
    pub config: PathBuf,
    /// Sampling step
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Robustness assigned to Boolean false
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub rho_bot: f64,
    /// Robustness assigned to Boolean true
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub rho_top: f64,
}

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Skip eta, so normalization bounds are not needed
    #[arg(long)]
    pub rho_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    /// Trace CSV; required unless --stream
    #[arg(
        long,
        short = 't',
        required_unless_present = "stream",
        conflicts_with = "stream"
    )]
    pub trace: Option<PathBuf>,
    /// Read the trace CSV from stdin and emit records as rows arrive
    #[arg(long)]
    pub stream: bool,
    #[arg(long, short = 'c')]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub rho_bot: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub rho_top: f64,
    /// Emit records only at these sample times
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Use [-1, 1] for unobserved AGM literals instead of per-atom extremes
    #[arg(long)]
    pub conservative_eta: bool,
    /// Output file; stdout when absent
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CaseStudyArgs {
    /// Output directory
    #[arg(long, short = 'o', default_value = "casestudy")]
    pub out: PathBuf,
    /// Sample times for the filtered monitor streams
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "2,10,15,20,25,30,35,40,42"
    )]
    pub tau: Vec<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TWTL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse(args) => commands::parse(&args),
        Command::Check(args) => commands::check(&args),
        Command::Rho(args) => commands::rho(&args),
        Command::Eta(args) => commands::eta(&args),
        Command::Monitor(args) => commands::monitor(&args),
        Command::Casestudy(args) => casestudy::run(&args),
        Command::Oracle(args) => commands::oracle(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_ERROR)
        }
    }
}
