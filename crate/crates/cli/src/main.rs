use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairaudit::{Error, ErrorKind};

mod commands;

/// Exit codes. Stable; documented in the README.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const DATA: u8 = 3;
    pub const CONFIG: u8 = 4;
    pub const INTEGRITY: u8 = 5;
    pub const MISMATCH: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "fairaudit",
    version,
    about = "Fairness auditing, gaming simulation and stereotype measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit classifier outcomes for independence, separation and sufficiency.
    Audit(AuditArgs),
    /// Recompute the COMPAS confusion matrices, accuracy metrics and fairness
    /// determinations and compare them with the published figures.
    CompasRepro(ReproArgs),
    /// Simulate applicants gaming a disclosed linear classifier.
    Gaming(GamingArgs),
    /// Score words for bias toward an attribute pair, optionally after
    /// projection debiasing.
    Stereotype(StereotypeArgs),
    /// Decode tokens from a distribution by argmax or proportional sampling.
    Decode(DecodeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Recipe {
    /// All rows; decile_score >= 5 is high risk.
    Compas,
    /// ProPublica's screening-window and score-text filters.
    CompasPropublica,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Absolute,
    Ratio,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Delimiter-separated outcome file with a header row.
    #[arg(long, conflicts_with = "counts")]
    pub input: Option<PathBuf>,
    /// Checksummed confusion-count file (`panel tp fn fp tn` lines).
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Use a built-in column mapping instead of --truth/--prediction/--score/--group.
    #[arg(long, value_enum)]
    pub recipe: Option<Recipe>,
    #[arg(long)]
    pub truth: Option<String>,
    /// Column holding a binary prediction.
    #[arg(long, conflicts_with = "score")]
    pub prediction: Option<String>,
    /// Column holding an integer 1..10 risk score, thresholded at --cutoff.
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub cutoff: i64,
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Pair of groups to compare, `A,B`. All unordered pairs when omitted.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.8)]
    pub four_fifths: f64,
    #[arg(long, value_enum, default_value_t = Mode::Absolute)]
    pub mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Confusion-count fixture; the bundled copy when omitted.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Also run the CSV preparation pipeline on this two-year extract and
    /// diff its counts against the fixture.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Recipe::Compas)]
    pub recipe: Recipe,
    /// Machine-readable pass/fail per cell.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GamingArgs {
    /// `key = value` simulation config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write an SVG scatter per panel (initial, after first game, final).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct StereotypeArgs {
    /// Text vector file: `word x1 .. xd` per line, optional `count dim` header.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// One word per line, `#` comments.
    #[arg(long)]
    pub words: PathBuf,
    /// Attribute pair `left,right`, e.g. `he,she`.
    #[arg(long, value_delimiter = ',')]
    pub pair: Vec<String>,
    /// Pairs `left:right,...` defining the debiasing direction; defaults to --pair.
    #[arg(long, value_delimiter = ',')]
    pub direction_pairs: Vec<String>,
    /// Also write a report after projecting out the direction.
    #[arg(long)]
    pub debias: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Decode {
    Argmax,
    Proportional,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// `token=probability,...`
    #[arg(long, value_delimiter = ',', required = true)]
    pub tokens: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: Decode,
    #[arg(short, long)]
    pub n: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub enum Failure {
    Error(Error),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Schema => exit::SCHEMA,
        ErrorKind::Data => exit::DATA,
        ErrorKind::Config => exit::CONFIG,
        ErrorKind::Integrity => exit::INTEGRITY,
        ErrorKind::Io => exit::IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    let result = match cli.command {
        Command::Audit(a) => commands::audit(&a),
        Command::CompasRepro(a) => commands::compas_repro(&a),
        Command::Gaming(a) => commands::gaming(&a),
        Command::Stereotype(a) => commands::stereotype(&a),
        Command::Decode(a) => commands::decode(&a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("replication mismatch: {msg}");
            ExitCode::from(exit::MISMATCH)
        }
    }
}
