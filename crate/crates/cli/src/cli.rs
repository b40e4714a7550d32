use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Validate, measure and explore simulated-physical system models.
#[derive(Debug, Parser)]
#[command(name = "spsys", version)]
#[command(after_help = "EXIT CODES:\n  0  success\n  1  validation errors\n  2  parse failure\n  3  usage error\n  4  strict-mode failure")]
pub struct Cli {
    /// Output format for results on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Treat warnings and undefined factors as failures (exit 4).
    #[arg(long, global = true)]
    pub strict: bool,

    /// Disable colored diagnostics (also SPSYS_NO_COLOR=1).
    #[arg(long, global = true)]
    pub no_color: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model.
    Check { file: PathBuf },
    /// Compute the integration factors.
    Eval { file: PathBuf },
    /// Enumerate deployment setups.
    Setups {
        file: PathBuf,
        /// Report the functional configuration count instead.
        #[arg(long)]
        functional: bool,
    },
    /// Trace a structural element back to its requirements.
    Trace {
        file: PathBuf,
        #[arg(long)]
        element: String,
    },
    /// Generate structure from a requirements-only model.
    Scaffold {
        file: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Apply an edit script and report factor deltas.
    Whatif {
        file: PathBuf,
        #[arg(long)]
        edits: PathBuf,
    },
    /// Run every analysis.
    Report {
        file: PathBuf,
        /// Also write report.txt and report.json into this directory.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Eval { .. } => "eval",
            Command::Setups { .. } => "setups",
            Command::Trace { .. } => "trace",
            Command::Scaffold { .. } => "scaffold",
            Command::Whatif { .. } => "whatif",
            Command::Report { .. } => "report",
        }
    }
}
