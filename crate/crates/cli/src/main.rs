//! `dgx`: the pipeline driver.
//!
//! Stages chain through the filesystem: `generate` writes the dataset,
//! `train` the checkpoint, `explain` the explanation records, `evaluate`
//! the metrics report, each verifying the config hash of what it consumes.
//! `reproduce-table1`, `table2`, and `oracle` are self-contained sweeps.
//! Failures print one machine-readable JSON record to stderr; exit codes:
//! 0 success, 1 usage, 2 missing or mismatched artifact, 3 quality gate.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

mod artifacts;
mod stages;
mod sweep;

use dgx_core::config::{ConfigError, RunConfig};
use dgx_core::datagen::DatagenError;
use dgx_core::eval::EvalError;
use dgx_core::explain::ExplainError;
use dgx_core::nn::{NnError, TrainError};
use dgx_core::preprocess::PreprocessError;
use dgx_core::realworld::RealworldError;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or config: exit 1.
    Usage(String),
    /// Missing, foreign, or corrupt stage artifact: exit 2.
    Artifact(String),
    /// The run completed but failed a quality gate: exit 3.
    Gate(String),
    /// Anything else: exit 1.
    Other(String),
}

impl CliError {
    fn category(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("usage", 1),
            CliError::Artifact(_) => ("artifact", 2),
            CliError::Gate(_) => ("quality_gate", 3),
            CliError::Other(_) => ("error", 1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Artifact(m)
            | CliError::Gate(m)
            | CliError::Other(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Usage(e.to_string())
    }
}
impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> CliError {
        CliError::Usage(e.to_string())
    }
}
impl From<RealworldError> for CliError {
    fn from(e: RealworldError) -> CliError {
        match e {
            RealworldError::ManifestParse(..) => CliError::Usage(e.to_string()),
            _ => CliError::Artifact(e.to_string()),
        }
    }
}
impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> CliError {
        CliError::Other(e.to_string())
    }
}
impl From<NnError> for CliError {
    fn from(e: NnError) -> CliError {
        CliError::Other(e.to_string())
    }
}
impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        CliError::Other(e.to_string())
    }
}
impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> CliError {
        CliError::Other(e.to_string())
    }
}
impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Other(e.to_string())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Other(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "dgx",
    version,
    about = "Direction-aware GNN explanation pipeline",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus field overrides shared by the staged commands. An
/// override changes the effective config, and with it the config hash.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run configuration file (TOML)
    #[arg(long)]
    config: std::path::PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<String>,
    /// Override the propagation pipeline: symm | lapnorm
    #[arg(long)]
    preprocess: Option<String>,
    /// Override the teleport strength
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the explainer: gnn | pg
    #[arg(long)]
    explainer: Option<String>,
    /// Override the fidelity convention: standard | inverted
    #[arg(long)]
    convention: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(p) = &self.preprocess {
            cfg.preprocess.pipeline = p.clone();
        }
        if let Some(a) = self.alpha {
            cfg.preprocess.alpha = a;
        }
        if let Some(e) = &self.explainer {
            cfg.explainer.kind = e.clone();
        }
        if let Some(c) = &self.convention {
            cfg.eval.convention = c.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct Table1Args {
    /// Comma-separated seeds, one full sweep per seed
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    seeds: Vec<u64>,
    /// Explanation targets per cell, sampled from planted-edge endpoints
    #[arg(long, default_value_t = 50)]
    sample: usize,
    /// Training epochs per model
    #[arg(long, default_value_t = 1000)]
    train_epochs: usize,
    /// Parallel sweep units
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report directory
    #[arg(long, default_value = "out")]
    out: String,
}

#[derive(Args)]
struct Table2Args {
    /// Fixture manifest JSON, repeatable
    #[arg(long, required = true)]
    manifest: Vec<String>,
    /// Explanation targets per cell
    #[arg(long, default_value_t = 200)]
    sample: usize,
    /// Node budget for fidelity subgraphs
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Teleport strength
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Fidelity convention: standard | inverted
    #[arg(long, default_value = "standard")]
    convention: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel datasets
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report directory
    #[arg(long, default_value = "out")]
    out: String,
}

#[derive(Subcommand)]
enum OracleKind {
    /// Exhaustive best-subgraph comparison: directed vs symmetrized
    Theorem1 {
        /// Random instances
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Direction-coded planted instances (strictness expected)
        #[arg(long, default_value_t = 20)]
        planted: usize,
        /// Largest instance size (exhaustive search caps this at 6)
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Node budget for the searched subgraphs
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory
        #[arg(long, default_value = "out")]
        out: String,
    },
    /// Spectral entropy comparison across datasets
    Entropy {
        /// Teleport strength
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Random digraphs to add to the six generated datasets
        #[arg(long, default_value_t = 50)]
        random: usize,
        /// Nodes per random digraph
        #[arg(long, default_value_t = 16)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory
        #[arg(long, default_value = "out")]
        out: String,
    },
}

#[derive(Subcommand)]
enum Command {
    /// Write the dataset a config names (generated or fixture-loaded)
    Generate(ConfigArgs),
    /// Train the model on a generated dataset
    Train(ConfigArgs),
    /// Produce explanation records for sampled target nodes
    Explain(ConfigArgs),
    /// Score explanations into a metrics report
    Evaluate(ConfigArgs),
    /// Explanation AUC grid: both explainers, both pipelines, six datasets
    ReproduceTable1(Table1Args),
    /// Fidelity grid over fixture datasets
    Table2(Table2Args),
    /// Verification suites
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Render explanation records to DOT files
    ExportDot(ConfigArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => stages::cmd_generate(&args.load()?),
        Command::Train(args) => stages::cmd_train(&args.load()?),
        Command::Explain(args) => stages::cmd_explain(&args.load()?),
        Command::Evaluate(args) => stages::cmd_evaluate(&args.load()?),
        Command::ExportDot(args) => stages::cmd_export_dot(&args.load()?),
        Command::ReproduceTable1(args) => {
            if args.seeds.is_empty() {
                return Err(CliError::Usage("need at least one seed".into()));
            }
            sweep::cmd_reproduce_table1(
                &args.seeds,
                args.sample,
                args.train_epochs,
                args.jobs,
                &args.out,
            )
        }
        Command::Table2(args) => sweep::cmd_table2(
            &args.manifest,
            args.sample,
            args.k,
            args.alpha,
            &args.convention,
            args.seed,
            args.jobs,
            &args.out,
        ),
        Command::Oracle { kind } => match kind {
            OracleKind::Theorem1 { instances, planted, n_max, k, seed, out } => {
                sweep::cmd_oracle_theorem1(instances, planted, n_max, k, seed, &out)
            }
            OracleKind::Entropy { alpha, random, nodes, seed, out } => {
                sweep::cmd_oracle_entropy(alpha, random, nodes, seed, &out)
            }
        },
    }
}

fn emit_error_record(category: &str, message: &str, exit_code: u8) {
    let record = serde_json::json!({
        "error": message,
        "category": category,
        "exit_code": exit_code,
    });
    eprintln!("{record}");
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            emit_error_record("usage", &e.to_string(), 1);
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, code) = err.category();
            emit_error_record(category, err.message(), code);
            ExitCode::from(code)
        }
    }
}
