use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kgzsl::ErrorKind;

mod commands;
mod output;
mod settings;

use settings::Settings;

/// Knowledge-graph zero-shot and few-shot action recognition experiments.
#[derive(Debug, Parser)]
#[command(name = "kgzsl", version)]
struct Cli {
    /// TOML file with experiment settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory that relative input paths are resolved against.
    #[arg(long, global = true, env = "KGZSL_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build knowledge graphs and export them as edge lists.
    BuildKg {
        /// kg1, kg2 (verb and noun graphs) or kg3.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train on the selected graphs and predict unseen-class classifiers.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Score predicted classifiers, or a few-shot baseline, on test features.
    Evaluate {
        /// Output directory of a `train` run.
        #[arg(long, required_unless_present = "baseline")]
        run: Option<PathBuf>,
        /// nearest-neighbor: class-mean cosine classifier on few-shot supports.
        #[arg(long)]
        baseline: Option<String>,
        /// Defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Sweep one ablation axis and emit a comparison table.
    Ablate {
        /// embedding, graph-config, graph-mode, linear-combination,
        /// encoder-decoder or splits.
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = 10)]
        n_test: usize,
        #[arg(long, default_value_t = 5)]
        n_splits: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Check gradients, sparse products, normalization and metrics against oracles.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perturb one layer's gradient to confirm the check catches it.
        #[arg(long, hide = true)]
        corrupt_layer: Option<usize>,
    },
    /// Split every class label of a manifest into a verb and a noun.
    ParseLabels {
        #[arg(long)]
        include_auxiliary: bool,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Draw random held-out class sets from a manifest's eligible pool.
    MakeSplits {
        #[arg(long, default_value_t = 10)]
        n_test: usize,
        #[arg(long, default_value_t = 5)]
        n_splits: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a synthetic instance with known ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        clusters: usize,
        #[arg(long, default_value_t = 5)]
        classes_per_cluster: usize,
        #[arg(long, default_value_t = 0)]
        auxiliary_classes: usize,
        #[arg(long, default_value_t = 40)]
        samples_per_class: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] kgzsl::Error),
}

impl CliError {
    pub fn input(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("cannot read {}: {e}", path.display()))
    }

    pub fn output(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("cannot write {}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

impl From<kgzsl::pipeline::PipelineError> for CliError {
    fn from(e: kgzsl::pipeline::PipelineError) -> Self {
        CliError::Core(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve(flags: Settings, config: Option<&Path>, data_dir: Option<&Path>) -> Result<Settings, CliError> {
    let file = config.map(Settings::load).transpose()?.unwrap_or_default();
    Ok(flags.over(file).rooted(data_dir))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::BuildKg { kind, out, settings } => {
            commands::build_kg(&kind, &out, &resolve(settings, config, data_dir)?)
        }
        Command::Train { out, settings } => commands::train(&out, &resolve(settings, config, data_dir)?),
        Command::Evaluate {
            run,
            baseline,
            out,
            settings,
        } => commands::evaluate(
            run.as_deref(),
            baseline.as_deref(),
            out.as_deref(),
            &resolve(settings, config, data_dir)?,
        ),
        Command::Ablate {
            axis,
            n_test,
            n_splits,
            out,
            settings,
        } => commands::ablate(&axis, n_test, n_splits, &out, &resolve(settings, config, data_dir)?),
        Command::Selfcheck { seed, corrupt_layer } => commands::selfcheck(seed, corrupt_layer),
        Command::ParseLabels {
            include_auxiliary,
            out,
            settings,
        } => commands::parse_labels(include_auxiliary, out.as_deref(), &resolve(settings, config, data_dir)?),
        Command::MakeSplits {
            n_test,
            n_splits,
            out,
            settings,
        } => commands::make_splits(n_test, n_splits, &out, &resolve(settings, config, data_dir)?),
        Command::Synth {
            out,
            seed,
            clusters,
            classes_per_cluster,
            auxiliary_classes,
            samples_per_class,
        } => commands::synth(
            &out,
            kgzsl::synthetic::SyntheticConfig {
                seed,
                clusters,
                classes_per_cluster,
                auxiliary_classes,
                samples_per_class,
                ..Default::default()
            },
        ),
    }
}
