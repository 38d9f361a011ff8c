use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairaa::KernelKind;
use fairaa_cli::config::parse_list;
use fairaa_cli::{cmd_compare, cmd_evaluate, cmd_fit, cmd_generate, CliError, ExperimentConfig, Outcome, Overrides, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "fairaa", version, about = "Fair archetypal analysis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its metadata.
    Generate(Common),
    /// Fit one model at a single λ.
    Fit(Common),
    /// Score a saved model on the configured dataset.
    Evaluate {
        /// Model JSON written by `fit` or `compare`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep λ and compare against the λ = 0 baseline.
    Compare(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated λ values; a single value also sets the fit λ.
    #[arg(long)]
    lambda: Option<String>,
    /// Number of archetypes.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// RBF width; default is the median heuristic.
    #[arg(long)]
    gamma: Option<f64>,
    /// Use this CSV file as the dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sensitive attribute column (repeatable).
    #[arg(long = "label-col")]
    label_col: Vec<String>,
    /// Comma-separated feature columns.
    #[arg(long = "feature-cols")]
    feature_cols: Option<String>,
    /// Z-score the features.
    #[arg(long)]
    standardize: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        fn list_err(flag: &'static str) -> impl Fn(String) -> CliError {
            move |e| CliError::Config(format!("{flag}: {e}"))
        }
        let lambda = self.lambda.as_deref().map(parse_list::<f64>).transpose().map_err(list_err("--lambda"))?;
        let feature_cols = self
            .feature_cols
            .as_deref()
            .map(parse_list::<String>)
            .transpose()
            .map_err(list_err("--feature-cols"))?;
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            lambda,
            k: self.k,
            kernel: self.kernel.map(|k| match k {
                KernelArg::Linear => KernelKind::Linear,
                KernelArg::Rbf => KernelKind::Rbf,
            }),
            gamma: self.gamma,
            label_cols: self.label_col.clone(),
            feature_cols,
            standardize: self.standardize,
            data: self.data.clone(),
        };
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Generate(c) => cmd_generate(&c.config()?),
        Command::Fit(c) => {
            let cfg = c.config()?;
            if cfg.lambda_grid.len() > 1 && c.lambda.is_some() {
                return Err(CliError::Config("fit takes a single --lambda value".into()));
            }
            cmd_fit(&cfg)
        }
        Command::Evaluate { model, common } => cmd_evaluate(&common.config()?, &model),
        Command::Compare(c) => {
            let result = cmd_compare(&c.config()?)?;
            for e in result.report.entries.iter().filter(|e| !e.ok) {
                eprintln!("lambda {} failed: {}", e.lambda, e.error.as_deref().unwrap_or("unknown error"));
            }
            Ok(result.outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("fairaa: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
