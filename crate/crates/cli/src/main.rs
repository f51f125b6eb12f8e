use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dflsim_cli::{run_baseline, run_experiment, CliError, ExperimentConfig, ModelChoice};
use dflsim_core::LabelColumn;

#[derive(Parser)]
#[command(name = "dflsim", version, about = "Decentralized federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all deployments and write traces, tables and bound reports.
    Run(Flags),
    /// Train on a single machine and report convergence epoch, F1 and loss.
    Baseline(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config (or a previous manifest.json); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label column name or 0-based index [default: diagnosis]
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// continuous_linear, continuous_ring, aggregate_linear, aggregate_ring,
    /// aggregate_star, aggregate_mesh or all
    #[arg(long)]
    deployment: Option<String>,
    #[arg(long)]
    clients: Option<usize>,
    /// Total epoch budget [default: 500 for svm, 1000 for logistic]
    #[arg(long)]
    epochs: Option<usize>,
    /// Rounds for ring, star and mesh [default: 2 for ring, 5 for star and mesh]
    #[arg(long)]
    rounds: Option<usize>,
    /// iid, level1, level2, level3 or custom:<path>
    #[arg(long)]
    skew: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    flat_tol: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelArg {
    Svm,
    Logistic,
}

impl Flags {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let file = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = ExperimentConfig {
            dataset: self.dataset,
            label_col: self
                .label_col
                .map(|s| s.parse::<LabelColumn>().unwrap_or_else(|e| match e {})),
            model: self.model.map(|m| match m {
                ModelArg::Svm => ModelChoice::Svm,
                ModelArg::Logistic => ModelChoice::Logistic,
            }),
            deployment: self.deployment,
            clients: self.clients,
            epochs: self.epochs,
            rounds: self.rounds,
            skew: self.skew,
            seed: self.seed,
            out: self.out,
            window: self.window,
            flat_tol: self.flat_tol,
            lr: self.lr,
            l2: self.l2,
            batch_size: self.batch_size,
        };
        Ok(file.overridden_by(flags))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(flags) => {
            let summary = run_experiment(&flags.into_config()?)?;
            for r in &summary.runs {
                println!(
                    "{:<18} f1 {:.4}  nc {}/{}",
                    r.kind.name(),
                    r.mean_f1,
                    r.nc_count(),
                    r.convergence.len()
                );
            }
        }
        Command::Baseline(flags) => {
            let report = run_baseline(&flags.into_config()?)?;
            let epoch = report.converged_epoch.map_or("NC".to_string(), |e| e.to_string());
            println!(
                "converged at {epoch}/{}  f1 {:.4}  loss {:.4}",
                report.epochs, report.f1, report.final_train_loss
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
