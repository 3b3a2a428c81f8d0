use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cppl::harness::{emit_results, EnvironmentKind, ExperimentConfig, OutputFormat};
use cppl::likelihood::FeedbackMode;
use cppl::policies::PolicyKind;
use cppl::{harness, verify, Error};

/// Contextual preselection bandits under Plackett-Luce feedback.
#[derive(Parser)]
#[command(name = "cppl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated environment with a hidden linear utility model.
    Synthetic(RunArgs),
    /// Replay solver runtimes on a stream of problem instances.
    Algoselect(RunArgs),
    /// Run the built-in numerical self-checks.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Rounds per repetition.
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, value_enum)]
    feedback: Option<FeedbackArg>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// CSV with header instance_id,solver_0,...
    #[arg(long)]
    runtimes: Option<PathBuf>,
    /// CSV with header instance_id,f0,...
    #[arg(long)]
    instance_features: Option<PathBuf>,
    /// CSV with header alpha,rho,ps,wp; defaults to the bundled SAPS table.
    #[arg(long)]
    solver_features: Option<PathBuf>,
    /// Skip scaling and filtering of instance features.
    #[arg(long)]
    no_preprocess: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Cppl,
    Maxtheta,
    Egreedy,
    Mm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeedbackArg {
    Winner,
    Ranking,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl RunArgs {
    fn into_config(self, environment: EnvironmentKind) -> cppl::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::new(environment),
        };
        if config.environment != environment {
            return Err(Error::Config(format!(
                "config file describes a {:?} experiment",
                config.environment
            )));
        }
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { config.$field = v; })*};
        }
        set!(n, d, k, horizon, reps, seed, gamma1, alpha, omega, epsilon, lambda);
        if let Some(p) = self.policy {
            config.policy = match p {
                PolicyArg::Cppl => PolicyKind::Cppl,
                PolicyArg::Maxtheta => PolicyKind::MaxTheta,
                PolicyArg::Egreedy => PolicyKind::EGreedy,
                PolicyArg::Mm => PolicyKind::Mm,
            };
        }
        if let Some(f) = self.feedback {
            config.feedback = match f {
                FeedbackArg::Winner => FeedbackMode::Winner,
                FeedbackArg::Ranking => FeedbackMode::Ranking,
            };
        }
        if let Some(f) = self.format {
            config.format = match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            };
        }
        if self.no_preprocess {
            config.preprocess = false;
        }
        config.runtimes = self.runtimes.or(config.runtimes);
        config.instance_features = self.instance_features.or(config.instance_features);
        config.solver_features = self.solver_features.or(config.solver_features);
        config.out = self.out.or(config.out);
        Ok(config)
    }
}

fn run(args: RunArgs, environment: EnvironmentKind) -> cppl::Result<()> {
    let config = args.into_config(environment)?;
    let result = harness::run_experiment(&config)?;
    if let Some(out) = &config.out {
        emit_results(&result, out, config.format)?;
    }
    let last = result.stderr.last().copied().unwrap_or(0.0);
    println!(
        "{}: T = {}, reps = {}, mean cumulative regret {:.4} (stderr {:.4}), {:.2}s",
        result.policy,
        result.rounds(),
        result.final_regrets.len(),
        result.final_mean(),
        last,
        result.wall_time_secs
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Synthetic(args) => run(args, EnvironmentKind::Synthetic),
        Command::Algoselect(args) => run(args, EnvironmentKind::AlgoSelect),
        Command::Verify => {
            let checks = verify::run_checks();
            for check in &checks {
                println!("{check}");
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Error::NumericOverflow("self-check failed".to_string()))
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
