use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use marslab::harness::{emit_reports, run_experiment, run_sweep, ExperimentConfig};

#[derive(Parser)]
#[command(name = "marslab", version, about = "Federated backdoor defense experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write rounds.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configuration once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    defense: Option<String>,
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        let pairs = [
            ("seed", &self.seed),
            ("rounds", &self.rounds),
            ("defense", &self.defense),
            ("attack", &self.attack),
            ("kappa", &self.kappa),
            ("epsilon", &self.epsilon),
            ("lambda", &self.lambda),
            ("alpha", &self.alpha),
            ("out_dir", &self.out_dir),
        ];
        for (name, value) in pairs {
            if let Some(v) = value {
                cfg.set(name, v).with_context(|| format!("--{}", name.replace('_', "-")))?;
            }
        }
        Ok(())
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load(&config)?;
            overrides.apply(&mut cfg)?;
            let result = run_experiment(&cfg)?;
            let (csv, json) = emit_reports(&result, &cfg, &cfg.out_dir)?;
            let m = result.metrics;
            println!(
                "acc {:.4} asr {:.4} tpr {:.4} fpr {:.4} cad {:.4}",
                m.acc, m.asr, m.tpr, m.fpr, m.cad
            );
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Validate { config } => {
            load(&config)?.validate()?;
            println!("{}: ok", config.display());
        }
        Command::Sweep { config, param, values } => {
            let cfg = load(&config)?;
            for p in run_sweep(&cfg, &param, &values)? {
                let m = p.metrics;
                println!(
                    "{param}={}: acc {:.4} asr {:.4} tpr {:.4} fpr {:.4} cad {:.4}",
                    p.value, m.acc, m.asr, m.tpr, m.fpr, m.cad
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
