mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use config::{parse_value, resolve, RunConfig, CONFIG_ENV};
use error::CliError;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other i/o error
  2  bad config (invalid or unknown keys, output directory locked)
  3  missing artifact or checkpoint
  4  training aborted
  5  scoring failure (invalid or unscorable molecule)

Config keys are dotted paths into the TOML file, for example
vae.latent_dim or data.desk.per_pool. Flags override the file.";

#[derive(Debug, Parser)]
#[command(name = "molxfer", version, about = "Molecular style transfer in a guided VAE latent space", after_help = EXIT_CODES)]
struct Cli {
    /// TOML run configuration
    #[arg(long, env = CONFIG_ENV, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [paths.out_dir]
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Labeled corpus CSV [paths.corpus]
    #[arg(long, global = true, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// VAE checkpoint [paths.vae_checkpoint]
    #[arg(long, global = true, value_name = "FILE")]
    vae_checkpoint: Option<PathBuf>,
    /// Transfer checkpoint [paths.transfer_checkpoint]
    #[arg(long, global = true, value_name = "FILE")]
    transfer_checkpoint: Option<PathBuf>,
    /// Evaluation and decoding seed [seed]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// synthesizability or toxicity [task]
    #[arg(long, global = true)]
    task: Option<String>,
    /// Set any config key, e.g. --set vae.kl_weight=0.1 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the desk corpus, scorers and labeled style pools
    Gen {
        /// Generated pretraining molecules [data.desk_size]
        #[arg(long)]
        desk_size: Option<usize>,
        /// Molecules per style pool [data.desk.per_pool]
        #[arg(long)]
        per_pool: Option<usize>,
    },
    /// Label a SMILES file into style pools
    Ingest {
        /// One SMILES per line; extra columns are ignored
        #[arg(long)]
        input: PathBuf,
    },
    /// Pretrain the guided VAE on the desk corpus and pool training splits
    Pretrain {
        /// [vae.epochs]
        #[arg(long)]
        epochs: Option<usize>,
        /// [vae.latent_dim]
        #[arg(long)]
        latent_dim: Option<usize>,
        /// [vae.kl_weight]
        #[arg(long)]
        kl_weight: Option<f64>,
    },
    /// Train the transfer model against the frozen VAE
    Train {
        /// [transfer.iterations]
        #[arg(long)]
        iterations: Option<usize>,
        /// Discriminator updates per generator update [transfer.disc_ratio]
        #[arg(long)]
        disc_ratio: Option<usize>,
        /// Style instances per flow prior [transfer.k_instances]
        #[arg(long)]
        k_instances: Option<usize>,
    },
    /// Transfer every molecule of a SMILES file
    Transfer {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV, default transfer.csv in the output directory
        #[arg(long)]
        output: Option<PathBuf>,
        /// Candidates decoded per input [transfer.decode_count]
        #[arg(long)]
        decode_count: Option<usize>,
    },
    /// Evaluate on the held-out source split and the random-pairing baseline
    Eval {
        /// Held-out inputs, 0 for all [eval.test_size]
        #[arg(long)]
        test_size: Option<usize>,
        /// Candidates decoded per input [transfer.decode_count]
        #[arg(long)]
        decode_count: Option<usize>,
    },
    /// Content properties and style scores of a SMILES file as CSV
    Props {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV, default props.csv in the output directory
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Principal-component scatter of the pools and metric histograms as PNG
    Plot,
    /// Print the tokens of a SMILES string with their kinds
    Tokens { smiles: String },
    /// Print the resolved configuration as TOML
    Config,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, toml::Value)>, CliError> {
    let mut out = Vec::new();
    let mut put = |key: &str, value: Option<toml::Value>| {
        if let Some(v) = value {
            out.push((key.to_string(), v));
        }
    };
    let path = |p: &Option<PathBuf>| {
        p.as_ref()
            .map(|p| toml::Value::String(p.display().to_string()))
    };
    let int = |n: Option<usize>| n.map(|n| toml::Value::Integer(n as i64));
    put("paths.out_dir", path(&cli.out_dir));
    put("paths.corpus", path(&cli.corpus));
    put("paths.vae_checkpoint", path(&cli.vae_checkpoint));
    put("paths.transfer_checkpoint", path(&cli.transfer_checkpoint));
    put("seed", cli.seed.map(|s| toml::Value::Integer(s as i64)));
    put("task", cli.task.clone().map(toml::Value::String));
    match &cli.command {
        Command::Gen {
            desk_size,
            per_pool,
        } => {
            put("data.desk_size", int(*desk_size));
            put("data.desk.per_pool", int(*per_pool));
        }
        Command::Pretrain {
            epochs,
            latent_dim,
            kl_weight,
        } => {
            put("vae.epochs", int(*epochs));
            put("vae.latent_dim", int(*latent_dim));
            put("vae.kl_weight", kl_weight.map(toml::Value::Float));
        }
        Command::Train {
            iterations,
            disc_ratio,
            k_instances,
        } => {
            put("transfer.iterations", int(*iterations));
            put("transfer.disc_ratio", int(*disc_ratio));
            put("transfer.k_instances", int(*k_instances));
        }
        Command::Transfer { decode_count, .. } => put("transfer.decode_count", int(*decode_count)),
        Command::Eval {
            test_size,
            decode_count,
        } => {
            put("eval.test_size", int(*test_size));
            put("transfer.decode_count", int(*decode_count));
        }
        _ => {}
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::BadConfig(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        out.push((k.trim().to_string(), parse_value(v.trim())));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Tokens { smiles } = &cli.command {
        return commands::tokens(smiles);
    }
    let config: RunConfig = resolve(cli.config.as_deref(), &overrides(cli)?)?;
    match &cli.command {
        Command::Gen { .. } => commands::gen(&config),
        Command::Ingest { input } => commands::ingest_file(&config, input),
        Command::Pretrain { .. } => commands::pretrain_vae(&config),
        Command::Train { .. } => commands::train_transfer(&config),
        Command::Transfer { input, output, .. } => {
            commands::transfer_file(&config, input, output.as_deref())
        }
        Command::Eval { .. } => commands::eval(&config),
        Command::Props { input, output } => commands::props(&config, input, output.as_deref()),
        Command::Plot => commands::plot_figures(&config),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
        Command::Tokens { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
