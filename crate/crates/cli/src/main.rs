//! `genbias` — reproducible gender-bias benchmarks for image–text retrieval:
//! caption-derived gender labels, neutralized corpora, Bias@K / MaxSkew@K
//! evaluation, KNN-filtered synthetic contrast sets, and context-correlation
//! diagnostics, all driven by one TOML config.

mod commands;
mod config;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "genbias", version, about = "Gender-bias evaluation for image-text retrieval")]
struct Cli {
    /// Run configuration (TOML). Required by every subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding the config's `paths.out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seeds overriding the config's `seeds`, comma-separated.
    #[arg(long, global = true, value_name = "S1,S2,...", value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest annotation files, derive gender labels, export the corpus.
    Label,
    /// Export the gender-neutralized twin of the labeled corpus.
    Neutralize,
    /// Evaluate retrieval models and report Bias@K / MaxSkew@K.
    EvalBias,
    /// Score synthetic edits with the KNN filter and build the contrast set.
    Filter,
    /// Re-sample the contrast set from an existing decisions file.
    BuildContrastSet,
    /// Report zero-shot gender accuracy and recall for the contrast set.
    Verify,
    /// Cluster caption embeddings and report male over-representation.
    ClusterReport,
    /// Train the caption gender probe and report its AUC.
    Probe,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let config_path = cli
        .config
        .context("--config PATH is required (see the sample config in the README)")?;
    let mut config = RunConfig::load(&config_path)?;
    config.apply_overrides(cli.out, cli.seed_list)?;

    match cli.command {
        Command::Label => commands::label::run(&config),
        Command::Neutralize => commands::neutralize::run(&config),
        Command::EvalBias => commands::eval_bias::run(&config),
        Command::Filter => commands::filter::run(&config),
        Command::BuildContrastSet => commands::contrast::run(&config),
        Command::Verify => commands::verify::run(&config),
        Command::ClusterReport => commands::cluster::run(&config),
        Command::Probe => commands::probe::run(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
