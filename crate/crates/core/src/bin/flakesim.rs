use clap::{Parser, Subcommand};
use flakesim::experiments::commands::{
    cmd_compare, cmd_dataset, cmd_eval, cmd_flakiness, cmd_generate, cmd_run, cmd_search, cmd_train,
};
use flakesim::experiments::{Algorithm, ExperimentConfig, Layout};
use flakesim::fitness::FitnessId;
use flakesim::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "flakesim", version, about = "Flakiness-aware simulation-based testing")]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the output directory of the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a diverse corpus of test inputs.
    Generate,
    /// Execute every corpus input repeatedly.
    Run {
        /// Reruns per input (default: corpus.reruns).
        #[arg(short, long)]
        reruns: Option<usize>,
    },
    /// Soft- and hard-flakiness tables of the executed corpus.
    Flakiness,
    /// Build the single- and multi-execution datasets.
    Dataset,
    /// Train the configured classifier grid.
    Train,
    /// Cross-validate the classifier grid and the threshold baseline.
    Eval,
    /// Run the search algorithms.
    Search {
        /// Comma-separated fitness functions (default: search.targets).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<FitnessId>,
        /// Comma-separated algorithms among rs_1, rs_n, rs_ml, rs_b (default: search.algorithms).
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<Algorithm>,
    },
    /// Statistical comparison of the search results.
    Compare,
    /// Print the effective configuration as TOML.
    Config,
}

fn run(cli: Cli) -> flakesim::Result<String> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.out = o;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let layout = Layout::new(&config.out);
    match cli.command {
        Command::Generate => cmd_generate(&config, &layout),
        Command::Run { reruns } => cmd_run(&config, &layout, reruns),
        Command::Flakiness => cmd_flakiness(&config, &layout),
        Command::Dataset => cmd_dataset(&config, &layout),
        Command::Train => cmd_train(&config, &layout),
        Command::Eval => cmd_eval(&config, &layout),
        Command::Search { targets, algorithms } => {
            if !targets.is_empty() {
                config.search.targets = targets;
            }
            if !algorithms.is_empty() {
                config.search.algorithms = algorithms;
            }
            cmd_search(&config, &layout)
        }
        Command::Compare => cmd_compare(&config, &layout),
        Command::Config => Ok(config.to_toml().trim_end().to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { USAGE_ERROR } else { DATA_ERROR })
        }
    }
}
