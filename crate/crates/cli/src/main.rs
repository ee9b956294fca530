use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use darkspan_cli::stages::{sim_plan_from_config, Pipeline, Stage};
use darkspan_cli::{CliError, RunConfig};

/// Longitudinal topic analytics over timestamped HTML snapshots.
#[derive(Debug, Parser)]
#[command(name = "darkspan", version)]
struct Args {
    /// ingest | normalize | corpus | embed | reduce | cluster | topics |
    /// timeline | lifecycle | simulate | all
    subcommand: String,
    /// Run configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and reports.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Snapshot manifest path; overrides the config's `manifest` key.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Seed override applied to every stage.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("DARKSPAN_THREADS") {
        if let Ok(threads) = value.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(manifest) = args.manifest {
        config.manifest = Some(manifest);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    match args.subcommand.as_str() {
        "simulate" => {
            let plan = sim_plan_from_config(&config)?;
            std::fs::create_dir_all(&args.out)
                .map_err(|e| CliError::stage("simulate", e))?;
            let generated = darkspan_core::simulate::generate_corpus(&plan, &args.out)
                .map_err(|e| CliError::stage("simulate", e))?;
            eprintln!(
                "darkspan: simulated {} snapshots across {} websites into {}",
                generated.total_docs,
                plan.n_websites,
                args.out.display()
            );
            Ok(())
        }
        "all" => {
            let pipeline = Pipeline::new(config, args.out)?;
            pipeline.run_all()
        }
        other => match Stage::parse(other) {
            Some(stage) => {
                let pipeline = Pipeline::new(config, args.out)?;
                pipeline.run(stage)
            }
            None => Err(CliError::Config {
                key: "subcommand".into(),
                message: format!(
                    "unknown subcommand {other:?}; expected a stage name, simulate, or all"
                ),
            }),
        },
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("darkspan: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
