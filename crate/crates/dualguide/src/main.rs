use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualguide::commands::output_dir;
use dualguide::config::OUT_DIR_ENV;
use dualguide::{cmd_analyze, cmd_oracle, cmd_sample, cmd_sweep, AnalyzeMode, AppResult, ExperimentConfig, Job};

#[derive(Parser)]
#[command(name = "dualguide", version, about = "Primal-dual guided sampling for masked discrete diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run guided chains and the configured baselines.
    Sample(RunArgs),
    /// Sweep a grid over the first constraint's parameters.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// e.g. "eta=0.1,0.5;slack=accumulated,instantaneous;R=4"
        #[arg(long)]
        grid: String,
    },
    /// Compare the sampler with the exact tilt on a small instance.
    Oracle(RunArgs),
    /// Analyse recorded traces.
    Analyze {
        #[arg(long)]
        mode: AnalyzeMode,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn job(args: &RunArgs) -> AppResult<Job> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(n) = args.chains {
        config.run.chains = n;
    }
    if let Some(s) = args.seed {
        config.run.seed = s;
    }
    let base_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let env = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let out = output_dir(args.out.as_deref(), env, &config, &base_dir);
    Ok(Job::new(config, base_dir, out))
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Sample(args) => {
            let r = cmd_sample(&job(&args)?)?;
            print!("{}", r.render());
        }
        Command::Sweep { run, grid } => {
            let j = job(&run)?;
            let rows = cmd_sweep(&j, &grid)?;
            println!("wrote {} rows to {}", rows.len(), j.out_dir.join("sweep.csv").display());
        }
        Command::Oracle(args) => {
            let r = cmd_oracle(&job(&args)?)?;
            print!("{}", r.render());
        }
        Command::Analyze { mode, out, traces } => {
            let r = cmd_analyze(mode, &traces)?;
            if let Some(p) = out {
                r.write(&p)?;
            }
            print!("{}", r.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
