use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccsolve::commands::{
    run_id, run_multiplicity, run_solve, run_sweep, run_thresholds, run_verify, CommandError,
    CommandOutput,
};
use ccsolve::config::RunConfig;

#[derive(Parser)]
#[command(name = "ccsolve", version, about = "Concave-convex Dirichlet problem on box grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for certificates and random starts (overrides `run.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; files go to `<out>/<command>-<config hash>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Embedding constants, mu*, r* and the radius interval.
    Thresholds(Common),
    /// Positive solution by descent and by fixed-point iteration.
    Solve(Common),
    /// One CSV row per mu of the sweep section.
    Sweep(Common),
    /// Several distinct pairs of negative-energy solutions.
    Multiplicity(Common),
    /// Diagnostics for a stored solution profile.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Profile file in the grid text format.
        #[arg(long)]
        profile: PathBuf,
    },
}

fn write_outputs(dir: &Path, out: &CommandOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &out.files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CommandError> {
    let (name, common) = match &cli.command {
        Command::Thresholds(c) => ("thresholds", c),
        Command::Solve(c) => ("solve", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Multiplicity(c) => ("multiplicity", c),
        Command::Verify { common, .. } => ("verify", common),
    };
    let config = RunConfig::load(&common.config)?;
    let seed = config.seed(common.seed);
    let out = match &cli.command {
        Command::Thresholds(_) => run_thresholds(&config)?,
        Command::Solve(_) => run_solve(&config, seed)?,
        Command::Sweep(c) => run_sweep(&config, seed, c.jobs)?,
        Command::Multiplicity(_) => run_multiplicity(&config, seed)?,
        Command::Verify { profile, .. } => {
            let text = std::fs::read_to_string(profile).map_err(|e| {
                CommandError::Usage(format!("cannot read profile {}: {e}", profile.display()))
            })?;
            run_verify(&config, seed, &text)?
        }
    };
    let root = common
        .out
        .clone()
        .or_else(|| config.run.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = root.join(run_id(name, &config, seed));
    write_outputs(&dir, &out)
        .map_err(|e| CommandError::Usage(format!("cannot write {}: {e}", dir.display())))?;
    print!("{}", out.stdout);
    println!("output: {}", dir.display());
    Ok(out.exit_code)
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
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
