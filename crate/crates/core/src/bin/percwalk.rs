use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use percwalk::harness::{emit_report, run, ExperimentConfig, ExperimentKind};
use percwalk::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "percwalk", version, about = "Random walks on supercritical bond-percolation clusters")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (all cores by default).
    #[arg(long, global = true, env = "PERCWALK_THREADS", value_name = "N")]
    threads: Option<usize>,

    /// Run the oracle-equivalence suite.
    #[arg(long)]
    selftest: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Modified travel costs a_λ^q(0, x) per seed.
    Cost,
    /// Lyapunov exponent estimates α̂_λ(x).
    Lyapunov,
    /// Rate function Î(x) on a λ-grid.
    Rate,
    /// Lyapunov estimates across p with shared seeds.
    Sweep,
    /// Rate functions across p with shared seeds.
    RateSweep,
    /// Time constant from chemical distances.
    Timeconst,
    /// Good-box densities.
    Goodbox,
    /// Oracle-equivalence suite.
    Selftest,
    /// Run the experiment named by `kind` in the configuration.
    Run,
    /// Summarise the results in a directory.
    Report {
        #[arg(value_name = "DIR")]
        dir: PathBuf,
    },
}

fn kind_of(cmd: &Command) -> Option<ExperimentKind> {
    Some(match cmd {
        Command::Cost => ExperimentKind::Cost,
        Command::Lyapunov => ExperimentKind::Lyapunov,
        Command::Rate => ExperimentKind::Rate,
        Command::Sweep => ExperimentKind::Sweep,
        Command::RateSweep => ExperimentKind::RateSweep,
        Command::Timeconst => ExperimentKind::Timeconst,
        Command::Goodbox => ExperimentKind::Goodbox,
        Command::Selftest => ExperimentKind::Selftest,
        Command::Run | Command::Report { .. } => return None,
    })
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    if let Some(Command::Report { dir }) = &cli.command {
        return emit_report(dir, &mut io::stdout().lock());
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let kind = if cli.selftest {
        Some(ExperimentKind::Selftest)
    } else {
        cli.command.as_ref().and_then(kind_of)
    };
    if let Some(k) = kind {
        config.kind = Some(k);
    }
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if config.seed.is_none() && config.kind == Some(ExperimentKind::Selftest) {
        config.seed = Some(0);
    }
    if let Some(out) = cli.out {
        config.output = out;
    }
    if config.kind.is_none() && cli.command.is_none() {
        return Err(Error::invalid("kind", "give a subcommand or set `kind` in the configuration"));
    }
    let result = run(&config)?;
    println!("{}", result.csv_path.display());
    println!("{}", result.manifest_path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
