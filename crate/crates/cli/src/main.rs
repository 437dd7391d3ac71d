use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thzstreak_cli::{write_outputs, CliError, Pipeline, Scenario, Stage};

#[derive(Parser)]
#[command(name = "thzstreak", version, about = "Simulate and invert THz-streaked photoelectron spectrograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Apply the scenario's [quick] overrides.
    #[arg(long)]
    quick: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble, ensemble density matrix and master-equation oracle.
    Simulate(Common),
    /// THz-off and THz-on spectrograms.
    Spectrogram(Common),
    /// Peak table and model spectrograms for the simulated density matrix.
    Model(Common),
    /// Density-matrix reconstruction and audit report.
    Reconstruct(Common),
    /// Single-delay phase readout.
    Phase(Common),
    /// Plot-ready columns at the peak momenta and momentum cuts at fixed delays.
    Slice(Common),
    /// Check the scenario and print the resolved parameters; writes nothing.
    Validate(Common),
    /// Several stages in one invocation (all by default).
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',')]
        stage: Vec<Stage>,
    },
}

fn load(common: &Common) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::load(&common.config)?;
    if common.quick {
        scenario = scenario.quick();
    }
    if let Some(seed) = common.seed {
        scenario = scenario.with_seed(seed);
    }
    Ok(scenario)
}

fn execute(common: &Common, stages: &[Stage], write: bool) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let scenario = load(common)?;
    let mut pipeline = Pipeline::new(&scenario)?;
    if !write {
        print!("{}", pipeline.summary());
        return Ok(());
    }
    let outputs = pipeline.run(stages)?;
    write_outputs(&common.out, &outputs)?;
    for o in &outputs {
        println!("wrote {}", Path::new(&common.out).join(&o.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => execute(c, &[Stage::Simulate], true),
        Command::Spectrogram(c) => execute(c, &[Stage::Spectrogram], true),
        Command::Model(c) => execute(c, &[Stage::Model], true),
        Command::Reconstruct(c) => execute(c, &[Stage::Reconstruct], true),
        Command::Phase(c) => execute(c, &[Stage::Phase], true),
        Command::Slice(c) => execute(c, &[Stage::Slice], true),
        Command::Validate(c) => execute(c, &[], false),
        Command::Run { common, stage } => {
            let stages = if stage.is_empty() { Stage::ALL.to_vec() } else { stage.clone() };
            execute(common, &stages, true)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
