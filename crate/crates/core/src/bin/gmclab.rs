use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmclab::expcli::{self, Experiment, ExperimentConfig};
use gmclab::Error;

#[derive(Parser)]
#[command(name = "gmclab", version, about = "Run a GMC tail experiment and write its record and plot data")]
struct Cli {
    #[command(subcommand)]
    experiment: Cmd,
    /// TOML configuration; defaults for the experiment are used otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "GMCLAB_THREADS", default_value_t = 1)]
    threads: usize,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    ValidateKernels,
    ValidateGirsanov,
    MaxLaw,
    TailFit,
    ConstantTwoRoute,
    QuotientMoments,
    ZetaScaling,
    PerturbedG,
    LocalityGap,
}

impl From<Cmd> for Experiment {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::ValidateKernels => Experiment::ValidateKernels,
            Cmd::ValidateGirsanov => Experiment::ValidateGirsanov,
            Cmd::MaxLaw => Experiment::MaxLaw,
            Cmd::TailFit => Experiment::TailFit,
            Cmd::ConstantTwoRoute => Experiment::ConstantTwoRoute,
            Cmd::QuotientMoments => Experiment::QuotientMoments,
            Cmd::ZetaScaling => Experiment::ZetaScaling,
            Cmd::PerturbedG => Experiment::PerturbedG,
            Cmd::LocalityGap => Experiment::LocalityGap,
        }
    }
}

fn config(cli: &Cli) -> gmclab::Result<ExperimentConfig> {
    let exp = Experiment::from(cli.experiment);
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(exp),
    };
    if c.experiment != exp {
        return Err(Error::ConfigInvalid(format!("config is for {}, subcommand is {exp}", c.experiment)));
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.output_dir = o.clone();
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = match config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        match c.to_toml_string() {
            Ok(s) => {
                print!("{s}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    let record = match expcli::run(&c) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for a in &record.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    for (k, v) in &record.diagnostics {
        println!("note {k}: {v}");
    }
    println!("wrote {} ({:.1} s)", c.output_dir.join("record.json").display(), record.wall_time_s);
    if record.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
