use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nlsnf::cli::{self, Command, Overrides};
use nlsnf::simulator::Scheme;

#[derive(Parser)]
#[command(name = "nlsnf", version, about = "Normal forms, simulation and resonance measures for the non-local NLS")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration
    #[arg(long, short, global = true, default_value = "nlsnf.toml")]
    config: PathBuf,
    /// overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// mode cutoff M
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// horizon
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// output directory
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// worker threads
    #[arg(long, global = true, env = "NLSNF_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// resonant and rational normal forms
    Normalize,
    /// trajectory and stability experiment
    Simulate,
    /// resonant-fraction estimates
    Measure,
    /// parameter regimes and stability times
    Timeplan,
}

#[derive(ValueEnum, Clone, Copy)]
enum SchemeArg {
    Strang,
    Lie,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("nlsnf: cannot configure {n} threads: {e}");
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
    }
    let ov = Overrides {
        seed: args.seed,
        modes: args.modes,
        dt: args.dt,
        t_end: args.t_end,
        scheme: args.scheme.map(|s| match s {
            SchemeArg::Strang => Scheme::Strang,
            SchemeArg::Lie => Scheme::Lie,
        }),
        radius: args.radius,
        gamma: args.gamma,
        output: args.output,
    };
    let cmd = match args.command {
        Cmd::Normalize => Command::Normalize,
        Cmd::Simulate => Command::Simulate,
        Cmd::Measure => Command::Measure,
        Cmd::Timeplan => Command::Timeplan,
    };
    match cli::run(cmd, &args.config, &ov) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nlsnf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
