use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hyperfe::config::RunConfig;
use hyperfe::macroscale::CaseName;

mod commands;

use commands::Incomplete;

#[derive(Parser)]
#[command(name = "hyperfe", version, about = "Hybrid FE² pipeline: snapshots, surrogate training, multiscale solves")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both sampling.seed and training.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sample and Gauss-point parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (-v info is the default, -vv debug); -q only errors.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorKind {
    Fe2,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    LProfile,
    CooksMembrane,
}

impl From<CaseArg> for CaseName {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::LProfile => CaseName::LProfile,
            CaseArg::CooksMembrane => CaseName::CooksMembrane,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample macro strains, solve the cell problems, write snapshots.
    Generate,
    /// Compute the POD basis and train the branch network.
    Train,
    /// Compare surrogate and full cell solve for one macro strain.
    EvalRve {
        /// Macro strain "eps_xx,eps_yy,gamma_xy".
        #[arg(long, allow_hyphen_values = true, default_value = "-0.011,-0.036,0.017")]
        eps_bar: String,
    },
    /// Multiscale solve of the configured macro case.
    Solve {
        #[arg(long, value_enum, default_value = "hybrid")]
        evaluator: EvaluatorKind,
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
    },
    /// Hybrid against FE² on the configured case (or both cases).
    Benchmark {
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        #[arg(long)]
        all_cases: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
        cfg.training.seed = seed;
    }
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Train => commands::train(&cfg),
        Command::EvalRve { eps_bar } => commands::eval_rve(&cfg, &eps_bar),
        Command::Solve { evaluator, case } => {
            if let Some(c) = case {
                cfg.macro_.case = c.into();
            }
            commands::solve(&cfg, evaluator)
        }
        Command::Benchmark { case, all_cases } => {
            let cases = match (all_cases, case) {
                (true, _) => CaseName::ALL.to_vec(),
                (false, Some(c)) => vec![c.into()],
                (false, None) => vec![cfg.macro_.case],
            };
            commands::benchmark(&cfg, &cases)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0 | 1) => "info",
        (false, _) => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Incomplete>() => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
