use std::path::PathBuf;
use std::process::ExitCode;

use apseq_cli::config::{ScenarioConfig, WindowSpec};
use apseq_cli::run::{example_config, run, Command, ExampleKind};
use apseq_cli::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "apseq", version, about = "Bounded and almost periodic solutions of linear difference equations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Series tolerance (overrides the config).
    #[arg(long)]
    tol: Option<f64>,
    /// Solution window `A:B` (overrides the config).
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Worker threads; falls back to APSEQ_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct WithConfig {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Heat,
    Wave,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve any scenario.
    Solve(WithConfig),
    /// Solve a difference inclusion through its resolvent selection.
    SolveInclusion(WithConfig),
    /// Solve a degenerate equation.
    SolveDegenerate(WithConfig),
    /// Solve a second-order equation.
    SolveP2(WithConfig),
    /// Write the companion selection blocks of a second-order scenario.
    ReduceOrder(WithConfig),
    /// Analyze the forcing `f`, or a sequence read from a solution CSV.
    Analyze {
        #[command(flatten)]
        cfg: WithConfig,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a built-in grid scenario.
    Example {
        #[arg(value_enum)]
        kind: ExampleArg,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Print the scenario as TOML and exit.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_window(s: &str) -> Result<WindowSpec, CliError> {
    let bad = || CliError::Config(format!("window must be A:B, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let w = WindowSpec {
        start: a.trim().parse().map_err(|_| bad())?,
        end: b.trim().parse().map_err(|_| bad())?,
    };
    w.window()?;
    Ok(w)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("APSEQ_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("APSEQ_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (command, mut cfg, common, input) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, ScenarioConfig::load(&c.config)?, c.common, None),
        Cmd::SolveInclusion(c) => (Command::SolveInclusion, ScenarioConfig::load(&c.config)?, c.common, None),
        Cmd::SolveDegenerate(c) => (Command::SolveDegenerate, ScenarioConfig::load(&c.config)?, c.common, None),
        Cmd::SolveP2(c) => (Command::SolveP2, ScenarioConfig::load(&c.config)?, c.common, None),
        Cmd::ReduceOrder(c) => (Command::ReduceOrder, ScenarioConfig::load(&c.config)?, c.common, None),
        Cmd::Analyze { cfg, input } => (Command::Analyze, ScenarioConfig::load(&cfg.config)?, cfg.common, input),
        Cmd::Example { kind, n, h, print_config, common } => {
            let kind = match kind {
                ExampleArg::Heat => ExampleKind::Heat,
                ExampleArg::Wave => ExampleKind::Wave,
            };
            let cfg = example_config(kind, n, h);
            if print_config {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            (Command::Example, cfg, common, None)
        }
    };
    if let Some(t) = common.tol {
        cfg.solver.tol = Some(t);
    }
    if let Some(w) = &common.window {
        cfg.window = parse_window(w)?;
    }
    let job = || run(command, &cfg, &common.out, input.as_deref());
    let result = match thread_count(common.threads)? {
        Some(0) => return Err(CliError::Config("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(job),
        None => job(),
    }?;
    if let Some(rep) = &result.report {
        for w in &rep.warnings {
            eprintln!("warning: {w}");
        }
    }
    for f in &result.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
