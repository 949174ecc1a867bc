use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use temporal_robustness::analytic::CountMode;
use temporal_robustness::simulator::PostMode;
use trlab::{
    load_config, parse_engines, parse_values, run_figure, run_sweep_with_progress, run_validate, Axis, CliError,
    Figure, FigureOverrides, Level, SweepPlan, SweepResult, CONFIG_ENV, DEFAULT_ITERATIONS, DEFAULT_SEED,
};

#[derive(Parser)]
#[command(name = "trlab", version, about = "Temporal robustness sweeps, figure data and validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate engines along one parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// ch_probability, n_nodes, p_threshold_dbm or failure_q.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly increasing.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "sim,analytic-approx")]
        engine: String,
    },
    /// Produce the data of one figure (fig3..fig7).
    Figure {
        name: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        engine: Option<String>,
    },
    /// Run the self-check suite.
    Validate {
        #[arg(default_value = "fast")]
        level: String,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; defaults to the reference scenario.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    /// CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PostArg::Reassociate)]
    post_mode: PostArg,
    #[arg(long, value_enum, default_value_t = CountsArg::Floored)]
    counts: CountsArg,
    /// Suppress the progress counter on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostArg {
    Reassociate,
    Frozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountsArg {
    Floored,
    Smooth,
}

impl From<PostArg> for PostMode {
    fn from(p: PostArg) -> Self {
        match p {
            PostArg::Reassociate => PostMode::Reassociate,
            PostArg::Frozen => PostMode::FrozenTopology,
        }
    }
}

impl From<CountsArg> for CountMode {
    fn from(c: CountsArg) -> Self {
        match c {
            CountsArg::Floored => CountMode::Floored,
            CountsArg::Smooth => CountMode::Smooth,
        }
    }
}

fn emit(result: &SweepResult, out: Option<&Path>) -> Result<(), CliError> {
    let csv = result.to_csv();
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    match result.error_rows() {
        0 => Ok(()),
        n => Err(CliError::Numeric(format!("{n} row(s) carry an error tag"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep {
            common,
            axis,
            values,
            engine,
        } => {
            let mut plan = SweepPlan::new(
                axis.parse::<Axis>()?,
                parse_values(&values)?,
                parse_engines(&engine)?,
                load_config(common.config.as_deref())?,
            );
            plan.iterations = common.iterations;
            plan.master_seed = common.seed;
            plan.post_mode = common.post_mode.into();
            plan.counts = common.counts.into();
            let quiet = common.quiet;
            let result = run_sweep_with_progress(&plan, |done, total| {
                if !quiet {
                    eprintln!("[{done}/{total}]");
                }
            })?;
            emit(&result, common.out.as_deref())
        }
        Command::Figure {
            name,
            common,
            values,
            engine,
        } => {
            let overrides = FigureOverrides {
                base: load_config(common.config.as_deref())?,
                master_seed: common.seed,
                iterations: common.iterations,
                engines: engine.as_deref().map(parse_engines).transpose()?,
                values: values.as_deref().map(parse_values).transpose()?,
                post_mode: common.post_mode.into(),
                counts: common.counts.into(),
            };
            let figure: Figure = name.parse()?;
            if !common.quiet {
                eprintln!("running {}", figure.name());
            }
            let result = run_figure(&name, &overrides)?;
            emit(&result, common.out.as_deref())
        }
        Command::Validate { level, config } => {
            let level: Level = level.parse()?;
            let report = run_validate(level, &load_config(config.as_deref())?)?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Validation("one or more checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
