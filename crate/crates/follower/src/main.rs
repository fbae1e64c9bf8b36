use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use follower::{cmd_simulate, cmd_solve, cmd_sweep, commands, load_problem, CliError, Outcome, Overrides};

#[derive(Parser)]
#[command(name = "follower", version, about = "Solve, verify and simulate reflected-follower control problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem file (TOML, schema = 1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid's right end (the left end mirrors it unless set).
    #[arg(long)]
    grid_hi: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify, solve for the boundary, build and verify the value function.
    Solve(Common),
    /// Monte Carlo payoff of a band policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Band to simulate instead of the solved b*.
        #[arg(long)]
        policy_b: Option<f64>,
        /// Starting points, comma-separated.
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
    },
    /// Sensitivity of the OU problem to one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// sigma, theta, kappa or eta0.
        #[arg(long)]
        param: String,
        /// Values, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let (common, overrides) = match &cli.command {
        Command::Solve(c) => (c, Overrides::default()),
        Command::Simulate { common, seed, x, .. } => (
            common,
            Overrides {
                seed: *seed,
                x: x.clone(),
                ..Overrides::default()
            },
        ),
        Command::Sweep { common, .. } => (common, Overrides::default()),
    };
    let overrides = Overrides {
        grid_hi: common.grid_hi,
        ..overrides
    };
    let problem = load_problem(&common.config, &overrides)?;
    let out = commands::output_dir(&problem, common.out.as_deref())?;
    match &cli.command {
        Command::Solve(_) => cmd_solve(&problem, &out),
        Command::Simulate { policy_b, .. } => cmd_simulate(&problem, &out, *policy_b),
        Command::Sweep { param, values, .. } => cmd_sweep(&problem, &out, param, values),
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
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
