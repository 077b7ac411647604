use std::path::PathBuf;
use std::process::ExitCode;

use blockmf::verify::Level;
use blockmf_cli::{cmd_fixed_points, cmd_integrate, cmd_simulate, cmd_verify_with, CommandOutcome, SimulateArgs};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blockmf", version, about = "Mean-field particle systems on block graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Deep,
}

#[derive(Subcommand)]
enum Command {
    /// Gillespie simulation of the finite system.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Multiplies every finite class size.
        #[arg(long = "n-scale", default_value_t = 1.0)]
        n_scale: f64,
        #[arg(long = "T", default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Law of the initial nodes: uniform, delta:<z> or a JSON vector.
        #[arg(long)]
        q0: Option<String>,
    },
    /// RK4 integration of the limit ODE with a descent report.
    Integrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// uniform, delta:<z> or a JSON vector.
        #[arg(long, default_value = "uniform")]
        q0: String,
        #[arg(long = "T", default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
    },
    /// Multi-start fixed-point search with stability classification.
    FixedPoints {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "n-starts", default_value_t = 200)]
        n_starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Property checks; prints a pass/fail table.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: perturb W(1,2) after validation so it is asymmetric.
        #[arg(long = "asymmetric-w", hide = true)]
        asymmetric_w: bool,
    },
}

fn report(outcome: &CommandOutcome) -> ExitCode {
    for line in &outcome.summary {
        if outcome.exit_code == 0 || !line.starts_with("error:") {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate {
            model,
            out,
            n_scale,
            t,
            samples,
            replicates,
            seed,
            q0,
        } => cmd_simulate(
            &model,
            &SimulateArgs {
                n_scale,
                horizon: t,
                samples,
                replicates,
                seed,
                q0,
            },
            &out,
        ),
        Command::Integrate { model, out, q0, t, dt } => cmd_integrate(&model, &q0, t, dt, &out),
        Command::FixedPoints {
            model,
            out,
            n_starts,
            seed,
        } => cmd_fixed_points(&model, n_starts, seed, &out),
        Command::Verify {
            model,
            level,
            out,
            asymmetric_w,
        } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Deep => Level::Deep,
            };
            cmd_verify_with(&model, level, out.as_deref(), |spec| {
                if asymmetric_w && spec.k() > 1 {
                    let w = spec.w(0, 1);
                    spec.interaction.set_w_unchecked(0, 1, w + 1.0);
                }
            })
        }
    };
    report(&outcome)
}
