use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nrflow::cli::{self, CommandOutput, Overrides};

#[derive(Parser)]
#[command(
    name = "nrflow",
    version,
    about = "Newton-Raphson-flow tracking controller simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario described by a TOML file.
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a named experiment set (fig2, fig3, fig4, fig5, platoon, prop1).
    Experiment {
        name: String,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Closed-loop stability of the position system.
    Stability {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Stability verdicts over an (a, T, alpha) grid file.
    Sweep {
        grid: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

// Write errors (a closed pipe, say) are not worth a panic.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn report(output: CommandOutput) -> ExitCode {
    emit(&output.summary);
    for f in &output.files {
        emit(&format!("wrote {}\n", f.display()));
    }
    ExitCode::from(output.status.code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run {
            config,
            out,
            horizon,
            alpha,
            dt,
            duration,
            seed,
        } => {
            let overrides = Overrides {
                horizon,
                alpha,
                dt,
                duration,
                seed,
            };
            cli::cmd_run(&config, &out, &overrides).map(report)
        }
        Command::Experiment { name, out } => cli::cmd_experiment(&name, &out).map(report),
        Command::Stability { a, horizon, alpha } => {
            cli::cmd_stability(a, horizon, alpha).map(|text| {
                emit(&text);
                ExitCode::SUCCESS
            })
        }
        Command::Sweep { grid, out } => cli::cmd_sweep(&grid, &out).map(report),
    };
    result.unwrap_or_else(|e| {
        eprintln!("{}", cli::error_line(&e));
        ExitCode::from(cli::exit_code(&e) as u8)
    })
}
