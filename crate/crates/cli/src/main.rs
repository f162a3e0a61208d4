use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use topoquench::error::{RunError, EXIT_INADMISSIBLE, EXIT_OK};
use topoquench::run::{load_config, RunOutput};
use topoquench::sweep::{self, Axis};

#[derive(Parser)]
#[command(
    name = "topoquench",
    version,
    about = "Quench dynamics and time-resolved topological indexes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write series.csv and summary.json.
    Run { config: PathBuf },
    /// Repeat a run over grid sizes or time steps.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated, strictly monotone.
        #[arg(long)]
        values: String,
    },
    /// Evaluate every symmetry and identity check for the configured models.
    Verify { config: PathBuf },
}

fn report(out: &RunOutput) {
    let s = &out.summary;
    eprintln!(
        "{}: ok in {:.2}s, output in {}",
        s.scenario,
        s.wall_clock.as_secs_f64(),
        s.config.output_dir.display()
    );
    for c in &s.checks {
        eprintln!("  {:<24} {:.3e} (tol {:.1e})", c.check, c.max_residual, c.tolerance);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<i32, RunError> = match cli.command {
        Command::Run { config } => load_config(&config).and_then(|c| topoquench::run(&c)).map(|out| {
            report(&out);
            EXIT_OK
        }),
        Command::Verify { config } => load_config(&config)
            .and_then(|c| topoquench::run_verify(&c))
            .map(|out| {
                report(&out);
                EXIT_OK
            }),
        Command::Sweep { config, axis, values } => load_config(&config).and_then(|c| {
            let values = sweep::parse_values(axis, &values)?;
            let report = sweep::sweep(&c, axis, &values)?;
            sweep::emit(&report, &c.output_dir)?;
            print!("{}", report.table().to_csv());
            if axis == Axis::Grid {
                match report.n_star {
                    Some(n) => eprintln!("N* = {n}"),
                    None => {
                        eprintln!("no grid in the sweep gave a constant admissible series");
                        return Ok(EXIT_INADMISSIBLE);
                    }
                }
            } else {
                for order in &report.observed_orders {
                    eprintln!("observed order {order:.3}");
                }
            }
            Ok(EXIT_OK)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
