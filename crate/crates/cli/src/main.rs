use std::path::PathBuf;
use std::process::ExitCode;

use cavbeat::runner::BatchOutcome;
use cavbeat::{
    run_preset, run_scenario, run_sweep, run_validation, AppError, Mode, Preset, RunOptions, Scenario, SweepParam,
};
use clap::{Args, Parser, Subcommand};

/// Cascade-atom emission in a two-mode bad cavity: reduced and composite
/// dynamics, closed forms and parameter sweeps.
#[derive(Parser)]
#[command(name = "cavbeat", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Relative integrator tolerance (overrides the scenario).
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    /// Absolute integrator tolerance (overrides the scenario).
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Recorded in summaries; runs are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cavity decay rate in 1/s; writes the CSV time column in seconds.
    #[arg(long, global = true)]
    kappa_hz: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { scenario: PathBuf },
    /// Run a scenario for each value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Omega, eta, G, kappa or t_end.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Run a built-in parameter set (fig3 or fig4).
    Preset {
        preset: Preset,
        /// Interference factor; both 1 and 0 when omitted.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Compare composite and reduced dynamics over decreasing couplings.
    Validate {
        scenario: PathBuf,
        /// Comma-separated coupling magnitudes.
        #[arg(long, value_delimiter = ',')]
        g_values: Option<Vec<f64>>,
    },
}

fn batch_result(b: BatchOutcome) -> Result<(), AppError> {
    let failed = b.rows.iter().filter(|r| r.status != "ok").count();
    println!("wrote {} ({} points, {failed} failed)", b.table.display(), b.rows.len());
    match b.exit_code {
        0 => Ok(()),
        2 => Err(AppError::Validation(format!("{failed} point(s) failed"))),
        3 => Err(AppError::Integration(format!("{failed} point(s) failed"))),
        _ => Err(AppError::Io(std::io::Error::other(format!("{failed} point(s) failed")))),
    }
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let g = cli.global;
    let opts = RunOptions {
        out_dir: g.out_dir,
        tol_rel: g.tol_rel,
        tol_abs: g.tol_abs,
        seed: g.seed,
        kappa_hz: g.kappa_hz,
    };
    match cli.command {
        Command::Run { scenario } => {
            let s = Scenario::load(&scenario)?;
            if s.mode == Mode::Validate {
                let out = run_validation(&s, None, &opts)?;
                println!("validation passed ({} points)", out.report.points.len());
            } else {
                let out = run_scenario(&s, &opts)?;
                println!("wrote {} and {}", out.csv.display(), out.summary_path.display());
            }
            Ok(())
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => batch_result(run_sweep(&Scenario::load(&scenario)?, param, &values, &opts)?),
        Command::Preset { preset, eta } => batch_result(run_preset(preset, eta, &opts)?),
        Command::Validate { scenario, g_values } => {
            let out = run_validation(&Scenario::load(&scenario)?, g_values.as_deref(), &opts)?;
            println!("validation passed ({} points)", out.report.points.len());
            Ok(())
        }
    }
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
