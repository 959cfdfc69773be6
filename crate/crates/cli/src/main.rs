use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use droopsim::format::{parse_scenario_str, print_scenario, TABLE1_SCENARIO};
use droopsim::oracle::prepare;
use droopsim::Scenario;

mod error;
mod plot;
mod report;
mod sweep;
mod waveform_csv;

use error::CliError;

/// Scenario argument that selects the bundled reference scenario instead of
/// a file.
const BUILTIN_TABLE1: &str = "builtin:table1";

#[derive(Parser, Debug)]
#[command(name = "droopsim", version, about = "Phasor-domain simulator of parallel droop-controlled inverters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write the time series as CSV.
    Run {
        /// Scenario file, or `builtin:table1`.
        scenario: String,
        /// Output CSV path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Add instantaneous va/vb/vc columns for this inverter (1-based).
        #[arg(long, value_name = "INV")]
        waveform: Option<usize>,
        /// Skip time stepping and print only the steady-state analysis.
        #[arg(long)]
        steady_only: bool,
    },
    /// Steady state of every load segment, with stability margins.
    Steady { scenario: String },
    /// Print the scenario with calibrated (delta0, E0) written out.
    Calibrate { scenario: String },
    /// Evaluate the steady state over a range of one parameter.
    Sweep {
        scenario: String,
        /// One of k_pdelta, k_qE, tau_s, line_x_ohm.
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Treat the range as multipliers of the scenario's own values.
        #[arg(long)]
        relative: bool,
        /// Output CSV path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render SVG charts from a run CSV.
    Plot {
        csv: PathBuf,
        #[arg(short = 'd', long = "dir")]
        out_dir: PathBuf,
    },
}

fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    if arg == BUILTIN_TABLE1 {
        return Ok(parse_scenario_str(TABLE1_SCENARIO, "table1.scenario")?);
    }
    let src = std::fs::read_to_string(arg).map_err(|e| CliError::io(arg, e))?;
    Ok(parse_scenario_str(&src, arg)?)
}

pub(crate) fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            scenario,
            output,
            waveform,
            steady_only,
        } => {
            let s = load_scenario(&scenario)?;
            if steady_only {
                return report::print_steady(&s);
            }
            report::run(&s, output.as_deref(), waveform)
        }
        Command::Steady { scenario } => report::print_steady(&load_scenario(&scenario)?),
        Command::Calibrate { scenario } => {
            let prepared = prepare(&load_scenario(&scenario)?)?;
            let mut text = String::from("# calibrated against the grid source under the initial load\n");
            for (i, inv) in prepared.inverters.iter().enumerate() {
                text.push_str(&format!(
                    "# inverter {}: delta0 = {:.6} rad, E0 = {:.4} V\n",
                    i + 1,
                    inv.setpoints.delta0,
                    inv.setpoints.e0
                ));
            }
            text.push_str(&print_scenario(&prepared));
            write_output(None, &text)
        }
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            steps,
            relative,
            output,
        } => {
            let s = load_scenario(&scenario)?;
            let spec = sweep::SweepSpec::new(&param, from, to, steps, relative)?;
            let csv = sweep::run_sweep(&s, &spec);
            write_output(output.as_deref(), &csv)
        }
        Command::Plot { csv, out_dir } => plot::emit_plots(&csv, &out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DROOPSIM_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("droopsim: {e}");
            if let CliError::Simulation(droopsim::Error::Divergence { report, .. }) = &e {
                eprintln!(
                    "  loop gains {:?}, spectral radius {:.4} (damped {:.4})",
                    report.loop_gains, report.spectral_radius, report.damped_radius
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
