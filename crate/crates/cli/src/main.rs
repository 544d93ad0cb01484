use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qinstrument::oracle::DEFAULT_BUDGET;
use qinstrument::Tolerances;
use qinstrument_cli::{
    parse, render_sweep_table, render_table, run, sweep, verify, write_csv, write_sweep_csv, CliError,
    EXIT_INVARIANT, EXIT_VALIDATION,
};

/// Evaluate detector-sequence scenarios built from quantum instruments.
#[derive(Debug, Parser)]
#[command(name = "qinst", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the outputs requested by a scenario file.
    Run {
        file: PathBuf,
        /// Also write the records as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Equality tolerance for completeness and unitarity checks.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Cross-check a scenario against exhaustive enumeration.
    Verify {
        file: PathBuf,
        /// Largest number of outcome tuples to enumerate.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        /// Equality tolerance for the oracle comparison.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Tabulate pre- and post-selected averages against the weak value.
    Sweep {
        file: PathBuf,
        /// Swept parameter; only the measurement strength `eps` is supported.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn tolerances(eq: Option<f64>) -> Result<Tolerances, CliError> {
    let tol = Tolerances::default();
    match eq {
        None => Ok(tol),
        Some(x) => tol
            .with_eq(x)
            .map_err(|e| CliError::Usage(format!("--tolerance: {e}"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Run { file, csv, tolerance } => {
            let tol = tolerances(tolerance)?;
            let scenario = parse(&file, &tol)?;
            let records = run(&scenario, &tol)?;
            print!("{}", render_table(&records));
            if let Some(path) = csv {
                write_csv(&records, create(&path)?)?;
            }
            Ok(0)
        }
        Command::Verify { file, budget, tolerance } => {
            let tol = tolerances(tolerance)?;
            let scenario = parse(&file, &tol)?;
            let report = verify(&scenario, budget, &tol)?;
            println!("enumerated {} outcome tuples", report.tuples);
            for c in &report.checks {
                let status = if c.passed() { "ok" } else { "VIOLATION" };
                println!("{status:<9}  {:<40}  deviation {:.3e}  (tolerance {:.1e})", c.name, c.deviation, c.tolerance);
            }
            println!("max deviation {:.3e}", report.max_deviation());
            Ok(if report.passed() { 0 } else { EXIT_INVARIANT })
        }
        Command::Sweep { file, param, values, csv } => {
            if param != "eps" {
                return Err(CliError::Usage(format!("unknown sweep parameter {param:?}; supported: eps")));
            }
            let tol = Tolerances::default();
            let scenario = parse(&file, &tol)?;
            let rows = sweep(&scenario, &values, &tol)?;
            print!("{}", render_sweep_table(&rows));
            if let Some(path) = csv {
                write_sweep_csv(&rows, create(&path)?)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
