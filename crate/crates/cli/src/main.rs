use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use steklov_cli::output::{self, Format};
use steklov_cli::runs::{self, Verdict};
use steklov_cli::{CliError, Config};

#[derive(Parser)]
#[command(name = "steklov", version, about = "Steklov-Dirichlet eigenvalue laboratory for a domain with a moving hole")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: FormatArg,

    /// Worker threads; overrides the configuration.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Accepted for documentation: no run uses random numbers.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve one instance and report its diagnostics.
    Solve,
    /// Sweep the offset from 0 to safety * t_max and judge monotonicity.
    Sweep,
    /// Concentric convergence study against the closed form.
    Converge,
    /// Compare derivative formulas with finite differences.
    DerivCheck,
    /// Closed-form concentric value and eccentric bounds.
    Bounds,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(verdict) => {
            let _ = output::write_verdict(io::stderr(), &verdict);
            if verdict.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(args: &Args) -> Result<Verdict, CliError> {
    let mut config = match &args.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(k) = args.workers {
        config.workers = k;
        config.validate()?;
    }
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let verdict = match args.command {
        Command::Solve => {
            let r = runs::run_solve(&config)?;
            emit(&mut out, format, "solve", &config, &r, |o, r| output::write_solve_csv(o, r))?;
            r.verdict
        }
        Command::Sweep => {
            let r = runs::run_sweep(&config)?;
            emit(&mut out, format, "sweep", &config, &r, |o, r| output::write_sweep_csv(o, r))?;
            r.verdict
        }
        Command::Converge => {
            let r = runs::run_convergence(&config)?;
            emit(&mut out, format, "converge", &config, &r, |o, r| output::write_convergence_csv(o, r))?;
            r.verdict
        }
        Command::DerivCheck => {
            let r = runs::run_deriv_check(&config)?;
            emit(&mut out, format, "deriv-check", &config, &r, |o, r| output::write_derivatives_csv(o, r))?;
            r.verdict
        }
        Command::Bounds => {
            let r = runs::run_bounds(&config)?;
            emit(&mut out, format, "bounds", &config, &r, |o, r| output::write_bounds_csv(o, r))?;
            r.verdict
        }
    };
    out.flush()?;
    Ok(verdict)
}

fn emit<T: serde::Serialize>(
    out: &mut dyn Write,
    format: Format,
    command: &str,
    config: &Config,
    result: &T,
    csv: impl FnOnce(&mut dyn Write, &T) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match format {
        Format::Json => output::write_json(out, command, config, result),
        Format::Csv => csv(out, result),
    }
}
