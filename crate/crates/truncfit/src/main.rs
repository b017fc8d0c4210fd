//! Command-line entry point.
//!
//! Exit codes: 0 for a converged fit (and for help/version), 2 for a fit
//! that hit the iteration cap without converging, 1 for every error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use truncfit::cli::{self, DistributionKind, OutputFormat, RunRequest, SynthRequest};

#[derive(Parser)]
#[command(
    name = "truncfit",
    version,
    about = "Maximum-likelihood fitting of truncated normal and truncated \
             lognormal distributions, including their power-law limit"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a truncated distribution to a newline-delimited data file
    Fit {
        /// Input file: one value per line, '#' comments allowed
        #[arg(long)]
        input: PathBuf,
        /// Treat the data as x > 0 and fit ln(x) (truncated lognormal)
        #[arg(long)]
        lognormal: bool,
        /// Lower truncation bound, in data units
        #[arg(long, requires = "hi", allow_hyphen_values = true)]
        lo: Option<f64>,
        /// Upper truncation bound, in data units
        #[arg(long, requires = "lo", allow_hyphen_values = true)]
        hi: Option<f64>,
        /// Step-size fraction in (0, 1)
        #[arg(long, default_value_t = 0.33)]
        eta: f64,
        /// Convergence threshold on both parameter steps
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Iteration cap
        #[arg(long = "max-iter", default_value_t = 10_000)]
        max_iter: usize,
        /// Constrain psi = 0: fit the pure exponential / power-law member
        #[arg(long)]
        exponential: bool,
        /// Output format
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Generate a seeded synthetic sample from given parameters
    Synth {
        /// Linear exponent coefficient
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Quadratic exponent coefficient
        #[arg(long, allow_hyphen_values = true)]
        psi: f64,
        /// Lower support bound (y units)
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        /// Upper support bound (y units)
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        /// Number of draws
        #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// PRNG seed
        #[arg(long)]
        seed: u64,
        /// Output file path
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match args.command {
        Command::Fit {
            input,
            lognormal,
            lo,
            hi,
            eta,
            tol,
            max_iter,
            exponential,
            format,
        } => {
            let req = RunRequest {
                input_path: input,
                distribution: if lognormal {
                    DistributionKind::Lognormal
                } else {
                    DistributionKind::Normal
                },
                // clap's `requires` guarantees lo and hi come together.
                bounds: lo.zip(hi),
                constrain_psi_zero: exponential,
                eta,
                tol,
                max_iterations: max_iter,
                output_format: match format {
                    FormatArg::Json => OutputFormat::Json,
                    FormatArg::Text => OutputFormat::Text,
                },
            };
            match cli::run(&req) {
                Ok(report) => {
                    let rendered = match req.output_format {
                        OutputFormat::Json => cli::render_json(&report),
                        OutputFormat::Text => cli::render_text(&report),
                    };
                    println!("{rendered}");
                    if report.converged {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Synth {
            alpha,
            psi,
            lo,
            hi,
            n,
            seed,
            out,
        } => {
            let req = SynthRequest {
                alpha,
                psi,
                lo,
                hi,
                n: n as usize,
                seed,
                out_path: out,
            };
            match cli::synth_command(&req) {
                Ok(()) => ExitCode::SUCCESS,
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
