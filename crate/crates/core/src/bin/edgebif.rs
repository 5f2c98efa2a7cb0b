use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edgebif::report::{exit_code, run, Command, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(version, about = "Edge bifurcation of the threshold resonance of the linearized NLS near p = 3")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the operator identities and reproduce A, alpha_2 and the cross-check integral
    Verify(Opts),
    /// Run the Lyapunov-Schmidt expansion and print alpha_2 with its inner products
    Alpha2(Opts),
    /// Locate gap eigenvalues of the discretized operator and fit the bifurcation law
    Scan(Opts),
    /// Residual of the truncated expansion in the full Birman-Schwinger equation
    Residual(Opts),
    /// All of the above in one document
    Report(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Opts {
    /// Half-length L of the domain [-L, L]
    #[arg(long, default_value_t = 40.0)]
    domain_length: f64,
    /// Number of quadrature nodes
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
    /// Fourier modes per component in the Galerkin basis
    #[arg(long, default_value_t = 96)]
    modes: usize,
    /// Perturbation eps = p - 3 (repeatable)
    #[arg(long, allow_negative_numbers = true)]
    eps: Vec<f64>,
    /// Nonlinearity power p (repeatable)
    #[arg(long)]
    p: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized identity checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config(command: Command, o: Opts) -> RunConfig {
    RunConfig {
        command,
        half_length: o.domain_length,
        n_points: o.grid_points,
        n_modes: o.modes,
        p_list: o.p,
        eps_list: o.eps,
        output_format: match o.format {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        },
        output_path: o.out,
        seed: o.seed,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Verify(o) => config(Command::Verify, o),
        Cmd::Alpha2(o) => config(Command::Alpha2, o),
        Cmd::Scan(o) => config(Command::Scan, o),
        Cmd::Residual(o) => config(Command::Residual, o),
        Cmd::Report(o) => config(Command::Report, o),
    };
    let outcome = run(&cfg).and_then(|out| {
        match &cfg.output_path {
            Some(path) => std::fs::write(path, &out.text)?,
            None => print!("{}", out.text),
        }
        Ok(out)
    });
    let code = exit_code(&outcome);
    match &outcome {
        Err(e) => eprintln!("error: {e}"),
        Ok(out) if !out.pass => eprintln!("one or more checks failed"),
        Ok(_) => {}
    }
    ExitCode::from(code as u8)
}
