use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use piezobeam_lab::{commands, LabError, Options, Variant};

/// Simulation and spectral experiments for piezoelectric beams with
/// dynamic magnetic effects.
#[derive(Debug, Parser)]
#[command(name = "piezo-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration (toy units when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR", default_value = "piezo-lab-out")]
    out: PathBuf,

    /// Seed for all random draws [default: 42]
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Override the number of grid cells
    #[arg(long = "n-cells", global = true, value_name = "N")]
    n_cells: Option<usize>,

    /// Model variant: current, charge_magnetic or electrostatic
    #[arg(long, global = true, value_name = "NAME")]
    variant: Option<String>,

    /// Collocated feedback gain k >= 0
    #[arg(long, global = true, value_name = "K")]
    gain: Option<f64>,

    /// Run a single check of `paper-suite`
    #[arg(long, global = true, value_name = "CHECK")]
    only: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the configured experiment and write its trajectory
    Simulate,
    /// Open-loop (and with --gain, closed-loop) spectrum with mode classification
    Spectrum,
    /// Closed-loop spectrum and run under collocated current feedback
    Stabilize,
    /// Electrostatic boundary feedback and charge-actuated magnetic model
    Variants,
    /// Run the full acceptance suite
    PaperSuite,
}

fn options(cli: &Cli) -> Result<Options, LabError> {
    Ok(Options {
        config: cli.config.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
        n_cells: cli.n_cells,
        variant: cli.variant.as_deref().map(str::parse::<Variant>).transpose()?,
        gain: cli.gain,
        only: cli.only.clone(),
    })
}

fn execute(cli: &Cli) -> Result<bool, LabError> {
    let opts = options(cli)?;
    let report = match cli.command {
        Command::Simulate => commands::simulate(&opts)?,
        Command::Spectrum => commands::spectrum(&opts)?,
        Command::Stabilize => commands::stabilize(&opts)?,
        Command::Variants => commands::variants(&opts)?,
        Command::PaperSuite => commands::paper_suite(&opts)?,
    };
    report.write(&opts.out)?;
    print!("{}", report.table());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("piezo-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
