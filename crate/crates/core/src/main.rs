use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use monodomain::cli::{self, RunConfig};
use monodomain::{Error, Result};

/// Monodomain solver with a posteriori error indicators.
#[derive(Debug, Parser)]
#[command(name = "monodomain", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Named parameter set applied below the file (desk, paper-fig2-coarse, paper-fig2-fine).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Override one key, e.g. `--set time.tau=0.025`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March the configured run; write checkpoint, probe series and VTK frames.
    Solve,
    /// Compare the cumulative estimator with the error against a reference.
    Upperbound,
    /// Fit error and estimator orders along the study ladder.
    Convergence,
    /// Track linearization error and indicator over Newton iterates.
    NewtonStudy,
}

fn load(args: &Args) -> Result<RunConfig> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => String::new(),
    };
    cli::parse_config_with(&text, &args.sets, args.preset.as_deref())
}

fn run(args: &Args) -> Result<()> {
    let cfg = load(args)?;
    let out = match args.command {
        Command::Solve => cli::solve(&cfg)?.0,
        Command::Upperbound => {
            let (out, result) = cli::upperbound(&cfg)?;
            println!(
                "bound_holds = {}, final_effectivity = {}",
                result.bound_holds(),
                result
                    .final_effectivity()
                    .map_or("undefined".into(), |e| format!("{e:.4}"))
            );
            out
        }
        Command::Convergence => {
            let (out, result) = cli::convergence(&cfg)?;
            let show = |o: Option<f64>| o.map_or("undefined".into(), |v| format!("{v:.4}"));
            println!(
                "error_order = {}, estimator_order = {}",
                show(result.error_order),
                show(result.estimator_order)
            );
            out
        }
        Command::NewtonStudy => cli::newton(&cfg)?.0,
    };
    for path in out.csv.iter().chain(&out.checkpoint).chain(&out.vtk) {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
