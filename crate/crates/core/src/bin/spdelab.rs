use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spdelab::distribution_space::Distribution;
use spdelab::runner::{
    exit_code_for, load_config, norms_csv, preset, run_pipeline, selftest, Overrides, RunOutcome,
    MAX_TRUNCATION,
};
use spdelab::{Error, Result};

/// Translation-invariant SPDE laboratory: simulate, change measure, verify.
#[derive(Parser)]
#[command(name = "spdelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Flags,
}

#[derive(Args)]
struct Flags {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Number of time steps on the finest grid.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario in a TOML file.
    Run { config: PathBuf },
    /// Run a built-in scenario (example1, example2, negative-control).
    Preset { name: String },
    /// Tabulate ‖τ_x φ‖_{−p} over x ∈ [−xmax, xmax].
    Norms {
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, default_value_t = 10.0)]
        xmax: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, default_value_t = 200)]
        truncation: usize,
    },
    /// Fast analytic checks of the numerical core.
    Selftest,
}

fn report(outcome: &RunOutcome) -> i32 {
    print!("{}", outcome.summary());
    println!("artifacts: {}", outcome.output_dir.display());
    outcome.exit_code()
}

fn execute(cli: Cli) -> Result<i32> {
    let f = &cli.overrides;
    let overrides = Overrides {
        seed: f.seed,
        paths: f.paths,
        steps: f.steps,
        output: f.out.as_deref(),
    };
    match cli.command {
        Command::Run { config } => {
            let mut cfg = load_config(&config)?;
            cfg.apply(&overrides);
            Ok(report(&run_pipeline(&cfg)?))
        }
        Command::Preset { name } => {
            let mut cfg = preset(&name)?;
            cfg.apply(&overrides);
            Ok(report(&run_pipeline(&cfg)?))
        }
        Command::Norms {
            p,
            xmax,
            grid,
            dimension,
            truncation,
        } => {
            if !(1..=MAX_TRUNCATION).contains(&truncation) {
                return Err(Error::validation(
                    "truncation",
                    format!("must lie in 1..={MAX_TRUNCATION}"),
                ));
            }
            if !(p.is_finite() && p > dimension as f64 / 4.0) {
                return Err(Error::validation(
                    "p",
                    format!("a delta needs p > d/4 = {}", dimension as f64 / 4.0),
                ));
            }
            if grid < 2 || !(xmax.is_finite() && xmax > 0.0) {
                return Err(Error::validation(
                    "grid",
                    "need at least 2 points on a positive half-width",
                ));
            }
            let phi = Distribution::delta(vec![0.0; dimension])
                .map_err(|e| Error::validation("dimension", e.to_string()))?;
            let csv = norms_csv(&phi, p, truncation, xmax, grid)?;
            match &f.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    let path = dir.join("norms.csv");
                    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Selftest => {
            let checks = selftest()?;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(if checks.iter().all(|c| c.pass) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
