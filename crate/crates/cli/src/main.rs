use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kminn::fracture::Criterion;
use kminn_cli::run::{self, Overrides};
use kminn_cli::{CaseConfig, CliError};

#[derive(Parser)]
#[command(name = "kminn", version, about = "Mesh-free crack analysis with holomorphic potential networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and extract SIFs, fields and loss history.
    Sif(Common),
    /// Quasi-static crack growth.
    Grow(Common),
    /// SIFs over the case's radius list.
    SweepRadius(Common),
    /// Growth with and without warm starts, with a timing summary.
    CompareTl(Common),
}

#[derive(Args)]
struct Common {
    /// Case file (TOML).
    case: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the case's `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// mts, merr, pls or all.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    no_tl: bool,
    /// Continue from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn criteria(arg: &Option<String>) -> Result<Vec<Criterion>, CliError> {
    match arg.as_deref() {
        None => Ok(Vec::new()),
        Some("all") => Ok(Criterion::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|c| c.trim().parse().map_err(|e: kminn::Error| CliError::Config(format!("--criterion: {e}"))))
            .collect(),
    }
}

fn load(c: &Common) -> Result<CaseConfig, CliError> {
    let mut case = CaseConfig::load(&c.case)?;
    Overrides {
        seed: c.seed,
        out: c.out.clone(),
        no_tl: c.no_tl,
    }
    .apply(&mut case)?;
    Ok(case)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sif(c) => {
            let report = run::run_sif_case(&load(&c)?)?;
            for (k, s) in report.sifs.iter().enumerate() {
                println!("tip {k}: K_I = {:.6}  K_II = {:.6}  (r/a = {})", s.k_i, s.k_ii, s.radius_ratio);
            }
            if let Some((ri, rii)) = report.reference {
                println!("reference: K_I = {ri:.6}  K_II = {rii:.6}");
            }
            println!("artifacts in {}", report.dir.display());
        }
        Command::SweepRadius(c) => {
            for (k, s) in run::run_sweep_radius(&load(&c)?, c.resume.as_deref())? {
                println!("tip {k}  r/a {:<5} K_I {:.6}  K_II {:.6}", s.radius_ratio, s.k_i, s.k_ii);
            }
        }
        Command::Grow(c) => {
            let case = load(&c)?;
            let crit = criteria(&c.criterion)?;
            for r in run::run_growth_case(&case, &crit, c.resume.as_deref())? {
                println!(
                    "{}: {} steps{}",
                    r.criterion.name(),
                    r.trace.steps.len(),
                    r.trace.stopped.map(|s| format!(" ({s})")).unwrap_or_default()
                );
            }
        }
        Command::CompareTl(c) => {
            let case = load(&c)?;
            let crit = criteria(&c.criterion)?;
            if crit.len() > 1 {
                return Err(CliError::Config("--criterion: compare-tl takes a single criterion".into()));
            }
            let [warm, cold] = run::run_compare_tl(&case, crit.first().copied())?;
            let (tw, tc) = (warm.trace.total_wall_ms(), cold.trace.total_wall_ms());
            println!("with TL: {:.1} s over {} steps", tw / 1e3, warm.trace.steps.len());
            println!("cold:    {:.1} s over {} steps", tc / 1e3, cold.trace.steps.len());
            if tc > 0.0 {
                println!("ratio:   {:.3}", tw / tc);
            }
        }
    }
    Ok(())
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
