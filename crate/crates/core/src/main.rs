use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modelspace::experiments::{
    cmd_counterexample53, cmd_hs_crosscheck, cmd_pw_corner, cmd_whitney_report, ExperimentConfig, Outcome,
};
use modelspace::Result;

#[derive(Parser)]
#[command(name = "modelspace", version, about = "Schatten-class experiments for composition operators on model spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corner examples: Hardy and model-space integrals around p* = 2α/(1−α).
    PwCorner(Common),
    /// Series terms and the lower integral test for the tangential cluster.
    Counterexample53(Common),
    /// Hilbert–Schmidt norm by spectral, pullback and Stanton routes.
    HsCrosscheck(Common),
    /// Level domain, Whitney decomposition and Luecking vs integral criteria.
    WhitneyReport(Common),
}

#[derive(Args)]
struct Common {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output root; results go to <out>/<experiment>/
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// overrides run.seed
    #[arg(long)]
    seed: Option<u64>,
    /// overrides run.tol, the shell quadrature relative tolerance
    #[arg(long)]
    tol: Option<f64>,
}

fn run(name: &str, c: &Common, f: fn(&ExperimentConfig, &std::path::Path) -> Result<Outcome>) -> Result<Outcome> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(name, p)?,
        None => ExperimentConfig::new(name),
    };
    if let Some(s) = c.seed {
        cfg.set("run.seed", s);
    }
    if let Some(t) = c.tol {
        cfg.set("run.tol", format!("{t:e}"));
    }
    f(&cfg, &c.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::PwCorner(c) => run("pw-corner", c, cmd_pw_corner),
        Command::Counterexample53(c) => run("counterexample53", c, cmd_counterexample53),
        Command::HsCrosscheck(c) => run("hs-crosscheck", c, cmd_hs_crosscheck),
        Command::WhitneyReport(c) => run("whitney-report", c, cmd_whitney_report),
    };
    match res {
        Ok(o) => {
            println!("{}", serde_json::to_string_pretty(&o.summary).unwrap_or_default());
            println!("wrote {}", o.dir.display());
            if o.completed {
                ExitCode::SUCCESS
            } else {
                eprintln!("some runs failed; see summary.json");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
