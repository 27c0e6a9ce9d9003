use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ehrenfest_core::scenario::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ehrenfest", version, about = "Continuity and Ehrenfest checks for driven wave equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario config (TOML with dotted keys)
    config: PathBuf,
    /// Output directory; defaults to `output.dir` or `runs/<scenario>`
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override a config key, e.g. `--override grid.n=512`
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print nothing but errors
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog scenarios whose id contains FILTER
    List { filter: Option<String> },
    /// Run one scenario and its checks
    Run(RunArgs),
    /// Refine a scenario repeatedly and fit the convergence order
    Converge {
        #[command(flatten)]
        args: RunArgs,
        /// Number of resolutions (each halves dx and dt)
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
}

fn out_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    args.out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(&cfg.id))
}

fn run(args: RunArgs) -> ehrenfest_core::Result<bool> {
    let cfg = scenario::load(&args.config, &args.overrides)?;
    let dir = out_dir(&args, &cfg);
    let mut outcome = scenario::run_scenario(&cfg)?;
    outcome.write(&dir)?;
    let report = &outcome.report;
    if !args.quiet {
        for c in &report.checks {
            println!(
                "{:<4} {:<32} metric {:.3e}  tolerance {:.3e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.metric,
                c.tolerance
            );
        }
        println!(
            "{} in {:.2}s -> {}",
            cfg.id,
            report.timing.wall_seconds,
            dir.display()
        );
    }
    Ok(report.all_passed())
}

fn converge(args: RunArgs, levels: u32) -> ehrenfest_core::Result<bool> {
    let cfg = scenario::load(&args.config, &args.overrides)?;
    let dir = out_dir(&args, &cfg);
    let outcome = scenario::converge(&cfg, levels)?;
    outcome.write(&dir)?;
    let r = &outcome.report;
    if !args.quiet {
        for l in &outcome.levels {
            println!("level {}  dx {:.4e}  dt {:.4e}  {} {:.4e}", l.level, l.dx, l.dt, outcome.quantity, l.error);
        }
        println!(
            "{} observed order {:.3} (target {}){}  -> {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.observed_order,
            r.target_order,
            if r.monotone { "" } else { ", non-monotone" },
            dir.display()
        );
    }
    Ok(r.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List { filter } => {
            for e in scenario::list_scenarios(filter.as_deref().unwrap_or("")) {
                println!("{:<28} {:<12} {}", e.id, e.theory, e.summary);
            }
            Ok(true)
        }
        Command::Run(args) => run(args),
        Command::Converge { args, levels } => converge(args, levels),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
