use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use krf_harness::{acceptance, run_scenario, run_sweep, ScenarioConfig};

#[derive(Parser)]
#[command(name = "krf", version, about = "Kähler-Ricci flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        config: PathBuf,
        /// Output root; defaults to the config's `output_dir`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the grid node count.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several scenarios concurrently.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance suite.
    Verify {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn load(path: &PathBuf, resolution: Option<usize>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(r) = resolution {
        cfg = cfg.with_resolution(r)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let ok = match cli.command {
        Command::Run { config, out, resolution, seed } => {
            let cfg = load(&config, resolution, seed)?;
            let root = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let a = run_scenario(&cfg, &root).with_context(|| format!("scenario {}", cfg.name))?;
            let v = &a.summary.verdict;
            println!("{}: {:?}", cfg.name, v.classification);
            if let Some(c) = &v.cause {
                println!("  cause: {c}");
            }
            println!("  artifacts: {}", a.dir.display());
            a.summary.checks_pass
        }
        Command::Sweep { configs, out, resolution, seed } => {
            let cfgs = configs.iter().map(|p| load(p, resolution, seed)).collect::<Result<Vec<_>>>()?;
            let rows = run_sweep(&cfgs, &out)?;
            for r in &rows {
                match (&r.classification, &r.error) {
                    (Some(c), _) => println!("{}: {c:?}", r.name),
                    (None, Some(e)) => println!("{}: error: {e}", r.name),
                    _ => {}
                }
            }
            rows.iter().all(|r| r.checks_pass)
        }
        Command::Verify { only } => {
            let mut ok = true;
            for &(id, ..) in &acceptance::CRITERIA {
                if !only.is_empty() && !only.contains(&id) {
                    continue;
                }
                let c = acceptance::run_criterion(id).expect("listed criterion");
                println!("{c}");
                ok &= c.passed;
            }
            ok
        }
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
