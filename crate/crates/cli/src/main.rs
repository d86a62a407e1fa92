use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dpdgt::harness::{
    cli_compare, cli_privacy, cli_run, cli_sweep, compare_csv, solve, sweep_csv, write_run_outputs, RunConfig,
    SweepParameter, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "dpdgt",
    version,
    about = "Differentially private dual gradient tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// 14-bus convergence experiment.
    Benchmark,
    /// 14-bus algorithm comparison.
    Comparison,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; a preset is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "benchmark")]
    preset: PresetArg,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration count override.
    #[arg(long)]
    iters: Option<usize>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Retain transmitted observables.
    #[arg(long)]
    audit: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes metrics.csv and summary.json.
    Run(Common),
    /// Monte-Carlo sweep over one schedule parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        parameter: Option<ParamArg>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// DP-DGT against the noisy DDGT baseline on shared noise.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Privacy budget report.
    Privacy(Common),
    /// Centralized optimum.
    Solve(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Theta0,
    Alpha0,
    Q,
}

impl From<ParamArg> for SweepParameter {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Theta0 => SweepParameter::Theta0,
            ParamArg::Alpha0 => SweepParameter::Alpha0,
            ParamArg::Q => SweepParameter::Q,
        }
    }
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => match c.preset {
            PresetArg::Benchmark => RunConfig::benchmark(),
            PresetArg::Comparison => RunConfig::comparison(),
        },
    };
    if let Some(seed) = c.seed {
        cfg.schedules.seed = seed;
    }
    if let Some(n) = c.iters {
        cfg.run.n_iters = n;
    }
    if let Some(out) = &c.out {
        cfg.run.outputs.dir = Some(out.clone());
    }
    cfg.run.audit |= c.audit;
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, name: &str, body: &str) -> Result<()> {
    match &cfg.run.outputs.dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = cli_run(&cfg)?;
            match &cfg.run.outputs.dir {
                Some(dir) => {
                    write_run_outputs(&out, dir)?;
                    eprintln!("wrote {}", dir.display());
                }
                None => print!("{}", out.csv),
            }
            eprintln!("{}", serde_json::to_string_pretty(&out.summary)?);
        }
        Command::Sweep {
            common,
            parameter,
            grid,
            seeds,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = seeds {
                cfg.run.n_seeds = n;
            }
            let mut sweep = cfg.run.sweep.clone().unwrap_or(SweepSpec {
                parameter: SweepParameter::Theta0,
                grid: vec![0.0, 0.02, 0.05, 0.1],
            });
            if let Some(p) = parameter {
                sweep.parameter = p.into();
            }
            if let Some(g) = grid {
                sweep.grid = g;
            }
            if sweep.grid.is_empty() {
                bail!("sweep grid must be nonempty");
            }
            let r = cli_sweep(&cfg, &sweep)?;
            emit(&cfg, "sweep.csv", &sweep_csv(&r)?)?;
            emit(&cfg, "sweep.json", &serde_json::to_string_pretty(&r)?)?;
        }
        Command::Compare { common, seeds } => {
            let mut cfg = load(&common)?;
            if let Some(n) = seeds {
                cfg.run.n_seeds = n;
            }
            let r = cli_compare(&cfg)?;
            emit(&cfg, "compare.csv", &compare_csv(&cfg, &r)?)?;
            emit(&cfg, "compare.json", &serde_json::to_string_pretty(&r)?)?;
        }
        Command::Privacy(c) => {
            let cfg = load(&c)?;
            emit(
                &cfg,
                "privacy.json",
                &serde_json::to_string_pretty(&cli_privacy(&cfg)?)?,
            )?;
        }
        Command::Solve(c) => {
            let cfg = load(&c)?;
            emit(&cfg, "solution.json", &serde_json::to_string_pretty(&solve(&cfg)?)?)?;
        }
    }
    Ok(())
}
