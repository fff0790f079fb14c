use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mlp_cli::{check_experiment, find, parse_overrides, registry, run_experiment, write_outputs, ConfigFile, Context};
use mlp_core::complexity::{optimal_coarsening, v_cycle_steps};
use mlp_core::parareal::cycle_plan;

#[derive(Parser)]
#[command(name = "mlp", about = "Multi-level Parareal experiments", version)]
struct Cli {
    /// Sectioned key = value file with per-experiment parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for cached reference solutions (default: $MLP_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run {
        id: String,
        /// Parameter override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Use the full-size parameter sets.
        #[arg(long)]
        heavy: bool,
    },
    /// Run experiments with their defaults and compare with expectations.
    Check {
        /// Experiment id or `all`.
        id: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        heavy: bool,
    },
    /// Print the cycle plan of every configuration an experiment uses.
    Plan {
        id: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Serial steps of a uniform V-cycle and the optimal coarsening factor.
    Complexity {
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        coarsen: u64,
        #[arg(long)]
        fine_steps: u64,
    },
    /// List the registered experiments.
    List,
}

fn context(cli: &Cli, workers: usize, heavy: bool) -> Result<Context> {
    let mut ctx = Context { workers, heavy, ..Context::default() };
    if let Some(dir) = &cli.cache_dir {
        ctx.cache_dir = Some(dir.clone());
    }
    if let Some(path) = &cli.config {
        ctx.config = Some(ConfigFile::load(path)?);
    }
    Ok(ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { id, set, workers, out, heavy } => {
            let ctx = context(&cli, *workers, *heavy)?;
            let (params, output) = run_experiment(id, &parse_overrides(set)?, &ctx)?;
            print!("{}", output.table.to_csv()?);
            for path in write_outputs(out, id, &params, &output)? {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Check { id, workers, heavy } => {
            let ctx = context(&cli, *workers, *heavy)?;
            let ids: Vec<&str> = if id == "all" {
                // the shallow water runs are long even in their reduced form
                registry().iter().map(|e| e.id).filter(|id| *heavy || !id.starts_with("rswe")).collect()
            } else {
                vec![find(id)?.id]
            };
            let mut failed = 0;
            for id in ids {
                for line in check_experiment(id, &ctx)? {
                    failed += usize::from(!line.passed);
                    println!("{id}: {line}");
                }
            }
            if failed > 0 {
                println!("{failed} check(s) failed");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Plan { id, set } => {
            let def = find(id)?;
            let ctx = context(&cli, 1, false)?;
            let params = def.params(&ctx, &parse_overrides(set)?)?;
            for (label, cfg) in (def.configs)(&params)? {
                let steps: Vec<String> = cycle_plan(&cfg).iter().map(|s| s.to_string()).collect();
                println!("{label}: {}", steps.join(", "));
            }
        }
        Command::Complexity { levels, coarsen, fine_steps } => {
            let steps = v_cycle_steps(*levels, *coarsen, *fine_steps)?;
            println!("serial steps: {steps}");
            if *levels >= 2 {
                let o = optimal_coarsening(*levels, *fine_steps as f64)?;
                println!("N_opt = {:.6} (cost {:.3})", o.n_opt, o.cost_opt);
                println!("N = {}: cost {:.3}", o.lower.0, o.lower.1);
                println!("N = {}: cost {:.3}", o.upper.0, o.upper.1);
            }
        }
        Command::List => {
            for e in registry() {
                println!("{:<20} {}", e.id, e.summary);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
