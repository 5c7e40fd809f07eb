use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dslc_core::field::{kde_field, two_hotspot_components, PointCloud};
use dslc_core::sim::{load_config, run_experiment, write_results, FieldSource, GridSpec, RunConfig};
use dslc_core::{build_grid, gmm_field, Error, PolicyKind};

#[derive(Parser)]
#[command(name = "dslc", version, about = "Adaptive multi-agent coverage simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed and write per-seed, aggregate and manifest files.
    Run(RunArgs),
    /// Parse and validate a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build a ground-truth field and write it as CSV (vertex,x,y,phi).
    Field(FieldArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured policy.
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Comma-separated master seeds, overriding the configured list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory; falls back to DSLC_OUT_DIR, then the config.
    #[arg(long, env = "DSLC_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["gmm", "kde"])))]
struct FieldArgs {
    /// Grid (and mixture components, if any) come from this config; default is a 21x21 unit grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian-mixture field.
    #[arg(long)]
    gmm: bool,
    /// Kernel density estimate over a CSV point cloud with header x,y.
    #[arg(long, value_name = "CSV")]
    kde: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    bandwidth: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(&config),
        Command::Field(args) => field(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let started = SystemTime::now();
    let mut cfg = load_config(&args.config)?;
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    log::info!(
        "running {} for {} iterations over {} seed(s)",
        cfg.policy,
        cfg.horizon,
        cfg.seeds.len()
    );
    let result = run_experiment(&cfg)?;
    let paths = write_results(&result, &cfg, &cfg.output_dir, started)
        .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
    if let Some(last) = result.aggregate.last() {
        println!(
            "{}: t={} mean cost {:.6} mean cumulative regret {:.6}",
            result.policy, last.t, last.cost, last.cum_regret
        );
    }
    println!("wrote {} and {}", paths.aggregate.display(), paths.manifest.display());
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let cfg = load_config(path)?;
    println!(
        "ok: {} on a {}x{} grid, {} agents, {} seed(s), horizon {}",
        cfg.policy,
        cfg.grid.rows,
        cfg.grid.cols,
        cfg.num_agents,
        cfg.seeds.len(),
        cfg.horizon
    );
    Ok(())
}

fn field(args: FieldArgs) -> Result<()> {
    let cfg: Option<RunConfig> = args.config.as_deref().map(load_config).transpose()?;
    let grid = cfg.as_ref().map_or(
        GridSpec {
            rows: 21,
            cols: 21,
            spacing: 0.05,
        },
        |c| c.grid.clone(),
    );
    let g = build_grid(grid.rows, grid.cols, grid.spacing)?;
    let phi = if let Some(csv) = &args.kde {
        let cloud = PointCloud::read_csv(csv)?;
        kde_field(&g, &cloud, args.bandwidth)?
    } else {
        let components = match cfg.as_ref().map(|c| &c.field) {
            Some(FieldSource::Gmm { components }) => components.clone(),
            _ => two_hotspot_components(),
        };
        gmm_field(&g, &components)?
    };
    phi.write_csv(&g, &args.out)?;
    println!("wrote {} values to {}", phi.len(), args.out.display());
    Ok(())
}
