use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use fastvol_cli::commands::{self, PortfolioArgs, SmallStudyKind, SpdeArgs};
use fastvol_cli::output::Run;
use fastvol_cli::{load_config, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fastvol", version, about = "Fast mean-reverting volatility experiments")]
struct Cli {
    /// Key/value experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the configuration; default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root; each subcommand writes into `<out>/<subcommand>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Allow eps grids below 0.025.
    #[arg(long, global = true)]
    deep: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Survival,
    Density,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Vol,
    Field,
    Loss,
}

#[derive(Subcommand)]
enum Command {
    /// Recurrence, Feller and step-size conditions of the configured model.
    Check,
    /// Long-run moments of h(sigma) and the limit correlations.
    Stationary,
    /// One SPDE solve on one market path.
    Spde {
        /// Grid spacing (default: numerics.dx, else 0.02).
        #[arg(long)]
        dx: Option<f64>,
        /// Time step (default: numerics.dt, else 1e-4).
        #[arg(long)]
        dt: Option<f64>,
        /// Right end of the grid (default: numerics.x_max, else 10); widened if too small.
        #[arg(long)]
        xmax: Option<f64>,
        /// Horizon (default: market.T, else 1).
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Market correlation (default: coeffs.rho1, else 0.5).
        #[arg(long)]
        rho1: Option<f64>,
        /// Constant volatility level; without it h follows the configured model.
        #[arg(long)]
        h: Option<f64>,
        /// Survival tail with absorbing boundary, or the density itself.
        #[arg(long, value_enum, default_value = "survival")]
        form: Form,
        /// Field snapshots written to spde_field.csv.
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
    },
    /// Particle loss curves of the finite portfolio.
    Portfolio {
        /// Write the first K asset and volatility paths of outer draw 0 to paths.bin.
        #[arg(long, value_name = "K")]
        dump_paths: Option<usize>,
        /// Compare particle and SPDE losses (needs a constant h).
        #[arg(long)]
        crossval: bool,
        /// Evaluation times per loss curve.
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Convergence rates under small vol-of-vol scaling.
    RatesSmall {
        #[arg(long = "study", value_enum)]
        studies: Vec<Study>,
    },
    /// Weak convergence (and optionally the strong plateau) under large vol-of-vol scaling.
    WeakLarge {
        #[arg(long)]
        plateau: bool,
    },
    /// Digest of the manifests under the output root.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Stationary => "stationary",
            Command::Spde { .. } => "spde",
            Command::Portfolio { .. } => "portfolio",
            Command::RatesSmall { .. } => "rates-small",
            Command::WeakLarge { .. } => "weak-large",
            Command::Report => "report",
        }
    }
}

fn require(cfg: &Option<ExperimentConfig>, command: &str) -> Result<ExperimentConfig, CliError> {
    cfg.clone()
        .ok_or_else(|| CliError::Validation(vec![format!("{command} needs --config")]))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(vec![format!("--threads: {e}")]))?;
    }
    let cfg = cli.config.as_deref().map(load_config).transpose()?;
    let name = cli.command.name();
    // gates that must fire before any output is produced
    match &cli.command {
        Command::Check | Command::Stationary | Command::Portfolio { .. } | Command::RatesSmall { .. } => {
            require(&cfg, name)?;
        }
        Command::WeakLarge { .. } => commands::weak_large_gate(&require(&cfg, name)?, cli.deep)?,
        Command::Spde { .. } | Command::Report => {}
    }
    let seed = cli.seed.or(cfg.as_ref().and_then(|c| c.seed)).unwrap_or(0);
    let root = cli
        .out
        .clone()
        .or(cfg.as_ref().and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let hash = cfg.as_ref().map(|c| c.hash()).unwrap_or_default();
    let mut run = Run::create(root.join(name), name, hash, seed)?;
    let result = match &cli.command {
        Command::Check => commands::check(cfg.as_ref().unwrap(), &mut run),
        Command::Stationary => commands::stationary(cfg.as_ref().unwrap(), &mut run),
        Command::Spde { dx, dt, xmax, horizon, rho1, h, form, snapshots } => {
            let args = SpdeArgs {
                dx: *dx,
                dt: *dt,
                x_max: *xmax,
                horizon: *horizon,
                rho1: *rho1,
                h: *h,
                density: matches!(form, Form::Density),
                snapshots: *snapshots,
            };
            commands::spde(cfg.as_ref(), &args, &mut run)
        }
        Command::Portfolio { dump_paths, crossval, points } => {
            let args = PortfolioArgs {
                dump_paths: *dump_paths,
                crossval: *crossval,
                points: *points,
            };
            commands::portfolio(cfg.as_ref().unwrap(), &args, &mut run)
        }
        Command::RatesSmall { studies } => {
            let kinds: Vec<SmallStudyKind> = if studies.is_empty() {
                vec![SmallStudyKind::Vol, SmallStudyKind::Field, SmallStudyKind::Loss]
            } else {
                studies
                    .iter()
                    .map(|s| match s {
                        Study::Vol => SmallStudyKind::Vol,
                        Study::Field => SmallStudyKind::Field,
                        Study::Loss => SmallStudyKind::Loss,
                    })
                    .collect()
            };
            commands::rates_small(cfg.as_ref().unwrap(), &kinds, cli.deep, &mut run)
        }
        Command::WeakLarge { plateau } => commands::weak_large(cfg.as_ref().unwrap(), *plateau, cli.deep, &mut run),
        Command::Report => commands::report(&root, &mut run),
    };
    match result {
        Ok(()) => run.finish().map(|_| ()),
        Err(e) => {
            run.abort(&e)?;
            Err(e)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match execute(Cli::parse()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
