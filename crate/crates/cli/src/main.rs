use std::path::PathBuf;
use std::process::ExitCode;

use alpha_heston::experiment::{run, validate, Experiment, ExperimentConfig, RunError};
use alpha_heston::pricing::Underlying;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aheston", version, about = "Experiment runner for the alpha-Heston model")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct GridArgs {
    /// Horizon of the simulation grid.
    #[arg(long)]
    maturity: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Small-jump cutoff of the jump-adapted scheme.
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnderlyingArg {
    Asset,
    Variance,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one joint path of (V, log S).
    Simulate(GridArgs),
    /// Monte Carlo implied volatility smile.
    Smile {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        underlying: Option<UnderlyingArg>,
        #[arg(long)]
        paths: Option<usize>,
        /// Comma-separated log-strikes.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        k_grid: Option<Vec<f64>>,
    },
    /// Tail probabilities of V and -log S against their asymptotics.
    Tails {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
    },
    /// Cluster counts and durations over an (alpha, y) grid.
    Clusters {
        #[arg(long, value_delimiter = ',')]
        y: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n_reps: Option<usize>,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Solve the generalized Riccati equations at the configured points.
    Riccati {
        #[arg(long)]
        maturity: Option<f64>,
    },
    /// Map pricing-measure parameters to physical ones.
    Measure {
        #[arg(long, allow_hyphen_values = true)]
        eta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eta_bar: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Poisson limit of large-jump counts.
    PoissonLimit {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n_reps: Option<usize>,
    },
    /// Report every violated precondition without running anything.
    Validate {
        /// Also check the options of this experiment.
        #[arg(long, value_enum)]
        experiment: Option<ExperimentArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Simulate,
    Smile,
    Tails,
    Clusters,
    Riccati,
    Measure,
    PoissonLimit,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Simulate => Experiment::Simulate,
            ExperimentArg::Smile => Experiment::Smile,
            ExperimentArg::Tails => Experiment::Tails,
            ExperimentArg::Clusters => Experiment::Clusters,
            ExperimentArg::Riccati => Experiment::Riccati,
            ExperimentArg::Measure => Experiment::Measure,
            ExperimentArg::PoissonLimit => Experiment::PoissonLimit,
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_grid(cfg: &mut ExperimentConfig, g: GridArgs) {
    set(&mut cfg.grid.t_end, g.maturity);
    set(&mut cfg.grid.n_steps, g.steps);
    set(&mut cfg.grid.small_jump_cutoff, g.cutoff);
}

/// Applies overrides and returns the experiment to run (`None` for `validate`).
fn apply(cfg: &mut ExperimentConfig, cmd: Command) -> (Option<Experiment>, Option<Experiment>) {
    match cmd {
        Command::Simulate(g) => {
            apply_grid(cfg, g);
            (Some(Experiment::Simulate), None)
        }
        Command::Smile { grid, underlying, paths, k_grid } => {
            apply_grid(cfg, grid);
            set(
                &mut cfg.smile.underlying,
                underlying.map(|u| match u {
                    UnderlyingArg::Asset => Underlying::Asset,
                    UnderlyingArg::Variance => Underlying::Variance,
                }),
            );
            set(&mut cfg.smile.n_paths, paths);
            set(&mut cfg.smile.k_grid, k_grid);
            (Some(Experiment::Smile), None)
        }
        Command::Tails { grid, paths, u_grid } => {
            apply_grid(cfg, grid);
            set(&mut cfg.tails.n_paths, paths);
            set(&mut cfg.tails.u_grid, u_grid);
            (Some(Experiment::Tails), None)
        }
        Command::Clusters { y, alphas, t, n_reps, cutoff } => {
            set(&mut cfg.clusters.y_grid, y);
            set(&mut cfg.clusters.alphas, alphas);
            set(&mut cfg.clusters.t, t);
            set(&mut cfg.clusters.n_reps, n_reps);
            set(&mut cfg.grid.small_jump_cutoff, cutoff);
            (Some(Experiment::Clusters), None)
        }
        Command::Riccati { maturity } => {
            set(&mut cfg.riccati.maturity, maturity);
            (Some(Experiment::Riccati), None)
        }
        Command::Measure { eta, eta_bar, theta } => {
            set(&mut cfg.measure.eta, eta);
            set(&mut cfg.measure.eta_bar, eta_bar);
            set(&mut cfg.measure.theta, theta);
            (Some(Experiment::Measure), None)
        }
        Command::PoissonLimit { n, c, t, n_reps } => {
            set(&mut cfg.poisson_limit.n, n);
            set(&mut cfg.poisson_limit.c, c);
            set(&mut cfg.poisson_limit.t, t);
            set(&mut cfg.poisson_limit.n_reps, n_reps);
            (Some(Experiment::PoissonLimit), None)
        }
        Command::Validate { experiment } => (None, experiment.map(Into::into)),
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    let (experiment, check) = apply(&mut cfg, cli.command);

    let Some(experiment) = experiment else {
        let v = validate(&cfg, check);
        println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
        return if v.is_ok() { ExitCode::SUCCESS } else { ExitCode::from(2) };
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    };
    let v = validate(&cfg, Some(experiment));
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    match pool.install(|| run(&cfg, experiment, &cli.out)) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string_pretty(&manifest).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
