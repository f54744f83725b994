mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, Experiment, ExperimentConfig};
use serde_json::{Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Reproducible experiments on randomly perforated domains.
#[derive(Parser)]
#[command(name = "perfdom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts and manifest.
    Run(RunArgs),
}

#[derive(Args)]
#[command(subcommand_required = false)]
struct RunArgs {
    /// JSON config; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    experiment: Option<ExpCmd>,
}

#[derive(Subcommand)]
enum ExpCmd {
    /// Marked Poisson sample and its admitted holes.
    Sample {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Cluster boxes and their verified guarantees.
    Cluster {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Single ε (shorthand for a one-point ladder).
        #[arg(long, conflicts_with = "ladder")]
        eps: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Monte Carlo cube-occupancy probabilities against their bound.
    Occupancy {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long)]
        confidence: Option<f64>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        any_cube: bool,
    },
    /// Monte Carlo probability of a close pair of centers.
    Separation {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long)]
        confidence: Option<f64>,
    },
    /// Rescaled point counts and radius moments against their limits.
    Slln {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        moment: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// Witness constants of John paths in a two-ball carved box.
    John {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// Operator norm of the restricted inverse divergence across ε.
    BogovskiiSweep {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        power_steps: Option<usize>,
        #[arg(long)]
        cells_per_radius: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// W^{1,r} distance of the hole cut-off from 1 across ε.
    CutoffRate {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long)]
        cells_per_ramp: Option<f64>,
    },
}

struct Overrides(Map<String, Value>);

impl Overrides {
    fn set<T: Into<Value>>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), v.into());
        }
        self
    }
}

impl ExpCmd {
    fn split(self) -> (Experiment, Map<String, Value>) {
        let mut o = Overrides(Map::new());
        let e = match self {
            ExpCmd::Sample { dim, lambda, eps, alpha } => {
                o.set("dim", dim).set("lambda", lambda).set("eps", eps).set("alpha", alpha);
                Experiment::Sample
            }
            ExpCmd::Cluster { dim, lambda, eps, ladder, alpha, kappa } => {
                o.set("dim", dim).set("lambda", lambda).set("eps_ladder", eps.map(|e| vec![e]).or(ladder));
                o.set("alpha", alpha).set("kappa", kappa);
                Experiment::Cluster
            }
            ExpCmd::Occupancy { dim, lambda, delta, trials, ladder, confidence, n1, any_cube } => {
                o.set("dim", dim).set("lambda", lambda).set("delta", delta).set("trials", trials);
                o.set("eps_ladder", ladder).set("confidence", confidence).set("n1", n1);
                o.set("any_cube", any_cube.then_some(true));
                Experiment::Occupancy
            }
            ExpCmd::Separation { dim, lambda, kappa, tau, trials, ladder, confidence } => {
                o.set("dim", dim).set("lambda", lambda).set("kappa", kappa).set("tau", tau);
                o.set("trials", trials).set("eps_ladder", ladder).set("confidence", confidence);
                Experiment::Separation
            }
            ExpCmd::Slln { dim, lambda, moment, trials, ladder } => {
                o.set("dim", dim).set("lambda", lambda).set("moment", moment).set("trials", trials).set("eps_ladder", ladder);
                Experiment::Slln
            }
            ExpCmd::John { dim, alpha, kappa, n, samples, ladder } => {
                o.set("dim", dim).set("alpha", alpha).set("kappa", kappa).set("n", n);
                o.set("samples", samples).set("eps_ladder", ladder);
                Experiment::John
            }
            ExpCmd::BogovskiiSweep { alpha, q, probes, power_steps, cells_per_radius, ladder } => {
                o.set("alpha", alpha).set("q", q).set("probes", probes).set("power_steps", power_steps);
                o.set("cells_per_radius", cells_per_radius).set("eps_ladder", ladder);
                Experiment::BogovskiiSweep
            }
            ExpCmd::CutoffRate { dim, lambda, alpha, r, ladder, cells_per_ramp } => {
                o.set("dim", dim).set("lambda", lambda).set("alpha", alpha).set("r", r);
                o.set("eps_ladder", ladder).set("cells_per_ramp", cells_per_ramp);
                Experiment::CutoffRate
            }
        };
        (e, o.0)
    }
}

/// Merges the config file (if any) with command-line overrides.
fn assemble(args: RunArgs) -> Result<(ExperimentConfig, Option<usize>), ConfigError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Malformed(format!("{}: {e}", path.display())))?;
            Some(ExperimentConfig::from_json(&text)?)
        }
        None => None,
    };
    let flags = args.experiment.map(ExpCmd::split);
    let mut cfg = match (file, &flags) {
        (Some(c), Some((e, _))) if c.experiment != *e => {
            return Err(ConfigError::Invalid(format!(
                "config is for `{}` but `{}` was requested",
                c.experiment.name(),
                e.name()
            )))
        }
        (Some(c), _) => c,
        (None, Some((e, _))) => ExperimentConfig::new(*e),
        (None, None) => return Err(ConfigError::Invalid("name an experiment or pass --config".into())),
    };
    if let Some((_, params)) = flags {
        cfg.params.extend(params);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_dir = Some(o);
    }
    if args.workers == Some(0) {
        return Err(ConfigError::Invalid("--workers must be positive".into()));
    }
    Ok((cfg, args.workers))
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let (cfg, workers) = match assemble(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let echo = cfg.resolved_echo(&resolved);
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("perfdom-out").join(cfg.experiment.name()));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let t0 = Instant::now();
    let outcome = match pool.install(|| run::execute(&cfg, &resolved)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cfg.experiment.name());
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = run::write_outputs(&dir, &echo, &outcome, t0.elapsed().as_secs_f64()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    for c in &outcome.checks {
        eprintln!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    println!("{}", dir.display());
    if outcome.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
