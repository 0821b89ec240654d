//! Command-line experiment runner.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::scalar::C;
use crate::suites::{self, QChoice, RandomSuite, SuiteReport};
use config::{parse_complex, ConfigError, ExperimentConfig};
use report::Report;

const PRESETS: &str = "\
Config presets:
  weights (lattice, q, r, s, p): a list of per-point values or \"constant:<c>\"
  q (Q function): \"identity\", \"zero\", a complex constant such as \"0.5-1i\",
                  \"phase:<p>\" for g(z,x) = exp(i p (t(x) - t(z))), or a per-point list
  integrand.kind: \"random\", \"identity\", \"separable\" (with k_ann, k_cre and
                  optional h_ann, h_cre lists)
Experiments for `run`: splitter, adjoint, bound, differential, oracle, commutator,
  refine, wiener

Exit codes: 0 all checks pass, 1 a check failed, 2 config or IO error.";

#[derive(Debug, Parser)]
#[command(name = "qsfock", version, about = "Quantum stochastic integral verification suites", after_help = PRESETS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance applied to every check of the experiment.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Property checks of the splitter, adjoint, bound and differential.
    Check {
        #[command(subcommand)]
        suite: CheckSuite,
    },
    /// g-commutator of Q-adapted creation and annihilation integrals.
    Commutator {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        q: Option<C<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Commutator residual under uniform refinement, N = 2, 4, …, 2^levels.
    Refine {
        #[arg(long)]
        levels: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Vacuum moments of the Wiener operator.
    Wiener {
        #[arg(long)]
        max_moment: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the experiment selected in a config file.
    Run { config: PathBuf, out: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum CheckSuite {
    Splitter(Common),
    Adjoint(Common),
    Bound(Common),
    Differential(Common),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Engine(#[from] crate::error::QsError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

/// What to run, after merging flags over the config.
#[derive(Debug, Clone)]
struct Plan {
    experiment: String,
    config: ExperimentConfig,
    q: Option<C<f64>>,
    levels: Option<usize>,
    max_moment: Option<usize>,
}

const DEFAULT_SEED: u64 = 1;

fn load(path: Option<&Path>) -> Result<ExperimentConfig, ConfigError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn trials(cfg: &ExperimentConfig, default: usize) -> usize {
    cfg.trials.unwrap_or(default)
}

fn random_suite(cfg: &ExperimentConfig, seed: u64, trials_default: usize, tol: f64) -> Result<RandomSuite, CliError> {
    Ok(RandomSuite {
        seed,
        trials: trials(cfg, trials_default),
        tol,
        lattice: cfg.lattice()?,
    })
}

fn execute(plan: &Plan) -> Result<SuiteReport, CliError> {
    let cfg = &plan.config;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let tol = |default: f64| cfg.tol.unwrap_or(default);
    let lattice = cfg.lattice()?;
    Ok(match plan.experiment.as_str() {
        "splitter" => {
            let mut r = suites::splitter_isometry(&random_suite(cfg, seed, 200, tol(1e-12))?)?;
            r.merge(suites::principal_formula(&random_suite(cfg, seed.wrapping_add(1), 100, tol(1e-12))?)?);
            r.merge(suites::unit_norms(&random_suite(cfg, seed.wrapping_add(2), 20, tol(1e-9))?)?);
            r
        }
        "adjoint" => suites::adjoint_identity(&random_suite(cfg, seed, 100, tol(1e-11))?)?,
        "bound" => {
            let w = cfg.bound_weights(lattice.as_ref())?;
            suites::integral_estimate(&random_suite(cfg, seed, 100, tol(1e-9))?, w.as_ref())?
        }
        "differential" => suites::differential(&random_suite(cfg, seed, 100, tol(1e-11))?)?,
        "oracle" => suites::oracle_equivalence(&random_suite(cfg, seed, 100, tol(1e-13))?)?,
        "commutator" => {
            let q = match plan.q {
                Some(q) => QChoice::Constant(q),
                None => cfg.q_choice(lattice.as_ref())?,
            };
            suites::commutator_suite(seed, tol(1e-12), &q, &cfg.kernel_choice(lattice.as_ref())?, lattice)?
        }
        "refine" => {
            let levels = plan
                .levels
                .or(cfg.refine.as_ref().and_then(|r| r.levels))
                .unwrap_or(4);
            if levels == 0 {
                return Err(ConfigError::Invalid("levels must be at least 1".into()).into());
            }
            let q = match plan.q {
                Some(q) => q,
                None => match cfg.q_choice(None)? {
                    QChoice::Constant(c) => c,
                    _ => return Err(ConfigError::Invalid("refine needs a constant q".into()).into()),
                },
            };
            suites::refinement(seed, levels, tol(1e-12), q)?
        }
        "wiener" => {
            let w = cfg.wiener.clone().unwrap_or_default();
            let levels = w.levels.unwrap_or(4);
            let k = plan.max_moment.or(w.max_moment).unwrap_or(4);
            if levels == 0 || k == 0 {
                return Err(ConfigError::Invalid("levels and max_moment must be at least 1".into()).into());
            }
            suites::wiener_moments(levels, k, tol(1e-13))?
        }
        other => return Err(ConfigError::Invalid(format!("unknown experiment {other:?}")).into()),
    })
}

/// Runs a plan and writes its report. Returns the process exit code.
fn run_plan(plan: Plan, out: Option<&Path>) -> i32 {
    let start = Instant::now();
    let suite = match execute(&plan) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let mut echo = serde_json::to_value(&plan.config).unwrap_or(serde_json::Value::Null);
    if let Some(obj) = echo.as_object_mut() {
        obj.retain(|_, v| !v.is_null());
        if let Some(q) = plan.q {
            obj.insert("q".into(), serde_json::json!(format!("{}{:+}i", q.re, q.im)));
        }
        if let Some(l) = plan.levels {
            obj.insert("levels".into(), serde_json::json!(l));
        }
        if let Some(k) = plan.max_moment {
            obj.insert("max_moment".into(), serde_json::json!(k));
        }
    }
    let seed = plan.config.seed.unwrap_or(DEFAULT_SEED);
    let report = Report::new(&plan.experiment, seed, echo, suite, wall);
    if let Err(e) = report.write(out) {
        eprintln!("error: {}", CliError::Io(e));
        return 2;
    }
    if report.passed {
        0
    } else {
        1
    }
}

fn plan_from(experiment: &str, common: &Common) -> Result<Plan, ConfigError> {
    let mut config = load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        config.seed = Some(s);
    }
    if let Some(t) = common.tol {
        config.tol = Some(t);
    }
    config.experiment = Some(experiment.to_string());
    config.validate()?;
    Ok(Plan {
        experiment: experiment.to_string(),
        config,
        q: None,
        levels: None,
        max_moment: None,
    })
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (plan, out) = match &cli.command {
        Command::Check { suite } => {
            let (name, common) = match suite {
                CheckSuite::Splitter(c) => ("splitter", c),
                CheckSuite::Adjoint(c) => ("adjoint", c),
                CheckSuite::Bound(c) => ("bound", c),
                CheckSuite::Differential(c) => ("differential", c),
            };
            (plan_from(name, common), common.out.clone())
        }
        Command::Commutator { q, common } => (
            plan_from("commutator", common).map(|p| Plan { q: *q, ..p }),
            common.out.clone(),
        ),
        Command::Refine { levels, common } => (
            plan_from("refine", common).map(|p| Plan { levels: *levels, ..p }),
            common.out.clone(),
        ),
        Command::Wiener { max_moment, common } => (
            plan_from("wiener", common).map(|p| Plan {
                max_moment: *max_moment,
                ..p
            }),
            common.out.clone(),
        ),
        Command::Run { config, out } => (
            ExperimentConfig::load(config).and_then(|c| match c.experiment.clone() {
                Some(e) => Ok(Plan {
                    experiment: e,
                    config: c,
                    q: None,
                    levels: None,
                    max_moment: None,
                }),
                None => Err(ConfigError::Invalid("config has no experiment".into())),
            }),
            Some(out.clone()),
        ),
    };
    match plan {
        Ok(p) => run_plan(p, out.as_deref()),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
