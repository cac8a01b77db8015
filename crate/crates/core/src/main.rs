use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use ermrer::config::{log_grid, ExperimentConfig, GridSpec};
use ermrer::generalization::{generalization_error, GeneralizationReport};
use ermrer::gibbs::{sample, solve_ermrer, PosteriorDoc};
use ermrer::io::{fmt_num, table_string};
use ermrer::measure::ReferenceMeasure;
use ermrer::optimality::{analyze, concentration_profile, solve_delta_epsilon, DeltaEpsilonSolution, OptimalityReport};
use ermrer::partition::{cumulant_sweep, cumulants, sweep_csv};
use ermrer::risk::EmpiricalRisk;
use ermrer::verify::{self, Fault, VerifyOptions};
use ermrer::Error;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "ermrer", version, about = "Gibbs posteriors and diagnostics for relative-entropy-regularized ERM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Regularization factor, overriding the config.
    #[arg(long)]
    lambda: Option<f64>,
    /// Log-spaced grid `a:b:steps`, overriding the config.
    #[arg(long)]
    lambda_grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Cumulant curves of the two-model example, one CSV per reference probability.
    FigureExample1 {
        #[command(flatten)]
        common: Common,
        /// Comma-separated probabilities of the zero-risk model.
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
    },
    /// Gibbs posterior and optimality report at one factor.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Cumulants over a grid of factors.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Emit the concentration profile (grid must be decreasing) instead.
        #[arg(long)]
        profile: bool,
    },
    /// Generalization error and its information decomposition.
    GenError {
        #[command(flatten)]
        common: Common,
    },
    /// Randomized identity battery; exit 1 on any failure.
    Verify {
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        /// Comma-separated check names; an empty value runs nothing.
        #[arg(long)]
        only: Option<String>,
        /// Deliberately corrupt one check (`jeffrey-sign`).
        #[arg(long)]
        inject_fault: Option<Fault>,
        /// List check names and exit.
        #[arg(long)]
        list: bool,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Infeasible(String),
    VerifyFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Infeasible { .. } | Error::Indeterminate { .. } | Error::Convergence(_) => {
                Failure::Infeasible(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(l) = common.lambda {
        cfg.lambda = Some(l);
    }
    if let Some(g) = &common.lambda_grid {
        cfg.lambda_grid = Some(GridSpec::Text(g.clone()));
    }
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
            }
            std::fs::write(p, text).map_err(Error::from)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn figure_example1(common: &Common, q: Option<Vec<f64>>) -> CliResult {
    let cfg = load_config(common)?;
    let q_list = q.or(cfg.q_list.clone()).unwrap_or_else(|| vec![0.75, 0.5, 0.25]);
    let grid = match cfg.grid()? {
        Some(g) => g,
        None => log_grid(1e-2, 10.0, 200)?,
    };
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let risk = EmpiricalRisk::new(vec![0.0, 1.0])?;
    for &qv in &q_list {
        if !(qv > 0.0 && qv < 1.0) {
            return Err(Failure::Usage(format!("q = {qv} must lie in (0, 1)")));
        }
        let measure = ReferenceMeasure::probability(vec![qv, 1.0 - qv])?;
        let rows: Vec<Vec<f64>> = grid
            .par_iter()
            .map(|&l| cumulants(&measure, &risk, l).map(|c| vec![c.lambda, c.k1, c.k2, c.k3]))
            .collect::<Result<_, _>>()?;
        let path = dir.join(format!("example1_q{qv}.csv"));
        emit(Some(&path), &table_string(&["lambda", "k1", "k2", "k3"], &rows))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveDoc {
    posterior: PosteriorDoc,
    optimality: OptimalityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_epsilon: Option<DeltaEpsilonSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<usize>>,
}

fn solve(common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let q = cfg.build_measure()?;
    let risk = cfg.build_risk()?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| Failure::Usage("solve needs lambda (config or --lambda)".into()))?;
    let post = solve_ermrer(&q, &risk, lambda)?;
    let delta_epsilon = match (cfg.delta, cfg.epsilon) {
        (Some(d), Some(e)) => Some(solve_delta_epsilon(&q, &risk, d, e)?),
        (None, None) => None,
        _ => return Err(Failure::Usage("delta and epsilon must be given together".into())),
    };
    let samples = match cfg.samples {
        Some(n) => Some(sample(&post, cfg.seed.unwrap_or(0), n)?),
        None => None,
    };
    let doc = SolveDoc {
        posterior: post.to_doc(),
        optimality: analyze(&q, &risk)?,
        delta_epsilon,
        samples,
    };
    emit(cfg.output.as_deref(), &to_json(&doc)?)
}

fn sweep(common: &Common, profile: bool) -> CliResult {
    let cfg = load_config(common)?;
    let q = cfg.build_measure()?;
    let risk = cfg.build_risk()?;
    let grid = cfg
        .grid()?
        .or(cfg.lambda.map(|l| vec![l]))
        .ok_or_else(|| Failure::Usage("sweep needs lambda_grid (config or --lambda-grid)".into()))?;
    let text = if profile {
        concentration_profile(&q, &risk, &grid)?.to_csv()
    } else {
        sweep_csv(&cumulant_sweep(&q, &risk, &grid)?)
    };
    emit(cfg.output.as_deref(), &text)
}

fn gen_error(common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    if cfg.prior.is_none() {
        return Err(Failure::Usage("gen-error needs a [prior] section".into()));
    }
    let q = cfg.build_measure()?;
    let prior = cfg.build_prior()?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| Failure::Usage("gen-error needs lambda (config or --lambda)".into()))?;
    let report: GeneralizationReport = generalization_error(&q, lambda, &prior)?;
    if !report.feasible {
        eprintln!("lambda = {} lies outside the joint feasible set; reporting +inf", fmt_num(lambda));
    }
    emit(cfg.output.as_deref(), &to_json(&report)?)
}

fn run_verify(seed: u64, only: Option<String>, fault: Option<Fault>, list: bool, out: Option<PathBuf>) -> CliResult {
    if list {
        return emit(None, &(verify::check_names().join("\n") + "\n"));
    }
    let only = only.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(String::from)
            .collect::<Vec<_>>()
    });
    if only.as_ref().is_some_and(Vec::is_empty) {
        eprintln!("warning: empty check selection; nothing to verify");
    }
    let report = verify::run(&VerifyOptions { seed, only, fault })?;
    print!("{}", report.table());
    if let Some(p) = out {
        emit(Some(&p), &to_json(&report)?)?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::VerifyFailed)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::FigureExample1 { common, q } => figure_example1(&common, q),
        Command::Solve { common } => solve(&common),
        Command::Sweep { common, profile } => sweep(&common, profile),
        Command::GenError { common } => gen_error(&common),
        Command::Verify {
            seed,
            only,
            inject_fault,
            list,
            out,
        } => run_verify(seed, only, inject_fault, list, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::VerifyFailed) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
    }
}
