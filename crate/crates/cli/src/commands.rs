use std::fs;
use std::path::Path;

use serde::Deserialize;

use ptc_core::bench::{render_table, run_experiment, ExperimentConfig, Method};
use ptc_core::dro::{DroConfig, KernelSpec};
use ptc_core::error::PtcError;
use ptc_core::par::{with_jobs, Execution};
use ptc_core::predictors::{PredictorConfig, QuantileConfig};
use ptc_core::problems::{gen_knapsack, gen_shortest_path, gen_toy, save_instance, ProblemKind};

use crate::args::{Cli, Command, GenArgs, RunArgs, TableArgs};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FAILED: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<PtcError> for CliError {
    fn from(e: PtcError) -> Self {
        let code = match e {
            PtcError::Io(_) => EXIT_IO,
            PtcError::ConfigInvalid(_) | PtcError::Format(_) | PtcError::DomainError(_) => EXIT_USAGE,
            _ => EXIT_FAILED,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let jobs = cli.jobs.map(|j| j as usize);
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Run(a) => with_jobs(jobs, || cmd_run(&a)),
        Command::Table(a) => cmd_table(&a),
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("PTC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("PTC_SEED must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let (t, d, n) = (a.t as usize, a.d as usize, a.n as usize);
    let inst = match ProblemKind::from(a.problem) {
        ProblemKind::Toy => gen_toy(t, d, seed),
        ProblemKind::ShortestPath => gen_shortest_path(t, d, seed),
        ProblemKind::Knapsack => gen_knapsack(t, d, n, seed),
    }?;
    let (csv, meta) = save_instance(&inst, &a.out).map_err(|e| CliError::io(&a.out, e))?;
    if inst.clamped_rows > 0 {
        eprintln!("ptc: {} rows had a cost clamped at the positivity floor", inst.clamped_rows);
    }
    eprintln!("ptc: wrote {} and {}", csv.display(), meta.display());
    Ok(())
}

/// Run config file: the flag names plus the model settings that have no flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    problem: Option<ProblemKind>,
    methods: Option<Vec<Method>>,
    alphas: Option<Vec<f64>>,
    #[serde(rename = "T")]
    t: Option<usize>,
    d: Option<usize>,
    n: Option<usize>,
    trials: Option<usize>,
    test_points: Option<usize>,
    var_samples: Option<usize>,
    constraint_sets: Option<usize>,
    seed: Option<u64>,
    predictor: Option<PredictorConfig>,
    quantile: Option<QuantileConfig>,
    quantile_level: Option<f64>,
    calibration_split: Option<f64>,
    dro: Option<DroConfig>,
    kernel: Option<KernelSpec>,
    cvar_samples: Option<usize>,
}

fn build_config(a: &RunArgs) -> CliResult<ExperimentConfig> {
    let file: RunFile = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => RunFile::default(),
    };
    let methods = match &a.methods {
        Some(list) => Some(
            list.iter()
                .map(|s| s.trim().parse::<Method>())
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => file.methods,
    };
    let missing = |flag: &str| CliError::usage(format!("missing required --{flag} (flag or config key)"));
    let problem = a.problem.map(ProblemKind::from).or(file.problem).ok_or_else(|| missing("problem"))?;
    let methods = methods.ok_or_else(|| missing("methods"))?;
    let alphas = a.alphas.clone().or(file.alphas).ok_or_else(|| missing("alphas"))?;
    let t = a.t.or(file.t).ok_or_else(|| missing("T"))?;
    let mut cfg = ExperimentConfig::new(problem, methods, alphas, t);
    macro_rules! take {
        ($field:ident) => {
            if let Some(v) = a.$field.or(file.$field) {
                cfg.$field = v;
            }
        };
    }
    take!(d);
    take!(n);
    take!(trials);
    take!(var_samples);
    cfg.test_points = a.test_points.or(file.test_points);
    cfg.constraint_sets = a.constraint_sets.or(file.constraint_sets);
    cfg.seed = match a.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    if let Some(p) = file.predictor {
        cfg.predictor = p;
    }
    if let Some(q) = file.quantile {
        cfg.quantile = q;
    }
    if let Some(v) = file.quantile_level {
        cfg.quantile_level = v;
    }
    if let Some(v) = file.calibration_split {
        cfg.calibration_split = v;
    }
    if let Some(v) = file.dro {
        cfg.dro = v;
    }
    if let Some(v) = file.kernel {
        cfg.kernel = v;
    }
    if let Some(v) = file.cvar_samples {
        cfg.cvar_samples = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs) -> CliResult<()> {
    let cfg = build_config(a)?;
    let report = run_experiment(&cfg, Execution::Parallel)?;
    let csv = report.to_csv();
    match &a.out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(p, &csv).map_err(|e| CliError::io(p, e))?;
        }
        None => print!("{csv}"),
    }
    for f in &report.failures {
        eprintln!(
            "ptc: {} at alpha={}: {} failed test points, {} failed trials{}",
            f.method,
            f.alpha,
            f.failed_points,
            f.failed_trials,
            f.first_error.as_deref().map(|e| format!(" (first error: {e})")).unwrap_or_default()
        );
    }
    let failed = report.failed_methods();
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|m| m.name()).collect();
        return Err(CliError {
            code: EXIT_FAILED,
            message: format!("method(s) failed on every trial: {}", names.join(", ")),
        });
    }
    Ok(())
}

fn cmd_table(a: &TableArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.report).map_err(|e| CliError::io(&a.report, e))?;
    let table = render_table(&text).map_err(|e| CliError::usage(format!("{}: {e}", a.report.display())))?;
    print!("{table}");
    Ok(())
}
