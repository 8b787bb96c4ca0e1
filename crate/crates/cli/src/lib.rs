//! Batch front end: sampling, training, solving, the extensive-form
//! reference, and trace reports. Artifacts land in the `--out` directory
//! and every file records its schema and the producing command.

mod logging;
mod persist;
mod report;
mod train;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use bendml_core::benders::{extensive_form, mbd_solve_detailed, BendersConfig};
use bendml_core::cutml::{derive_thresholds, label_datasets, CpiKind, SamplerConfig, SamplingMetadata};
use bendml_core::forest::{load_ensemble, ClassifierEnsemble, ForestParams};
use bendml_core::instance::{load_instance, Instance};
use bendml_core::mlmbd::{mlmbd_solve_detailed, MlMbdConfig, MlVariant};
use bendml_core::subproblem::InvestmentVector;
use bendml_core::VarLayout;

pub use logging::{log_debug, log_info};
pub use persist::{write_solution, SolutionFile};
pub use report::run_report;

/// Exit codes: each failure class maps to its own value.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INSTANCE: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const TRAINING_GATE: i32 = 4;
    pub const IO: i32 = 5;
    pub const MODEL: i32 = 6;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(exit_code::IO, format!("io: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bendml",
    about = "Multicut Benders decomposition with learned cut filtering for \
             stochastic transmission expansion planning",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct CommonSolveArgs {
    /// Instance file (JSON).
    #[arg(long)]
    pub instance: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    pub out: PathBuf,
    /// Convergence tolerance on (best UB - LB) / LB.
    #[arg(long, default_value_t = 0.01)]
    pub eps_bd: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub n_bd: usize,
    /// Solve the subproblems of an iteration concurrently.
    #[arg(long, default_value_t = false)]
    pub parallel_sp: bool,
}

#[derive(Debug, Args)]
pub struct RfArgs {
    #[arg(long, default_value_t = 100)]
    pub rf_trees: usize,
    #[arg(long, default_value_t = 8)]
    pub rf_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub rf_min_leaf: usize,
}

impl RfArgs {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.rf_trees,
            max_depth: self.rf_depth,
            feature_subset: None,
            min_leaf: self.rf_min_leaf,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Mode {
    /// Plain multicut Benders decomposition.
    SolveMbd {
        #[command(flatten)]
        common: CommonSolveArgs,
    },
    /// Learning-enhanced decomposition with trained classifier ensembles.
    SolveMl {
        #[command(flatten)]
        common: CommonSolveArgs,
        /// Variant: l (lower bound), u (upper bound), or c (combined).
        #[arg(long)]
        variant: String,
        /// Model files; each is tagged with the indicator it serves.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Indicator-switch threshold of the combined variant.
        #[arg(long, default_value_t = 0.002)]
        eps_ub: f64,
        /// Trailing window of the upper-bound movement average.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Sample cut-performance data with the modified decomposition.
    Sample {
        #[command(flatten)]
        common: CommonSolveArgs,
        /// Sampling iterations.
        #[arg(long, default_value_t = 20)]
        n_s: usize,
        /// Number of labeling thresholds per indicator.
        #[arg(long, default_value_t = 10)]
        n_zeta: usize,
    },
    /// Full offline pipeline: sample, label, under-sample, train with the
    /// quality gate, resuming the sampler until the gate passes.
    Train {
        #[command(flatten)]
        common: CommonSolveArgs,
        #[arg(long, default_value_t = 20)]
        n_s: usize,
        #[arg(long, default_value_t = 10)]
        n_zeta: usize,
        /// Held-out ROC-area minimum of the training gate.
        #[arg(long, default_value_t = 0.92)]
        gate_roc: f64,
        /// Held-out PR-area minimum of the training gate.
        #[arg(long, default_value_t = 0.92)]
        gate_pr: f64,
        /// Sampling resumptions before giving up.
        #[arg(long, default_value_t = 5)]
        max_resample: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        rf: RfArgs,
    },
    /// Extensive-form reference optimum (small instances only).
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize solve runs against the first (reference) run.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Solve output directories; the first is the reference.
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
    },
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    load_instance(path)
        .map_err(|e| CliError::new(exit_code::INSTANCE, format!("{}: {e}", path.display())))
}

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Canonical command string recorded in artifacts.
fn produced_by(parts: &[String]) -> String {
    format!("bendml {}", parts.join(" "))
}

fn load_models(paths: &[PathBuf]) -> Result<(Option<ClassifierEnsemble>, Option<ClassifierEnsemble>), CliError> {
    let mut lb = None;
    let mut ub = None;
    for path in paths {
        let ens = load_ensemble(path)
            .map_err(|e| CliError::new(exit_code::MODEL, format!("{}: {e}", path.display())))?;
        match ens.cpi {
            CpiKind::Lb => lb = Some(ens),
            CpiKind::Ub => ub = Some(ens),
        }
    }
    Ok((lb, ub))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.mode {
        Mode::SolveMbd { common } => solve_mbd(common),
        Mode::SolveMl {
            common,
            variant,
            models,
            eps_ub,
            window,
        } => solve_ml(common, &variant, &models, eps_ub, window),
        Mode::Sample { common, n_s, n_zeta } => sample(common, n_s, n_zeta),
        Mode::Train {
            common,
            n_s,
            n_zeta,
            gate_roc,
            gate_pr,
            max_resample,
            seed,
            rf,
        } => train::run_train(train::TrainArgs {
            common,
            n_s,
            n_zeta,
            gate_roc,
            gate_pr,
            max_resample,
            seed,
            params: rf.params(),
        }),
        Mode::Oracle { instance, out } => oracle(&instance, &out),
        Mode::Report { out, runs } => run_report(&out, &runs),
    }
}

fn solve_mbd(common: CommonSolveArgs) -> Result<(), CliError> {
    let instance = read_instance(&common.instance)?;
    ensure_out_dir(&common.out)?;
    let config = BendersConfig {
        eps_bd: common.eps_bd,
        max_iterations: common.n_bd,
        parallel_sp: common.parallel_sp,
        ..BendersConfig::default()
    };
    log_info(&format!(
        "solve-mbd: {} ({} nodes, {} pairs)",
        instance.name,
        instance.n_nodes(),
        instance.subproblem_index().len()
    ));
    let (trace, master) = mbd_solve_detailed(&instance, &config)
        .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
    let produced = produced_by(&[
        "solve-mbd".into(),
        format!("--instance {}", common.instance.display()),
        format!("--eps-bd {}", common.eps_bd),
        format!("--n-bd {}", common.n_bd),
    ]);
    persist::write_run_artifacts(&common.out, &instance, &trace, &master, &produced)?;
    log_info(&format!(
        "{}: {} in {} iterations, best UB {:.6e}, gap {:.4}",
        trace.method,
        trace.termination.as_str(),
        trace.iterations.len(),
        trace.solution.best_ub,
        trace.solution.gap
    ));
    Ok(())
}

fn solve_ml(
    common: CommonSolveArgs,
    variant: &str,
    models: &[PathBuf],
    eps_ub: f64,
    window: usize,
) -> Result<(), CliError> {
    let instance = read_instance(&common.instance)?;
    ensure_out_dir(&common.out)?;
    let variant = match variant.to_ascii_lowercase().as_str() {
        "l" => MlVariant::L,
        "u" => MlVariant::U,
        "c" => MlVariant::C,
        other => {
            return Err(CliError::new(
                exit_code::USAGE,
                format!("unknown variant '{other}' (expected l, u, or c)"),
            ))
        }
    };
    let (lb, ub) = load_models(models)?;
    let mut config = MlMbdConfig::new(variant);
    config.eps_bd = common.eps_bd;
    config.max_iterations = common.n_bd;
    config.parallel_sp = common.parallel_sp;
    config.eps_ub = eps_ub;
    config.window = window;
    config.lb_ensemble = lb;
    config.ub_ensemble = ub;
    log_info(&format!("solve-ml ({}): {}", variant.method_tag(), instance.name));
    let (trace, master) = mlmbd_solve_detailed(&instance, &config).map_err(|e| match e {
        bendml_core::mlmbd::MlMbdError::MissingEnsemble(..)
        | bendml_core::mlmbd::MlMbdError::FeatureWidth { .. } => {
            CliError::new(exit_code::MODEL, e.to_string())
        }
        other => CliError::new(exit_code::SOLVER, other.to_string()),
    })?;
    let produced = produced_by(&[
        format!("solve-ml --variant {}", variant.method_tag()),
        format!("--instance {}", common.instance.display()),
        format!("--eps-bd {}", common.eps_bd),
        format!("--n-bd {}", common.n_bd),
        format!("--eps-ub {eps_ub}"),
        format!("--window {window}"),
    ]);
    persist::write_run_artifacts(&common.out, &instance, &trace, &master, &produced)?;
    log_info(&format!(
        "{}: {} in {} iterations, {} cuts appended, best UB {:.6e}",
        trace.method,
        trace.termination.as_str(),
        trace.iterations.len(),
        trace.total_cuts_appended(),
        trace.solution.best_ub
    ));
    Ok(())
}

fn sample(common: CommonSolveArgs, n_s: usize, n_zeta: usize) -> Result<(), CliError> {
    let instance = read_instance(&common.instance)?;
    ensure_out_dir(&common.out)?;
    let config = SamplerConfig {
        eps_bd: common.eps_bd,
        parallel_sp: common.parallel_sp,
        ..SamplerConfig::default()
    };
    let state = bendml_core::cutml::sample_modified_mbd(&instance, n_s, None, &config)
        .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
    log_info(&format!(
        "sampled {} iterations, {} cut samples ({} with LB metric, {} with UB metric)",
        state.iterations_run,
        state.samples.len(),
        state.finalized_lb_cpms().len(),
        state.finalized_ub_cpms().len()
    ));

    let produced = produced_by(&[
        "sample".into(),
        format!("--instance {}", common.instance.display()),
        format!("--n-s {n_s}"),
        format!("--n-zeta {n_zeta}"),
        format!("--eps-bd {}", common.eps_bd),
    ]);
    let mut ladders = Vec::new();
    for cpi in [CpiKind::Lb, CpiKind::Ub] {
        let cpms: Vec<f64> = state.samples.iter().filter_map(|s| s.cpm(cpi)).collect();
        let ladder = derive_thresholds(&cpms, cpi, n_zeta).map_err(|e| {
            CliError::new(
                exit_code::TRAINING_GATE,
                format!("{e}; increase --n-s and sample again"),
            )
        })?;
        let datasets = label_datasets(&state.samples, &ladder);
        for ds in &datasets {
            let name = format!(
                "theta_{}_{}.csv",
                ds.cpi.as_str().to_ascii_lowercase(),
                ds.threshold_index
            );
            let file = std::fs::File::create(common.out.join(&name))?;
            ds.write_csv(file)?;
        }
        ladders.push(ladder);
    }
    let meta = SamplingMetadata {
        schema: 1,
        instance: instance.name.clone(),
        iterations_sampled: state.iterations_run,
        converged: state.converged,
        lb_thresholds: ladders[0].thresholds.clone(),
        ub_thresholds: ladders[1].thresholds.clone(),
        produced_by: produced,
    };
    std::fs::write(
        common.out.join("sampling_meta.json"),
        serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    Ok(())
}

fn oracle(instance_path: &Path, out: &Path) -> Result<(), CliError> {
    let instance = read_instance(instance_path)?;
    ensure_out_dir(out)?;
    let sol = extensive_form(&instance)
        .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
    let layout = VarLayout::new(&instance);
    let investments = InvestmentVector::from_master_primal(&layout, &sol.primal);
    let produced = produced_by(&[
        "oracle".into(),
        format!("--instance {}", instance_path.display()),
    ]);
    let file = SolutionFile::new(
        &instance,
        "extensive-form",
        &investments,
        sol.objective,
        sol.bound,
        sol.gap,
        "optimal",
        &produced,
    );
    write_solution(&out.join("solution.json"), &file)?;
    log_info(&format!("extensive form optimum {:.6e}", sol.objective));
    Ok(())
}
