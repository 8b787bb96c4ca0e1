//! Artifact files written by solve runs: the iteration trace, the solution
//! with per-node investments, and the final cut pool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use bendml_core::benders::RunTrace;
use bendml_core::instance::Instance;
use bendml_core::layout::VarKind;
use bendml_core::master::MasterProblem;
use bendml_core::subproblem::InvestmentVector;
use bendml_core::VarLayout;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvestmentEntry {
    pub node: usize,
    pub kind: String,
    pub asset: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema: u32,
    pub produced_by: String,
    pub method: String,
    pub instance: String,
    /// Expected total cost of the plan (millions of currency units).
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub termination: String,
    pub investments: Vec<InvestmentEntry>,
}

impl SolutionFile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        instance: &Instance,
        method: &str,
        investments: &InvestmentVector,
        objective: f64,
        lower_bound: f64,
        gap: f64,
        termination: &str,
        produced_by: &str,
    ) -> SolutionFile {
        let layout = VarLayout::new(instance);
        let mut entries = Vec::new();
        for (index, &value) in investments.values.iter().enumerate() {
            if value.abs() <= 1e-9 {
                continue;
            }
            let (node, kind) = layout.describe(index).expect("investment index");
            let (kind, asset) = match kind {
                VarKind::LineBuild { line } => ("line-build", line),
                VarKind::LineCapacity { line } => ("line-capacity", line),
                VarKind::BesBuild { candidate } => ("bes-build", candidate),
                VarKind::BesPower { candidate } => ("bes-power", candidate),
            };
            entries.push(InvestmentEntry {
                node,
                kind: kind.to_string(),
                asset,
                value,
            });
        }
        SolutionFile {
            schema: 1,
            produced_by: produced_by.to_string(),
            method: method.to_string(),
            instance: instance.name.clone(),
            objective,
            lower_bound,
            gap,
            termination: termination.to_string(),
            investments: entries,
        }
    }
}

pub fn write_solution(path: &Path, file: &SolutionFile) -> Result<(), CliError> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(file).expect("solution serializes"),
    )?;
    Ok(())
}

pub fn read_solution(path: &Path) -> Result<SolutionFile, CliError> {
    let text = std::fs::read_to_string(path)?;
    let file: SolutionFile = serde_json::from_str(&text)
        .map_err(|e| CliError::new(crate::exit_code::IO, format!("{}: {e}", path.display())))?;
    Ok(file)
}

/// Write trace.csv, solution.json, and cut_pool.csv into `out`.
pub fn write_run_artifacts(
    out: &Path,
    instance: &Instance,
    trace: &RunTrace,
    master: &MasterProblem,
    produced_by: &str,
) -> Result<(), CliError> {
    let trace_file = std::fs::File::create(out.join("trace.csv"))?;
    trace.write_csv(trace_file)?;

    let solution = SolutionFile::new(
        instance,
        &trace.method,
        &trace.solution.investments,
        trace.solution.best_ub,
        trace.solution.lb,
        trace.solution.gap,
        trace.termination.as_str(),
        produced_by,
    );
    write_solution(&out.join("solution.json"), &solution)?;

    let pool = std::fs::File::create(out.join("cut_pool.csv"))?;
    master.export_cut_pool_csv(pool)?;
    Ok(())
}
