//! Cross-run summary: one row per solve run with totals and the cut
//! reduction relative to the first (reference) run.

use std::path::{Path, PathBuf};

use crate::persist::read_solution;
use crate::{exit_code, CliError};

#[derive(Debug)]
struct RunSummary {
    method: String,
    instance: String,
    termination: String,
    iterations: usize,
    total_cuts_generated: u64,
    total_cuts_appended: u64,
    gap: f64,
    best_lb: f64,
    best_ub: f64,
    avg_mp_seconds: f64,
}

/// Parse the numeric iteration log; only the shared leading columns are
/// needed here, so the learning-specific tail is ignored.
fn read_trace(path: &Path) -> Result<(usize, u64, u64, f64), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::new(exit_code::IO, format!("{}: empty trace", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let idx = |name: &str| -> Result<usize, CliError> {
        cols.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::new(
                exit_code::IO,
                format!("{}: missing column {name}", path.display()),
            )
        })
    };
    let generated_at = idx("cuts_generated")?;
    let appended_at = idx("cuts_appended")?;
    let mp_at = idx("mp_seconds")?;
    let mut iterations = 0usize;
    let mut generated = 0u64;
    let mut appended = 0u64;
    let mut mp_total = 0.0f64;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let field = |at: usize| -> Result<f64, CliError> {
            parts
                .get(at)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::new(exit_code::IO, format!("{}: bad row '{line}'", path.display()))
                })
        };
        iterations += 1;
        generated += field(generated_at)? as u64;
        appended += field(appended_at)? as u64;
        mp_total += field(mp_at)?;
    }
    let avg_mp = if iterations > 0 { mp_total / iterations as f64 } else { 0.0 };
    Ok((iterations, generated, appended, avg_mp))
}

fn summarize(run_dir: &Path) -> Result<RunSummary, CliError> {
    let solution = read_solution(&run_dir.join("solution.json"))?;
    let (iterations, generated, appended, avg_mp) = read_trace(&run_dir.join("trace.csv"))?;
    Ok(RunSummary {
        method: solution.method,
        instance: solution.instance,
        termination: solution.termination,
        iterations,
        total_cuts_generated: generated,
        total_cuts_appended: appended,
        gap: solution.gap,
        best_lb: solution.lower_bound,
        best_ub: solution.objective,
        avg_mp_seconds: avg_mp,
    })
}

pub fn run_report(out: &Path, runs: &[PathBuf]) -> Result<(), CliError> {
    if runs.len() < 2 {
        return Err(CliError::new(
            exit_code::USAGE,
            "report needs at least two --run directories (reference first)",
        ));
    }
    std::fs::create_dir_all(out)?;
    let summaries: Vec<RunSummary> = runs.iter().map(|r| summarize(r)).collect::<Result<_, _>>()?;
    let reference_cuts = summaries[0].total_cuts_appended;

    let mut text = String::from(
        "method,instance,termination,iterations,total_cuts_generated,total_cuts_appended,gap,best_lb,best_ub,avg_mp_seconds,cut_reduction_vs_reference\n",
    );
    for s in &summaries {
        let reduction = if reference_cuts > 0 {
            1.0 - s.total_cuts_appended as f64 / reference_cuts as f64
        } else {
            0.0
        };
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.method,
            s.instance,
            s.termination,
            s.iterations,
            s.total_cuts_generated,
            s.total_cuts_appended,
            s.gap,
            s.best_lb,
            s.best_ub,
            s.avg_mp_seconds,
            reduction
        ));
    }
    std::fs::write(out.join("report.csv"), text)?;
    crate::log_info(&format!(
        "report over {} runs written to {}",
        summaries.len(),
        out.join("report.csv").display()
    ));
    Ok(())
}
