//! Multicut Benders decomposition driver and the extensive-form oracle.
//!
//! The loop in [`run_decomposition`] is shared with the learning-enhanced
//! variants: a [`CutSelector`] decides which of the previous iteration's
//! cuts reach the master. The plain driver appends everything.

use std::io::Write;
use std::time::Instant;

use thiserror::Error;

use crate::instance::Instance;
use crate::layout::VarLayout;
use crate::linsolve::{solve_mip_with_budget, MipSolution, MipStatus, MixedIntegerProgram};
use crate::master::{self, MasterProblem};
use crate::subproblem::{build_operation_lp, solve_subproblem, CutData, InvestmentVector, OperationLp};
use crate::tol;

#[derive(Debug, Error)]
pub enum BendersError {
    #[error(transparent)]
    Master(#[from] crate::master::MasterError),
    #[error(transparent)]
    Subproblem(#[from] crate::subproblem::SubproblemError),
    #[error("instance too large for the extensive form: {0}")]
    SizeGuard(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    IterationLimit,
    Stall,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::IterationLimit => "iteration limit",
            TerminationReason::Stall => "stall",
        }
    }
}

/// Per-iteration bookkeeping. The three optional fields are populated by the
/// learning-enhanced drivers only.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub lb: f64,
    pub ub: f64,
    pub best_ub: f64,
    pub gap: f64,
    pub cuts_generated: usize,
    pub cuts_appended: usize,
    pub mp_seconds: f64,
    pub sp_seconds: f64,
    /// Classifier index that selected cuts this iteration; -1 on fallback.
    pub cascade_index: Option<i32>,
    /// Active cut-performance indicator ("LB" or "UB").
    pub cpi_active: Option<&'static str>,
    /// Trailing mean of the per-iteration upper-bound improvement metric.
    pub delta_ub: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalSolution {
    pub investments: InvestmentVector,
    pub best_ub: f64,
    pub lb: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub instance: String,
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub solution: FinalSolution,
}

impl RunTrace {
    pub fn total_cuts_appended(&self) -> usize {
        self.iterations.iter().map(|r| r.cuts_appended).sum()
    }

    pub fn total_cuts_generated(&self) -> usize {
        self.iterations.iter().map(|r| r.cuts_generated).sum()
    }

    /// Equality of everything a deterministic re-run must reproduce; the
    /// wall-clock columns are excluded.
    pub fn same_trajectory(&self, other: &RunTrace) -> bool {
        self.termination == other.termination
            && self.solution == other.solution
            && self.iterations.len() == other.iterations.len()
            && self.iterations.iter().zip(&other.iterations).all(|(a, b)| {
                a.k == b.k
                    && a.lb.to_bits() == b.lb.to_bits()
                    && a.ub.to_bits() == b.ub.to_bits()
                    && a.best_ub.to_bits() == b.best_ub.to_bits()
                    && a.gap.to_bits() == b.gap.to_bits()
                    && a.cuts_generated == b.cuts_generated
                    && a.cuts_appended == b.cuts_appended
            })
    }

    /// Write the iteration log as CSV. Learning-specific columns appear only
    /// when the method produced them.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let ml = self.iterations.iter().any(|r| r.cpi_active.is_some());
        if ml {
            writeln!(
                w,
                "k,lb,ub,best_ub,gap,cuts_generated,cuts_appended,mp_seconds,sp_seconds,cascade_index,cpi_active,delta_ub"
            )?;
        } else {
            writeln!(
                w,
                "k,lb,ub,best_ub,gap,cuts_generated,cuts_appended,mp_seconds,sp_seconds"
            )?;
        }
        for r in &self.iterations {
            write!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                r.lb,
                r.ub,
                r.best_ub,
                r.gap,
                r.cuts_generated,
                r.cuts_appended,
                r.mp_seconds,
                r.sp_seconds
            )?;
            if ml {
                let idx = r.cascade_index.map(|i| i.to_string()).unwrap_or_default();
                let cpi = r.cpi_active.unwrap_or("");
                let delta = r.delta_ub.map(|d| d.to_string()).unwrap_or_default();
                write!(w, ",{idx},{cpi},{delta}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BendersConfig {
    /// Relative convergence tolerance on (best UB - LB) / LB.
    pub eps_bd: f64,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Relative gap for master solves.
    pub mip_gap: f64,
    /// Solve the subproblems of one iteration concurrently.
    pub parallel_sp: bool,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            eps_bd: 0.01,
            max_iterations: 1000,
            mip_gap: tol::MIP_GAP,
            parallel_sp: false,
        }
    }
}

/// Relative optimality gap; defined only once the lower bound is positive.
pub fn relative_gap(best_ub: f64, lb: f64) -> f64 {
    if lb > 0.0 {
        (best_ub - lb) / lb
    } else {
        f64::INFINITY
    }
}

/// Expected total cost of the plan `x` given solved subproblem objectives:
/// weighted investment cost plus probability-weighted operating costs.
pub fn upper_bound(
    instance: &Instance,
    layout: &VarLayout,
    x: &InvestmentVector,
    sp_objectives: &[((usize, usize), f64)],
) -> f64 {
    let mut total = master::investment_cost(instance, layout, x);
    for &((node, _block), psi) in sp_objectives {
        let pi = instance.node(node).expect("node").probability;
        total += pi * psi;
    }
    total
}

/// Everything the cut selector sees about one iteration's fresh cuts.
pub struct SelectionContext<'a> {
    pub iteration: usize,
    pub cuts: &'a [CutData],
    /// Feature vectors aligned with `cuts`, when the driver computes them.
    pub lb_features: &'a [Vec<f64>],
    pub ub_features: &'a [Vec<f64>],
    /// Per-iteration upper-bound improvement metric history (iterations 2..).
    pub cpm_ub_history: &'a [f64],
}

/// Outcome of one selection: which cuts to append plus log fields.
pub struct Selection {
    pub keep: Vec<usize>,
    pub cascade_index: Option<i32>,
    pub cpi_active: Option<&'static str>,
    pub delta_ub: Option<f64>,
}

pub trait CutSelector {
    /// Whether the driver must compute classification features.
    fn wants_features(&self) -> bool;
    fn select(&mut self, ctx: &SelectionContext<'_>) -> Selection;
}

/// Plain multicut behavior: append every generated cut.
pub struct AppendAll;

impl CutSelector for AppendAll {
    fn wants_features(&self) -> bool {
        false
    }
    fn select(&mut self, ctx: &SelectionContext<'_>) -> Selection {
        Selection {
            keep: (0..ctx.cuts.len()).collect(),
            cascade_index: None,
            cpi_active: None,
            delta_ub: None,
        }
    }
}

/// Snapshot of the previous iteration used for delta features.
pub struct PrevIteration {
    pub x: InvestmentVector,
    /// Cut of each (node, block) pair, in layout order.
    pub cuts: Vec<CutData>,
}

/// Feature extraction for one fresh cut, shared by the drivers and sampler.
///
/// Lower-bound variant: iteration, cut violation, change in subproblem
/// objective, dual-vector distance, plan distance over continuous
/// components, change in curtailment. Upper-bound variant: iteration, cut
/// violation, subproblem objective, plan distance over all components,
/// curtailment. Delta features are zero when the pair has no prior record.
pub fn extract_features(
    layout: &VarLayout,
    iteration: usize,
    cut: &CutData,
    op: &OperationLp,
    x: &InvestmentVector,
    alpha: f64,
    prev: Option<&PrevIteration>,
) -> (Vec<f64>, Vec<f64>) {
    // Cut violation: lambda . (h - F x) - alpha, evaluated literally from
    // the duals and the numeric right-hand sides of the generating solve.
    let lp_at_x = op.at_investment(x);
    let lambda_rhs: f64 = cut
        .duals
        .iter()
        .zip(lp_at_x.rows.iter())
        .map(|(l, row)| l * row.rhs)
        .sum();
    let violation = lambda_rhs - alpha;

    let pair_pos = layout
        .pairs
        .iter()
        .position(|&p| p == (cut.node, cut.block))
        .expect("pair");
    let (d_sp, d_dual, d_curt, d_x_cont, d_x_all) = match prev {
        Some(prev) => {
            let old = &prev.cuts[pair_pos];
            let d_sp = cut.sp_objective - old.sp_objective;
            let d_dual = cut
                .duals
                .iter()
                .zip(&old.duals)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let d_curt = cut.curtailment - old.curtailment;
            let cont = layout.continuous_investment();
            let d_x_cont: f64 = cont.iter().map(|&j| (x.get(j) - prev.x.get(j)).abs()).sum();
            let d_x_all: f64 = (0..layout.n_investment)
                .map(|j| (x.get(j) - prev.x.get(j)).abs())
                .sum();
            (d_sp, d_dual, d_curt, d_x_cont, d_x_all)
        }
        None => (0.0, 0.0, 0.0, 0.0, 0.0),
    };

    let k = iteration as f64;
    let lb_features = vec![k, violation, d_sp, d_dual, d_x_cont, d_curt];
    let ub_features = vec![k, violation, cut.sp_objective, d_x_all, cut.curtailment];
    (lb_features, ub_features)
}

/// Extra per-cut quantities that were evaluated and rejected during feature
/// selection; kept computable for offline analysis but never part of the
/// default vectors.
pub fn debug_features(layout: &VarLayout, cut: &CutData) -> Vec<(&'static str, f64)> {
    let origin = layout
        .pairs
        .iter()
        .position(|&p| p == (cut.node, cut.block))
        .expect("pair") as f64;
    let dual_norm = cut.duals.iter().map(|d| d * d).sum::<f64>().sqrt();
    vec![
        ("cut_origin", origin),
        ("dual_norm", dual_norm),
        ("sp_objective", cut.sp_objective),
        ("curtailment", cut.curtailment),
    ]
}

/// Names of the lower-bound-variant features, in vector order.
pub const LB_FEATURE_NAMES: [&str; 6] = [
    "iteration",
    "cut_violation",
    "delta_sp_objective",
    "delta_dual_norm",
    "delta_x_l1",
    "delta_curtailment",
];

/// Names of the upper-bound-variant features, in vector order.
pub const UB_FEATURE_NAMES: [&str; 5] = [
    "iteration",
    "cut_violation",
    "sp_objective",
    "delta_x_l1",
    "curtailment",
];

/// Solve all subproblems at `x`, in pair order.
pub fn solve_all_subproblems(
    ops: &[OperationLp],
    x: &InvestmentVector,
    iteration: usize,
    parallel: bool,
) -> Result<Vec<CutData>, crate::subproblem::SubproblemError> {
    if parallel {
        use rayon::prelude::*;
        ops.par_iter()
            .map(|op| solve_subproblem(op, x, iteration))
            .collect()
    } else {
        ops.iter().map(|op| solve_subproblem(op, x, iteration)).collect()
    }
}

/// Shared decomposition loop. `method` tags the trace; the returned master
/// carries the final cut pool.
pub(crate) fn run_decomposition(
    instance: &Instance,
    config: &BendersConfig,
    selector: &mut dyn CutSelector,
    method: &str,
) -> Result<(RunTrace, MasterProblem), BendersError> {
    let mut mp = master::build_master(instance);
    mp.mip_gap = config.mip_gap;
    let layout = mp.layout.clone();
    let ops: Vec<OperationLp> = layout
        .pairs
        .iter()
        .map(|&(m, b)| build_operation_lp(instance, &layout, m, b))
        .collect();

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut best_ub = f64::INFINITY;
    let mut best_x: Option<InvestmentVector> = None;
    let mut lb = 0.0f64;
    let mut prev: Option<PrevIteration> = None;
    let mut pending: Vec<CutData> = Vec::new();
    let mut pending_lb_features: Vec<Vec<f64>> = Vec::new();
    let mut pending_ub_features: Vec<Vec<f64>> = Vec::new();
    let mut cpm_ub_history: Vec<f64> = Vec::new();
    let mut prev_ub: Option<f64> = None;
    let mut termination = TerminationReason::IterationLimit;

    let mut k = 0usize;
    while k < config.max_iterations {
        k += 1;

        // Select and append the previous iteration's cuts.
        let (appended, selection) = if pending.is_empty() {
            (0, None)
        } else {
            let ctx = SelectionContext {
                iteration: k,
                cuts: &pending,
                lb_features: &pending_lb_features,
                ub_features: &pending_ub_features,
                cpm_ub_history: &cpm_ub_history,
            };
            let mut selection = selector.select(&ctx);
            let kept: Vec<CutData> =
                selection.keep.iter().map(|&i| pending[i].clone()).collect();
            let mut appended = mp.append_cuts(&kept);
            if appended == 0 && kept.len() < pending.len() {
                // Every selected cut was already in the pool: fall back to
                // the full multicut step so the iteration appends something.
                appended = mp.append_cuts(&pending);
                selection.cascade_index = selection.cascade_index.map(|_| -1);
                selection.keep = (0..pending.len()).collect();
            }
            (appended, Some(selection))
        };
        if k > 1 && appended == 0 {
            // Master unchanged even after the fallback: no progress is
            // possible, which only happens once the pool is saturated.
            termination = TerminationReason::Stall;
            break;
        }

        let mp_start = Instant::now();
        let master_sol = mp.solve()?;
        let mp_seconds = mp_start.elapsed().as_secs_f64();
        lb = master_sol.bound;

        let sp_start = Instant::now();
        let cuts = solve_all_subproblems(&ops, &master_sol.investments, k, config.parallel_sp)?;
        let sp_seconds = sp_start.elapsed().as_secs_f64();

        let sp_objs: Vec<((usize, usize), f64)> = layout
            .pairs
            .iter()
            .cloned()
            .zip(cuts.iter().map(|c| c.sp_objective))
            .collect();
        let ub = upper_bound(instance, &layout, &master_sol.investments, &sp_objs);
        if ub < best_ub {
            best_ub = ub;
            best_x = Some(master_sol.investments.clone());
        }
        if let Some(pu) = prev_ub {
            if ub > 0.0 {
                cpm_ub_history.push((ub - pu) / ub);
            }
        }
        prev_ub = Some(ub);

        let gap = relative_gap(best_ub, lb);
        records.push(IterationRecord {
            k,
            lb,
            ub,
            best_ub,
            gap,
            cuts_generated: cuts.len(),
            cuts_appended: appended,
            mp_seconds,
            sp_seconds,
            cascade_index: selection.as_ref().and_then(|s| s.cascade_index),
            cpi_active: selection.as_ref().and_then(|s| s.cpi_active),
            delta_ub: selection.as_ref().and_then(|s| s.delta_ub),
        });

        // Features for the fresh cuts, used by learning selectors next
        // iteration. Extraction never touches solver state.
        if selector.wants_features() {
            pending_lb_features.clear();
            pending_ub_features.clear();
            for (pos, cut) in cuts.iter().enumerate() {
                let alpha = master_sol.alphas[pos];
                let (lbf, ubf) = extract_features(
                    &layout,
                    k,
                    cut,
                    &ops[pos],
                    &master_sol.investments,
                    alpha,
                    prev.as_ref(),
                );
                pending_lb_features.push(lbf);
                pending_ub_features.push(ubf);
            }
        }
        prev = Some(PrevIteration {
            x: master_sol.investments.clone(),
            cuts: cuts.clone(),
        });
        pending = cuts;

        if gap <= config.eps_bd {
            termination = TerminationReason::Converged;
            break;
        }
    }

    let investments = best_x.unwrap_or_else(|| InvestmentVector::zeros(&layout));
    let trace = RunTrace {
        method: method.to_string(),
        instance: instance.name.clone(),
        iterations: records,
        termination,
        solution: FinalSolution {
            investments,
            best_ub,
            lb,
            gap: relative_gap(best_ub, lb),
        },
    };
    Ok((trace, mp))
}

/// Plain multicut Benders decomposition.
pub fn mbd_solve(instance: &Instance, config: &BendersConfig) -> Result<RunTrace, BendersError> {
    Ok(mbd_solve_detailed(instance, config)?.0)
}

/// Like [`mbd_solve`], additionally returning the final master with its
/// cut pool for export and inspection.
pub fn mbd_solve_detailed(
    instance: &Instance,
    config: &BendersConfig,
) -> Result<(RunTrace, MasterProblem), BendersError> {
    run_decomposition(instance, config, &mut AppendAll, "mbd")
}

/// Size guard for the extensive form.
const EF_MAX_BINARIES: usize = 40;
const EF_MAX_ROWS: usize = 8000;

/// Deterministic-equivalent program: investment variables for every node
/// plus the operation variables of every (node, block) pair, solved as one
/// mixed-binary program. Used as the reference optimum on small instances.
pub fn extensive_form(instance: &Instance) -> Result<MipSolution, BendersError> {
    let layout = VarLayout::new(instance);
    let ops: Vec<OperationLp> = layout
        .pairs
        .iter()
        .map(|&(m, b)| build_operation_lp(instance, &layout, m, b))
        .collect();

    let binaries = layout.binaries();
    let op_rows: usize = ops.iter().map(|op| op.lp.rows.len()).sum();
    let total_rows = op_rows + 4 * layout.n_investment;
    if binaries.len() > EF_MAX_BINARIES || total_rows > EF_MAX_ROWS {
        return Err(BendersError::SizeGuard(format!(
            "{} binaries / ~{} rows exceed the guard ({EF_MAX_BINARIES} binaries, {EF_MAX_ROWS} rows)",
            binaries.len(),
            total_rows
        )));
    }

    let mut lp = crate::linsolve::LinearProgram::new(layout.n_investment);
    let inv_obj = master::investment_objective(instance, &layout);
    lp.objective.copy_from_slice(&inv_obj);
    for &m in &layout.nodes {
        for &line_id in &layout.lines {
            let line = instance.lines.iter().find(|l| l.id == line_id).unwrap();
            lp.upper[layout.line_build(m, line_id)] = 1.0;
            lp.upper[layout.line_capacity(m, line_id)] = line.max_added_capacity;
        }
        for &cand in &layout.candidates {
            let sc = instance.storage_candidates.iter().find(|s| s.id == cand).unwrap();
            lp.upper[layout.bes_build(m, cand)] = 1.0;
            lp.upper[layout.bes_power(m, cand)] = sc.max_power;
        }
    }
    master::push_investment_rows(&mut lp, instance, &layout);

    // Lift every operation block: shift its variables behind the investment
    // block and move `F x` onto the left-hand side of parametric rows.
    for (pos, op) in ops.iter().enumerate() {
        let (m, _b) = layout.pairs[pos];
        let pi = instance.node(m).unwrap().probability;
        let offset = lp.n_vars;
        lp.n_vars += op.lp.n_vars;
        lp.objective.extend(op.lp.objective.iter().map(|c| c * pi));
        lp.lower.extend_from_slice(&op.lp.lower);
        lp.upper.extend_from_slice(&op.lp.upper);
        let parametric: std::collections::BTreeMap<usize, &Vec<(usize, f64)>> =
            op.parametric.iter().map(|(r, e)| (*r, e)).collect();
        for (r, row) in op.lp.rows.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> =
                row.coeffs.iter().map(|&(j, a)| (j + offset, a)).collect();
            if let Some(entries) = parametric.get(&r) {
                for &(var, coef) in entries.iter() {
                    coeffs.push((var, coef));
                }
            }
            lp.push_row(coeffs, row.sense, row.rhs);
        }
    }

    let mip = MixedIntegerProgram::new(lp, binaries);
    let sol = solve_mip_with_budget(&mip, tol::MIP_GAP, 400_000);
    if sol.status != MipStatus::Optimal {
        return Err(BendersError::Master(crate::master::MasterError::Solve(sol.status)));
    }
    Ok(sol)
}


#[cfg(test)]
mod debug_feature_tests {
    use super::*;
    use crate::subproblem::{build_operation_lp, solve_subproblem, InvestmentVector};
    use crate::synth;

    #[test]
    fn rejected_features_are_computable_but_not_in_default_vectors() {
        let inst = synth::oracle_instance(0);
        let layout = VarLayout::new(&inst);
        let op = build_operation_lp(&inst, &layout, 0, 0);
        let cut = solve_subproblem(&op, &InvestmentVector::zeros(&layout), 1).unwrap();
        let extras = debug_features(&layout, &cut);
        assert_eq!(extras.len(), 4);
        assert!(extras.iter().all(|(_, v)| v.is_finite()));
        assert!(extras.iter().any(|(n, _)| *n == "cut_origin"));
        // Default vectors stay at their documented widths.
        assert_eq!(LB_FEATURE_NAMES.len(), 6);
        assert_eq!(UB_FEATURE_NAMES.len(), 5);
        assert!(!LB_FEATURE_NAMES.contains(&"cut_origin"));
        assert!(!UB_FEATURE_NAMES.contains(&"dual_norm"));
    }
}
