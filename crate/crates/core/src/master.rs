//! Master investment problem: binaries and capacities per tree node, one
//! operating-cost variable per (node, block) pair, and the growing pool of
//! optimality cuts.

use std::io::Write;

use crate::instance::{Instance, COST_MILLIONS};
use crate::layout::VarLayout;
use crate::linsolve::{
    solve_mip_with_budget, LinearProgram, MipSolution, MipStatus, MixedIntegerProgram, Sense,
};
use crate::subproblem::{CutData, InvestmentVector};
use crate::tol;

/// Objective coefficients of the investment variables, probability-weighted
/// and multiplied by the years each asset is in service. Shared by the
/// master build, the upper-bound evaluation, and the extensive form.
pub fn investment_objective(instance: &Instance, layout: &VarLayout) -> Vec<f64> {
    let mut obj = vec![0.0; layout.n_investment];
    for node in &instance.tree {
        let line_years = instance.years_active(node.stage + instance.costs.line_lead_stages);
        let bes_years = instance.years_active(node.stage + instance.costs.bes_lead_stages);
        for &line_id in &layout.lines {
            let line = instance.lines.iter().find(|l| l.id == line_id).unwrap();
            obj[layout.line_build(node.id, line_id)] = COST_MILLIONS
                * node.probability
                * instance.costs.line_fixed_annual
                * line.length
                * line_years;
            obj[layout.line_capacity(node.id, line_id)] = COST_MILLIONS
                * node.probability
                * instance.costs.line_variable_annual
                * line.length
                * line_years;
        }
        for &cand in &layout.candidates {
            obj[layout.bes_power(node.id, cand)] =
                COST_MILLIONS * node.probability * instance.costs.bes_annual * bes_years;
        }
    }
    obj
}

/// Investment cost of a candidate plan under the weighted objective.
pub fn investment_cost(instance: &Instance, layout: &VarLayout, x: &InvestmentVector) -> f64 {
    investment_objective(instance, layout)
        .iter()
        .zip(&x.values)
        .map(|(c, v)| c * v)
        .sum()
}

/// Add the investment constraint rows (capacity linking and build-once per
/// root-to-leaf path) to `lp`. Also used by the extensive form.
pub fn push_investment_rows(lp: &mut LinearProgram, instance: &Instance, layout: &VarLayout) {
    for &m in &layout.nodes {
        for &line_id in &layout.lines {
            let max = instance
                .lines
                .iter()
                .find(|l| l.id == line_id)
                .unwrap()
                .max_added_capacity;
            lp.push_row(
                vec![
                    (layout.line_capacity(m, line_id), 1.0),
                    (layout.line_build(m, line_id), -max),
                ],
                Sense::Le,
                0.0,
            );
        }
        for &cand in &layout.candidates {
            let max = instance
                .storage_candidates
                .iter()
                .find(|s| s.id == cand)
                .unwrap()
                .max_power;
            lp.push_row(
                vec![
                    (layout.bes_power(m, cand), 1.0),
                    (layout.bes_build(m, cand), -max),
                ],
                Sense::Le,
                0.0,
            );
        }
    }
    // Build-once along every scenario path.
    for node in instance.tree.iter().filter(|n| instance.is_leaf(n.id)) {
        let path = instance.ancestors(node.id).expect("leaf path");
        for &line_id in &layout.lines {
            let coeffs: Vec<(usize, f64)> =
                path.iter().map(|&m| (layout.line_build(m, line_id), 1.0)).collect();
            lp.push_row(coeffs, Sense::Le, 1.0);
        }
        for &cand in &layout.candidates {
            let coeffs: Vec<(usize, f64)> =
                path.iter().map(|&m| (layout.bes_build(m, cand), 1.0)).collect();
            lp.push_row(coeffs, Sense::Le, 1.0);
        }
    }
}

/// Candidate plan and operating-cost approximation from one master solve.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub investments: InvestmentVector,
    /// Approximated operating cost per (node, block) pair in layout order.
    pub alphas: Vec<f64>,
    /// Incumbent objective value.
    pub objective: f64,
    /// Proven lower bound on the master optimum (<= objective).
    pub bound: f64,
    pub gap: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum MasterError {
    #[error("master MIP returned {0:?}")]
    Solve(MipStatus),
}

#[derive(Debug, Clone)]
pub struct MasterProblem {
    pub layout: VarLayout,
    mip: MixedIntegerProgram,
    /// Rows present before any cut (investment constraints).
    base_rows: usize,
    cuts: Vec<CutData>,
    duplicates_skipped: usize,
    pub mip_gap: f64,
    pub node_budget: usize,
}

/// Build the master problem with investment rows and no cuts.
pub fn build_master(instance: &Instance) -> MasterProblem {
    let layout = VarLayout::new(instance);
    let n = layout.n_vars();
    let mut lp = LinearProgram::new(n);

    let inv_obj = investment_objective(instance, &layout);
    lp.objective[..layout.n_investment].copy_from_slice(&inv_obj);
    for (pos, &(m, _b)) in layout.pairs.iter().enumerate() {
        let node = instance.node(m).unwrap();
        lp.objective[layout.n_investment + pos] = node.probability;
    }

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
    // Alphas stay at their default [0, +inf) bounds.

    push_investment_rows(&mut lp, instance, &layout);
    let base_rows = lp.rows.len();
    let binaries = layout.binaries();
    MasterProblem {
        layout,
        mip: MixedIntegerProgram::new(lp, binaries),
        base_rows,
        cuts: Vec::new(),
        duplicates_skipped: 0,
        mip_gap: tol::MIP_GAP,
        node_budget: 200_000,
    }
}

impl MasterProblem {
    pub fn n_cuts(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[CutData] {
        &self.cuts
    }

    pub fn duplicates_skipped(&self) -> usize {
        self.duplicates_skipped
    }

    fn cut_row(&self, cut: &CutData) -> (Vec<(usize, f64)>, f64) {
        // alpha >= constant + coeffs . x  as  alpha - coeffs . x >= constant
        let mut coeffs = vec![(self.layout.alpha(cut.node, cut.block), 1.0)];
        for &(j, c) in &cut.coefficients {
            coeffs.push((j, -c));
        }
        (coeffs, cut.constant)
    }

    fn is_duplicate(&self, cut: &CutData) -> bool {
        self.cuts.iter().any(|existing| {
            existing.node == cut.node
                && existing.block == cut.block
                && (existing.constant - cut.constant).abs() <= tol::CUT_DUPLICATE
                && existing.coefficients.len() == cut.coefficients.len()
                && existing
                    .coefficients
                    .iter()
                    .zip(&cut.coefficients)
                    .all(|(&(j1, c1), &(j2, c2))| j1 == j2 && (c1 - c2).abs() <= tol::CUT_DUPLICATE)
        })
    }

    /// Append cuts as rows, skipping duplicates. Returns the number added.
    pub fn append_cuts(&mut self, cuts: &[CutData]) -> usize {
        let mut appended = 0;
        for cut in cuts {
            if self.is_duplicate(cut) {
                self.duplicates_skipped += 1;
                continue;
            }
            let (coeffs, rhs) = self.cut_row(cut);
            self.mip.lp.push_row(coeffs, Sense::Ge, rhs);
            self.cuts.push(cut.clone());
            appended += 1;
        }
        appended
    }

    pub fn solve(&self) -> Result<MasterSolution, MasterError> {
        let sol = solve_mip_with_budget(&self.mip, self.mip_gap, self.node_budget);
        self.interpret(sol)
    }

    /// Solve the master with one extra cut without mutating the pool. Used
    /// by the sampling loop to price an individual cut.
    pub fn solve_with_extra_cut(&self, cut: &CutData) -> Result<MasterSolution, MasterError> {
        let mut mip = self.mip.clone();
        let (coeffs, rhs) = self.cut_row(cut);
        mip.lp.push_row(coeffs, Sense::Ge, rhs);
        let sol = solve_mip_with_budget(&mip, self.mip_gap, self.node_budget);
        self.interpret(sol)
    }

    fn interpret(&self, sol: MipSolution) -> Result<MasterSolution, MasterError> {
        if sol.status != MipStatus::Optimal {
            return Err(MasterError::Solve(sol.status));
        }
        let investments = InvestmentVector::from_master_primal(&self.layout, &sol.primal);
        let alphas = sol.primal[self.layout.n_investment..].to_vec();
        Ok(MasterSolution {
            investments,
            alphas,
            objective: sol.objective,
            bound: sol.bound,
            gap: sol.gap,
        })
    }

    pub fn alpha_of(&self, solution: &MasterSolution, node: usize, block: usize) -> f64 {
        solution.alphas[self.layout.alpha(node, block) - self.layout.n_investment]
    }

    /// Rows currently in the underlying MIP (investment rows plus cuts).
    pub fn n_rows(&self) -> usize {
        self.mip.lp.rows.len()
    }

    pub fn base_rows(&self) -> usize {
        self.base_rows
    }

    /// One row per cut: origin pair, iteration, constant, and the nonzero
    /// coefficients as `index:value` pairs.
    pub fn export_cut_pool_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,block,iteration,constant,coefficients")?;
        for cut in &self.cuts {
            let coeffs: Vec<String> = cut
                .coefficients
                .iter()
                .map(|(j, c)| format!("{j}:{c}"))
                .collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                cut.node,
                cut.block,
                cut.iteration,
                cut.constant,
                coeffs.join(";")
            )?;
        }
        Ok(())
    }
}
