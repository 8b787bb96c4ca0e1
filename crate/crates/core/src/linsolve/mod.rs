//! Self-contained linear solvers: a bounded-variable revised simplex method
//! returning exact basic duals, and a branch-and-bound layer for mixed-binary
//! programs. No external solver is involved.
//!
//! Dual convention: the dual of a row is the sensitivity of the optimal
//! objective to its right-hand side. Under minimization a binding `<=` row
//! has a nonpositive dual and a binding `>=` row a nonnegative one. Cut
//! assembly relies on this convention.

mod mip;
mod simplex;

pub use mip::{solve_mip, solve_mip_with_budget, MipSolution, MipStatus, MixedIntegerProgram};
pub use simplex::solve_lp;

use std::fmt::Write as _;

/// Constraint sense of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Minimization program over bounded variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Program with `n` variables, zero objective, bounds `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            n_vars: n,
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|(j, a)| *j < self.n_vars && a.is_finite()));
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Activity of row `i` at the point `x`.
    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coeffs.iter().map(|(j, a)| a * x[*j]).sum()
    }

    /// Maximum violation of rows and bounds at `x`, scaled per row so a
    /// tolerance stays meaningful whatever the right-hand-side magnitude.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(i, x);
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v / (1.0 + row.rhs.abs()));
        }
        for j in 0..self.n_vars {
            let span = 1.0 + self.lower[j].abs().max(self.upper[j].abs().min(f64::MAX));
            let span = if span.is_finite() { span } else { 1.0 + self.lower[j].abs() };
            worst = worst
                .max((self.lower[j] - x[j]) / span)
                .max((x[j] - self.upper[j]) / span);
        }
        worst
    }

    /// Plain-text listing for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("minimize\n ");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {c:+} x{j}");
            }
        }
        out.push_str("\nsubject to\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            for (j, a) in &row.coeffs {
                let _ = write!(out, " {a:+} x{j}");
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("bounds\n");
        for j in 0..self.n_vars {
            let _ = writeln!(out, " {} <= x{j} <= {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

/// Solve outcome of an LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget was exhausted or the factorization degraded; the
    /// result carries no usable numbers.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One dual per row under the shadow-price convention.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
