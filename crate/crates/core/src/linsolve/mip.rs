//! Branch and bound over the bounded-variable simplex for mixed-binary
//! programs: best-bound node selection, branching on the most fractional
//! binary with ties to the lowest index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{solve_lp, LinearProgram, LpStatus};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    /// Indices of variables constrained to {0, 1}.
    pub binaries: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram, binaries: Vec<usize>) -> Self {
        debug_assert!(binaries.iter().all(|&j| j < lp.n_vars));
        MixedIntegerProgram { lp, binaries }
    }

    /// Plain-text listing for inspection.
    pub fn dump(&self) -> String {
        let mut out = self.lp.dump();
        out.push_str("binary
");
        for j in &self.binaries {
            out.push_str(&format!(" x{j}
"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node budget exhausted; the best incumbent and its proven gap are
    /// reported.
    BudgetExhausted,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub primal: Vec<f64>,
    /// Relative gap achieved between incumbent and proven bound.
    pub gap: f64,
    pub nodes_explored: usize,
}

struct Node {
    bound: f64,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the smallest bound pops first,
    // with ties going to the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.id.cmp(&self.id))
    }
}

const DEFAULT_NODE_BUDGET: usize = 200_000;

pub fn solve_mip(mip: &MixedIntegerProgram, gap_tol: f64) -> MipSolution {
    solve_mip_with_budget(mip, gap_tol, DEFAULT_NODE_BUDGET)
}

pub fn solve_mip_with_budget(
    mip: &MixedIntegerProgram,
    gap_tol: f64,
    node_budget: usize,
) -> MipSolution {
    let n = mip.lp.n_vars;
    let mut incumbent_obj = f64::INFINITY;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut nodes_explored = 0usize;
    let mut next_id = 0u64;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        lower: mip.lp.lower.clone(),
        upper: mip.lp.upper.clone(),
    });
    next_id += 1;

    let rel_gap = |ub: f64, lb: f64| -> f64 {
        if !ub.is_finite() {
            return f64::INFINITY;
        }
        ((ub - lb) / ub.abs().max(1e-9)).max(0.0)
    };

    while let Some(node) = heap.pop() {
        // The popped node has the smallest open bound, so the proven global
        // bound is min(incumbent, node bound); stop when the gap closes.
        let proven = node.bound.min(incumbent_obj);
        if let Some(primal) = incumbent.as_ref() {
            if rel_gap(incumbent_obj, proven) <= gap_tol {
                return MipSolution {
                    status: MipStatus::Optimal,
                    objective: incumbent_obj,
                    bound: proven,
                    primal: primal.clone(),
                    gap: rel_gap(incumbent_obj, proven),
                    nodes_explored,
                };
            }
        }
        if nodes_explored >= node_budget {
            return MipSolution {
                status: MipStatus::BudgetExhausted,
                objective: incumbent_obj,
                bound: proven,
                primal: incumbent.unwrap_or_else(|| vec![0.0; n]),
                gap: rel_gap(incumbent_obj, proven),
                nodes_explored,
            };
        }
        nodes_explored += 1;

        let mut lp = mip.lp.clone();
        lp.lower = node.lower;
        lp.upper = node.upper;
        let sol = solve_lp(&lp);
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return MipSolution {
                    status: MipStatus::Unbounded,
                    objective: f64::NEG_INFINITY,
                    bound: f64::NEG_INFINITY,
                    primal: vec![0.0; n],
                    gap: f64::INFINITY,
                    nodes_explored,
                }
            }
            LpStatus::Stalled => {
                return MipSolution {
                    status: MipStatus::Stalled,
                    objective: f64::NAN,
                    bound: f64::NEG_INFINITY,
                    primal: vec![0.0; n],
                    gap: f64::INFINITY,
                    nodes_explored,
                }
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= incumbent_obj - 1e-12 {
            continue;
        }

        // Most fractional binary, ties to the lowest index.
        let mut branch_var: Option<(usize, f64)> = None;
        for &j in &mip.binaries {
            let v = sol.primal[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > tol::INTEGRALITY {
                match branch_var {
                    Some((_, best)) if best >= frac => {}
                    _ => branch_var = Some((j, frac)),
                }
            }
        }

        match branch_var {
            None => {
                // Integer feasible; LP optimality makes it the node optimum.
                incumbent_obj = sol.objective;
                incumbent = Some(sol.primal);
            }
            Some((j, _)) => {
                let v = sol.primal[j];
                let mut down = Node {
                    bound: sol.objective,
                    id: next_id,
                    lower: lp.lower.clone(),
                    upper: lp.upper.clone(),
                };
                next_id += 1;
                down.upper[j] = v.floor();
                heap.push(down);
                let mut up = Node {
                    bound: sol.objective,
                    id: next_id,
                    lower: lp.lower,
                    upper: lp.upper,
                };
                next_id += 1;
                up.lower[j] = v.ceil();
                heap.push(up);
            }
        }
    }

    match incumbent {
        Some(primal) => MipSolution {
            status: MipStatus::Optimal,
            objective: incumbent_obj,
            bound: incumbent_obj,
            primal,
            gap: 0.0,
            nodes_explored,
        },
        None => MipSolution {
            status: MipStatus::Infeasible,
            objective: f64::NAN,
            bound: f64::INFINITY,
            primal: vec![0.0; n],
            gap: f64::INFINITY,
            nodes_explored,
        },
    }
}
