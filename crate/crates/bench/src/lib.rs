//! Shared fixtures for the kernel benchmarks.

use bendml_core::instance::Instance;
use bendml_core::subproblem::{build_operation_lp, InvestmentVector, OperationLp};
use bendml_core::synth::{ieee24_reduced, Ieee24Tree};
use bendml_core::VarLayout;

/// The 7-node reduced 24-bus case used across the benchmarks.
pub fn bench_instance() -> Instance {
    ieee24_reduced(Ieee24Tree::Nodes7)
}

/// Operation template of the deepest node's peak block.
pub fn bench_subproblem(instance: &Instance) -> (VarLayout, OperationLp, InvestmentVector) {
    let layout = VarLayout::new(instance);
    let deepest = instance
        .tree
        .iter()
        .max_by(|a, b| a.demand_scale.total_cmp(&b.demand_scale))
        .unwrap()
        .id;
    let op = build_operation_lp(instance, &layout, deepest, 0);
    let x = InvestmentVector::zeros(&layout);
    (layout, op, x)
}
