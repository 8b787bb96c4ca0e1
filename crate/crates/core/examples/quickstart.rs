//! Minimal end-to-end run of the library API: decompose a bundled case,
//! print the iteration log, and list the chosen investments.

use bendml_core::benders::{mbd_solve, BendersConfig};
use bendml_core::layout::VarKind;
use bendml_core::synth::{ieee24_reduced, Ieee24Tree};
use bendml_core::VarLayout;

fn main() {
    let instance = ieee24_reduced(Ieee24Tree::Nodes7);
    let trace = mbd_solve(&instance, &BendersConfig::default()).expect("solve");
    println!("{} on {}: {}", trace.method, trace.instance, trace.termination.as_str());
    for r in &trace.iterations {
        println!(
            "  k={} lb={:.1} best_ub={:.1} gap={:.4} appended={}",
            r.k, r.lb, r.best_ub, r.gap, r.cuts_appended
        );
    }
    let layout = VarLayout::new(&instance);
    println!("plan (costs in millions):");
    for (index, &value) in trace.solution.investments.values.iter().enumerate() {
        if value > 1e-6 {
            let (node, kind) = layout.describe(index).unwrap();
            match kind {
                VarKind::LineBuild { line } => println!("  node {node}: reinforce line {line}"),
                VarKind::LineCapacity { line } => {
                    println!("  node {node}: line {line} +{value:.1} MW")
                }
                VarKind::BesBuild { candidate } => {
                    println!("  node {node}: build storage {candidate}")
                }
                VarKind::BesPower { candidate } => {
                    println!("  node {node}: storage {candidate} at {value:.1} MW")
                }
            }
        }
    }
    println!("expected total cost: {:.1}", trace.solution.best_ub);
}
