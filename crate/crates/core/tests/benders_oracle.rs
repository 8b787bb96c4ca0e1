//! Decomposition against the deterministic equivalent: on small instances
//! the multicut driver must converge to the extensive-form optimum, and the
//! bounds must sandwich it at every iteration.

use bendml_core::benders::{extensive_form, mbd_solve, BendersConfig, TerminationReason};
use bendml_core::synth;

#[test]
fn mbd_reaches_extensive_form_optimum_on_oracle_instances() {
    for inst in synth::oracle_instances() {
        let ef = extensive_form(&inst).unwrap_or_else(|e| panic!("{}: {e}", inst.name));
        let config = BendersConfig::default();
        let trace = mbd_solve(&inst, &config).unwrap();
        assert_eq!(
            trace.termination,
            TerminationReason::Converged,
            "{}: {:?}",
            inst.name,
            trace.termination
        );
        assert!(trace.solution.gap <= config.eps_bd + 1e-12, "{}", inst.name);
        let rel = (trace.solution.best_ub - ef.objective) / ef.objective;
        assert!(
            rel >= -1e-6,
            "{}: best UB {} below the optimum {}",
            inst.name,
            trace.solution.best_ub,
            ef.objective
        );
        assert!(
            rel <= 0.01,
            "{}: best UB {} more than 1% above optimum {}",
            inst.name,
            trace.solution.best_ub,
            ef.objective
        );

        // Weak-duality sandwich and bound monotonicity. Masters are solved
        // to a 1e-6 relative gap, which bounds the admissible wobble.
        let mut prev_lb = f64::NEG_INFINITY;
        let mut prev_best = f64::INFINITY;
        for r in &trace.iterations {
            assert!(
                r.lb <= ef.objective * (1.0 + 1e-6) + 1e-9,
                "{}: iteration {} lb {} above optimum {}",
                inst.name,
                r.k,
                r.lb,
                ef.objective
            );
            assert!(
                r.best_ub >= ef.objective * (1.0 - 1e-6) - 1e-9,
                "{}: iteration {} best_ub {} below optimum {}",
                inst.name,
                r.k,
                r.best_ub,
                ef.objective
            );
            assert!(
                r.lb >= prev_lb - 1e-6 * (1.0 + prev_lb.abs()),
                "{}: lb regressed at iteration {}",
                inst.name,
                r.k
            );
            assert!(r.best_ub <= prev_best + 1e-12, "{}: best_ub rose at {}", inst.name, r.k);
            prev_lb = r.lb;
            prev_best = r.best_ub;
        }
    }
}

#[test]
fn converged_plan_reproduces_best_ub_on_fresh_resolves() {
    use bendml_core::benders::upper_bound;
    use bendml_core::subproblem::{build_operation_lp, solve_subproblem};
    use bendml_core::VarLayout;

    let inst = synth::oracle_instance(1);
    let trace = mbd_solve(&inst, &BendersConfig::default()).unwrap();
    assert_eq!(trace.termination, TerminationReason::Converged);
    let layout = VarLayout::new(&inst);
    let x = &trace.solution.investments;
    let sp_objs: Vec<((usize, usize), f64)> = layout
        .pairs
        .iter()
        .map(|&(m, b)| {
            let op = build_operation_lp(&inst, &layout, m, b);
            let cut = solve_subproblem(&op, x, 1).unwrap();
            ((m, b), cut.sp_objective)
        })
        .collect();
    let ub = upper_bound(&inst, &layout, x, &sp_objs);
    assert!(
        (ub - trace.solution.best_ub).abs() <= 1e-6 * (1.0 + ub.abs()),
        "re-solved {} vs recorded {}",
        ub,
        trace.solution.best_ub
    );
}

#[test]
fn saturated_cut_pool_pins_the_extensive_form_optimum() {
    // Once the pool carries every dual extreme point the loop visits, the
    // master objective coincides with the extensive-form optimum.
    let inst = synth::oracle_instance(0);
    let ef = extensive_form(&inst).unwrap();
    let config = BendersConfig {
        eps_bd: 1e-6,
        max_iterations: 400,
        ..BendersConfig::default()
    };
    let trace = mbd_solve(&inst, &config).unwrap();
    assert_eq!(trace.termination, TerminationReason::Converged);
    let lb_rel = (trace.solution.lb - ef.objective).abs() / ef.objective;
    let ub_rel = (trace.solution.best_ub - ef.objective).abs() / ef.objective;
    assert!(lb_rel <= 1e-5, "master objective off by {lb_rel}");
    assert!(ub_rel <= 1e-5, "upper bound off by {ub_rel}");
}

#[test]
fn parallel_subproblems_reproduce_the_serial_trajectory() {
    let inst = synth::oracle_instance(2);
    let serial = mbd_solve(&inst, &BendersConfig::default()).unwrap();
    let parallel = mbd_solve(
        &inst,
        &BendersConfig {
            parallel_sp: true,
            ..BendersConfig::default()
        },
    )
    .unwrap();
    assert!(serial.same_trajectory(&parallel));
}

#[test]
fn thirteen_node_case_generates_52_cuts_per_iteration() {
    // One pass over the big bundled case: every iteration solves all 52
    // subproblems and proposes one cut each.
    let inst = synth::ieee24_reduced(synth::Ieee24Tree::Nodes13);
    let config = BendersConfig {
        max_iterations: 1,
        ..BendersConfig::default()
    };
    let trace = mbd_solve(&inst, &config).unwrap();
    assert_eq!(trace.iterations.len(), 1);
    assert_eq!(trace.iterations[0].cuts_generated, 52);
    assert_eq!(trace.termination, TerminationReason::IterationLimit);
}
