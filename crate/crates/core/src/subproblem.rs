//! Operation subproblem for one (tree node, block) pair at fixed
//! investments: DC power flow with storage and penalized curtailment.
//!
//! Investment decisions never appear as subproblem variables. Every limit
//! they move is written as a row whose right-hand side is `h - F x`; the row
//! keeps its `F` entries (indexed by master variables) so that solving the
//! subproblem yields an optimality cut in master space and the extensive
//! form can lift the same rows with `F x` on the left-hand side.

use std::f64::consts::PI;

use thiserror::Error;

use crate::instance::{Instance, COST_MILLIONS};
use crate::layout::VarLayout;
use crate::linsolve::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::tol;

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("subproblem ({node},{block}) LP returned {status:?}")]
    Solve {
        node: usize,
        block: usize,
        status: LpStatus,
    },
    #[error(
        "cut from ({node},{block}) failed the strong-duality identity: cut {cut} vs objective {objective}"
    )]
    StrongDuality {
        node: usize,
        block: usize,
        cut: f64,
        objective: f64,
    },
}

/// Investment decisions over the whole tree, in master-layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct InvestmentVector {
    pub values: Vec<f64>,
}

impl InvestmentVector {
    pub fn zeros(layout: &VarLayout) -> Self {
        InvestmentVector {
            values: vec![0.0; layout.n_investment],
        }
    }

    pub fn from_master_primal(layout: &VarLayout, primal: &[f64]) -> Self {
        InvestmentVector {
            values: primal[..layout.n_investment].to_vec(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }
}

/// Capacity actually available at a node once lead times are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCapacity {
    /// Per line id: in-service capacity, MW.
    pub line_capacity: Vec<f64>,
    /// Per line id: whether a candidate corridor is coupled (commissioned).
    pub line_active: Vec<bool>,
    /// Per storage candidate id: installed power, MW.
    pub bes_power: Vec<f64>,
    /// Per storage candidate id: energy capacity, MWh.
    pub bes_energy: Vec<f64>,
}

impl EffectiveCapacity {
    /// Total storage power available at a bus.
    pub fn bus_power(&self, instance: &Instance, bus: usize) -> f64 {
        instance
            .storage_candidates
            .iter()
            .filter(|s| s.bus == bus)
            .map(|s| self.bes_power[s.id])
            .sum()
    }
}

/// Ancestor nodes of `m` whose investments are commissioned by `m`'s stage
/// given the lead time.
fn commissioned_ancestors(instance: &Instance, m: usize, lead: usize) -> Vec<usize> {
    let stage = instance.node(m).expect("valid node").stage;
    instance
        .ancestors(m)
        .expect("valid node")
        .into_iter()
        .filter(|&a| instance.node(a).unwrap().stage + lead <= stage)
        .collect()
}

/// Capacity in service at node `m` under investments `x` (all nodes).
pub fn effective_capacity(
    instance: &Instance,
    layout: &VarLayout,
    x: &InvestmentVector,
    m: usize,
) -> EffectiveCapacity {
    let line_anc = commissioned_ancestors(instance, m, instance.costs.line_lead_stages);
    let bes_anc = commissioned_ancestors(instance, m, instance.costs.bes_lead_stages);

    let mut line_capacity = Vec::with_capacity(instance.lines.len());
    let mut line_active = Vec::with_capacity(instance.lines.len());
    for line in &instance.lines {
        let mut cap = line.capacity0;
        let mut active = !line.is_candidate();
        if line.reinforceable {
            for &a in &line_anc {
                cap += x.get(layout.line_capacity(a, line.id));
                if x.get(layout.line_build(a, line.id)) >= 0.5 {
                    active = true;
                }
            }
        }
        line_capacity.push(cap);
        line_active.push(active);
    }

    let mut bes_power = Vec::with_capacity(instance.storage_candidates.len());
    let mut bes_energy = Vec::with_capacity(instance.storage_candidates.len());
    for sc in &instance.storage_candidates {
        let p: f64 = bes_anc.iter().map(|&a| x.get(layout.bes_power(a, sc.id))).sum();
        bes_power.push(p);
        bes_energy.push(p * sc.duration_hours);
    }

    EffectiveCapacity {
        line_capacity,
        line_active,
        bes_power,
        bes_energy,
    }
}

/// Parametric operation LP for one (node, block) pair.
#[derive(Debug, Clone)]
pub struct OperationLp {
    pub node: usize,
    pub block: usize,
    /// LP with right-hand sides at zero investment.
    pub lp: LinearProgram,
    /// Investment-parametric rows: (row index, F entries). The numeric
    /// right-hand side of row `r` at investments `x` is `h_r - F_r . x`.
    pub parametric: Vec<(usize, Vec<(usize, f64)>)>,
    /// Step weight: equivalent hours represented by one step.
    pub weight: f64,
    n_steps: usize,
    curtailment_vars: Vec<usize>,
}

struct VarMap {
    n_gen: usize,
    n_bus: usize,
    n_line: usize,
    n_sto: usize,
    steps: usize,
}

impl VarMap {
    fn g(&self, t: usize, i: usize) -> usize {
        t * self.n_gen + i
    }
    fn theta(&self, t: usize, n: usize) -> usize {
        self.steps * self.n_gen + t * self.n_bus + n
    }
    fn flow(&self, t: usize, l: usize) -> usize {
        self.steps * (self.n_gen + self.n_bus) + t * self.n_line + l
    }
    fn p_ch(&self, t: usize, s: usize) -> usize {
        self.steps * (self.n_gen + self.n_bus + self.n_line) + t * self.n_sto + s
    }
    fn p_dis(&self, t: usize, s: usize) -> usize {
        self.steps * (self.n_gen + self.n_bus + self.n_line + self.n_sto) + t * self.n_sto + s
    }
    fn energy(&self, t: usize, s: usize) -> usize {
        self.steps * (self.n_gen + self.n_bus + self.n_line + 2 * self.n_sto) + t * self.n_sto + s
    }
    fn curtail(&self, t: usize, n: usize) -> usize {
        self.steps * (self.n_gen + self.n_bus + self.n_line + 3 * self.n_sto) + t * self.n_bus + n
    }
    fn total(&self) -> usize {
        self.steps * (self.n_gen + 2 * self.n_bus + self.n_line + 3 * self.n_sto)
    }
}

/// Build the parametric operation LP for `(m, b)`.
pub fn build_operation_lp(
    instance: &Instance,
    layout: &VarLayout,
    m: usize,
    b: usize,
) -> OperationLp {
    let block = instance.blocks.iter().find(|x| x.id == b).expect("block id");
    let steps = block.steps;
    let vm = VarMap {
        n_gen: instance.generators.len(),
        n_bus: instance.buses.len(),
        n_line: instance.lines.len(),
        n_sto: instance.storage_candidates.len(),
        steps,
    };
    let weight = instance.step_weight(m, b);
    let mut lp = LinearProgram::new(vm.total());
    let mut parametric: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();

    let line_anc = commissioned_ancestors(instance, m, instance.costs.line_lead_stages);
    let bes_anc = commissioned_ancestors(instance, m, instance.costs.bes_lead_stages);

    // Bounds and objective.
    for t in 0..steps {
        for gen in &instance.generators {
            let idx = vm.g(t, gen.id);
            let cap = match &gen.profile_key {
                Some(key) => gen.capacity * block.renewable_profiles[key][t],
                None => gen.capacity,
            };
            lp.lower[idx] = 0.0;
            lp.upper[idx] = cap;
            lp.objective[idx] = COST_MILLIONS * weight * gen.marginal_cost;
        }
        for bus in &instance.buses {
            let th = vm.theta(t, bus.id);
            if bus.id == 0 {
                lp.lower[th] = 0.0;
                lp.upper[th] = 0.0;
            } else {
                lp.lower[th] = -PI;
                lp.upper[th] = PI;
            }
            let y = vm.curtail(t, bus.id);
            lp.lower[y] = 0.0;
            lp.upper[y] = instance.demand(bus.id, m, b, t);
            lp.objective[y] = COST_MILLIONS * weight * instance.costs.voll;
        }
        for line in &instance.lines {
            let idx = vm.flow(t, line.id);
            let span = if line.reinforceable {
                line.capacity0 + line.max_added_capacity + 1.0
            } else {
                line.capacity0
            };
            lp.lower[idx] = -span;
            lp.upper[idx] = span;
        }
        for sc in &instance.storage_candidates {
            lp.upper[vm.p_ch(t, sc.id)] = sc.max_power + 1.0;
            lp.upper[vm.p_dis(t, sc.id)] = sc.max_power + 1.0;
            lp.upper[vm.energy(t, sc.id)] = sc.duration_hours * (sc.max_power + 1.0);
        }
    }

    // Nodal balance.
    for t in 0..steps {
        for bus in &instance.buses {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for gen in instance.generators.iter().filter(|g| g.bus == bus.id) {
                coeffs.push((vm.g(t, gen.id), 1.0));
            }
            for line in &instance.lines {
                if line.to_bus == bus.id {
                    coeffs.push((vm.flow(t, line.id), 1.0));
                } else if line.from_bus == bus.id {
                    coeffs.push((vm.flow(t, line.id), -1.0));
                }
            }
            for sc in instance.storage_candidates.iter().filter(|s| s.bus == bus.id) {
                coeffs.push((vm.p_dis(t, sc.id), 1.0));
                coeffs.push((vm.p_ch(t, sc.id), -1.0));
            }
            coeffs.push((vm.curtail(t, bus.id), 1.0));
            lp.push_row(coeffs, Sense::Eq, instance.demand(bus.id, m, b, t));
        }
    }

    // Flow coupling and capacity.
    for t in 0..steps {
        for line in &instance.lines {
            let f = vm.flow(t, line.id);
            let th_from = vm.theta(t, line.from_bus);
            let th_to = vm.theta(t, line.to_bus);
            let bsus = line.susceptance;
            if line.is_candidate() {
                // Coupling enforced once a commissioned ancestor builds it.
                let big_m = bsus * 2.0 * PI;
                let f_entries: Vec<(usize, f64)> = line_anc
                    .iter()
                    .map(|&a| (layout.line_build(a, line.id), big_m))
                    .collect();
                let r1 = lp.push_row(
                    vec![(f, 1.0), (th_from, -bsus), (th_to, bsus)],
                    Sense::Le,
                    big_m,
                );
                parametric.push((r1, f_entries.clone()));
                let r2 = lp.push_row(
                    vec![(f, -1.0), (th_from, bsus), (th_to, -bsus)],
                    Sense::Le,
                    big_m,
                );
                parametric.push((r2, f_entries));
            } else {
                lp.push_row(
                    vec![(f, 1.0), (th_from, -bsus), (th_to, bsus)],
                    Sense::Eq,
                    0.0,
                );
            }
            if line.reinforceable {
                let f_entries: Vec<(usize, f64)> = line_anc
                    .iter()
                    .map(|&a| (layout.line_capacity(a, line.id), -1.0))
                    .collect();
                let r1 = lp.push_row(vec![(f, 1.0)], Sense::Le, line.capacity0);
                parametric.push((r1, f_entries.clone()));
                let r2 = lp.push_row(vec![(f, -1.0)], Sense::Le, line.capacity0);
                parametric.push((r2, f_entries));
            }
        }
    }

    // Storage dynamics and parametric limits.
    let dt = block.step_hours;
    for sc in &instance.storage_candidates {
        for t in 0..steps {
            let prev = if t == 0 { steps - 1 } else { t - 1 };
            lp.push_row(
                vec![
                    (vm.energy(t, sc.id), 1.0),
                    (vm.energy(prev, sc.id), -1.0),
                    (vm.p_ch(t, sc.id), -sc.efficiency * dt),
                    (vm.p_dis(t, sc.id), dt),
                ],
                Sense::Eq,
                0.0,
            );
            let power_entries: Vec<(usize, f64)> = bes_anc
                .iter()
                .map(|&a| (layout.bes_power(a, sc.id), -1.0))
                .collect();
            let energy_entries: Vec<(usize, f64)> = bes_anc
                .iter()
                .map(|&a| (layout.bes_power(a, sc.id), -sc.duration_hours))
                .collect();
            let r1 = lp.push_row(vec![(vm.p_ch(t, sc.id), 1.0)], Sense::Le, 0.0);
            parametric.push((r1, power_entries.clone()));
            let r2 = lp.push_row(vec![(vm.p_dis(t, sc.id), 1.0)], Sense::Le, 0.0);
            parametric.push((r2, power_entries));
            let r3 = lp.push_row(vec![(vm.energy(t, sc.id), 1.0)], Sense::Le, 0.0);
            parametric.push((r3, energy_entries));
        }
    }

    let curtailment_vars = (0..steps)
        .flat_map(|t| instance.buses.iter().map(move |bus| (t, bus.id)))
        .map(|(t, n)| vm.curtail(t, n))
        .collect();

    OperationLp {
        node: m,
        block: b,
        lp,
        parametric,
        weight,
        n_steps: steps,
        curtailment_vars,
    }
}

impl OperationLp {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Numeric LP at investments `x`.
    pub fn at_investment(&self, x: &InvestmentVector) -> LinearProgram {
        let mut lp = self.lp.clone();
        for (row, entries) in &self.parametric {
            let mut rhs = self.lp.rows[*row].rhs;
            for &(var, coef) in entries {
                rhs -= coef * x.get(var);
            }
            lp.rows[*row].rhs = rhs;
        }
        lp
    }

    /// Hours-weighted curtailed energy of a solved LP, MWh.
    pub fn total_curtailment(&self, primal: &[f64]) -> f64 {
        self.curtailment_vars.iter().map(|&v| primal[v] * self.weight).sum()
    }
}

/// One optimality cut: `alpha >= constant + coefficients . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutData {
    pub node: usize,
    pub block: usize,
    pub iteration: usize,
    pub constant: f64,
    /// Sparse coefficients over master investment variables, ascending index.
    pub coefficients: Vec<(usize, f64)>,
    /// Subproblem optimum at the generating investments.
    pub sp_objective: f64,
    /// Row duals of the generating solve.
    pub duals: Vec<f64>,
    /// Hours-weighted curtailed energy at the generating solve, MWh.
    pub curtailment: f64,
}

impl CutData {
    pub fn value_at(&self, x: &InvestmentVector) -> f64 {
        self.constant + self.coefficients.iter().map(|&(j, c)| c * x.get(j)).sum::<f64>()
    }
}

/// Solve the operation LP at `x` and assemble the optimality cut.
pub fn solve_subproblem(
    op: &OperationLp,
    x: &InvestmentVector,
    iteration: usize,
) -> Result<CutData, SubproblemError> {
    let lp = op.at_investment(x);
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(SubproblemError::Solve {
            node: op.node,
            block: op.block,
            status: sol.status,
        });
    }

    // Coefficients on master variables: -(F' lambda).
    let mut dense: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (row, entries) in &op.parametric {
        let lambda = sol.duals[*row];
        if lambda == 0.0 {
            continue;
        }
        for &(var, coef) in entries {
            *dense.entry(var).or_insert(0.0) -= lambda * coef;
        }
    }
    let coefficients: Vec<(usize, f64)> = dense.into_iter().filter(|&(_, c)| c != 0.0).collect();

    // Constant via the dual objective: lambda . h plus the bound terms, so
    // that the identity cut(x) == objective is a genuine duality check.
    let mut constant: f64 = op
        .lp
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| sol.duals[i] * row.rhs)
        .sum();
    for j in 0..lp.n_vars {
        constant += sol.reduced_costs[j] * sol.primal[j];
    }

    let cut = CutData {
        node: op.node,
        block: op.block,
        iteration,
        constant,
        coefficients,
        sp_objective: sol.objective,
        duals: sol.duals,
        curtailment: op.total_curtailment(&sol.primal),
    };
    let predicted = cut.value_at(x);
    if (predicted - sol.objective).abs() > tol::CUT_STRONG_DUALITY * (1.0 + sol.objective.abs()) {
        return Err(SubproblemError::StrongDuality {
            node: op.node,
            block: op.block,
            cut: predicted,
            objective: sol.objective,
        });
    }
    Ok(cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Block, Bus, CostData, Generator, Line, StorageCandidate, TreeNode};
    use crate::synth;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn single_bus_instance(gen_capacity: f64) -> Instance {
        let inst = Instance {
            schema: 1,
            name: "one-bus".into(),
            buses: vec![Bus { id: 0, base_demand_peak: 50.0 }],
            lines: vec![],
            generators: vec![Generator {
                id: 0,
                bus: 0,
                capacity: gen_capacity,
                marginal_cost: 20.0,
                is_renewable: false,
                profile_key: None,
            }],
            storage_candidates: vec![],
            costs: CostData {
                line_fixed_annual: 0.0,
                line_variable_annual: 0.0,
                bes_annual: 0.0,
                voll: 9000.0,
                line_lead_stages: 1,
                bes_lead_stages: 0,
            },
            tree: vec![TreeNode {
                id: 0,
                stage: 0,
                parent: None,
                probability: 1.0,
                demand_scale: 1.0,
                stage_years: 10.0,
            }],
            blocks: vec![Block {
                id: 0,
                hours_per_year: 1000.0,
                steps: 2,
                step_hours: 12.0,
                demand_profile: vec![vec![1.0, 1.0]],
                renewable_profiles: BTreeMap::new(),
            }],
        };
        inst.validate().unwrap();
        inst
    }

    #[test]
    fn generator_covers_demand() {
        let inst = single_bus_instance(150.0);
        let layout = VarLayout::new(&inst);
        let op = build_operation_lp(&inst, &layout, 0, 0);
        let x = InvestmentVector::zeros(&layout);
        let cut = solve_subproblem(&op, &x, 1).unwrap();
        // weight = 1000 * 10 / 2 = 5000 equivalent hours per step;
        // cost = 20 * 50 MW * 5000 h * 2 steps = 10 million, carried as 10.
        assert!((cut.sp_objective - 10.0).abs() < 1e-6, "{}", cut.sp_objective);
        assert_eq!(cut.curtailment, 0.0);
        assert!(cut.coefficients.is_empty());
    }

    #[test]
    fn zero_generation_forces_curtailment() {
        let inst = single_bus_instance(0.0);
        let layout = VarLayout::new(&inst);
        let op = build_operation_lp(&inst, &layout, 0, 0);
        let x = InvestmentVector::zeros(&layout);
        let cut = solve_subproblem(&op, &x, 1).unwrap();
        // all demand curtailed: 9000 * 50 * 5000 * 2 = 4.5e9, carried as 4500
        assert!((cut.sp_objective - 4500.0).abs() < 1e-6, "{}", cut.sp_objective);
        // 50 MW over 2 steps of 5000 equivalent hours
        assert!((cut.curtailment - 500_000.0).abs() < 1e-6);
    }

    #[test]
    fn no_investment_keeps_base_capacity() {
        let inst = synth::oracle_instance(0);
        let layout = VarLayout::new(&inst);
        let x = InvestmentVector::zeros(&layout);
        let cap = effective_capacity(&inst, &layout, &x, 0);
        for line in &inst.lines {
            assert_eq!(cap.line_capacity[line.id], line.capacity0);
        }
        for sc in &inst.storage_candidates {
            assert_eq!(cap.bes_power[sc.id], 0.0);
        }
    }

    #[test]
    fn line_lead_time_delays_commissioning() {
        let inst = synth::oracle_instance(0);
        let layout = VarLayout::new(&inst);
        let line_id = inst.lines.iter().find(|l| l.reinforceable).unwrap().id;
        let mut x = InvestmentVector::zeros(&layout);
        x.set(layout.line_build(0, line_id), 1.0);
        x.set(layout.line_capacity(0, line_id), 100.0);
        let at_root = effective_capacity(&inst, &layout, &x, 0);
        let line0 = inst.lines[line_id].capacity0;
        assert_eq!(at_root.line_capacity[line_id], line0, "lead time not applied");
        for node in inst.tree.iter().filter(|n| n.stage == 1) {
            let cap = effective_capacity(&inst, &layout, &x, node.id);
            assert_eq!(cap.line_capacity[line_id], line0 + 100.0);
        }
    }

    #[test]
    fn storage_available_in_decision_stage() {
        let mut inst = synth::oracle_instance(0);
        inst.storage_candidates = vec![StorageCandidate {
            id: 0,
            bus: 1,
            duration_hours: 2.0,
            efficiency: 0.9,
            max_power: 50.0,
        }];
        inst.validate().unwrap();
        let layout = VarLayout::new(&inst);
        let mid = inst.tree.iter().find(|n| n.stage == 1).unwrap().id;
        let mut x = InvestmentVector::zeros(&layout);
        x.set(layout.bes_build(mid, 0), 1.0);
        x.set(layout.bes_power(mid, 0), 40.0);
        let cap = effective_capacity(&inst, &layout, &x, mid);
        assert_eq!(cap.bes_power[0], 40.0);
        assert_eq!(cap.bes_energy[0], 80.0);
        assert_eq!(cap.bus_power(&inst, 1), 40.0);
    }

    /// Three-bus triangle with a congested direct corridor. The oracle is a
    /// fine grid over the free operating variables after eliminating the
    /// balance equalities.
    #[test]
    fn triangle_congestion_matches_grid_search() {
        let inst = triangle_instance();
        let layout = VarLayout::new(&inst);
        let op = build_operation_lp(&inst, &layout, 0, 0);
        let x = InvestmentVector::zeros(&layout);
        let cut = solve_subproblem(&op, &x, 1).unwrap();
        let w = inst.step_weight(0, 0) * COST_MILLIONS;

        // Grid over (tau, y) with theta2 = 2*theta1 from bus-1 balance,
        // g0 = 30 tau from bus-0 balance, g2 = 120 - 30 tau - y at bus 2.
        let mut best = f64::INFINITY;
        let mut tau = 0.0f64;
        while tau <= 3.0 {
            let g0 = 30.0 * tau;
            let f02 = 20.0 * tau;
            let f01 = 10.0 * tau;
            if f02 <= 50.0 && f01 <= 100.0 && g0 <= 300.0 {
                let mut y = 0.0f64;
                while y <= 120.0 {
                    let g2 = 120.0 - g0 - y;
                    if (0.0..=100.0).contains(&g2) {
                        let cost = w * (10.0 * g0 + 100.0 * g2 + 9000.0 * y);
                        best = best.min(cost);
                    }
                    y += 0.05;
                }
            }
            tau += 0.001;
        }
        assert!(
            (cut.sp_objective - best).abs() <= 1e-3 * best,
            "lp {} vs grid {best}",
            cut.sp_objective
        );
        // Exact optimum by hand: g0 = 75, g2 = 45.
        assert!((cut.sp_objective - w * 5250.0).abs() <= 1e-6 * w * 5250.0);
    }

    fn triangle_instance() -> Instance {
        let inst = Instance {
            schema: 1,
            name: "triangle".into(),
            buses: vec![
                Bus { id: 0, base_demand_peak: 0.0 },
                Bus { id: 1, base_demand_peak: 0.0 },
                Bus { id: 2, base_demand_peak: 120.0 },
            ],
            lines: vec![
                Line {
                    id: 0,
                    from_bus: 0,
                    to_bus: 1,
                    susceptance: 1000.0,
                    capacity0: 100.0,
                    length: 10.0,
                    reinforceable: false,
                    max_added_capacity: 0.0,
                },
                Line {
                    id: 1,
                    from_bus: 1,
                    to_bus: 2,
                    susceptance: 1000.0,
                    capacity0: 100.0,
                    length: 10.0,
                    reinforceable: false,
                    max_added_capacity: 0.0,
                },
                Line {
                    id: 2,
                    from_bus: 0,
                    to_bus: 2,
                    susceptance: 1000.0,
                    capacity0: 50.0,
                    length: 10.0,
                    reinforceable: false,
                    max_added_capacity: 0.0,
                },
            ],
            generators: vec![
                Generator {
                    id: 0,
                    bus: 0,
                    capacity: 300.0,
                    marginal_cost: 10.0,
                    is_renewable: false,
                    profile_key: None,
                },
                Generator {
                    id: 1,
                    bus: 2,
                    capacity: 100.0,
                    marginal_cost: 100.0,
                    is_renewable: false,
                    profile_key: None,
                },
            ],
            storage_candidates: vec![],
            costs: CostData {
                line_fixed_annual: 0.0,
                line_variable_annual: 0.0,
                bes_annual: 0.0,
                voll: 9000.0,
                line_lead_stages: 1,
                bes_lead_stages: 0,
            },
            tree: vec![TreeNode {
                id: 0,
                stage: 0,
                parent: None,
                probability: 1.0,
                demand_scale: 1.0,
                stage_years: 10.0,
            }],
            blocks: vec![Block {
                id: 0,
                hours_per_year: 1000.0,
                steps: 1,
                step_hours: 24.0,
                demand_profile: vec![vec![1.0], vec![1.0], vec![1.0]],
                renewable_profiles: BTreeMap::new(),
            }],
        };
        inst.validate().unwrap();
        inst
    }

    fn random_investment(
        inst: &Instance,
        layout: &VarLayout,
        rng: &mut ChaCha8Rng,
    ) -> InvestmentVector {
        let mut x = InvestmentVector::zeros(layout);
        // Build-once: each asset is assigned to at most one node.
        for &line in &layout.lines {
            if rng.random_bool(0.6) {
                let node = layout.nodes[rng.random_range(0..layout.nodes.len())];
                let max = inst.lines.iter().find(|l| l.id == line).unwrap().max_added_capacity;
                x.set(layout.line_build(node, line), 1.0);
                x.set(layout.line_capacity(node, line), rng.random_range(0.2..1.0) * max);
            }
        }
        for &cand in &layout.candidates {
            if rng.random_bool(0.6) {
                let node = layout.nodes[rng.random_range(0..layout.nodes.len())];
                let max = inst
                    .storage_candidates
                    .iter()
                    .find(|s| s.id == cand)
                    .unwrap()
                    .max_power;
                x.set(layout.bes_build(node, cand), 1.0);
                x.set(layout.bes_power(node, cand), rng.random_range(0.2..1.0) * max);
            }
        }
        x
    }

    #[test]
    fn cut_is_tight_at_generating_point_and_valid_elsewhere() {
        let mut checked = 0;
        for seed in 0..20u64 {
            let inst = synth::random_tiny_instance(seed);
            let layout = VarLayout::new(&inst);
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let pairs = inst.subproblem_index();
            let (m, b) = pairs[rng.random_range(0..pairs.len())];
            let op = build_operation_lp(&inst, &layout, m, b);

            let x_gen = random_investment(&inst, &layout, &mut rng);
            let cut = solve_subproblem(&op, &x_gen, 1).unwrap();
            // Tightness at the generating point is checked inside
            // solve_subproblem; spot-check validity at a different point.
            let x_other = random_investment(&inst, &layout, &mut rng);
            let resolved = solve_subproblem(&op, &x_other, 2).unwrap();
            assert!(
                cut.value_at(&x_other)
                    <= resolved.sp_objective + 1e-5 * (1.0 + resolved.sp_objective.abs()),
                "seed {seed}: cut {} above objective {}",
                cut.value_at(&x_other),
                resolved.sp_objective
            );
            checked += 1;
        }
        assert_eq!(checked, 20);
    }

    #[test]
    fn more_investment_never_costs_more_to_operate() {
        for seed in 40..55u64 {
            let inst = synth::random_tiny_instance(seed);
            let layout = VarLayout::new(&inst);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs = inst.subproblem_index();
            let (m, b) = pairs[pairs.len() - 1];
            let op = build_operation_lp(&inst, &layout, m, b);

            let mut low = random_investment(&inst, &layout, &mut rng);
            // Guarantee at least one build so the comparison is not trivial.
            let first_line = layout.lines[0];
            if layout.nodes.iter().all(|&n| low.get(layout.line_build(n, first_line)) < 0.5) {
                low.set(layout.line_build(layout.nodes[0], first_line), 1.0);
                low.set(layout.line_capacity(layout.nodes[0], first_line), 10.0);
            }
            // More investment on the same build pattern (build-once intact).
            let mut high = low.clone();
            for &line in &layout.lines {
                let max = inst.lines.iter().find(|l| l.id == line).unwrap().max_added_capacity;
                for &node in &layout.nodes {
                    if high.get(layout.line_build(node, line)) >= 0.5 {
                        high.set(layout.line_capacity(node, line), max);
                    }
                }
            }
            for &cand in &layout.candidates {
                let max = inst.storage_candidates.iter().find(|s| s.id == cand).unwrap().max_power;
                for &node in &layout.nodes {
                    if high.get(layout.bes_build(node, cand)) >= 0.5 {
                        high.set(layout.bes_power(node, cand), max);
                    }
                }
            }
            let lo_cost = solve_subproblem(&op, &low, 1).unwrap().sp_objective;
            let hi_cost = solve_subproblem(&op, &high, 1).unwrap().sp_objective;
            assert!(
                hi_cost <= lo_cost + 1e-6 * (1.0 + lo_cost.abs()),
                "seed {seed}: {hi_cost} > {lo_cost}"
            );
        }
    }

    #[test]
    fn subproblem_without_parametric_rows_has_constant_cut() {
        let inst = single_bus_instance(150.0);
        let layout = VarLayout::new(&inst);
        let op = build_operation_lp(&inst, &layout, 0, 0);
        assert!(op.parametric.is_empty());
        let cut = solve_subproblem(&op, &InvestmentVector::zeros(&layout), 3).unwrap();
        assert!(cut.coefficients.is_empty());
        assert!((cut.constant - cut.sp_objective).abs() <= 1e-9 * (1.0 + cut.sp_objective.abs()));
    }
}
