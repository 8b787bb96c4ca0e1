//! Deterministic construction of test and benchmark instances, from a
//! 2-bus toy up to reduced 24-bus systems. Everything here is seeded, so
//! fixtures are reproducible byte for byte.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{
    Block, Bus, CostData, Generator, Instance, Line, StorageCandidate, TreeNode, SCHEMA_VERSION,
};

fn default_costs() -> CostData {
    CostData {
        line_fixed_annual: 121_600.0,
        line_variable_annual: 76.0,
        bes_annual: 102_000.0,
        voll: 6000.0,
        line_lead_stages: 1,
        bes_lead_stages: 0,
    }
}

fn flat_block(id: usize, n_buses: usize, hours: f64, steps: usize, level: f64) -> Block {
    Block {
        id,
        hours_per_year: hours,
        steps,
        step_hours: 24.0 / steps as f64,
        demand_profile: vec![vec![level; steps]; n_buses],
        renewable_profiles: BTreeMap::new(),
    }
}

/// Smallest valid instance: two buses, one line, a single-node tree.
pub fn two_bus_minimal() -> Instance {
    Instance {
        schema: SCHEMA_VERSION,
        name: "two-bus-minimal".into(),
        buses: vec![
            Bus { id: 0, base_demand_peak: 0.0 },
            Bus { id: 1, base_demand_peak: 100.0 },
        ],
        lines: vec![Line {
            id: 0,
            from_bus: 0,
            to_bus: 1,
            susceptance: 1000.0,
            capacity0: 200.0,
            length: 50.0,
            reinforceable: false,
            max_added_capacity: 0.0,
        }],
        generators: vec![Generator {
            id: 0,
            bus: 0,
            capacity: 150.0,
            marginal_cost: 20.0,
            is_renewable: false,
            profile_key: None,
        }],
        storage_candidates: vec![],
        costs: default_costs(),
        tree: vec![TreeNode {
            id: 0,
            stage: 0,
            parent: None,
            probability: 1.0,
            demand_scale: 1.0,
            stage_years: 10.0,
        }],
        blocks: vec![flat_block(0, 2, 4000.0, 2, 1.0)],
    }
}

/// Two buses, a chain scenario tree with `n_stages` nodes (one per stage).
pub fn chain_instance(n_stages: usize) -> Instance {
    let mut inst = two_bus_minimal();
    inst.name = format!("two-bus-chain-{n_stages}");
    inst.tree = (0..n_stages)
        .map(|s| TreeNode {
            id: s,
            stage: s,
            parent: if s == 0 { None } else { Some(s - 1) },
            probability: 1.0,
            demand_scale: 1.0 + 0.1 * s as f64,
            stage_years: 10.0,
        })
        .collect();
    inst
}

/// Shape of a small scenario tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeShape {
    /// Single node.
    Single,
    /// Root with two children.
    Fork,
    /// Chain of three stages.
    Chain3,
    /// Root, two children, four grandchildren (7 nodes).
    TwoLevel,
}

/// Build a tree of the given shape with exact dyadic probabilities and
/// demand scales growing with depth.
pub fn build_tree(shape: TreeShape, growth: f64) -> Vec<TreeNode> {
    let node = |id: usize, stage: usize, parent: Option<usize>, p: f64, scale: f64| TreeNode {
        id,
        stage,
        parent,
        probability: p,
        demand_scale: scale,
        stage_years: 10.0,
    };
    match shape {
        TreeShape::Single => vec![node(0, 0, None, 1.0, 1.0)],
        TreeShape::Fork => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 0.5, 1.0 + growth),
            node(2, 1, Some(0), 0.5, 1.0 + growth * 0.4),
        ],
        TreeShape::Chain3 => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 1.0, 1.0 + growth * 0.5),
            node(2, 2, Some(1), 1.0, 1.0 + growth),
        ],
        TreeShape::TwoLevel => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 0.5, 1.0 + growth * 0.5),
            node(2, 1, Some(0), 0.5, 1.0 + growth * 0.2),
            node(3, 2, Some(1), 0.25, 1.0 + growth),
            node(4, 2, Some(1), 0.25, 1.0 + growth * 0.7),
            node(5, 2, Some(2), 0.25, 1.0 + growth * 0.5),
            node(6, 2, Some(2), 0.25, 1.0 + growth * 0.1),
        ],
    }
}

/// Random small instance for property tests: a connected chain network of
/// 3..=6 buses with optional reinforcements, storage, and renewables.
pub fn random_tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_buses = rng.random_range(3..=6usize);
    let buses: Vec<Bus> = (0..n_buses)
        .map(|id| Bus {
            id,
            base_demand_peak: if id == 0 { 0.0 } else { rng.random_range(40.0..120.0f64).round() },
        })
        .collect();

    let mut lines = Vec::new();
    for b in 1..n_buses {
        lines.push(Line {
            id: lines.len(),
            from_bus: b - 1,
            to_bus: b,
            susceptance: rng.random_range(5.0..15.0f64).round() * 100.0,
            capacity0: rng.random_range(120.0..260.0f64).round(),
            length: rng.random_range(20.0..80.0f64).round(),
            reinforceable: false,
            max_added_capacity: 0.0,
        });
    }
    // One reinforceable corridor and sometimes a fresh candidate corridor.
    let reinforce = rng.random_range(0..lines.len());
    lines[reinforce].reinforceable = true;
    lines[reinforce].max_added_capacity = 150.0;
    if n_buses >= 4 && rng.random_bool(0.5) {
        lines.push(Line {
            id: lines.len(),
            from_bus: 0,
            to_bus: n_buses - 1,
            susceptance: 800.0,
            capacity0: 0.0,
            length: 60.0,
            reinforceable: true,
            max_added_capacity: 120.0,
        });
    }

    let total_demand: f64 = buses.iter().map(|b| b.base_demand_peak).sum();
    let mut generators = vec![Generator {
        id: 0,
        bus: 0,
        capacity: (total_demand * 1.6).round(),
        marginal_cost: 15.0,
        is_renewable: false,
        profile_key: None,
    }];
    generators.push(Generator {
        id: 1,
        bus: n_buses - 1,
        capacity: (total_demand * 0.5).round(),
        marginal_cost: 60.0,
        is_renewable: false,
        profile_key: None,
    });
    let with_wind = rng.random_bool(0.5);
    if with_wind {
        generators.push(Generator {
            id: 2,
            bus: n_buses / 2,
            capacity: (total_demand * 0.4).round(),
            marginal_cost: 0.0,
            is_renewable: true,
            profile_key: Some("wind".into()),
        });
    }

    let storage_candidates = if rng.random_bool(0.5) {
        vec![StorageCandidate {
            id: 0,
            bus: n_buses - 1,
            duration_hours: 2.0,
            efficiency: 0.9,
            max_power: 80.0,
        }]
    } else {
        vec![]
    };

    let shape = match rng.random_range(0..4u32) {
        0 => TreeShape::Single,
        1 => TreeShape::Fork,
        2 => TreeShape::Chain3,
        _ => TreeShape::TwoLevel,
    };
    let tree = build_tree(shape, rng.random_range(0.2..0.5));

    let n_blocks = rng.random_range(1..=2usize);
    let steps = rng.random_range(2..=4usize);
    let mut blocks = Vec::new();
    for b in 0..n_blocks {
        let hours = 8760.0 / n_blocks as f64;
        let mut block = flat_block(b, n_buses, hours, steps, 1.0);
        for series in &mut block.demand_profile {
            for (t, v) in series.iter_mut().enumerate() {
                *v = if b == 0 { 1.0 - 0.1 * (t % 2) as f64 } else { 0.7 - 0.05 * (t % 2) as f64 };
            }
        }
        if with_wind {
            let profile: Vec<f64> = (0..steps)
                .map(|t| 0.2 + 0.55 * (((t + b) % 3) as f64 / 2.0))
                .collect();
            block.renewable_profiles.insert("wind".into(), profile);
        }
        blocks.push(block);
    }

    let inst = Instance {
        schema: SCHEMA_VERSION,
        name: format!("tiny-{seed}"),
        buses,
        lines,
        generators,
        storage_candidates,
        costs: default_costs(),
        tree,
        blocks,
    };
    inst.validate().expect("synthetic instance validates");
    inst
}

/// Instances sized for extensive-form verification: small enough that the
/// deterministic equivalent solves directly, congested enough that the
/// optimal plan invests.
pub fn oracle_instances() -> Vec<Instance> {
    (0..6).map(oracle_instance).collect()
}

pub fn oracle_instance(index: usize) -> Instance {
    // Four buses in a ring; cheap generation far from the load pockets.
    let n_buses = 4 + (index % 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index as u64);
    let buses: Vec<Bus> = (0..n_buses)
        .map(|id| Bus {
            id,
            base_demand_peak: match id {
                0 => 0.0,
                1 => 90.0 + 10.0 * (index % 3) as f64,
                2 => 110.0,
                _ => 60.0,
            },
        })
        .collect();
    let total_demand: f64 = buses.iter().map(|b| b.base_demand_peak).sum();

    let mut lines = Vec::new();
    for b in 0..n_buses {
        let to = (b + 1) % n_buses;
        lines.push(Line {
            id: lines.len(),
            from_bus: b,
            to_bus: to,
            susceptance: 1000.0,
            capacity0: 110.0 + 15.0 * ((b + index) % 3) as f64,
            length: 45.0,
            reinforceable: false,
            max_added_capacity: 0.0,
        });
    }
    // The corridor out of the generation bus is the expansion candidate.
    lines[0].reinforceable = true;
    lines[0].max_added_capacity = 160.0;
    if index % 3 == 2 {
        lines[1].reinforceable = true;
        lines[1].max_added_capacity = 120.0;
    }

    let generators = vec![
        Generator {
            id: 0,
            bus: 0,
            capacity: (total_demand * 2.0).round(),
            marginal_cost: 12.0,
            is_renewable: false,
            profile_key: None,
        },
        Generator {
            id: 1,
            bus: 2,
            capacity: (total_demand * 0.6).round(),
            marginal_cost: 95.0,
            is_renewable: false,
            profile_key: None,
        },
    ];

    let storage_candidates = if index % 2 == 0 {
        vec![StorageCandidate {
            id: 0,
            bus: 2,
            duration_hours: 2.0,
            efficiency: 0.9,
            max_power: 70.0,
        }]
    } else {
        vec![]
    };

    let shape = match index % 4 {
        0 => TreeShape::Fork,
        1 => TreeShape::Chain3,
        2 => TreeShape::TwoLevel,
        _ => TreeShape::Fork,
    };
    let tree = build_tree(shape, 0.35 + 0.1 * (index % 2) as f64);

    let steps = 2 + index % 3;
    let mut blocks = vec![flat_block(0, n_buses, 1800.0, steps, 1.0)];
    if index % 2 == 1 {
        blocks.push(flat_block(1, n_buses, 5000.0, steps, 0.65));
    }
    for block in &mut blocks {
        for series in &mut block.demand_profile {
            for (t, v) in series.iter_mut().enumerate() {
                *v *= 1.0 - 0.08 * (t % 2) as f64;
            }
        }
    }
    let _ = rng.random_range(0..2u32); // reserve the stream for future knobs

    let inst = Instance {
        schema: SCHEMA_VERSION,
        name: format!("oracle-{index}"),
        buses,
        lines,
        generators,
        storage_candidates,
        costs: default_costs(),
        tree,
        blocks,
    };
    inst.validate().expect("oracle instance validates");
    inst
}

// ---------------------------------------------------------------------------
// Reduced 24-bus system
// ---------------------------------------------------------------------------

/// Branch list of the 24-bus reliability test system: (from, to, reactance,
/// length km, continuous rating MW), 1-indexed buses.
const IEEE24_BRANCHES: [(usize, usize, f64, f64, f64); 38] = [
    (1, 2, 0.014, 5.0, 175.0),
    (1, 3, 0.211, 88.0, 175.0),
    (1, 5, 0.085, 35.0, 175.0),
    (2, 4, 0.127, 53.0, 175.0),
    (2, 6, 0.192, 80.0, 175.0),
    (3, 9, 0.119, 50.0, 130.0),
    (3, 24, 0.084, 26.0, 220.0),
    (4, 9, 0.104, 43.0, 130.0),
    (5, 10, 0.088, 37.0, 130.0),
    (6, 10, 0.061, 26.0, 130.0),
    (7, 8, 0.061, 26.0, 175.0),
    (8, 9, 0.165, 69.0, 140.0),
    (8, 10, 0.165, 69.0, 140.0),
    (9, 11, 0.084, 26.0, 200.0),
    (9, 12, 0.084, 26.0, 200.0),
    (10, 11, 0.084, 26.0, 200.0),
    (10, 12, 0.084, 26.0, 200.0),
    (11, 13, 0.048, 53.0, 500.0),
    (11, 14, 0.042, 47.0, 500.0),
    (12, 13, 0.048, 53.0, 500.0),
    (12, 23, 0.097, 107.0, 500.0),
    (13, 23, 0.087, 96.0, 500.0),
    (14, 16, 0.059, 43.0, 500.0),
    (15, 16, 0.017, 19.0, 500.0),
    (15, 21, 0.049, 55.0, 500.0),
    (15, 21, 0.049, 55.0, 500.0),
    (15, 24, 0.052, 58.0, 500.0),
    (16, 17, 0.026, 29.0, 500.0),
    (16, 19, 0.023, 26.0, 500.0),
    (17, 18, 0.014, 16.0, 500.0),
    (17, 22, 0.105, 117.0, 500.0),
    (18, 21, 0.026, 29.0, 500.0),
    (18, 21, 0.026, 29.0, 500.0),
    (19, 20, 0.040, 44.0, 500.0),
    (19, 20, 0.040, 44.0, 500.0),
    (20, 23, 0.022, 24.0, 500.0),
    (20, 23, 0.022, 24.0, 500.0),
    (21, 22, 0.068, 75.0, 500.0),
];

/// Peak bus loads of the 24-bus system, MW.
const IEEE24_LOADS: [f64; 24] = [
    108.0, 97.0, 180.0, 74.0, 71.0, 136.0, 125.0, 171.0, 175.0, 195.0, 0.0, 0.0, 265.0, 194.0,
    317.0, 100.0, 0.0, 333.0, 181.0, 128.0, 0.0, 0.0, 0.0, 0.0,
];

/// Aggregated thermal fleet per bus: (bus 1-indexed, capacity MW, marginal cost).
const IEEE24_THERMAL: [(usize, f64, f64); 10] = [
    (1, 192.0, 13.0),
    (2, 192.0, 13.0),
    (7, 300.0, 44.0),
    (13, 591.0, 36.0),
    (15, 215.0, 12.0),
    (16, 155.0, 12.0),
    (18, 400.0, 6.0),
    (21, 400.0, 6.0),
    (22, 300.0, 2.0),
    (23, 660.0, 11.0),
];

/// Scenario tree selection for the reduced 24-bus cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ieee24Tree {
    /// Three-stage sampling tree with single-child branches: 5 nodes.
    Nodes5,
    /// Three-stage execution tree: 7 nodes.
    Nodes7,
    /// Four-stage tree with 13 nodes and 6 scenarios.
    Nodes13,
}

/// Reduced 24-bus expansion-planning case. The 13-node variant carries four
/// representative blocks; the smaller trees use two.
pub fn ieee24_reduced(tree: Ieee24Tree) -> Instance {
    let buses: Vec<Bus> = (0..24)
        .map(|id| Bus { id, base_demand_peak: IEEE24_LOADS[id] })
        .collect();

    // The north-south interface saturates as demand grows; its corridors
    // plus the 8-9 feeder are the reinforcement candidates.
    let reinforceable: [usize; 8] = [5, 6, 7, 11, 12, 13, 16, 8]; // 3-9, 3-24, 4-9, 8-9, 8-10, 9-11, 10-12, 5-10
    let lines: Vec<Line> = IEEE24_BRANCHES
        .iter()
        .enumerate()
        .map(|(id, &(from, to, x, length, rating))| Line {
            id,
            from_bus: from - 1,
            to_bus: to - 1,
            susceptance: 100.0 / x,
            capacity0: rating,
            length,
            reinforceable: reinforceable.contains(&id),
            max_added_capacity: if reinforceable.contains(&id) { 150.0 } else { 0.0 },
        })
        .collect();

    let mut generators: Vec<Generator> = IEEE24_THERMAL
        .iter()
        .enumerate()
        .map(|(id, &(bus, cap, mc))| Generator {
            id,
            bus: bus - 1,
            capacity: (cap * 1.2).round(),
            marginal_cost: mc,
            is_renewable: false,
            profile_key: None,
        })
        .collect();
    generators.push(Generator {
        id: generators.len(),
        bus: 4,
        capacity: 300.0,
        marginal_cost: 0.0,
        is_renewable: true,
        profile_key: Some("wind".into()),
    });
    generators.push(Generator {
        id: generators.len(),
        bus: 2,
        capacity: 200.0,
        marginal_cost: 0.0,
        is_renewable: true,
        profile_key: Some("solar".into()),
    });

    let storage_candidates: Vec<StorageCandidate> = [7usize, 9, 5]
        .iter()
        .enumerate()
        .map(|(id, &bus)| StorageCandidate {
            id,
            bus,
            duration_hours: 2.0,
            efficiency: 0.9,
            max_power: 90.0,
        })
        .collect();

    let node = |id: usize, stage: usize, parent: Option<usize>, p: f64, scale: f64| TreeNode {
        id,
        stage,
        parent,
        probability: p,
        demand_scale: scale,
        stage_years: 10.0,
    };
    let tree_nodes = match tree {
        Ieee24Tree::Nodes5 => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 0.5, 1.22),
            node(2, 1, Some(0), 0.5, 1.06),
            node(3, 2, Some(1), 0.5, 1.38),
            node(4, 2, Some(2), 0.5, 1.12),
        ],
        Ieee24Tree::Nodes7 => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 0.5, 1.2),
            node(2, 1, Some(0), 0.5, 1.05),
            node(3, 2, Some(1), 0.25, 1.5),
            node(4, 2, Some(1), 0.25, 1.26),
            node(5, 2, Some(2), 0.25, 1.18),
            node(6, 2, Some(2), 0.25, 1.03),
        ],
        Ieee24Tree::Nodes13 => vec![
            node(0, 0, None, 1.0, 1.0),
            node(1, 1, Some(0), 0.6, 1.1),
            node(2, 1, Some(0), 0.4, 1.04),
            node(3, 2, Some(1), 0.36, 1.22),
            node(4, 2, Some(1), 0.24, 1.14),
            node(5, 2, Some(2), 0.24, 1.1),
            node(6, 2, Some(2), 0.16, 1.06),
            node(7, 3, Some(3), 0.216, 1.35),
            node(8, 3, Some(3), 0.144, 1.26),
            node(9, 3, Some(4), 0.144, 1.24),
            node(10, 3, Some(4), 0.096, 1.16),
            node(11, 3, Some(5), 0.24, 1.2),
            node(12, 3, Some(6), 0.16, 1.08),
        ],
    };

    let wind_day = [0.5, 0.3, 0.45, 0.6];
    let wind_calm = [0.18, 0.1, 0.28, 0.22];
    let solar_day = [0.0, 0.62, 0.15, 0.0];
    let solar_weak = [0.0, 0.3, 0.08, 0.0];
    let peak_shape = [0.85, 1.0, 0.78, 0.96];
    let base_shape = [0.62, 0.74, 0.6, 0.7];
    let mk_block = |id: usize, hours: f64, shape: [f64; 4], wind: [f64; 4], solar: [f64; 4]| {
        let mut profiles = BTreeMap::new();
        profiles.insert("wind".to_string(), wind.to_vec());
        profiles.insert("solar".to_string(), solar.to_vec());
        Block {
            id,
            hours_per_year: hours,
            steps: 4,
            step_hours: 6.0,
            demand_profile: vec![shape.to_vec(); 24],
            renewable_profiles: profiles,
        }
    };
    let blocks = match tree {
        Ieee24Tree::Nodes13 => vec![
            mk_block(0, 900.0, peak_shape, wind_calm, solar_weak),
            mk_block(1, 3000.0, base_shape, wind_day, solar_day),
            mk_block(2, 860.0, [0.88, 1.0, 0.8, 0.97], wind_calm, solar_day),
            mk_block(3, 4000.0, [0.56, 0.7, 0.55, 0.66], wind_day, solar_day),
        ],
        // The sampling tree keeps the execution blocks so feature scales
        // carry over between the two.
        Ieee24Tree::Nodes5 | Ieee24Tree::Nodes7 => vec![
            mk_block(0, 2000.0, peak_shape, wind_calm, solar_weak),
            mk_block(1, 6760.0, base_shape, wind_day, solar_day),
        ],
    };

    let name = match tree {
        Ieee24Tree::Nodes5 => "ieee24-r5",
        Ieee24Tree::Nodes7 => "ieee24-r7",
        Ieee24Tree::Nodes13 => "ieee24-13",
    };
    let inst = Instance {
        schema: SCHEMA_VERSION,
        name: name.into(),
        buses,
        lines,
        generators,
        storage_candidates,
        costs: default_costs(),
        tree: tree_nodes,
        blocks,
    };
    inst.validate().expect("ieee24 instance validates");
    inst
}
