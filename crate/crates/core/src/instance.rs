//! Problem data for the expansion-planning model: network, investment
//! candidates, scenario tree, and representative operating blocks.
//!
//! An [`Instance`] is immutable after [`load_instance`] / [`Instance::validate`]
//! and safe to share read-only across worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tol;

/// Current instance file schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Objectives are carried in millions of currency units; instance files
/// keep plain per-unit costs. Folding the conversion into every objective
/// keeps master rows, cut coefficients, and bounds in a well-conditioned
/// numeric range.
pub const COST_MILLIONS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error [{what}]: {detail}")]
    Validation { what: String, detail: String },
    #[error("unknown node id {0}")]
    UnknownNode(usize),
}

fn invalid(what: &str, detail: String) -> InstanceError {
    InstanceError::Validation {
        what: what.to_string(),
        detail,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Bus {
    pub id: usize,
    /// Peak demand at the root node, MW.
    pub base_demand_peak: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Line {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per-unit susceptance of the corridor.
    pub susceptance: f64,
    /// Capacity already in service, MW. Zero for a candidate corridor.
    pub capacity0: f64,
    pub length: f64,
    pub reinforceable: bool,
    pub max_added_capacity: f64,
}

impl Line {
    /// A corridor with no in-service capacity needs its flow/angle coupling
    /// switched by the build decision; an in-service line is always coupled.
    pub fn is_candidate(&self) -> bool {
        self.reinforceable && self.capacity0 == 0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    /// Installed capacity, MW.
    pub capacity: f64,
    /// Marginal cost, currency/MWh.
    pub marginal_cost: f64,
    pub is_renewable: bool,
    /// Key into each block's renewable capacity-factor series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_key: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StorageCandidate {
    pub id: usize,
    pub bus: usize,
    /// Discharging duration at rated power, hours.
    pub duration_hours: f64,
    /// Charging efficiency, in (0, 1].
    pub efficiency: f64,
    /// Largest installable power rating, MW.
    pub max_power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CostData {
    /// Annualized fixed reinforcement cost, currency/(km yr).
    pub line_fixed_annual: f64,
    /// Annualized variable reinforcement cost, currency/(MW km yr).
    pub line_variable_annual: f64,
    /// Annualized storage investment cost, currency/(MW yr).
    pub bes_annual: f64,
    /// Value of lost load, currency/MWh.
    pub voll: f64,
    /// Stages between a line investment decision and commissioning.
    pub line_lead_stages: usize,
    /// Stages between a storage investment decision and commissioning.
    pub bes_lead_stages: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub stage: usize,
    /// None for the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    /// Absolute state probability of the node.
    pub probability: f64,
    /// Global demand multiplier relative to the root system state.
    pub demand_scale: f64,
    /// Duration of the stage this node belongs to, years.
    pub stage_years: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Block {
    pub id: usize,
    /// Hours of the year this block represents.
    pub hours_per_year: f64,
    /// Number of time steps in the block.
    pub steps: usize,
    /// Duration of one step, hours.
    pub step_hours: f64,
    /// Demand multiplier per bus per step, indexed `[bus][t]`.
    pub demand_profile: Vec<Vec<f64>>,
    /// Renewable capacity factors per profile key, each series of length `steps`.
    pub renewable_profiles: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Instance {
    pub schema: u32,
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub storage_candidates: Vec<StorageCandidate>,
    pub costs: CostData,
    pub tree: Vec<TreeNode>,
    pub blocks: Vec<Block>,
}

impl Instance {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.tree.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode, InstanceError> {
        self.tree
            .iter()
            .find(|n| n.id == id)
            .ok_or(InstanceError::UnknownNode(id))
    }

    pub fn root(&self) -> &TreeNode {
        self.tree
            .iter()
            .find(|n| n.parent.is_none())
            .expect("validated instance has a root")
    }

    /// Children of node `m` in tree order.
    pub fn children(&self, m: usize) -> Vec<&TreeNode> {
        self.tree.iter().filter(|n| n.parent == Some(m)).collect()
    }

    pub fn is_leaf(&self, m: usize) -> bool {
        self.tree.iter().all(|n| n.parent != Some(m))
    }

    /// Path from the root to `m`, both inclusive.
    pub fn ancestors(&self, m: usize) -> Result<Vec<usize>, InstanceError> {
        let mut path = Vec::new();
        let mut cur = self.node(m)?;
        path.push(cur.id);
        while let Some(p) = cur.parent {
            cur = self.node(p)?;
            path.push(cur.id);
        }
        path.reverse();
        Ok(path)
    }

    /// All (node, block) pairs in deterministic node-major order.
    pub fn subproblem_index(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::with_capacity(self.tree.len() * self.blocks.len());
        for node in &self.tree {
            for block in &self.blocks {
                pairs.push((node.id, block.id));
            }
        }
        pairs
    }

    /// Duration of stage `s` in years. Validation guarantees all nodes of a
    /// stage agree on this value.
    pub fn stage_duration(&self, stage: usize) -> f64 {
        self.tree
            .iter()
            .find(|n| n.stage == stage)
            .map(|n| n.stage_years)
            .unwrap_or(0.0)
    }

    pub fn max_stage(&self) -> usize {
        self.tree.iter().map(|n| n.stage).max().unwrap_or(0)
    }

    /// Years an asset is in service when its commissioning falls in
    /// `commission_stage`: the sum of stage durations from there to the end
    /// of the horizon. Zero when commissioning falls beyond the horizon.
    pub fn years_active(&self, commission_stage: usize) -> f64 {
        (commission_stage..=self.max_stage())
            .map(|s| self.stage_duration(s))
            .sum()
    }

    /// Demand at bus `n`, node `m`, block `b`, step `t`, MW.
    pub fn demand(&self, bus: usize, node: usize, block: usize, t: usize) -> f64 {
        let scale = self.tree.iter().find(|n| n.id == node).map(|n| n.demand_scale);
        let blk = self.blocks.iter().find(|x| x.id == block);
        match (scale, blk) {
            (Some(s), Some(b)) => self.buses[bus].base_demand_peak * s * b.demand_profile[bus][t],
            _ => 0.0,
        }
    }

    /// Step weight for node `m` and block `b`: equivalent hours represented
    /// by one step over the node's stage. Folding this into the operation
    /// objective makes the expectation in the master need only the node
    /// probabilities.
    pub fn step_weight(&self, node: usize, block: usize) -> f64 {
        let n = self.tree.iter().find(|n| n.id == node).expect("node");
        let b = self.blocks.iter().find(|x| x.id == block).expect("block");
        b.hours_per_year * n.stage_years / b.steps as f64
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid(
                "schema",
                format!("expected schema {SCHEMA_VERSION}, got {}", self.schema),
            ));
        }
        self.validate_buses()?;
        self.validate_lines()?;
        self.validate_generators()?;
        self.validate_storage()?;
        self.validate_costs()?;
        self.validate_tree()?;
        self.validate_blocks()?;
        self.validate_connectivity()?;
        Ok(())
    }

    fn validate_buses(&self) -> Result<(), InstanceError> {
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i {
                return Err(invalid(
                    "bus ids",
                    format!("bus at position {i} has id {}; ids must be contiguous from 0", bus.id),
                ));
            }
            if bus.base_demand_peak < 0.0 {
                return Err(invalid(
                    "bus demand",
                    format!("bus {}: base_demand_peak {} < 0", bus.id, bus.base_demand_peak),
                ));
            }
        }
        if self.buses.is_empty() {
            return Err(invalid("bus ids", "instance has no buses".into()));
        }
        Ok(())
    }

    fn validate_lines(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::BTreeSet::new();
        for line in &self.lines {
            if !seen.insert(line.id) {
                return Err(invalid("line ids", format!("duplicate line id {}", line.id)));
            }
            if line.from_bus == line.to_bus {
                return Err(invalid(
                    "line endpoints",
                    format!("line {}: from_bus == to_bus == {}", line.id, line.from_bus),
                ));
            }
            for bus in [line.from_bus, line.to_bus] {
                if bus >= self.buses.len() {
                    return Err(invalid(
                        "line endpoints",
                        format!("line {}: unknown bus {bus}", line.id),
                    ));
                }
            }
            if line.susceptance <= 0.0 {
                return Err(invalid(
                    "line susceptance",
                    format!("line {}: susceptance {} must be > 0", line.id, line.susceptance),
                ));
            }
            if line.capacity0 < 0.0 || line.max_added_capacity < 0.0 {
                return Err(invalid(
                    "line capacity",
                    format!("line {}: negative capacity field", line.id),
                ));
            }
            if !line.reinforceable && line.max_added_capacity != 0.0 {
                return Err(invalid(
                    "line capacity",
                    format!(
                        "line {}: max_added_capacity {} on a non-reinforceable line",
                        line.id, line.max_added_capacity
                    ),
                ));
            }
        }
        Ok(())
    }

    fn validate_generators(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::BTreeSet::new();
        for gen in &self.generators {
            if !seen.insert(gen.id) {
                return Err(invalid("generator ids", format!("duplicate generator id {}", gen.id)));
            }
            if gen.bus >= self.buses.len() {
                return Err(invalid(
                    "generator bus",
                    format!("generator {}: unknown bus {}", gen.id, gen.bus),
                ));
            }
            if gen.capacity < 0.0 || gen.marginal_cost < 0.0 {
                return Err(invalid(
                    "generator data",
                    format!("generator {}: negative capacity or marginal cost", gen.id),
                ));
            }
            if gen.is_renewable != gen.profile_key.is_some() {
                return Err(invalid(
                    "generator profile",
                    format!(
                        "generator {}: profile_key must be present iff is_renewable",
                        gen.id
                    ),
                ));
            }
            if let Some(key) = &gen.profile_key {
                for block in &self.blocks {
                    if !block.renewable_profiles.contains_key(key) {
                        return Err(invalid(
                            "generator profile",
                            format!(
                                "generator {}: profile_key '{key}' missing in block {}",
                                gen.id, block.id
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_storage(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::BTreeSet::new();
        for sc in &self.storage_candidates {
            if !seen.insert(sc.id) {
                return Err(invalid("storage ids", format!("duplicate storage id {}", sc.id)));
            }
            if sc.bus >= self.buses.len() {
                return Err(invalid(
                    "storage bus",
                    format!("storage candidate {}: unknown bus {}", sc.id, sc.bus),
                ));
            }
            if sc.duration_hours <= 0.0 {
                return Err(invalid(
                    "storage duration",
                    format!("storage candidate {}: duration_hours must be > 0", sc.id),
                ));
            }
            if !(sc.efficiency > 0.0 && sc.efficiency <= 1.0) {
                return Err(invalid(
                    "storage efficiency",
                    format!(
                        "storage candidate {}: efficiency {} outside (0, 1]",
                        sc.id, sc.efficiency
                    ),
                ));
            }
            if sc.max_power < 0.0 {
                return Err(invalid(
                    "storage power",
                    format!("storage candidate {}: negative max_power", sc.id),
                ));
            }
        }
        Ok(())
    }

    fn validate_costs(&self) -> Result<(), InstanceError> {
        let c = &self.costs;
        if c.line_fixed_annual < 0.0
            || c.line_variable_annual < 0.0
            || c.bes_annual < 0.0
            || c.voll < 0.0
        {
            return Err(invalid("costs", "all cost coefficients must be >= 0".into()));
        }
        for gen in &self.generators {
            if c.voll <= gen.marginal_cost {
                return Err(invalid(
                    "voll",
                    format!(
                        "voll {} must exceed marginal cost {} of generator {}",
                        c.voll, gen.marginal_cost, gen.id
                    ),
                ));
            }
        }
        Ok(())
    }

    fn validate_tree(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut roots = 0usize;
        for node in &self.tree {
            if !seen.insert(node.id) {
                return Err(invalid("tree ids", format!("duplicate node id {}", node.id)));
            }
            if node.probability <= 0.0 || node.probability > 1.0 + tol::PROBABILITY {
                return Err(invalid(
                    "probability",
                    format!("node {}: probability {} outside (0, 1]", node.id, node.probability),
                ));
            }
            if node.demand_scale <= 0.0 {
                return Err(invalid(
                    "demand scale",
                    format!("node {}: demand_scale must be > 0", node.id),
                ));
            }
            if node.stage_years <= 0.0 {
                return Err(invalid(
                    "stage years",
                    format!("node {}: stage_years must be > 0", node.id),
                ));
            }
            match node.parent {
                None => {
                    roots += 1;
                    if node.stage != 0 {
                        return Err(invalid(
                            "tree stages",
                            format!("root node {} has stage {} != 0", node.id, node.stage),
                        ));
                    }
                    if (node.probability - 1.0).abs() > tol::PROBABILITY {
                        return Err(invalid(
                            "probability",
                            format!("root node {}: probability {} != 1", node.id, node.probability),
                        ));
                    }
                }
                Some(p) => {
                    let parent = self.node(p).map_err(|_| {
                        invalid("tree parents", format!("node {}: unknown parent {p}", node.id))
                    })?;
                    if node.stage != parent.stage + 1 {
                        return Err(invalid(
                            "tree stages",
                            format!(
                                "node {}: stage {} but parent {} has stage {}",
                                node.id, node.stage, p, parent.stage
                            ),
                        ));
                    }
                }
            }
        }
        if roots != 1 {
            return Err(invalid("tree root", format!("expected exactly one root, found {roots}")));
        }
        // Path probabilities: children of every non-leaf partition its mass.
        for node in &self.tree {
            let children = self.children(node.id);
            if !children.is_empty() {
                let sum: f64 = children.iter().map(|c| c.probability).sum();
                if (sum - node.probability).abs() > tol::PROBABILITY {
                    return Err(invalid(
                        "probability",
                        format!(
                            "node {}: children probabilities sum to {sum}, expected {}",
                            node.id, node.probability
                        ),
                    ));
                }
            }
        }
        let leaf_sum: f64 = self
            .tree
            .iter()
            .filter(|n| self.is_leaf(n.id))
            .map(|n| n.probability)
            .sum();
        if (leaf_sum - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "probability",
                format!("leaf probabilities sum to {leaf_sum}, expected 1"),
            ));
        }
        // Stage durations must agree across nodes of the same stage, so that
        // years-active sums are well defined.
        for node in &self.tree {
            let d = self.stage_duration(node.stage);
            if (node.stage_years - d).abs() > 1e-12 {
                return Err(invalid(
                    "stage years",
                    format!(
                        "node {}: stage_years {} disagrees with {} at stage {}",
                        node.id, node.stage_years, d, node.stage
                    ),
                ));
            }
        }
        Ok(())
    }

    fn validate_blocks(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut total_hours = 0.0;
        for block in &self.blocks {
            if !seen.insert(block.id) {
                return Err(invalid("block ids", format!("duplicate block id {}", block.id)));
            }
            if block.steps == 0 {
                return Err(invalid("block steps", format!("block {}: steps must be >= 1", block.id)));
            }
            if block.step_hours <= 0.0 || block.hours_per_year <= 0.0 {
                return Err(invalid(
                    "block hours",
                    format!("block {}: nonpositive step_hours or hours_per_year", block.id),
                ));
            }
            total_hours += block.hours_per_year;
            if block.demand_profile.len() != self.buses.len() {
                return Err(invalid(
                    "block demand profile",
                    format!(
                        "block {}: demand_profile has {} bus series, expected {}",
                        block.id,
                        block.demand_profile.len(),
                        self.buses.len()
                    ),
                ));
            }
            for (bus, series) in block.demand_profile.iter().enumerate() {
                if series.len() != block.steps {
                    return Err(invalid(
                        "block demand profile",
                        format!(
                            "block {}: bus {bus} series length {} != steps {}",
                            block.id,
                            series.len(),
                            block.steps
                        ),
                    ));
                }
                if series.iter().any(|v| *v < 0.0) {
                    return Err(invalid(
                        "block demand profile",
                        format!("block {}: bus {bus} has a negative multiplier", block.id),
                    ));
                }
            }
            for (key, series) in &block.renewable_profiles {
                if series.len() != block.steps {
                    return Err(invalid(
                        "renewable profile",
                        format!(
                            "block {}: profile '{key}' length {} != steps {}",
                            block.id,
                            series.len(),
                            block.steps
                        ),
                    ));
                }
                if series.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(invalid(
                        "renewable profile",
                        format!("block {}: profile '{key}' has a factor outside [0, 1]", block.id),
                    ));
                }
            }
        }
        if self.blocks.is_empty() {
            return Err(invalid("block ids", "instance has no blocks".into()));
        }
        if total_hours > 8760.0 + 1e-9 {
            return Err(invalid(
                "block hours",
                format!("blocks cover {total_hours} hours per year, more than 8760"),
            ));
        }
        Ok(())
    }

    fn validate_connectivity(&self) -> Result<(), InstanceError> {
        // Union-find over buses joined by in-service lines.
        let n = self.buses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for line in self.lines.iter().filter(|l| l.capacity0 > 0.0) {
            let a = find(&mut parent, line.from_bus);
            let b = find(&mut parent, line.to_bus);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        for bus in 1..n {
            if find(&mut parent, bus) != root {
                return Err(invalid(
                    "connectivity",
                    format!("bus {bus} is not connected to bus 0 by in-service lines"),
                ));
            }
        }
        Ok(())
    }
}

/// Load and validate an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let instance: Instance = serde_json::from_str(&text)?;
    instance.validate()?;
    Ok(instance)
}

/// Serialize an instance with canonical (struct-order) fields.
pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(instance).expect("instance serializes");
    fs::write(path, text).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })
}
