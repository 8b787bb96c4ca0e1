//! Master-variable layout shared between the master problem and the
//! subproblem builder. Investment variables are blocked per tree node in a
//! fixed order, followed by one operating-cost variable per (node, block)
//! pair, so cut coefficients and solutions address the same index space.

use crate::instance::Instance;

/// Kind of investment variable within a node block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Build decision of a reinforceable line (binary).
    LineBuild { line: usize },
    /// Capacity added to a reinforceable line, MW.
    LineCapacity { line: usize },
    /// Build decision of a storage candidate (binary).
    BesBuild { candidate: usize },
    /// Installed storage power, MW.
    BesPower { candidate: usize },
}

/// Index map of the master variable space.
#[derive(Debug, Clone)]
pub struct VarLayout {
    /// Node ids in layout order.
    pub nodes: Vec<usize>,
    /// Reinforceable line ids in layout order.
    pub lines: Vec<usize>,
    /// Storage candidate ids in layout order.
    pub candidates: Vec<usize>,
    /// Variables per node block.
    pub per_node: usize,
    /// Total investment variables.
    pub n_investment: usize,
    /// (node, block) pairs in layout order; the alpha variable of pair `p`
    /// lives at `n_investment + p`.
    pub pairs: Vec<(usize, usize)>,
}

impl VarLayout {
    pub fn new(instance: &Instance) -> Self {
        let nodes: Vec<usize> = instance.tree.iter().map(|n| n.id).collect();
        let lines: Vec<usize> = instance
            .lines
            .iter()
            .filter(|l| l.reinforceable)
            .map(|l| l.id)
            .collect();
        let candidates: Vec<usize> = instance.storage_candidates.iter().map(|s| s.id).collect();
        let per_node = 2 * lines.len() + 2 * candidates.len();
        let n_investment = per_node * nodes.len();
        let pairs = instance.subproblem_index();
        VarLayout {
            nodes,
            lines,
            candidates,
            per_node,
            n_investment,
            pairs,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_investment + self.pairs.len()
    }

    fn node_offset(&self, node: usize) -> usize {
        let pos = self
            .nodes
            .iter()
            .position(|&m| m == node)
            .expect("node in layout");
        pos * self.per_node
    }

    fn line_pos(&self, line: usize) -> usize {
        self.lines.iter().position(|&l| l == line).expect("reinforceable line")
    }

    fn candidate_pos(&self, candidate: usize) -> usize {
        self.candidates
            .iter()
            .position(|&c| c == candidate)
            .expect("storage candidate")
    }

    pub fn line_build(&self, node: usize, line: usize) -> usize {
        self.node_offset(node) + 2 * self.line_pos(line)
    }

    pub fn line_capacity(&self, node: usize, line: usize) -> usize {
        self.node_offset(node) + 2 * self.line_pos(line) + 1
    }

    pub fn bes_build(&self, node: usize, candidate: usize) -> usize {
        self.node_offset(node) + 2 * self.lines.len() + 2 * self.candidate_pos(candidate)
    }

    pub fn bes_power(&self, node: usize, candidate: usize) -> usize {
        self.node_offset(node) + 2 * self.lines.len() + 2 * self.candidate_pos(candidate) + 1
    }

    pub fn alpha(&self, node: usize, block: usize) -> usize {
        let pos = self
            .pairs
            .iter()
            .position(|&p| p == (node, block))
            .expect("pair in layout");
        self.n_investment + pos
    }

    /// Binary variable indices (build flags across all nodes).
    pub fn binaries(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node_pos in 0..self.nodes.len() {
            let base = node_pos * self.per_node;
            for lp in 0..self.lines.len() {
                out.push(base + 2 * lp);
            }
            for cp in 0..self.candidates.len() {
                out.push(base + 2 * self.lines.len() + 2 * cp);
            }
        }
        out
    }

    /// Continuous investment variable indices (capacities and powers).
    pub fn continuous_investment(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node_pos in 0..self.nodes.len() {
            let base = node_pos * self.per_node;
            for lp in 0..self.lines.len() {
                out.push(base + 2 * lp + 1);
            }
            for cp in 0..self.candidates.len() {
                out.push(base + 2 * self.lines.len() + 2 * cp + 1);
            }
        }
        out
    }

    /// Describe an investment variable index.
    pub fn describe(&self, index: usize) -> Option<(usize, VarKind)> {
        if index >= self.n_investment {
            return None;
        }
        let node = self.nodes[index / self.per_node];
        let within = index % self.per_node;
        let kind = if within < 2 * self.lines.len() {
            let line = self.lines[within / 2];
            if within % 2 == 0 {
                VarKind::LineBuild { line }
            } else {
                VarKind::LineCapacity { line }
            }
        } else {
            let w = within - 2 * self.lines.len();
            let candidate = self.candidates[w / 2];
            if w % 2 == 0 {
                VarKind::BesBuild { candidate }
            } else {
                VarKind::BesPower { candidate }
            }
        };
        Some((node, kind))
    }
}
